//! tubekit: construct δ-tube families, estimate union volumes, measure
//! convexity, pack prisms, run the combinatorial checkers, detect structure,
//! and sweep parameter grids.
//!
//! All randomness derives from --seed; identical invocations produce
//! identical structured output regardless of --threads. Domain errors print
//! machine-readable JSON on stderr and exit 1; usage errors exit 2.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tubekit_core::combinatorics::{
    random_sumset_instance, select_simplex, sumset_bound_check, AssignmentInstance,
    SumsetInstance,
};
use tubekit_core::constructions::{self, ConstructionKind, ConstructionSpec};
use tubekit_core::error::Error;
use tubekit_core::measure::{union_volume, VolumeMethod};
use tubekit_core::packing::{pack_tubes, DiscretizedSet};
use tubekit_core::rigidity::{
    check_good_config, detect_structure, extract_good_config, GoodConfigCertificate,
};
use tubekit_core::sweep::{regime_regression, run_sweep, SweepConfig};
use tubekit_core::tube::TubeFamily;
use tubekit_core::voxel::VoxelSet;
use tubekit_core::xray::{convexity_index, ren_identity_check};

#[derive(Parser)]
#[command(name = "tubekit", version, about = "delta-tube family toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalOptions,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOptions {
    /// Seed for all derived random streams.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (TUBEKIT_THREADS overrides).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Structured output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Verbosity: human-readable notes go to stderr at -v and above.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Standard,
    SmallCap,
    Embedded,
    Slab,
    Cascade,
}

impl From<KindArg> for ConstructionKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Standard => ConstructionKind::Standard,
            KindArg::SmallCap => ConstructionKind::SmallCap,
            KindArg::Embedded => ConstructionKind::Embedded,
            KindArg::Slab => ConstructionKind::Slab,
            KindArg::Cascade => ConstructionKind::Cascade,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mc,
    Grid,
}

#[derive(Subcommand)]
enum Command {
    /// Build a sharp example family and write it as JSON.
    Construct {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
        /// Target tube count (small-cap, embedded, slab).
        #[arg(long, alias = "count")]
        n_target: Option<u64>,
        /// Inner dimension (embedded, slab).
        #[arg(long)]
        d: Option<usize>,
        /// Center coordinates for the standard configuration.
        #[arg(long, value_delimiter = ',')]
        center: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the union volume of a family.
    Volume {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Mc)]
        method: MethodArg,
        #[arg(long, default_value_t = 1_000_000.0)]
        budget: f64,
        /// Optional relative error target; missing it flags non-convergence.
        #[arg(long)]
        target_rel_error: Option<f64>,
    },
    /// Convexity index of a VOX1 set.
    Cindex {
        #[arg(long)]
        set: PathBuf,
        #[arg(long, default_value_t = 1_000_000.0)]
        budget: f64,
    },
    /// Ren identity check on a convex VOX1 set.
    Ren {
        #[arg(long)]
        set: PathBuf,
        #[arg(long, default_value_t = 1_000_000.0)]
        budget: f64,
    },
    /// Pack tubes into E × [0,2] for a 9δ-discretized convex E.
    Pack {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the simplex-selection procedure on an instance file.
    Lemma51 {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Check the sumset bound on an instance file or random instances.
    Lemma53 {
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Number of random instances to generate and check.
        #[arg(long)]
        random: Option<u64>,
        #[arg(long, default_value_t = 2)]
        rank: usize,
    },
    /// Extract (no --cert) or check (--cert) a good configuration.
    Goodcfg {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        epsilon0: f64,
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Detect near-extremal structure in a family.
    Detect {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep from a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate family JSON / VOX1 / instance files.
    Validate { files: Vec<PathBuf> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("TUBEKIT_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .or(cli.global.threads);
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = json!({ "code": e.code(), "message": e.to_string() });
            eprintln!("{payload}");
            ExitCode::from(1)
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(Error::from)
}

fn load_family(path: &Path) -> Result<TubeFamily, Error> {
    TubeFamily::from_json_str(&read_to_string(path)?)
}

fn emit(global: &GlobalOptions, value: &serde_json::Value) {
    match global.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("json")),
        Format::Csv => {
            // flat objects become a two-line CSV; anything else stays JSON
            if let Some(map) = value.as_object() {
                if map.values().all(|v| !v.is_object() && !v.is_array()) {
                    let header: Vec<&str> = map.keys().map(String::as_str).collect();
                    let row: Vec<String> = map.values().map(|v| v.to_string()).collect();
                    println!("{}", header.join(","));
                    println!("{}", row.join(","));
                    return;
                }
            }
            println!("{}", serde_json::to_string(value).expect("json"));
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let seed = cli.global.seed;
    match &cli.command {
        Command::Construct {
            kind,
            n,
            delta,
            n_target,
            d,
            center,
            out,
        } => {
            if matches!(kind, KindArg::Slab) {
                let (fam, slab) = constructions::slab_configuration(
                    *n,
                    d.ok_or_else(|| Error::PreconditionFailed("slab requires --d".into()))?,
                    *delta,
                    n_target.ok_or_else(|| {
                        Error::PreconditionFailed("slab requires --n-target".into())
                    })?,
                )?;
                std::fs::write(out, fam.to_json_string())?;
                emit(
                    &cli.global,
                    &json!({
                        "written": out.display().to_string(),
                        "tubes": fam.len(),
                        "slab_side": slab.side,
                        "slab_volume": slab.volume(),
                    }),
                );
            } else {
                let spec = ConstructionSpec {
                    kind: (*kind).into(),
                    n: *n,
                    delta: *delta,
                    n_target: *n_target,
                    d: *d,
                    center: center.clone(),
                };
                let fam = constructions::build(&spec)?;
                std::fs::write(out, fam.to_json_string())?;
                emit(
                    &cli.global,
                    &json!({ "written": out.display().to_string(), "tubes": fam.len() }),
                );
            }
            Ok(())
        }
        Command::Volume {
            family,
            method,
            budget,
            target_rel_error,
        } => {
            let fam = load_family(family)?;
            let method = match method {
                MethodArg::Mc => VolumeMethod::MonteCarlo,
                MethodArg::Grid => VolumeMethod::Grid,
            };
            let est = union_volume(&fam, method, *budget as u64, seed, *target_rel_error)?;
            emit(
                &cli.global,
                &json!({
                    "value": est.value,
                    "abs_error_95": est.abs_error_95,
                    "samples": est.samples,
                    "converged": est.converged,
                }),
            );
            Ok(())
        }
        Command::Cindex { set, budget } => {
            let e = VoxelSet::from_vox1(&read_to_string(set)?)?;
            let rep = convexity_index(&e, *budget as u64, seed)?;
            emit(&cli.global, &serde_json::to_value(&rep)?);
            Ok(())
        }
        Command::Ren { set, budget } => {
            let e = VoxelSet::from_vox1(&read_to_string(set)?)?;
            let (lhs, rhs, ratio) = ren_identity_check(&e, *budget as u64, seed)?;
            emit(&cli.global, &json!({ "lhs": lhs, "rhs": rhs, "ratio": ratio }));
            Ok(())
        }
        Command::Pack { set, delta, n, out } => {
            let vox = VoxelSet::from_vox1(&read_to_string(set)?)?;
            let e = DiscretizedSet::from_voxels(vox, 9.0 * delta)?;
            let fam = pack_tubes(&e, *delta, *n)?;
            std::fs::write(out, fam.to_json_string())?;
            emit(
                &cli.global,
                &json!({
                    "written": out.display().to_string(),
                    "tubes": fam.len(),
                    "target_n": (e.volume() / delta.powi(*n as i32 - 1)).powi(2),
                }),
            );
            Ok(())
        }
        Command::Lemma51 { instance } => {
            let inst: AssignmentInstance = serde_json::from_str(&read_to_string(instance)?)?;
            let sel = select_simplex(&inst)?;
            emit(&cli.global, &serde_json::to_value(&sel)?);
            Ok(())
        }
        Command::Lemma53 {
            instance,
            random,
            rank,
        } => {
            if let Some(path) = instance {
                let inst: SumsetInstance = serde_json::from_str(&read_to_string(path)?)?;
                let chk = sumset_bound_check(&inst)?;
                emit(&cli.global, &serde_json::to_value(&chk)?);
                return Ok(());
            }
            let count = random.ok_or_else(|| {
                Error::PreconditionFailed("lemma53 needs --instance or --random".into())
            })?;
            let mut violations = 0u64;
            let mut max_fill = 0.0f64;
            for i in 0..count {
                let inst = random_sumset_instance(*rank, seed.wrapping_add(i));
                let chk = sumset_bound_check(&inst)?;
                if !chk.holds {
                    violations += 1;
                }
                max_fill = max_fill.max(chk.g_size as f64 / chk.rhs);
            }
            emit(
                &cli.global,
                &json!({
                    "instances": count,
                    "violations": violations,
                    "max_lhs_over_rhs": max_fill,
                }),
            );
            Ok(())
        }
        Command::Goodcfg {
            family,
            epsilon0,
            cert,
        } => {
            let fam = load_family(family)?;
            match cert {
                Some(path) => {
                    let c: GoodConfigCertificate = serde_json::from_str(&read_to_string(path)?)?;
                    let (ok, violation) = check_good_config(&fam, &c);
                    emit(
                        &cli.global,
                        &json!({ "accepted": ok, "violation": violation }),
                    );
                    Ok(())
                }
                None => {
                    let c = extract_good_config(&fam, None, *epsilon0)?;
                    emit(&cli.global, &serde_json::to_value(&c)?);
                    Ok(())
                }
            }
        }
        Command::Detect { family, out } => {
            let fam = load_family(family)?;
            let rep = detect_structure(&fam)?;
            let value = serde_json::to_value(&rep)?;
            if let Some(path) = out {
                std::fs::write(path, serde_json::to_string_pretty(&value)?)?;
            }
            emit(&cli.global, &value);
            Ok(())
        }
        Command::Sweep { config, out } => {
            let mut cfg: SweepConfig = serde_json::from_str(&read_to_string(config)?)?;
            if cli.global.seed != 0 {
                cfg.seed = cli.global.seed;
            }
            let report = run_sweep(&cfg, out)?;
            let regression = regime_regression(&report).ok();
            emit(
                &cli.global,
                &json!({
                    "records": report.records.len(),
                    "min_ratio": report.min_ratio,
                    "max_ratio": report.max_ratio,
                    "regression": regression,
                }),
            );
            Ok(())
        }
        Command::Validate { files } => {
            if files.is_empty() {
                return Err(Error::PreconditionFailed("no files to validate".into()));
            }
            let mut results = Vec::new();
            for path in files {
                match validate_file(path) {
                    Ok(kind) => results.push(json!({
                        "file": path.display().to_string(),
                        "ok": true,
                        "kind": kind,
                    })),
                    Err(e) => {
                        emit(
                            &cli.global,
                            &json!([{
                                "file": path.display().to_string(),
                                "ok": false,
                                "code": e.code(),
                                "message": e.to_string(),
                            }]),
                        );
                        return Err(e);
                    }
                }
            }
            emit(&cli.global, &serde_json::Value::Array(results));
            Ok(())
        }
    }
}

fn validate_file(path: &Path) -> Result<&'static str, Error> {
    let text = read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("vox") => {
            VoxelSet::from_vox1(&text)?;
            Ok("vox1")
        }
        _ => {
            if let Ok(inst) = serde_json::from_str::<AssignmentInstance>(&text) {
                inst.validate()?;
                return Ok("assignment_instance");
            }
            if serde_json::from_str::<SumsetInstance>(&text).is_ok() {
                return Ok("sumset_instance");
            }
            if serde_json::from_str::<GoodConfigCertificate>(&text).is_ok() {
                return Ok("good_config_certificate");
            }
            // fall through to the family schema for its precise violation
            TubeFamily::from_json_str(&text).map(|_| "tube_family")
        }
    }
}

