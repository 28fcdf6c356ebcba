//! `relstab`: validate system files, analyze relative equilibria and probe
//! them numerically.
//!
//! Exit codes: 0 stable or success, 1 not a relative equilibrium or a failed
//! validator, 2 parse or usage error, 3 inconclusive verdict, 4 internal
//! numerical inconsistency.

mod report;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use relstab::dynamics::{self, ProbeConfig};
use relstab::point::{parse_list, parse_names, parse_point};
use relstab::slice::SliceError;
use relstab::sysfile::{load_system_path, LoadErrorKind};
use relstab::{analyze, builtin, AnalysisError, LoadedSystem, Verdict, VelocityChoice};
use serde_json::json;

const EXIT_OK: u8 = 0;
const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "relstab", version, about = "Stability of relative equilibria in symmetric Hamiltonian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a system file and run every validator.
    Validate { path: PathBuf },
    /// Find the velocity at a point, build the symplectic slice and decide.
    Analyze {
        path: PathBuf,
        /// Comma-separated coordinates, positional or `name=value`.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// `auto` or a comma-separated velocity in the algebra basis.
        #[arg(long, default_value = "auto", allow_hyphen_values = true)]
        xi: String,
        /// Write the JSON report here (`-` for stdout).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Run Newton from points that are not yet relative equilibria.
        #[arg(long)]
        refine: bool,
    },
    /// Integrate perturbed initial conditions and track distance to the orbit.
    Probe {
        path: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Comma-separated perturbation radii.
        #[arg(long, default_value = "1e-3,1e-2")]
        radii: String,
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100.0)]
        escape_factor: f64,
        /// Orbit distances are checked every this many steps.
        #[arg(long, default_value_t = 100)]
        check_every: usize,
        /// Fixed displacement added to every sample, e.g. `pth=1e-3`.
        #[arg(long, allow_hyphen_values = true)]
        offset: Option<String>,
        /// Coordinates excluded from the random perturbation.
        #[arg(long)]
        freeze: Option<String>,
        /// Directory for `sample_<index>.csv` trajectories.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        refine: bool,
    },
    /// Write bundled system files.
    Examples {
        /// A bundled name or `all`.
        name: String,
        outdir: PathBuf,
    },
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("RELSTAB_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { path } => validate(&path),
        Command::Analyze { path, point, xi, json, refine } => run_analyze(&path, &point, &xi, json.as_deref(), refine),
        Command::Probe {
            path,
            point,
            radii,
            horizon,
            dt,
            samples,
            seed,
            escape_factor,
            check_every,
            offset,
            freeze,
            csv,
            json,
            refine,
        } => {
            let opts = ProbeOpts { radii, horizon, dt, samples, seed, escape_factor, check_every, offset, freeze, csv, json, refine };
            run_probe(&path, &point, &opts)
        }
        Command::Examples { name, outdir } => examples(&name, &outdir),
    };
    ExitCode::from(code)
}

fn diag(value: serde_json::Value) {
    eprintln!("{value}");
}

fn usage(message: impl std::fmt::Display) -> u8 {
    diag(json!({ "level": "error", "kind": "usage", "message": message.to_string() }));
    EXIT_USAGE
}

fn load(path: &Path) -> Result<LoadedSystem, u8> {
    load_system_path(path).map_err(|e| {
        diag(json!({
            "level": "error",
            "kind": e.kind,
            "line": e.line,
            "column": e.column,
            "message": e.message,
        }));
        match e.kind {
            LoadErrorKind::Parse => EXIT_USAGE,
            LoadErrorKind::Validation => EXIT_FAILED,
        }
    })
}

fn validate(path: &Path) -> u8 {
    let loaded = match load(path) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let sys = &loaded.system;
    let (jacobi, _) = sys.algebra().jacobi_residual();
    let eq = sys.equivariance();
    let noether = sys.noether_residual(100, 1).unwrap_or(f64::NAN);
    let generation = sys.generation_residual(100, 2).unwrap_or(f64::NAN);
    let full = relstab::liealg::Subspace::full(sys.algebra().metric());
    let invariance = sys.algebra().check_invariance(&full);
    diag(json!({ "level": "info", "check": "jacobi", "residual": jacobi }));
    diag(json!({ "level": "info", "check": "equivariance", "residual": eq.residual, "constants": eq.constants }));
    diag(json!({ "level": "info", "check": "hamiltonian_invariance", "residual": sys.invariance().residual }));
    diag(json!({ "level": "info", "check": "noether", "residual": noether }));
    diag(json!({ "level": "info", "check": "moment_generates_action", "residual": generation }));
    diag(json!({
        "level": "info",
        "check": "metric_invariance_full_algebra",
        "residual": invariance.residual,
        "note": "only the isotropy algebra of mu must pass; checked during analysis",
    }));
    diag(json!({ "level": "info", "check": "proper_action", "asserted": sys.proper_action(), "note": "not verified" }));
    if noether >= 1e-8 || generation >= 1e-10 || !noether.is_finite() {
        diag(json!({ "level": "error", "kind": "validation", "message": "conservation checks failed" }));
        return EXIT_FAILED;
    }
    println!("{}: ok ({} dof, algebra dim {}, digest {})", sys.name(), sys.space().dof(), sys.algebra().dim(), loaded.digest);
    EXIT_OK
}

fn write_json(target: &Path, value: &impl serde::Serialize) -> Result<(), u8> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    let result = if target == Path::new("-") {
        io::stdout().write_all(text.as_bytes())
    } else {
        fs::write(target, text)
    };
    result.map_err(|e| {
        diag(json!({ "level": "error", "kind": "io", "message": format!("{}: {e}", target.display()) }));
        EXIT_INTERNAL
    })
}

struct Prepared {
    loaded: LoadedSystem,
    analysis: relstab::Analysis,
    input: report::Input,
}

fn prepare(path: &Path, point: &str, xi: &str, refine: bool) -> Result<Prepared, u8> {
    let loaded = load(path)?;
    let sys = &loaded.system;
    let m = parse_point(point, sys.space().names()).map_err(|e| usage(format!("--point: {e}")))?;
    let choice = if xi.trim() == "auto" {
        VelocityChoice::Auto
    } else {
        let v = parse_list(xi).map_err(|e| usage(format!("--xi: {e}")))?;
        if v.len() != sys.algebra().dim() {
            return Err(usage(format!("--xi: expected {} values, got {}", sys.algebra().dim(), v.len())));
        }
        VelocityChoice::Given(DVector::from_vec(v))
    };
    let input = report::Input {
        point: m.clone(),
        xi: match &choice {
            VelocityChoice::Auto => None,
            VelocityChoice::Given(v) => Some(v.iter().copied().collect()),
        },
        refine,
    };
    let analysis = analyze(sys, &DVector::from_vec(m), &choice, refine).map_err(|e| {
        let code = match &e {
            AnalysisError::PointDimension { .. } | AnalysisError::VelocityDimension { .. } => EXIT_USAGE,
            AnalysisError::Slice(SliceError::InternalConsistency { .. })
            | AnalysisError::Slice(SliceError::NotContained { .. })
            | AnalysisError::Slice(SliceError::OddDimension(_))
            | AnalysisError::Slice(SliceError::Degenerate { .. }) => EXIT_INTERNAL,
            _ => EXIT_FAILED,
        };
        diag(json!({ "level": "error", "kind": "analysis", "message": e.to_string() }));
        code
    })?;
    Ok(Prepared { loaded, analysis, input })
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::StableCertified => EXIT_OK,
        _ => EXIT_INCONCLUSIVE,
    }
}

fn summarize(p: &Prepared) {
    let a = &p.analysis;
    println!(
        "{}: {} (slice dim {}, eigenvalues {:?}, residual {:.3e})",
        p.loaded.system.name(),
        a.report.verdict.as_str(),
        a.slice.dim(),
        a.report.slice.eigenvalues,
        a.equilibrium.residual
    );
    for note in &a.report.notes {
        println!("  note: {note}");
    }
}

fn run_analyze(path: &Path, point: &str, xi: &str, json_out: Option<&Path>, refine: bool) -> u8 {
    let p = match prepare(path, point, xi, refine) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let code = verdict_code(p.analysis.report.verdict);
    if json_out != Some(Path::new("-")) {
        summarize(&p);
    }
    if let Some(target) = json_out {
        let r = report::build(&p.loaded, p.input, &p.analysis);
        if let Err(c) = write_json(target, &r) {
            return c;
        }
    }
    code
}

struct ProbeOpts {
    radii: String,
    horizon: f64,
    dt: f64,
    samples: usize,
    seed: u64,
    escape_factor: f64,
    check_every: usize,
    offset: Option<String>,
    freeze: Option<String>,
    csv: Option<PathBuf>,
    json: Option<PathBuf>,
    refine: bool,
}

fn run_probe(path: &Path, point: &str, o: &ProbeOpts) -> u8 {
    let p = match prepare(path, point, "auto", o.refine) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let names = p.loaded.system.space().names();
    let radii = match parse_list(&o.radii) {
        Ok(r) if r.iter().all(|&x| x >= 0.0) => r,
        Ok(_) => return usage("--radii: radii must be non-negative"),
        Err(e) => return usage(format!("--radii: {e}")),
    };
    if !(o.dt > 0.0) || !(o.horizon >= 0.0) || !(o.escape_factor > 0.0) {
        return usage("--dt and --escape-factor must be positive, --horizon non-negative");
    }
    let offset = match &o.offset {
        None => None,
        Some(s) => match parse_point(s, names) {
            Ok(v) => Some(DVector::from_vec(v)),
            Err(e) => return usage(format!("--offset: {e}")),
        },
    };
    let frozen = match &o.freeze {
        None => Vec::new(),
        Some(s) => match parse_names(s, names) {
            Ok(v) => v,
            Err(e) => return usage(format!("--freeze: {e}")),
        },
    };
    let config = ProbeConfig {
        radii,
        horizon: o.horizon,
        dt: o.dt,
        samples_per_radius: o.samples,
        seed: o.seed,
        escape_factor: o.escape_factor,
        offset,
        frozen,
        check_every: o.check_every,
        record: o.csv.is_some(),
    };
    let result = match dynamics::stability_probe(&p.loaded.system, &p.analysis.equilibrium, &config) {
        Ok(r) => r,
        Err(e) => {
            diag(json!({ "level": "error", "kind": "probe", "message": e.to_string() }));
            return EXIT_INTERNAL;
        }
    };
    if let Some(dir) = &o.csv {
        if let Err(e) = write_csvs(dir, names, &result) {
            diag(json!({ "level": "error", "kind": "io", "message": format!("{}: {e}", dir.display()) }));
            return EXIT_INTERNAL;
        }
    }
    if o.json.as_deref() != Some(Path::new("-")) {
        summarize(&p);
        let growth = result.growth.as_ref().map_or("n/a".to_string(), |g| format!("{:.6e} (R^2 {:.6})", g.rate, g.r_squared));
        println!("probe: {:?}, {} samples, growth rate {growth}", result.verdict, result.samples.len());
    }
    if let Some(target) = &o.json {
        let mut r = report::build(&p.loaded, p.input, &p.analysis);
        r.probe = Some(report::probe(&p.loaded, &config, &result));
        if let Err(c) = write_json(target, &r) {
            return c;
        }
    }
    EXIT_OK
}

fn write_csvs(dir: &Path, names: &[String], result: &dynamics::ProbeResult) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (i, s) in result.samples.iter().enumerate() {
        if let Some(t) = &s.trajectory {
            let file = io::BufWriter::new(fs::File::create(dir.join(format!("sample_{i}.csv")))?);
            t.write_csv(names, file)?;
        }
    }
    Ok(())
}

fn examples(name: &str, outdir: &Path) -> u8 {
    let selected: Vec<&str> = if name == "all" {
        builtin::NAMES.to_vec()
    } else if builtin::source(name).is_some() {
        vec![name]
    } else {
        return usage(format!("unknown example `{name}`; available: {}, all", builtin::NAMES.join(", ")));
    };
    if let Err(e) = fs::create_dir_all(outdir) {
        diag(json!({ "level": "error", "kind": "io", "message": e.to_string() }));
        return EXIT_INTERNAL;
    }
    for n in selected {
        let target = outdir.join(format!("{n}.toml"));
        if let Err(e) = fs::write(&target, builtin::source(n).expect("bundled")) {
            diag(json!({ "level": "error", "kind": "io", "message": format!("{}: {e}", target.display()) }));
            return EXIT_INTERNAL;
        }
        println!("{}", target.display());
    }
    EXIT_OK
}
