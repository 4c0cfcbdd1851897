//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::comb::comb_residuals;
use crate::error::{Error, Result};
use crate::games::{
    exclusion_compatible_optimum, exclusion_value, exclusion_value_relaxed, qcd_compatible_optimum, qcd_strategy,
    verify_theorem1, verify_theorem2, GameReport, VerifyOptions, EXCLUSION_CONVENTION,
};
use crate::incompat::{convex_weight_with_cap, is_compatible_collection_with_cap, robustness_with_cap};
use crate::instances::{qubit_mub_collection, random_collection, random_ensembles, NetworkShape, PovmKind};
use crate::io::{read_collection, read_ensembles, read_json, CombJson, TesterJson};
use crate::report::{render_csv, sidecar_path, write_atomic, CsvRow, Envelope, Tolerances};
use crate::sampling::derive_seed;
use crate::tester::{tester_residuals, TesterCollection};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CAP: i32 = 4;
pub const THREADS_ENV: &str = "COMBFORGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "combforge", version, about = "Certify incompatibility of quantum testers and its game advantages")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Check a tester, comb, collection, or ensemble file.
    Validate,
    /// Robustness of incompatibility with dual certificate.
    Robustness,
    /// Convex weight of incompatibility with witness.
    Weight,
    /// Decide compatibility of a collection.
    Compatible,
    /// Discrimination advantage equals one plus the robustness.
    Theorem1,
    /// Exclusion advantage equals one minus the convex weight.
    Theorem2,
    /// Discrimination game values for given ensembles.
    Game,
    /// Exclusion game values for given ensembles.
    Exclusion,
    /// End-to-end showcase on the qubit Z/X measurement pair.
    Demo,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Options {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub collection: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tester: Option<PathBuf>,
    #[arg(long, global = true)]
    pub comb: Option<PathBuf>,
    #[arg(long, global = true)]
    pub ensembles: Option<PathBuf>,
    /// Report path; stdout when absent. Output paths are not part of the embedded config.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
    /// Largest number of vector outcomes a parent tester may have.
    #[arg(long, global = true, default_value_t = 64)]
    pub cap_outcomes: usize,
    /// Largest total dimension of the tester systems.
    #[arg(long, global = true, default_value_t = 256)]
    pub cap_dim: usize,
    /// Largest accepted primal-dual gap of a certificate.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tolerance_gap: f64,
    /// Generate the instance instead of reading it.
    #[arg(long, global = true)]
    pub random: bool,
    #[arg(long, global = true, default_value_t = 1)]
    pub slots: usize,
    #[arg(long, global = true, default_value_t = 2)]
    pub outcomes: usize,
    #[arg(long, global = true, default_value_t = 2)]
    pub testers: usize,
    /// Force every input system to dimension 1.
    #[arg(long, global = true)]
    pub probe_trivial: bool,
    /// Let the exclusion player choose a tester per ensemble (exploration mode).
    #[arg(long, global = true)]
    pub relaxed_exclusion: bool,
    /// Random ensembles per theorem check.
    #[arg(long, global = true, default_value_t = 20)]
    pub random_ensembles: usize,
}

/// Result of a subcommand before it is wrapped in an envelope.
struct Outcome {
    result: Value,
    rows: Vec<CsvRow>,
    exit: i32,
}

impl Outcome {
    fn ok(result: Value) -> Self {
        Self {
            result,
            rows: Vec::new(),
            exit: EXIT_OK,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::Solver(_) => EXIT_SOLVER,
        _ => EXIT_VALIDATION,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::CapExceeded { .. } => "cap_exceeded",
        Error::Solver(_) => "solver_failure",
        Error::Format(_) => "format",
        _ => "validation",
    }
}

fn shape(o: &Options) -> NetworkShape {
    if o.probe_trivial {
        NetworkShape::probe_trivial(o.slots, 2)
    } else {
        NetworkShape::qubits(o.slots)
    }
}

fn check_dim(dim: usize, o: &Options) -> Result<()> {
    if dim > o.cap_dim {
        return Err(Error::CapExceeded {
            what: "tester systems",
            needed: dim,
            cap: o.cap_dim,
        });
    }
    Ok(())
}

fn load_collection(o: &Options) -> Result<TesterCollection> {
    let c = if o.random {
        check_dim(shape(o).signature()?.total_dim(), o)?;
        random_collection(&shape(o), o.testers, o.outcomes, PovmKind::Projective, o.seed)?
    } else if let Some(p) = &o.collection {
        read_collection(p)?
    } else {
        return Err(Error::Format("pass --collection <path> or --random".into()));
    };
    check_dim(c.signature().total_dim(), o)?;
    Ok(c)
}

fn load_ensembles(o: &Options, testers: &TesterCollection) -> Result<crate::comb::EnsembleCollection> {
    if o.random {
        random_ensembles(testers.signature(), testers.len(), testers.outcomes(), 2, derive_seed(o.seed, 1 << 32))
    } else if let Some(p) = &o.ensembles {
        read_ensembles(p)
    } else {
        Err(Error::Format("pass --ensembles <path> or --random".into()))
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn gap_exit(gap: f64, o: &Options) -> i32 {
    if gap > o.tolerance_gap {
        EXIT_SOLVER
    } else {
        EXIT_OK
    }
}

fn validate(o: &Options) -> Result<Outcome> {
    let mut checks = serde_json::Map::new();
    let mut valid = true;
    if let Some(p) = &o.tester {
        let t: TesterJson = read_json(p)?;
        let r = tester_residuals(&t.to_effects()?, t.slots)?;
        valid &= r.is_valid();
        checks.insert("tester".into(), json!({ "valid": r.is_valid(), "residuals": to_value(&r), "error": r.first_error().map(|e| e.to_string()) }));
    }
    if let Some(p) = &o.comb {
        let c: CombJson = read_json(p)?;
        let r = comb_residuals(&c.choi.to_operator()?, c.slots)?;
        valid &= r.is_valid();
        checks.insert("comb".into(), json!({ "valid": r.is_valid(), "residuals": to_value(&r), "error": r.first_error().map(|e| e.to_string()) }));
    }
    if o.collection.is_some() {
        let verdict = match load_collection(o) {
            Ok(c) => json!({ "valid": true, "testers": c.len(), "outcomes": c.outcomes() }),
            Err(e) => {
                valid = false;
                json!({ "valid": false, "error": e.to_string() })
            }
        };
        checks.insert("collection".into(), verdict);
    }
    if let Some(p) = &o.ensembles {
        let verdict = match read_ensembles(p) {
            Ok(g) => json!({ "valid": true, "ensembles": g.len(), "combs_per_ensemble": g.combs_per_ensemble() }),
            Err(e) => {
                valid = false;
                json!({ "valid": false, "error": e.to_string() })
            }
        };
        checks.insert("ensembles".into(), verdict);
    }
    if checks.is_empty() {
        return Err(Error::Format("validate needs --tester, --comb, --collection, or --ensembles".into()));
    }
    checks.insert("valid".into(), Value::Bool(valid));
    Ok(Outcome {
        result: Value::Object(checks),
        rows: Vec::new(),
        exit: if valid { EXIT_OK } else { EXIT_VALIDATION },
    })
}

fn robustness_cmd(o: &Options) -> Result<Outcome> {
    let c = load_collection(o)?;
    let t = Instant::now();
    let cert = robustness_with_cap(&c, o.cap_outcomes)?;
    Ok(Outcome {
        rows: vec![CsvRow {
            instance: format!("robustness-{}", o.seed),
            resource: cert.value,
            ratio: None,
            predicted: None,
            gap: cert.gap,
            witness_valid: None,
            wall_seconds: t.elapsed().as_secs_f64(),
        }],
        exit: gap_exit(cert.gap, o),
        result: to_value(&cert),
    })
}

fn weight_cmd(o: &Options) -> Result<Outcome> {
    let c = load_collection(o)?;
    let t = Instant::now();
    let cert = convex_weight_with_cap(&c, o.cap_outcomes)?;
    Ok(Outcome {
        rows: vec![CsvRow {
            instance: format!("weight-{}", o.seed),
            resource: cert.value,
            ratio: None,
            predicted: None,
            gap: cert.gap,
            witness_valid: None,
            wall_seconds: t.elapsed().as_secs_f64(),
        }],
        exit: gap_exit(cert.gap, o),
        result: to_value(&cert),
    })
}

fn compatible_cmd(o: &Options) -> Result<Outcome> {
    let c = load_collection(o)?;
    let verdict = is_compatible_collection_with_cap(&c, o.cap_outcomes);
    Ok(Outcome::ok(to_value(&verdict)))
}

fn verify_options(o: &Options) -> VerifyOptions {
    VerifyOptions {
        random_ensembles: o.random_ensembles,
        seed: o.seed,
        vector_cap: o.cap_outcomes,
        ..VerifyOptions::default()
    }
}

fn theorem_outcome(report: GameReport, o: &Options, elapsed: f64) -> Outcome {
    let exact_ok = report
        .witness
        .as_ref()
        .is_none_or(|w| !w.witness_valid || w.matches_prediction);
    let passed = report.violations == 0 && exact_ok;
    let exit = if !passed {
        EXIT_VALIDATION
    } else {
        gap_exit(report.certificate_gap, o)
    };
    let row = CsvRow {
        instance: format!("theorem{}-{}", report.theorem, o.seed),
        resource: report.resource,
        ratio: report.witness.as_ref().and_then(|w| w.values.ratio),
        predicted: Some(report.predicted_ratio),
        gap: report.certificate_gap,
        witness_valid: report.witness.as_ref().map(|w| w.witness_valid),
        wall_seconds: elapsed,
    };
    let mut result = to_value(&report);
    result["passed"] = Value::Bool(passed);
    Outcome {
        result,
        rows: vec![row],
        exit,
    }
}

fn theorem1_cmd(o: &Options) -> Result<Outcome> {
    let c = load_collection(o)?;
    let t = Instant::now();
    let report = verify_theorem1(&c, &verify_options(o))?;
    Ok(theorem_outcome(report, o, t.elapsed().as_secs_f64()))
}

fn theorem2_cmd(o: &Options) -> Result<Outcome> {
    let c = load_collection(o)?;
    let t = Instant::now();
    let report = verify_theorem2(&c, &verify_options(o))?;
    Ok(theorem_outcome(report, o, t.elapsed().as_secs_f64()))
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b.abs() > 1e-12).then(|| a / b)
}

fn game_cmd(o: &Options) -> Result<Outcome> {
    let c = load_collection(o)?;
    let g = load_ensembles(o, &c)?;
    let (value, strategy) = qcd_strategy(&g, &c)?;
    let compat = qcd_compatible_optimum(&g, 81.max(o.cap_outcomes))?;
    Ok(Outcome {
        exit: gap_exit(compat.gap, o),
        rows: Vec::new(),
        result: json!({
            "incompatible_value": value,
            "strategy": strategy,
            "compatible_value": compat.value,
            "compatible_gap": compat.gap,
            "ratio": ratio(value, compat.value),
        }),
    })
}

fn exclusion_cmd(o: &Options) -> Result<Outcome> {
    let c = load_collection(o)?;
    let g = load_ensembles(o, &c)?;
    let (value, mode) = if o.relaxed_exclusion {
        (exclusion_value_relaxed(&g, &c)?, "relaxed: best tester per ensemble (exploration mode)")
    } else {
        (exclusion_value(&g, &c)?, "aligned: tester beta for ensemble beta")
    };
    let compat = exclusion_compatible_optimum(&g, o.cap_outcomes)?;
    Ok(Outcome {
        exit: gap_exit(compat.gap, o),
        rows: Vec::new(),
        result: json!({
            "convention": EXCLUSION_CONVENTION,
            "mode": mode,
            "error": value,
            "success": 1.0 - value,
            "compatible_error": compat.value,
            "compatible_gap": compat.gap,
            "ratio": ratio(value, compat.value),
        }),
    })
}

fn demo_cmd(o: &Options) -> Result<Outcome> {
    let c = qubit_mub_collection(2, 1)?;
    let opts = verify_options(o);
    let t = Instant::now();
    let verdict = is_compatible_collection_with_cap(&c, o.cap_outcomes);
    let t1 = verify_theorem1(&c, &opts)?;
    let t2 = verify_theorem2(&c, &opts)?;
    let elapsed = t.elapsed().as_secs_f64();
    let one = theorem_outcome(t1, o, elapsed);
    let two = theorem_outcome(t2, o, elapsed);
    Ok(Outcome {
        exit: one.exit.max(two.exit),
        rows: one.rows.into_iter().chain(two.rows).collect(),
        result: json!({
            "instance": "probe-trivial qubit Z/X measurement pair",
            "compatibility": to_value(&verdict),
            "theorem1": one.result,
            "theorem2": two.result,
        }),
    })
}

fn check_options(o: &Options) -> Result<()> {
    if o.cap_outcomes == 0 || o.cap_dim == 0 || o.slots == 0 || o.outcomes == 0 || o.testers == 0 {
        return Err(Error::Format("caps, slots, outcomes, and testers must be positive".into()));
    }
    if !(o.tolerance_gap > 0.0 && o.tolerance_gap < 1e-2) {
        return Err(Error::Format(format!("--tolerance-gap {} outside (0, 1e-2)", o.tolerance_gap)));
    }
    Ok(())
}

fn dispatch(cmd: Command, o: &Options) -> Result<Outcome> {
    check_options(o)?;
    match cmd {
        Command::Validate => validate(o),
        Command::Robustness => robustness_cmd(o),
        Command::Weight => weight_cmd(o),
        Command::Compatible => compatible_cmd(o),
        Command::Theorem1 => theorem1_cmd(o),
        Command::Theorem2 => theorem2_cmd(o),
        Command::Game => game_cmd(o),
        Command::Exclusion => exclusion_cmd(o),
        Command::Demo => demo_cmd(o),
    }
}

/// Applies `COMBFORGE_THREADS` to the global thread pool, once.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn command_name(cmd: Command) -> String {
    serde_json::to_value(cmd)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Parses arguments, runs the command, writes artifacts, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    configure_threads();
    let o = &cli.options;
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(|| dispatch(cli.command, o)).unwrap_or_else(|_| {
        Err(Error::Solver("internal panic during evaluation".into()))
    });
    let outcome = match outcome {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            Outcome {
                result: json!({ "error": { "kind": error_kind(&e), "message": e.to_string() } }),
                rows: Vec::new(),
                exit: exit_code(&e),
            }
        }
    };
    let envelope = Envelope::new(
        &command_name(cli.command),
        o.seed,
        to_value(o),
        Tolerances::with_gap(o.tolerance_gap),
        outcome.result,
    );
    let body = envelope.render();
    match &o.out {
        Some(path) => {
            if let Err(e) = write_atomic(path, &body) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_VALIDATION;
            }
            let timing = json!({ "wall_seconds": start.elapsed().as_secs_f64() });
            let _ = write_atomic(&sidecar_path(path), &format!("{timing}\n"));
        }
        None => print!("{body}"),
    }
    if let Some(path) = &o.csv {
        if let Err(e) = write_atomic(path, &render_csv(&outcome.rows)) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_VALIDATION;
        }
    }
    outcome.exit
}
