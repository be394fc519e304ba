//! Scenario runner behind the `apsg` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apanalysis::{self, ApReport, BohrSpectrum, FrequencyGrid};
use crate::linalg::{self, CMat, CVec};
use crate::modelops::{self, OperatorPair, SpectralMode, TailRule};
use crate::semigroup::{IntegratedFamily, Kind};
use crate::verify::{self, CheckConfig, CheckId, CheckResult, CheckStatus, SubspaceSpec, Tolerances};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: line {line}, column {column}: {msg}")]
    Parse { path: String, line: usize, column: usize, msg: String },
    #[error("{path}: field `{field}`: {msg}")]
    Invalid { path: String, field: &'static str, msg: String },
    #[error("{path}: no scenario files found")]
    Empty { path: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// A matrix as rows of `[re, im]` entries.
pub type MatrixSpec = Vec<Vec<Complex64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum OperatorSpec {
    Matrix {
        a: MatrixSpec,
        #[serde(default)]
        c: Option<MatrixSpec>,
    },
    Spectral {
        modes: Vec<SpectralMode>,
        #[serde(default)]
        tail: TailRule,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct Sampling {
    pub vectors: Option<usize>,
    pub time_pairs: Option<usize>,
    pub bumps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub operator: OperatorSpec,
    pub kind: Kind,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub grid: Option<FrequencyGrid>,
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    #[serde(default)]
    pub subspace: Option<SubspaceSpec>,
    #[serde(default)]
    pub checks: Option<Vec<CheckId>>,
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub sampling: Sampling,
}

fn one() -> usize {
    1
}

fn matrix(rows: &MatrixSpec, path: &str, field: &'static str) -> Result<CMat, CliError> {
    let invalid = |msg: String| CliError::Invalid { path: path.to_string(), field, msg };
    let n = rows.len();
    if n == 0 {
        return Err(invalid("matrix is empty".into()));
    }
    if let Some((k, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(invalid(format!("row {k} has {} entries, expected {n}", r.len())));
    }
    if rows.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(invalid("entries must be finite".into()));
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j]))
}

impl Scenario {
    pub fn parse(text: &str, path: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_string(),
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn pair(&self, path: &str) -> Result<OperatorPair, CliError> {
        let invalid = |msg: String| CliError::Invalid { path: path.to_string(), field: "operator", msg };
        match &self.operator {
            OperatorSpec::Matrix { a, c } => {
                let a = matrix(a, path, "operator.matrix.a")?;
                match c {
                    None => modelops::make_generator(a),
                    Some(c) => {
                        let c = matrix(c, path, "operator.matrix.c")?;
                        if c.nrows() != a.nrows() {
                            return Err(CliError::Invalid {
                                path: path.to_string(),
                                field: "operator.matrix.c",
                                msg: format!("dimension {} differs from a ({})", c.nrows(), a.nrows()),
                            });
                        }
                        modelops::make_matrix_pair(a, c)
                    }
                }
                .map_err(|e| invalid(e.to_string()))
            }
            OperatorSpec::Spectral { modes, tail } => {
                modelops::make_spectral(modes.clone(), *tail).map_err(|e| invalid(e.to_string()))
            }
        }
    }

    pub fn config(&self, tol_scale: f64) -> CheckConfig {
        let base = CheckConfig::default();
        CheckConfig {
            seed: self.seed,
            n: self.n,
            tolerances: self.tolerances.unwrap_or_default().scaled(tol_scale),
            vectors: self.sampling.vectors.unwrap_or(base.vectors),
            time_pairs: self.sampling.time_pairs.unwrap_or(base.time_pairs),
            bumps: self.sampling.bumps.unwrap_or(base.bumps),
            horizon: self.horizon,
            step: self.step,
            grid: self.grid,
            eps: self.eps.clone().unwrap_or(base.eps),
            threshold: base.threshold,
        }
    }

    pub fn checks(&self) -> Vec<CheckId> {
        self.checks.clone().unwrap_or_else(|| CheckId::THEOREMS.to_vec())
    }

    pub fn subspace(&self) -> SubspaceSpec {
        self.subspace.clone().unwrap_or_else(|| SubspaceSpec::default_for(self.kind))
    }

    /// Checks the scenario invariants against the effective sampling plan.
    pub fn validate(&self, path: &str, plan: &verify::Plan) -> Result<(), CliError> {
        let invalid = |field: &'static str, msg: String| CliError::Invalid { path: path.to_string(), field, msg };
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty".into()));
        }
        if self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(invalid("name", format!("'{}' is not usable as a directory name", self.name)));
        }
        if self.n == 0 {
            return Err(invalid("n", "integration order must be at least 1".into()));
        }
        if !(plan.h > 0.0) || !plan.h.is_finite() {
            return Err(invalid("step", format!("must be positive, got {}", plan.h)));
        }
        if !(plan.horizon >= 100.0 * plan.h) {
            return Err(invalid(
                "horizon",
                format!("T = {} must be at least 100·h = {}", plan.horizon, 100.0 * plan.h),
            ));
        }
        if plan.grid.count < 2 || !(plan.grid.max > plan.grid.min) {
            return Err(invalid("grid", "need min < max and count ≥ 2".into()));
        }
        let limit = std::f64::consts::PI / plan.horizon;
        if plan.grid.spacing() > limit * (1.0 + 1e-12) {
            return Err(invalid(
                "grid",
                format!("spacing {:.6e} exceeds π/T = {limit:.6e}", plan.grid.spacing()),
            ));
        }
        if let Some(eps) = &self.eps {
            if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
                return Err(invalid("eps", "need a non-empty list of positive values".into()));
            }
        }
        if let Some(t) = &self.tolerances {
            let all = [t.closed_form, t.quadrature, t.extension, t.bohr, t.sup];
            if all.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(invalid("tolerances", "every tolerance must be positive".into()));
            }
        }
        if let Some(checks) = &self.checks {
            if checks.is_empty() {
                return Err(invalid("checks", "list is empty".into()));
            }
        }
        Ok(())
    }
}

/// Orbit of a representative vector, analysed on its own.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitAnalysis {
    pub vector: Vec<Complex64>,
    pub plan: verify::Plan,
    pub samples: usize,
    pub report: ApReport,
    pub spectrum: BohrSpectrum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub other: usize,
    pub exit_status: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub source: String,
    pub kind: Kind,
    pub dim: usize,
    pub seed: u64,
    pub tol_scale: f64,
    pub subspace: SubspaceSpec,
    pub checks: Vec<CheckResult>,
    pub orbit: Option<OrbitAnalysis>,
    pub notes: Vec<String>,
    pub summary: Summary,
}

struct Outputs {
    report: ScenarioReport,
    trajectory: Option<String>,
    spectrum: String,
    periods: String,
}

/// The normalised sum of the subspace basis, or of the standard basis when
/// the subspace is empty.
fn representative(pair: &OperatorPair, spec: &SubspaceSpec) -> CVec {
    let dim = pair.dim();
    let basis = modelops::eigensets(pair, modelops::DEFAULT_EIG_TOL)
        .ok()
        .and_then(|sets| spec.resolve(&sets, dim).ok())
        .filter(|b| b.ncols() > 0)
        .unwrap_or_else(|| CMat::identity(dim, dim));
    let mut x = CVec::zeros(dim);
    for k in 0..basis.ncols() {
        x += basis.column(k);
    }
    if x.norm() == 0.0 {
        x = basis.column(0).into_owned();
    }
    let n = x.norm();
    x / linalg::c64(n, 0.0)
}

fn analyse_orbit(
    pair: &OperatorPair,
    scenario: &Scenario,
    cfg: &CheckConfig,
    plan: &verify::Plan,
    notes: &mut Vec<String>,
) -> Option<(OrbitAnalysis, String)> {
    let x = representative(pair, &scenario.subspace());
    let family = match IntegratedFamily::new(pair.clone(), scenario.kind, cfg.n) {
        Ok(f) => f,
        Err(e) => {
            notes.push(format!("orbit analysis skipped: {e}"));
            return None;
        }
    };
    let orbit = match family.orbit(&x, plan.h, plan.horizon) {
        Ok(o) => o,
        Err(e) => {
            notes.push(format!("orbit analysis skipped: {e}"));
            return None;
        }
    };
    let opts = apanalysis::ApOptions {
        eps: cfg.eps.clone(),
        relative: true,
        max_scan: Some(0.5 * plan.horizon),
        spectrum: None,
    };
    let report = match apanalysis::ap_verdict(&orbit, &opts) {
        Ok(r) => r,
        Err(e) => {
            notes.push(format!("orbit verdict unavailable: {e}"));
            return None;
        }
    };
    for w in &report.witnesses {
        notes.push(format!("orbit witness: {}", serde_json::to_string(w).unwrap_or_default()));
    }
    let spectrum = match apanalysis::bohr_spectrum(&orbit, &plan.grid, cfg.threshold.max(1e-4) * orbit.sup_norm()) {
        Ok(s) => s,
        Err(e) => {
            notes.push(format!("orbit spectrum unavailable: {e}"));
            BohrSpectrum::default()
        }
    };
    let csv = orbit.to_csv();
    let analysis = OrbitAnalysis { vector: x.iter().copied().collect(), plan: *plan, samples: orbit.len(), report, spectrum };
    Some((analysis, csv))
}

fn execute(scenario: &Scenario, source: &str, tol_scale: f64) -> Result<Outputs, CliError> {
    let pair = scenario.pair(source)?;
    let cfg = scenario.config(tol_scale);
    let plan = verify::sampling_plan(&pair, scenario.kind, &cfg)
        .map_err(|msg| CliError::Invalid { path: source.to_string(), field: "operator", msg })?;
    scenario.validate(source, &plan)?;
    let spec = scenario.subspace();
    let checks = verify::run_checks(&scenario.checks(), &pair, scenario.kind, &spec, &cfg);
    let mut notes = Vec::new();
    let orbit = analyse_orbit(&pair, scenario, &cfg, &plan, &mut notes);
    let fail = checks.iter().filter(|c| c.is_failure()).count();
    let pass = checks.iter().filter(|c| c.status == CheckStatus::Pass).count();
    let summary = Summary {
        pass,
        fail,
        other: checks.len() - pass - fail,
        exit_status: if fail > 0 { EXIT_CHECK_FAILED } else { EXIT_OK },
    };
    let (orbit, trajectory) = match orbit {
        Some((a, csv)) => (Some(a), Some(csv)),
        None => (None, None),
    };
    let dim = pair.dim();
    let spectrum = orbit
        .as_ref()
        .map(|o| apanalysis::spectrum_csv(&o.spectrum, dim))
        .unwrap_or_else(|| apanalysis::spectrum_csv(&BohrSpectrum::default(), dim));
    let periods = orbit
        .as_ref()
        .map(|o| apanalysis::periods_csv(&o.report.rows))
        .unwrap_or_else(|| apanalysis::periods_csv(&[]));
    let report = ScenarioReport {
        scenario: scenario.name.clone(),
        source: Path::new(source).file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        kind: scenario.kind,
        dim,
        seed: scenario.seed,
        tol_scale,
        subspace: spec,
        checks,
        orbit,
        notes,
        summary,
    };
    Ok(Outputs { report, trajectory, spectrum, periods })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(contents.as_bytes()).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}

/// Writes into a staging directory and renames it over `<out>/<name>`.
fn write_outputs(out: &Path, outputs: &Outputs) -> Result<PathBuf, CliError> {
    let name = &outputs.report.scenario;
    let target = out.join(name);
    let staging = out.join(format!(".{name}.partial"));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    let traj_dir = staging.join("trajectories");
    fs::create_dir_all(&traj_dir).map_err(io_err(&traj_dir))?;
    let mut json = serde_json::to_string_pretty(&outputs.report).expect("report serializes");
    json.push('\n');
    write_file(&staging.join("report.json"), &json)?;
    if let Some(csv) = &outputs.trajectory {
        write_file(&traj_dir.join("orbit.csv"), csv)?;
    }
    write_file(&staging.join("spectrum.csv"), &outputs.spectrum)?;
    write_file(&staging.join("periods.csv"), &outputs.periods)?;
    if target.exists() {
        fs::remove_dir_all(&target).map_err(io_err(&target))?;
    }
    fs::rename(&staging, &target).map_err(io_err(&target))?;
    Ok(target)
}

/// Scenario files named by `path`: the file itself, or every `*.json` in
/// the directory in name order.
pub fn scenario_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io_err(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(CliError::Empty { path: path.display().to_string() });
        }
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

/// Result of running one scenario file.
#[derive(Debug)]
pub struct RunOutcome {
    pub source: PathBuf,
    pub report: ScenarioReport,
    pub dir: PathBuf,
}

pub fn run_file(path: &Path, out: &Path, tol_scale: f64) -> Result<RunOutcome, CliError> {
    let scenario = Scenario::load(path)?;
    let outputs = execute(&scenario, &path.display().to_string(), tol_scale)?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let dir = write_outputs(out, &outputs)?;
    Ok(RunOutcome { source: path.to_path_buf(), report: outputs.report, dir })
}

/// Runs every scenario under `path`; the exit status is the worst over all
/// scenarios.
pub fn run(path: &Path, out: &Path, tol_scale: f64, parallel: usize) -> (u8, Vec<Result<RunOutcome, CliError>>) {
    let files = match scenario_files(path) {
        Ok(f) => f,
        Err(e) => return (EXIT_USAGE, vec![Err(e)]),
    };
    let job = || files.par_iter().map(|f| run_file(f, out, tol_scale)).collect::<Vec<_>>();
    let results = match rayon::ThreadPoolBuilder::new().num_threads(parallel.max(1)).build() {
        Ok(pool) if parallel > 0 => pool.install(job),
        _ => job(),
    };
    let status = results
        .iter()
        .map(|r| match r {
            Ok(o) => o.report.summary.exit_status,
            Err(_) => EXIT_USAGE,
        })
        .max()
        .unwrap_or(EXIT_OK);
    (status, results)
}

pub fn list_checks() -> String {
    let mut s = String::new();
    for info in verify::catalogue() {
        let tag = if info.exploratory { " (exploratory)" } else { "" };
        s.push_str(&format!("{:<20} {}{}\n", info.id.as_str(), info.title, tag));
    }
    s
}

#[derive(Debug, Parser)]
#[command(name = "apsg", version, about = "Almost periodicity checks for model C-distribution semigroups and cosine functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file or every scenario in a directory.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Multiplies every tolerance.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
        /// Scenarios run concurrently (0 uses all cores).
        #[arg(long, default_value_t = 0)]
        parallel: usize,
    },
    /// Print the check catalogue.
    List,
    /// Print documentation for one check.
    Describe { id: String },
}

pub fn main_with(cli: Cli) -> u8 {
    match cli.command {
        Command::List => {
            print!("{}", list_checks());
            EXIT_OK
        }
        Command::Describe { id } => match id.parse::<CheckId>() {
            Ok(id) => {
                print!("{}", verify::describe(id));
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}; run `apsg list` for the catalogue");
                EXIT_USAGE
            }
        },
        Command::Run { scenario, out, tol_scale, parallel } => {
            if !(tol_scale > 0.0) || !tol_scale.is_finite() {
                eprintln!("error: --tol-scale must be positive, got {tol_scale}");
                return EXIT_USAGE;
            }
            let (status, results) = run(&scenario, &out, tol_scale, parallel);
            for r in results {
                match r {
                    Ok(o) => {
                        println!("== {} ({})", o.report.scenario, o.source.display());
                        print!("{}", verify::summary_table(&o.report.checks));
                        for n in &o.report.notes {
                            println!("  {n}");
                        }
                        println!("  written to {}", o.dir.display());
                    }
                    Err(e) => eprintln!("error: {e}"),
                }
            }
            status
        }
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(main_with(cli))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIAG: &str = r#"{
        "name": "t",
        "operator": {"matrix": {"a": [[[0, 1], [0, 0]], [[0, 0], [0, 2]]]}},
        "kind": "semigroup",
        "seed": 1
    }"#;

    #[test]
    fn parses_minimal_scenario() {
        let s = Scenario::parse(DIAG, "x.json").unwrap();
        assert_eq!(s.n, 1);
        assert_eq!(s.checks(), CheckId::THEOREMS.to_vec());
        assert_eq!(s.subspace(), SubspaceSpec::SpanD);
        let pair = s.pair("x.json").unwrap();
        assert_eq!(pair.dim(), 2);
    }

    #[test]
    fn missing_seed_names_the_field() {
        let text = DIAG.replace(",\n        \"seed\": 1", "");
        let err = Scenario::parse(&text, "x.json").unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let text = DIAG.replace("\"seed\": 1", "\"seed\": 1, \"sed\": 2");
        let err = Scenario::parse(&text, "x.json").unwrap_err().to_string();
        assert!(err.contains("sed"), "{err}");
    }

    #[test]
    fn invariants_are_enforced() {
        let s = Scenario::parse(DIAG, "x.json").unwrap();
        let pair = s.pair("x.json").unwrap();
        let cfg = s.config(1.0);
        let plan = verify::sampling_plan(&pair, s.kind, &cfg).unwrap();
        s.validate("x.json", &plan).unwrap();

        let short = verify::Plan { horizon: 50.0 * plan.h, ..plan };
        let err = s.validate("x.json", &short).unwrap_err().to_string();
        assert!(err.contains("horizon"), "{err}");

        let coarse = verify::Plan { grid: FrequencyGrid { min: -1.0, max: 1.0, count: 3 }, ..plan };
        let err = s.validate("x.json", &coarse).unwrap_err().to_string();
        assert!(err.contains("grid"), "{err}");

        let bad = verify::Plan { h: -1.0, ..plan };
        assert!(s.validate("x.json", &bad).unwrap_err().to_string().contains("step"));
    }

    #[test]
    fn matrix_shape_checked() {
        let text = DIAG.replace("[[0, 0], [0, 2]]", "[[0, 0]]");
        let s = Scenario::parse(&text, "x.json").unwrap();
        let err = s.pair("x.json").unwrap_err().to_string();
        assert!(err.contains("operator.matrix.a"), "{err}");
    }

    #[test]
    fn list_has_theorem_checks() {
        let l = list_checks();
        for id in CheckId::THEOREMS {
            assert!(l.contains(id.as_str()));
        }
    }
}
