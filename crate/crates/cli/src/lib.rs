//! Configuration ingestion, subcommand dispatch and artifact bundles for
//! the `lifshitz` binary.
//!
//! Every run reads one JSON config, writes its artifacts into an output
//! directory and finishes with `manifest.json`. A manifest embeds the
//! effective config and its hash, so passing it back as `--config`
//! reproduces the run.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lifshitz_core::combinat::predicted_constants;
use lifshitz_core::gfunc::{GCurve, GPoint, GroundSolver, WellCombination};
use lifshitz_core::ids::{
    estimate_ids_dirichlet, estimate_ids_periodic, ids_csv, run_tail_experiment, sandwich_check,
    IdsSettings, TailConfig, ThetaSampling,
};
use lifshitz_core::parallel::{with_workers, Exec};
use lifshitz_core::potential::{assemble_field, GridSpec, SingleSitePotential};
use lifshitz_core::sampler::{sample_model, ChainSettings, RngState};
use lifshitz_core::{Cube, Error as CoreError, InteractionModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "lifshitz", version, about = "Gibbs-driven random Schrödinger operators at desk scale")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw configurations from the point process.
    Sample(RunArgs),
    /// Estimate the integrated density of states.
    Ids(RunArgs),
    /// Ground-state energies and the inverse coupling g(E).
    Gfunc(RunArgs),
    /// Predicted tail constants and hypothesis checks.
    Constants(RunArgs),
    /// Tail regression of log N(−E).
    Tail(RunArgs),
    /// Dirichlet/periodic sandwich comparison.
    Compare(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Ids(_) => "ids",
            Command::Gfunc(_) => "gfunc",
            Command::Constants(_) => "constants",
            Command::Tail(_) => "tail",
            Command::Compare(_) => "compare",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Sample(a)
            | Command::Ids(a)
            | Command::Gfunc(a)
            | Command::Constants(a)
            | Command::Tail(a)
            | Command::Compare(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON config, or a manifest from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 uses all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Also write sampled potential fields as flat binary files.
    #[arg(long)]
    pub dump_fields: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    /// Dirichlet box side.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    /// Periodic torus side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometric {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnergySchedule {
    List(Vec<f64>),
    Range { geometric: Geometric },
}

impl EnergySchedule {
    pub fn values(&self) -> Vec<f64> {
        match self {
            EnergySchedule::List(v) => v.clone(),
            EnergySchedule::Range { geometric: g } => {
                let ratio = (g.stop / g.start).powf(1.0 / (g.count - 1) as f64);
                (0..g.count).map(|k| g.start * ratio.powi(k as i32)).collect()
            }
        }
    }
}

fn one() -> usize {
    1
}

fn ten() -> usize {
    10
}

fn four() -> usize {
    4
}

fn g_tol() -> f64 {
    1e-5
}

/// One experiment. Which fields are required depends on the subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub dim: usize,
    pub model: InteractionModel,
    #[serde(default = "no_wells")]
    pub potential: SingleSitePotential,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<EnergySchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    #[serde(default = "ten")]
    pub realizations: usize,
    #[serde(default = "one")]
    pub snapshots: usize,
    #[serde(default = "ten")]
    pub thin: usize,
    #[serde(default = "four")]
    pub theta_samples: usize,
    #[serde(default)]
    pub chain: ChainSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    /// Number of configurations written by `sample`.
    #[serde(default = "one")]
    pub samples: usize,
    /// Bisection tolerance for g(E).
    #[serde(default = "g_tol")]
    pub g_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn no_wells() -> SingleSitePotential {
    SingleSitePotential::from_wells(vec![])
}

/// Failure of a run, carrying its exit code class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub error: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

impl Failure {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Failure {
            error: "config",
            field: Some(field.into()),
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            error: "io",
            field: None,
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.error {
            "config" => 2,
            "numerical" => 3,
            "hypothesis" => 4,
            _ => 1,
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        match e {
            CoreError::InvalidParameter { name, .. } => Failure::config(name, message),
            CoreError::BoxTooSmall { .. } => Failure::config("grid", message),
            CoreError::CutoffTooSmall { .. } => Failure::config("cutoff", message),
            CoreError::NonErgodicSettings => Failure::config("chain", message),
            CoreError::InvalidCombination(_) => Failure::config("potential", message),
            CoreError::ShapeMismatch { .. }
            | CoreError::PointOutsideBox { .. }
            | CoreError::DimensionTooLarge { .. }
            | CoreError::TooManyWells { .. } => Failure {
                error: "config",
                field: None,
                message,
            },
            CoreError::HypothesisUnmet { check, .. } => Failure {
                error: "hypothesis",
                field: Some(check),
                message,
            },
            _ => Failure {
                error: "numerical",
                field: None,
                message,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub files: Vec<FileEntry>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<serde_json::Value>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parse a config or manifest, reporting the offending field on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Failure> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Failure::config("", format!("not valid JSON: {e}")))?;
    let value = match value.get("config") {
        Some(inner) if value.get("config_sha256").is_some() => inner.clone(),
        _ => value,
    };
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Failure::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })
}

impl ExperimentConfig {
    /// Hash of the config with the output directory removed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }

    fn energies(&self) -> Result<Vec<f64>, Failure> {
        self.energies
            .as_ref()
            .map(|e| e.values())
            .ok_or_else(|| Failure::config("energies", "required by this subcommand"))
    }

    fn side(&self) -> Result<f64, Failure> {
        self.grid.l.ok_or_else(|| Failure::config("grid.L", "required by this subcommand"))
    }

    /// Checks shared by all subcommands plus those of `command`.
    pub fn validate(&self, command: &str) -> Result<(), Failure> {
        if self.seed.is_none() {
            return Err(Failure::config("seed", "a seed is mandatory (config or --seed)"));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(Failure::config("dim", "must be 1, 2 or 3"));
        }
        if !(self.grid.h > 0.0 && self.grid.h.is_finite()) {
            return Err(Failure::config("grid.h", "must be positive"));
        }
        for (name, v) in [("grid.L", self.grid.l), ("grid.n", self.grid.n)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Failure::config(name, "must be positive"));
                }
            }
        }
        self.model.validate().map_err(|e| prefix("model", e))?;
        self.potential.validate(self.dim).map_err(|e| prefix("potential", e))?;
        self.chain.validate().map_err(|e| prefix("chain", e))?;
        if let Some(EnergySchedule::Range { geometric: g }) = &self.energies {
            if !(g.start > 0.0 && g.stop > 0.0) || g.count < 2 {
                return Err(Failure::config(
                    "energies.geometric",
                    "start and stop must be positive with count ≥ 2",
                ));
            }
        }
        if let Some(es) = &self.energies {
            if es.values().iter().any(|e| !e.is_finite()) {
                return Err(Failure::config("energies", "must be finite"));
            }
        }
        let needs_mc = matches!(command, "ids" | "tail" | "compare");
        if needs_mc && self.realizations < 10 {
            return Err(Failure::config("realizations", "need at least 10 realizations"));
        }
        if needs_mc && self.theta_samples == 0 {
            return Err(Failure::config("theta_samples", "must be positive"));
        }
        match command {
            "sample" => {
                if self.grid.l.is_none() && self.grid.n.is_none() {
                    return Err(Failure::config("grid", "set L (box) or n (torus)"));
                }
                if self.samples == 0 {
                    return Err(Failure::config("samples", "must be positive"));
                }
            }
            "ids" => {
                self.energies()?;
                if self.grid.l.is_none() && self.grid.n.is_none() {
                    return Err(Failure::config("grid", "set L (Dirichlet) or n (periodic)"));
                }
            }
            "gfunc" => {
                if self.energies.is_none() && self.couplings.is_none() {
                    return Err(Failure::config("energies", "set energies or couplings"));
                }
                if let Some(es) = &self.energies {
                    if es.values().iter().any(|&e| e <= 0.0) {
                        return Err(Failure::config("energies", "depths must be positive"));
                    }
                }
            }
            "tail" | "compare" => {
                self.energies()?;
                self.side()?;
            }
            _ => {}
        }
        Ok(())
    }

    fn ids_settings(&self, exec: Exec) -> IdsSettings {
        IdsSettings {
            h: self.grid.h,
            realizations: self.realizations,
            snapshots: self.snapshots,
            thin: self.thin,
            chain: self.chain.clone(),
            cutoff: self.cutoff,
            exec,
        }
    }
}

fn prefix(section: &str, e: CoreError) -> Failure {
    let mut f = Failure::from(e);
    if f.error == "config" {
        f.field = Some(match f.field {
            Some(name) if !name.is_empty() => format!("{section}.{name}"),
            _ => section.to_string(),
        });
    }
    f
}

/// Files written so far in the output directory.
struct Bundle {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Bundle {
    fn create(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        Ok(Bundle {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Failure::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Failure::io(&path, e))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

fn run_sample(cfg: &ExperimentConfig, seed: u64, exec: Exec, dump: bool, out: &mut Bundle) -> Result<(), Failure> {
    let region = match (cfg.grid.l, cfg.grid.n) {
        (Some(l), _) => Cube::centered(cfg.dim, l)?,
        (None, Some(n)) => Cube::torus(cfg.dim, n)?,
        _ => unreachable!("validated"),
    };
    let draws = exec.map_indexed(cfg.samples, |i| {
        let mut rng = RngState::new(seed).with_stream(i as u64).generator();
        sample_model(&cfg.model, &region, &cfg.chain, &mut rng)
    });
    let mut counts = Vec::with_capacity(draws.len());
    for (i, omega) in draws.into_iter().enumerate() {
        let omega = omega?;
        counts.push(omega.len());
        out.write(&format!("configurations/omega_{i:04}.csv"), omega.to_csv().as_bytes())?;
        if dump {
            let grid = if region.periodic {
                GridSpec::periodic(region, cfg.grid.h)?
            } else {
                GridSpec::dirichlet(region, cfg.grid.h)?
            };
            let field = assemble_field(&cfg.potential, &omega.points, &grid, cfg.cutoff)?;
            out.write_json(&format!("fields/omega_{i:04}.json"), &field.header())?;
            out.write(&format!("fields/omega_{i:04}.bin"), &field.to_le_bytes())?;
        }
    }
    out.write_json("sample.json", &serde_json::json!({ "counts": counts, "region": region }))
}

fn run_ids(cfg: &ExperimentConfig, seed: u64, exec: Exec, out: &mut Bundle) -> Result<(), Failure> {
    let es = cfg.energies()?;
    let settings = cfg.ids_settings(exec);
    let est = match (cfg.grid.l, cfg.grid.n) {
        (Some(l), _) => estimate_ids_dirichlet(&cfg.model, &cfg.potential, &es, cfg.dim, l, &settings, seed)?,
        (None, Some(n)) => estimate_ids_periodic(
            &cfg.model,
            &cfg.potential,
            &es,
            cfg.dim,
            n,
            &ThetaSampling::Random {
                samples: cfg.theta_samples,
            },
            &settings,
            seed,
        )?,
        _ => unreachable!("validated"),
    };
    out.write("ids.csv", ids_csv(&est).as_bytes())?;
    out.write_json("ids.json", &est)
}

fn run_gfunc(cfg: &ExperimentConfig, exec: Exec, out: &mut Bundle) -> Result<(), Failure> {
    let mut solver = GroundSolver::new(cfg.dim, cfg.grid.h);
    solver.exec = exec;
    let trivial = WellCombination::trivial();
    let mut gs: Vec<f64> = cfg.couplings.clone().unwrap_or_default();
    if let Some(es) = &cfg.energies {
        for e in es.values() {
            gs.push(solver.g_of_e(&cfg.potential, e, cfg.g_tol)?);
        }
    }
    gs.sort_by(|a, b| a.total_cmp(b));
    let mut points = Vec::with_capacity(gs.len());
    for g in gs {
        let st = solver.solve_auto(&cfg.potential, &trivial, g)?;
        points.push(GPoint {
            g,
            e_minus: -st.energy,
            h: cfg.grid.h,
            side: st.grid.region.side,
        });
    }
    let curve = GCurve { points };
    out.write("gcurve.csv", curve.to_csv().as_bytes())?;
    out.write_json("gcurve.json", &curve)
}

fn run_constants(cfg: &ExperimentConfig, out: &mut Bundle) -> Result<(), Failure> {
    let report = predicted_constants(&cfg.model, &cfg.potential, cfg.dim)?;
    out.write_json("constants.json", &report)
}

fn run_tail(cfg: &ExperimentConfig, seed: u64, exec: Exec, out: &mut Bundle) -> Result<(), Failure> {
    let tc = TailConfig {
        dim: cfg.dim,
        model: cfg.model.clone(),
        potential: cfg.potential.clone(),
        energies: cfg.energies()?,
        side: cfg.side()?,
        ids: cfg.ids_settings(exec),
        g_h: None,
        g_tol: cfg.g_tol,
    };
    let x = run_tail_experiment(&tc, seed)?;
    out.write("ids.csv", x.ids_csv().as_bytes())?;
    out.write("fit.csv", x.fit_csv().as_bytes())?;
    out.write_json("tail.json", &x)
}

fn run_compare(cfg: &ExperimentConfig, seed: u64, exec: Exec, out: &mut Bundle) -> Result<(), Failure> {
    let l = cfg.side()?;
    let rep = sandwich_check(
        &cfg.model,
        &cfg.potential,
        &cfg.energies()?,
        cfg.dim,
        l,
        cfg.grid.n.unwrap_or(l),
        &ThetaSampling::Random {
            samples: cfg.theta_samples,
        },
        &cfg.ids_settings(exec),
        seed,
    )?;
    let mut csv = String::from("E,N_dir,stderr_dir,N_per_lower,stderr_per_lower,N_per_upper,stderr_per_upper,holds\n");
    for r in &rep.rows {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}\n",
            r.energy,
            r.dirichlet,
            r.dirichlet_stderr,
            r.periodic_lower,
            r.periodic_lower_stderr,
            r.periodic_upper,
            r.periodic_upper_stderr,
            r.holds
        ));
    }
    out.write("sandwich.csv", csv.as_bytes())?;
    out.write_json("sandwich.json", &rep)
}

/// Load, validate and run one subcommand. Returns the manifest on success.
pub fn execute(command: &Command) -> Result<Manifest, Failure> {
    let args = command.args();
    let text = fs::read_to_string(&args.config).map_err(|e| Failure::io(&args.config, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    let name = command.name();
    cfg.validate(name)?;
    let seed = cfg.seed.expect("validated");
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut bundle = Bundle::create(&dir)?;
    let exec = Exec::default();
    let result = with_workers(args.workers, || match command {
        Command::Sample(_) => run_sample(&cfg, seed, exec, args.dump_fields, &mut bundle),
        Command::Ids(_) => run_ids(&cfg, seed, exec, &mut bundle),
        Command::Gfunc(_) => run_gfunc(&cfg, exec, &mut bundle),
        Command::Constants(_) => run_constants(&cfg, &mut bundle),
        Command::Tail(_) => run_tail(&cfg, seed, exec, &mut bundle),
        Command::Compare(_) => run_compare(&cfg, seed, exec, &mut bundle),
    });
    let mut manifest = Manifest {
        tool: "lifshitz".into(),
        version: VERSION.into(),
        command: name.into(),
        seed,
        config_sha256: cfg.hash(),
        config: ExperimentConfig { out: None, ..cfg },
        files: std::mem::take(&mut bundle.files),
        status: "complete".into(),
        error: None,
    };
    if let Err(f) = &result {
        manifest.status = "partial".into();
        manifest.error = Some(serde_json::to_value(f).expect("failure serializes"));
    }
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = dir.join("manifest.json");
    fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;
    result.map(|_| manifest)
}

/// Run the CLI and return the process exit code. Failures are reported
/// on stderr as one JSON record.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli.command) {
        Ok(_) => 0,
        Err(f) => {
            eprintln!("{}", serde_json::to_string(&f).expect("failure serializes"));
            f.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"seed": 1, "model": {"kind": "poisson", "intensity": 1.0}, "grid": {"h": 0.1, "L": 10.0}}"#;

    #[test]
    fn unknown_fields_are_rejected_with_a_path() {
        let f = parse_config(r#"{"seed": 1, "model": {"kind": "poisson", "intensity": 1.0}, "grid": {"h": 0.1, "side": 3}}"#)
            .unwrap_err();
        assert_eq!(f.error, "config");
        assert_eq!(f.field.as_deref(), Some("grid.side"));
        assert!(f.message.contains("side"));
    }

    #[test]
    fn manifests_reingest() {
        let cfg = parse_config(BASE).unwrap();
        let m = serde_json::json!({"config_sha256": cfg.hash(), "config": cfg, "files": []});
        let back = parse_config(&m.to_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn geometric_schedule() {
        let s: EnergySchedule = serde_json::from_str(r#"{"geometric": {"start": 1, "stop": 100, "count": 3}}"#).unwrap();
        let v = s.values();
        assert!((v[1] - 10.0).abs() < 1e-12 && (v[2] - 100.0).abs() < 1e-9);
        let s: EnergySchedule = serde_json::from_str("[1, 2]").unwrap();
        assert_eq!(s.values(), vec![1.0, 2.0]);
    }

    #[test]
    fn subcommand_requirements() {
        let mut cfg = parse_config(BASE).unwrap();
        assert_eq!(cfg.validate("ids").unwrap_err().field.as_deref(), Some("energies"));
        cfg.seed = None;
        assert_eq!(cfg.validate("sample").unwrap_err().field.as_deref(), Some("seed"));
        cfg.seed = Some(2);
        cfg.realizations = 3;
        cfg.energies = Some(EnergySchedule::List(vec![1.0]));
        assert_eq!(cfg.validate("ids").unwrap_err().field.as_deref(), Some("realizations"));
        assert!(cfg.validate("sample").is_ok());
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        let h: Failure = CoreError::HypothesisUnmet { check: "L".into(), detail: "x".into() }.into();
        assert_eq!(h.exit_code(), 4);
        let n: Failure = CoreError::NoConvergence { lo: 0.0, hi: 1.0 }.into();
        assert_eq!(n.exit_code(), 3);
        let c: Failure = CoreError::BoxTooSmall { side: 1.0, range: 1.0 }.into();
        assert_eq!(c.exit_code(), 2);
    }
}
