//! Monte Carlo estimates of the integrated density of states, the periodic
//! sandwich comparison, and regressions of `log N(−E)` in the tail.
//!
//! A realization is one independent chain (or one exact Poisson draw) with
//! its own generator stream. A chain may contribute several thinned
//! snapshots; their counts are averaged per chain before the standard error
//! is taken across chains, so correlated snapshots never shrink the error.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combinat::{predicted_constants, ConstantReport, Regressor};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Configuration, Cube};
use crate::gfunc::GroundSolver;
use crate::operator::build_hamiltonian;
use crate::parallel::Exec;
use crate::pointproc::InteractionModel;
use crate::potential::{assemble_field, default_cutoff, GridSpec, SingleSitePotential};
use crate::sampler::{ChainSettings, Chain, RngState, sample_poisson};
use crate::stats::{ols, rss_fixed_slope};

/// `−ln 0.05`: one-sided 95% upper bound on a Poisson mean after zero events.
pub const ZERO_COUNT_BOUND: f64 = 2.995_732_273_553_991;

/// Sampling and discretization settings shared by both estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdsSettings {
    pub h: f64,
    pub realizations: usize,
    /// Snapshots taken from each chain.
    #[serde(default = "one")]
    pub snapshots: usize,
    /// Sweeps between snapshots.
    #[serde(default = "ten")]
    pub thin: usize,
    #[serde(default)]
    pub chain: ChainSettings,
    /// Truncation radius for infinite-range potentials.
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub exec: Exec,
}

fn one() -> usize {
    1
}

fn ten() -> usize {
    10
}

impl IdsSettings {
    pub fn new(h: f64, realizations: usize) -> Self {
        IdsSettings {
            h,
            realizations,
            snapshots: 1,
            thin: 10,
            chain: ChainSettings::default(),
            cutoff: None,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations < 10 {
            return Err(invalid("realizations", "need at least 10 realizations"));
        }
        if self.snapshots == 0 {
            return Err(invalid("snapshots", "must be positive"));
        }
        if !(self.h > 0.0) {
            return Err(invalid("h", "must be positive"));
        }
        self.chain.validate()
    }
}

/// How Bloch phases are drawn for the periodic estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSampling {
    /// Independent uniform draws from `[0, 2π/n)^d` per realization.
    Random { samples: usize },
    /// The same phases for every realization.
    Fixed { thetas: Vec<[f64; 3]> },
}

impl ThetaSampling {
    fn count(&self) -> usize {
        match self {
            ThetaSampling::Random { samples } => *samples,
            ThetaSampling::Fixed { thetas } => thetas.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsEstimate {
    pub energy: f64,
    /// Eigenvalues `≤ E` per unit volume.
    pub n_hat: f64,
    pub stderr: f64,
    pub realizations: usize,
    pub h: f64,
    pub side: f64,
    pub boundary: String,
    pub theta_samples: usize,
    pub seed: u64,
    /// Upper bound reported when no eigenvalue was seen.
    pub zero_upper_bound: Option<f64>,
}

/// Configurations for one realization: an exact draw per snapshot for
/// non-interacting models, otherwise thinned states of a single chain.
fn draw_snapshots<R: Rng + ?Sized>(
    model: &InteractionModel,
    region: &Cube,
    settings: &IdsSettings,
    rng: &mut R,
) -> Result<Vec<Configuration>> {
    let mut out = Vec::with_capacity(settings.snapshots);
    if !model.is_interacting() {
        let intensity = model.log_activity().exp();
        for _ in 0..settings.snapshots {
            out.push(sample_poisson(region, intensity, rng)?);
        }
        return Ok(out);
    }
    let mut chain = if region.periodic {
        Chain::periodic(model, region, &settings.chain)?
    } else {
        Chain::conditional(model, region, &[], &settings.chain)?
    };
    chain.run(settings.chain.sweeps, rng);
    out.push(chain.configuration());
    for _ in 1..settings.snapshots {
        chain.run(settings.thin.max(1), rng);
        out.push(chain.configuration());
    }
    Ok(out)
}

fn cutoff_for(v: &SingleSitePotential, settings: &IdsSettings) -> f64 {
    settings.cutoff.unwrap_or_else(|| default_cutoff(v))
}

/// Mean and standard error across per-realization vectors.
fn reduce(per: &[Vec<f64>], k: usize) -> Vec<(f64, f64)> {
    let r = per.len() as f64;
    (0..k)
        .map(|j| {
            let mean = per.iter().map(|v| v[j]).sum::<f64>() / r;
            let var = if per.len() > 1 {
                per.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (r - 1.0)
            } else {
                0.0
            };
            (mean, (var / r).sqrt())
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    energies: &[f64],
    per: Vec<Result<Vec<f64>>>,
    settings: &IdsSettings,
    side: f64,
    dim: usize,
    boundary: &str,
    theta_samples: usize,
    seed: u64,
) -> Result<Vec<IdsEstimate>> {
    let per: Vec<Vec<f64>> = per.into_iter().collect::<Result<_>>()?;
    let total_volume = side.powi(dim as i32) * (settings.realizations * settings.snapshots) as f64;
    Ok(reduce(&per, energies.len())
        .into_iter()
        .zip(energies)
        .map(|((mean, se), &e)| IdsEstimate {
            energy: e,
            n_hat: mean,
            stderr: se,
            realizations: settings.realizations * settings.snapshots,
            h: settings.h,
            side,
            boundary: boundary.into(),
            theta_samples,
            seed,
            zero_upper_bound: (mean == 0.0).then(|| ZERO_COUNT_BOUND / total_volume),
        })
        .collect())
}

/// `N̂(E)` from Dirichlet restrictions to `Λ_L` of configurations sampled on
/// `Λ_{L+2·cutoff}`.
pub fn estimate_ids_dirichlet(
    model: &InteractionModel,
    v: &SingleSitePotential,
    energies: &[f64],
    dim: usize,
    side: f64,
    settings: &IdsSettings,
    seed: u64,
) -> Result<Vec<IdsEstimate>> {
    settings.validate()?;
    model.validate()?;
    v.validate(dim)?;
    let cutoff = cutoff_for(v, settings);
    let grid = GridSpec::dirichlet(Cube::centered(dim, side)?, settings.h)?;
    let outer = Cube::centered(dim, side + 2.0 * cutoff)?;
    let volume = side.powi(dim as i32);
    let per = settings.exec.map_indexed(settings.realizations, |i| {
        let mut rng = RngState::new(seed).with_stream(i as u64).generator();
        let snaps = draw_snapshots(model, &outer, settings, &mut rng)?;
        let mut acc = vec![0.0; energies.len()];
        for omega in &snaps {
            let field = assemble_field(v, &omega.points, &grid, Some(cutoff))?;
            let h = build_hamiltonian(&grid, &field.values)?;
            for (a, &e) in acc.iter_mut().zip(energies) {
                *a += h.count_at_most(e)?.count as f64 / volume;
            }
        }
        Ok(acc.into_iter().map(|a| a / snaps.len() as f64).collect())
    });
    finish(energies, per, settings, side, dim, "dirichlet", 0, seed)
}

/// `N̂_per(E)`: Floquet average over Bloch phases of the eigenvalue counts
/// of `H_{ω,n}` for `ω ~ P^per_{Λ_n}`, per unit volume.
#[allow(clippy::too_many_arguments)]
pub fn estimate_ids_periodic(
    model: &InteractionModel,
    v: &SingleSitePotential,
    energies: &[f64],
    dim: usize,
    n: f64,
    theta: &ThetaSampling,
    settings: &IdsSettings,
    seed: u64,
) -> Result<Vec<IdsEstimate>> {
    settings.validate()?;
    model.validate()?;
    v.validate(dim)?;
    if theta.count() == 0 {
        return Err(invalid("theta_samples", "need at least one phase"));
    }
    let range = model.range();
    if n <= 2.0 * range {
        return Err(Error::BoxTooSmall { side: n, range });
    }
    let torus = Cube::torus(dim, n)?;
    let base = GridSpec::periodic(torus, settings.h)?;
    let cutoff = cutoff_for(v, settings);
    let volume = n.powi(dim as i32);
    let top = 2.0 * std::f64::consts::PI / n;
    let per = settings.exec.map_indexed(settings.realizations, |i| {
        let mut rng = RngState::new(seed).with_stream(i as u64).generator();
        let snaps = draw_snapshots(model, &torus, settings, &mut rng)?;
        let mut acc = vec![0.0; energies.len()];
        for omega in &snaps {
            let field = assemble_field(v, &omega.points, &base, Some(cutoff))?;
            let thetas: Vec<[f64; 3]> = match theta {
                ThetaSampling::Fixed { thetas } => thetas.clone(),
                ThetaSampling::Random { samples } => (0..*samples)
                    .map(|_| {
                        let mut t = [0.0; 3];
                        for c in t.iter_mut().take(dim) {
                            *c = top * rng.gen::<f64>();
                        }
                        t
                    })
                    .collect(),
            };
            for th in &thetas {
                let grid = GridSpec::bloch(torus, settings.h, *th)?;
                let h = build_hamiltonian(&grid, &field.values)?;
                for (a, &e) in acc.iter_mut().zip(energies) {
                    *a += h.count_at_most(e)?.count as f64 / volume / thetas.len() as f64;
                }
            }
        }
        Ok(acc.into_iter().map(|a| a / snaps.len() as f64).collect())
    });
    finish(energies, per, settings, n, dim, "periodic", theta.count(), seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub energy: f64,
    pub dirichlet: f64,
    pub dirichlet_stderr: f64,
    /// `N̂_per(−E−1)`.
    pub periodic_lower: f64,
    pub periodic_lower_stderr: f64,
    /// `N̂_per(−E+1)`.
    pub periodic_upper: f64,
    pub periodic_upper_stderr: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    pub all_hold: bool,
    pub note: String,
}

/// Checks `N̂_per(−E−1) − 3σ ≤ N̂_dir(−E) ≤ N̂_per(−E+1) + 3σ` for each `E`,
/// with `σ` the combined standard error of the two sides. The periodic run
/// uses generator streams disjoint from the Dirichlet run.
#[allow(clippy::too_many_arguments)]
pub fn sandwich_check(
    model: &InteractionModel,
    v: &SingleSitePotential,
    energies: &[f64],
    dim: usize,
    dirichlet_side: f64,
    n: f64,
    theta: &ThetaSampling,
    settings: &IdsSettings,
    seed: u64,
) -> Result<SandwichReport> {
    let dir_e: Vec<f64> = energies.iter().map(|e| -e).collect();
    let dir = estimate_ids_dirichlet(model, v, &dir_e, dim, dirichlet_side, settings, seed)?;
    let mut per_e = Vec::new();
    for e in energies {
        per_e.push(-e - 1.0);
        per_e.push(-e + 1.0);
    }
    let per = estimate_ids_periodic(model, v, &per_e, dim, n, theta, settings, seed ^ 0x005e_ed0f_9e41)?;
    let mut rows = Vec::new();
    for (k, &e) in energies.iter().enumerate() {
        let d = &dir[k];
        let lo = &per[2 * k];
        let hi = &per[2 * k + 1];
        let s_lo = (d.stderr.powi(2) + lo.stderr.powi(2)).sqrt();
        let s_hi = (d.stderr.powi(2) + hi.stderr.powi(2)).sqrt();
        let lower_margin = d.n_hat - (lo.n_hat - 3.0 * s_lo);
        let upper_margin = hi.n_hat + 3.0 * s_hi - d.n_hat;
        rows.push(SandwichRow {
            energy: e,
            dirichlet: d.n_hat,
            dirichlet_stderr: d.stderr,
            periodic_lower: lo.n_hat,
            periodic_lower_stderr: lo.stderr,
            periodic_upper: hi.n_hat,
            periodic_upper_stderr: hi.stderr,
            lower_margin,
            upper_margin,
            holds: lower_margin >= 0.0 && upper_margin >= 0.0,
        });
    }
    Ok(SandwichReport {
        all_hold: rows.iter().all(|r| r.holds),
        rows,
        note: "the additive e^{-E^nu} term is folded into the 3 sigma margin".into(),
    })
}

/// Least-squares fit of `log N̂(−E)` against a regressor in `g(E)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub regressor: Regressor,
    /// Energies that entered the fit.
    pub window: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub predicted: Option<f64>,
    pub ratio: Option<f64>,
    /// Number of zero estimates excluded from the fit.
    pub censored: usize,
}

/// Fit `log n_hat` against `regressor(g)` over the points with `n_hat > 0`.
pub fn fit_tail(
    energies: &[f64],
    n_hat: &[f64],
    g: &[f64],
    regressor: Regressor,
    predicted: Option<f64>,
) -> Result<TailFit> {
    if energies.len() != n_hat.len() || energies.len() != g.len() {
        return Err(invalid("points", "energies, estimates and couplings must align"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut window = Vec::new();
    let mut censored = 0;
    for i in 0..energies.len() {
        if n_hat[i] > 0.0 {
            xs.push(regressor.eval(g[i]));
            ys.push(n_hat[i].ln());
            window.push(energies[i]);
        } else {
            censored += 1;
        }
    }
    if xs.len() < 4 {
        return Err(Error::EmptyWindow {
            usable: xs.len(),
            needed: 4,
        });
    }
    let f = ols(&xs, &ys).ok_or(Error::EmptyWindow {
        usable: xs.len(),
        needed: 4,
    })?;
    Ok(TailFit {
        regressor,
        window,
        slope: f.slope,
        intercept: f.intercept,
        r_squared: f.r_squared.clamp(0.0, 1.0),
        predicted,
        ratio: predicted.map(|p| f.slope / p),
        censored,
    })
}

/// Residual sum of squares for each candidate slope with the intercept
/// refit; smaller is better supported by the data.
pub fn compare_slopes(n_hat: &[f64], g: &[f64], regressor: Regressor, candidates: &[f64]) -> Vec<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = n_hat
        .iter()
        .zip(g)
        .filter(|(n, _)| **n > 0.0)
        .map(|(n, g)| (regressor.eval(*g), n.ln()))
        .unzip();
    candidates.iter().map(|&s| rss_fixed_slope(&xs, &ys, s)).collect()
}

/// End-to-end tail experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub dim: usize,
    pub model: InteractionModel,
    pub potential: SingleSitePotential,
    /// Depths `E > 0`; the IDS is estimated at `−E`.
    pub energies: Vec<f64>,
    pub side: f64,
    pub ids: IdsSettings,
    /// Grid spacing for the `g(E)` solves; defaults to `ids.h`.
    #[serde(default)]
    pub g_h: Option<f64>,
    #[serde(default = "g_tol")]
    pub g_tol: f64,
}

fn g_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCandidate {
    pub name: String,
    pub slope: f64,
    pub rss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailExperiment {
    pub estimates: Vec<IdsEstimate>,
    pub g: Vec<f64>,
    pub fit: TailFit,
    pub report: ConstantReport,
    /// Fixed-slope comparison; first entry is the prediction.
    pub candidates: Vec<SlopeCandidate>,
}

impl TailExperiment {
    pub fn preferred(&self) -> Option<&SlopeCandidate> {
        self.candidates.iter().min_by(|a, b| a.rss.total_cmp(&b.rss))
    }

    pub fn ids_csv(&self) -> String {
        ids_csv(&self.estimates)
    }

    pub fn fit_csv(&self) -> String {
        let f = &self.fit;
        format!(
            "regressor,slope,predicted,ratio,R2\n{},{:e},{},{},{:e}\n",
            f.regressor.name(),
            f.slope,
            f.predicted.map_or("nan".into(), |p| format!("{p:e}")),
            f.ratio.map_or("nan".into(), |p| format!("{p:e}")),
            f.r_squared
        )
    }
}

/// `ids.csv`: `E, N_hat, stderr, realizations`.
pub fn ids_csv(estimates: &[IdsEstimate]) -> String {
    let mut s = String::from("E,N_hat,stderr,realizations\n");
    for e in estimates {
        s.push_str(&format!("{:e},{:e},{:e},{}\n", e.energy, e.n_hat, e.stderr, e.realizations));
    }
    s
}

/// Estimate `N̂(−E)` on the schedule, compute `g(E)` (or `g₃(E)` in the
/// multiwell regime), and fit against the predicted regressor.
pub fn run_tail_experiment(cfg: &TailConfig, seed: u64) -> Result<TailExperiment> {
    let report = predicted_constants(&cfg.model, &cfg.potential, cfg.dim)?;
    let g_potential = match report.regressor {
        Regressor::G3Squared => {
            let w = cfg
                .potential
                .wells
                .first()
                .ok_or_else(|| invalid("potential", "multiwell regime needs wells"))?;
            SingleSitePotential::single(w.profile.clone())
        }
        _ => cfg.potential.clone(),
    };
    let mut solver = GroundSolver::new(cfg.dim, cfg.g_h.unwrap_or(cfg.ids.h));
    solver.exec = cfg.ids.exec;
    let g: Vec<f64> = cfg
        .ids
        .exec
        .map_indexed(cfg.energies.len(), |i| solver.g_of_e(&g_potential, cfg.energies[i], cfg.g_tol))
        .into_iter()
        .collect::<Result<_>>()?;
    let neg: Vec<f64> = cfg.energies.iter().map(|e| -e).collect();
    let estimates = estimate_ids_dirichlet(&cfg.model, &cfg.potential, &neg, cfg.dim, cfg.side, &cfg.ids, seed)?;
    let n_hat: Vec<f64> = estimates.iter().map(|e| e.n_hat).collect();
    let fit = fit_tail(&cfg.energies, &n_hat, &g, report.regressor, Some(report.predicted_slope))?;
    let mut named = vec![("predicted".to_string(), report.predicted_slope)];
    if let (Some(a0), Some(_)) = (report.a0, &report.multiwell_weight) {
        let b_max = cfg.potential.wells.iter().map(|w| w.b * w.b).fold(0.0, f64::max);
        named.push(("single_cluster".into(), -a0 / (2.0 * b_max)));
    }
    let slopes: Vec<f64> = named.iter().map(|c| c.1).collect();
    let rss = compare_slopes(&n_hat, &g, report.regressor, &slopes);
    let candidates = named
        .into_iter()
        .zip(rss)
        .map(|((name, slope), rss)| SlopeCandidate { name, slope, rss })
        .collect();
    Ok(TailExperiment {
        estimates,
        g,
        fit,
        report,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_exact_fit() {
        let g = [1.0, 2.0, 3.0, 4.0, 5.0];
        let n: Vec<f64> = g.iter().map(|g: &f64| (-3.0 * g * g).exp()).collect();
        let f = fit_tail(&[1.0, 2.0, 3.0, 4.0, 5.0], &n, &g, Regressor::GSquared, Some(-3.0)).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.ratio.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn model_selection_prefers_true_regressor() {
        let g: Vec<f64> = (2..=9).map(|k| k as f64).collect();
        let e: Vec<f64> = g.clone();
        let n: Vec<f64> = g.iter().map(|g| (-g * g.ln()).exp()).collect();
        let a = fit_tail(&e, &n, &g, Regressor::GLogG, None).unwrap();
        let b = fit_tail(&e, &n, &g, Regressor::GSquared, None).unwrap();
        assert!(b.r_squared < a.r_squared);
    }

    #[test]
    fn censoring_and_empty_window() {
        let g = [1.0, 2.0, 3.0, 4.0, 5.0];
        let n = [1e-1, 1e-2, 0.0, 1e-4, 1e-5];
        let f = fit_tail(&g, &n, &g, Regressor::GSquared, None).unwrap();
        assert_eq!(f.censored, 1);
        assert_eq!(f.window, vec![1.0, 2.0, 4.0, 5.0]);
        let n = [1e-1, 0.0, 0.0, 1e-4, 1e-5];
        assert!(matches!(
            fit_tail(&g, &n, &g, Regressor::GSquared, None),
            Err(Error::EmptyWindow { usable: 3, needed: 4 })
        ));
    }

    #[test]
    fn fixed_slope_comparison() {
        let g: Vec<f64> = (1..=6).map(|k| k as f64).collect();
        let n: Vec<f64> = g.iter().map(|g| (2.0 - 0.25 * g * g).exp()).collect();
        let rss = compare_slopes(&n, &g, Regressor::GSquared, &[-0.25, -0.5]);
        assert!(rss[0] < 1e-20 && rss[1] > 1.0);
    }
}
