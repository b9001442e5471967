//! Calibration and experiment drivers with reproducible reports.
//!
//! Trial `t` under master seed `s` uses the instance seed
//! [`trial_seed(s, t)`](crate::generators::trial_seed) and a separate order
//! stream derived from it, so every record can be replayed on its own.
//! Trials run through [`Execution`] and are aggregated in trial order.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::conflict::{build_graph_with, SublinearF};
use crate::error::{Error, Result};
use crate::generators::{gen_ndependence, rng_for, splitmix64, trial_seed, GenSpec};
use crate::graphalg::{greedy_color, Graph};
use crate::model::{Instance, LinkId};
use crate::par::Execution;
use crate::scheduling::{tdma_schedule_with, PowerMode};
use crate::sinr::{default_delta, is_bidirectionally_p_feasible, kesselheim_i, kesselheim_sufficient, spectral_feasibility, tau_interval};

/// CSV header of tightness reports; column order is fixed.
pub const CSV_HEADER: [&str; 11] = ["trial", "seed", "n", "delta", "fstar", "chi_hi", "slots", "splits", "IL", "feasible", "ms"];

/// Growth factor of the calibration grid, giving relative precision 0.05.
pub const GAMMA_STEP: f64 = 1.05;
/// Largest `gamma` calibration will try.
pub const GAMMA_MAX: f64 = 1e6;
/// Factor applied to the calibrated grid value.
pub const GAMMA_SAFETY: f64 = 1.25;

/// Seed of the vertex-order stream for an instance seed.
pub fn order_seed(instance_seed: u64) -> u64 {
    splitmix64(instance_seed ^ 0x6F72_6465_725F_7273)
}

/// Uniformly random permutation of `0..n` for a seed.
pub fn random_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed));
    order
}

/// Maximal independent set built greedily along `order`.
pub fn greedy_mis(g: &Graph, order: &[usize]) -> Vec<usize> {
    let mut blocked = vec![false; g.n()];
    let mut set = Vec::new();
    for &v in order {
        if !blocked[v] {
            set.push(v);
            blocked[v] = true;
            for &u in g.neighbors(v) {
                blocked[u] = true;
            }
        }
    }
    set.sort_unstable();
    set
}

/// Certificate a calibrated independent set must pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationTarget {
    /// Bidirectional feasibility under `P_tau`, `tau` the default midpoint for `f`.
    PTauFeasible,
    /// Interference measure below `1 / (12 * 3^alpha)`.
    Kesselheim,
}

/// Result of [`calibrate_gamma`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Calibrated constant, safety factor included.
    pub gamma: f64,
    /// Grid value all trials pass at, before the safety factor.
    pub grid_gamma: f64,
    /// Smallest passing grid value of each trial.
    pub per_trial: Vec<f64>,
    pub f: SublinearF,
    pub target: CalibrationTarget,
}

/// `tau` used by the oblivious-power target: the interval midpoint for a
/// power-law `f`, otherwise the midpoint for the default exponent.
pub fn default_tau(f: &SublinearF, alpha: f64, m: f64) -> Result<f64> {
    let delta = match f {
        SublinearF::Power { delta, .. } => *delta,
        _ => default_delta(alpha, m),
    };
    Ok(tau_interval(alpha, m, delta)?.tau)
}

struct Trial {
    instance: Instance,
    order: Vec<usize>,
}

fn load_trial(spec: &GenSpec, master: u64, t: u64) -> Result<Trial> {
    let seed = trial_seed(master, t);
    let instance = spec.with_seed(seed).generate()?.instance;
    let order = random_order(instance.n_links(), order_seed(seed));
    Ok(Trial { instance, order })
}

fn passes(trial: &Trial, f: SublinearF, target: CalibrationTarget) -> Result<bool> {
    let inst = &trial.instance;
    let g = build_graph_with(inst, f, false, Execution::Sequential)?;
    let s = greedy_mis(&g.graph, &trial.order);
    match target {
        CalibrationTarget::PTauFeasible => is_bidirectionally_p_feasible(inst, &s, default_tau(&f, inst.alpha(), inst.m())?),
        CalibrationTarget::Kesselheim => kesselheim_sufficient(inst, &s),
    }
}

fn grid(k: usize) -> f64 {
    GAMMA_STEP.powi(k as i32)
}

fn grid_len() -> usize {
    (GAMMA_MAX.ln() / GAMMA_STEP.ln()).floor() as usize
}

/// Smallest grid index at which the trial passes, by bisection over the grid.
fn trial_threshold(trial: &Trial, f: SublinearF, target: CalibrationTarget) -> Result<Option<usize>> {
    let top = grid_len();
    if passes(trial, f.with_gamma(grid(0)), target)? {
        return Ok(Some(0));
    }
    if !passes(trial, f.with_gamma(grid(top)), target)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0, top);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if passes(trial, f.with_gamma(grid(mid)), target)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Finds the least `gamma` on the grid `1.05^k` such that the greedy maximal
/// independent set of `G_{gamma f}` passes `target` in every trial, and
/// returns it times [`GAMMA_SAFETY`].
///
/// Each trial is bisected separately. Starting at the largest per-trial value,
/// the grid is scanned upward until all trials pass at once, which keeps the
/// result monotone when trials are added.
pub fn calibrate_gamma(spec: &GenSpec, f: SublinearF, trials: usize, target: CalibrationTarget, master_seed: u64, exec: Execution) -> Result<Calibration> {
    if trials == 0 {
        return Err(Error::Invalid("calibration needs at least one trial".into()));
    }
    if f == SublinearF::One {
        return Err(Error::Invalid("f = 1 has no constant to calibrate".into()));
    }
    f.validate()?;
    let loaded = exec.map(trials, |t| load_trial(spec, master_seed, t as u64));
    let loaded: Vec<Trial> = loaded.into_iter().collect::<Result<_>>()?;
    let thresholds = exec.map(trials, |t| trial_threshold(&loaded[t], f, target));
    let mut per_trial = Vec::with_capacity(trials);
    let mut start = 0;
    for (t, th) in thresholds.into_iter().enumerate() {
        match th? {
            Some(k) => {
                start = start.max(k);
                per_trial.push(grid(k));
            }
            None => return Err(Error::Calibration(format!("trial {t} fails even at gamma = {GAMMA_MAX}"))),
        }
    }
    for k in start..=grid_len() {
        let g = f.with_gamma(grid(k));
        let ok = exec.map(trials, |t| passes(&loaded[t], g, target));
        if ok.into_iter().collect::<Result<Vec<bool>>>()?.into_iter().all(|b| b) {
            return Ok(Calibration { gamma: GAMMA_SAFETY * grid(k), grid_gamma: grid(k), per_trial, f, target });
        }
    }
    Err(Error::Calibration(format!("no gamma up to {GAMMA_MAX} passes all trials at once")))
}

/// Configuration of [`run_tightness_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessConfig {
    pub spec: GenSpec,
    pub f_lo: SublinearF,
    pub f_hi: SublinearF,
    pub trials: usize,
    pub master_seed: u64,
    pub mode: PowerMode,
    /// Record wall-clock milliseconds per trial (otherwise 0).
    pub timing: bool,
}

/// One tightness trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    /// Size of the sampled independent set.
    pub n: usize,
    /// Sensitivity diversity of the set.
    pub delta: f64,
    /// `f_hi*` at `delta`.
    pub fstar: u32,
    /// Greedy colors of `G_hi` restricted to the set.
    pub chi_hi: usize,
    pub slots: usize,
    pub splits: usize,
    #[serde(rename = "IL", with = "crate::nonfinite::one")]
    pub il: f64,
    /// Spectral verdict on the whole set.
    pub feasible: bool,
    pub ms: u64,
}

/// Aggregates over all trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub max_ratio: f64,
    pub mean_ratio: f64,
    #[serde(with = "crate::nonfinite::one")]
    pub max_il: f64,
    pub feasible_fraction: f64,
}

/// Report of a tightness run. `timestamp` is excluded from `report_hash`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: TightnessConfig,
    pub spec_hash: String,
    pub records: Vec<TrialRecord>,
    pub aggregate: Aggregate,
    pub timestamp: u64,
    pub report_hash: String,
}

impl ExperimentReport {
    /// SHA-256 of the report with `timestamp` and `report_hash` removed.
    pub fn compute_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serialization cannot fail");
        if let Value::Object(map) = &mut v {
            map.remove("timestamp");
            map.remove("report_hash");
        }
        format!("{:x}", Sha256::digest(v.to_string().as_bytes()))
    }

    /// Writes the records as CSV rows, header first.
    pub fn to_csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = vec![CSV_HEADER.iter().map(|s| s.to_string()).collect()];
        for r in &self.records {
            rows.push(vec![
                r.trial.to_string(),
                r.seed.to_string(),
                r.n.to_string(),
                r.delta.to_string(),
                r.fstar.to_string(),
                r.chi_hi.to_string(),
                r.slots.to_string(),
                r.splits.to_string(),
                r.il.to_string(),
                r.feasible.to_string(),
                r.ms.to_string(),
            ]);
        }
        rows
    }
}

fn run_trial(cfg: &TightnessConfig, t: u64) -> Result<TrialRecord> {
    let start = Instant::now();
    let seed = trial_seed(cfg.master_seed, t);
    let inst = cfg.spec.with_seed(seed).generate()?.instance;
    let g_lo = build_graph_with(&inst, cfg.f_lo, false, Execution::Sequential)?;
    let s: Vec<LinkId> = greedy_mis(&g_lo.graph, &random_order(inst.n_links(), order_seed(seed)));
    let delta = inst.diversity(&s);
    let fstar = cfg.f_hi.star(delta, inst.alpha(), inst.m())?;
    let g_hi = build_graph_with(&inst, cfg.f_hi, false, Execution::Sequential)?;
    let chi_hi = greedy_color(&g_hi.graph, &s, &g_hi.order).num_colors;
    let sub = inst.subset(&s);
    let schedule = tdma_schedule_with(&sub, cfg.f_hi, cfg.mode, Execution::Sequential)?;
    let il = kesselheim_i(&inst, &s).unwrap_or(f64::INFINITY);
    let feasible = spectral_feasibility(&inst, &s)?.feasible;
    let ms = if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 };
    Ok(TrialRecord { trial: t, seed, n: s.len(), delta, fstar, chi_hi, slots: schedule.len(), splits: schedule.splits, il, feasible, ms })
}

/// Samples a random greedy maximal independent set `S` of `G_lo` per trial and
/// records `chi_greedy(G_hi[S])` against `f_hi*(Delta(S))`.
pub fn run_tightness_experiment(cfg: &TightnessConfig, exec: Execution) -> Result<ExperimentReport> {
    cfg.f_lo.validate()?;
    cfg.f_hi.validate()?;
    let records: Vec<TrialRecord> = exec.map(cfg.trials, |t| run_trial(cfg, t as u64)).into_iter().collect::<Result<_>>()?;
    let ratios: Vec<f64> = records.iter().map(|r| r.chi_hi as f64 / r.fstar.max(1) as f64).collect();
    let count = records.len().max(1) as f64;
    let aggregate = Aggregate {
        max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        mean_ratio: ratios.iter().sum::<f64>() / count,
        max_il: records.iter().map(|r| r.il).fold(0.0, f64::max),
        feasible_fraction: records.iter().filter(|r| r.feasible).count() as f64 / count,
    };
    let timestamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut report = ExperimentReport { config: cfg.clone(), spec_hash: cfg.spec.hash(), records, aggregate, timestamp, report_hash: String::new() };
    report.report_hash = report.compute_hash();
    Ok(report)
}

/// One point of the lower-bound curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundPoint {
    pub n: usize,
    pub log2_delta: f64,
    /// `log2 log2 Delta`, or 0 when `Delta <= 2`.
    pub loglog_delta: f64,
    pub edges: usize,
    pub complete: bool,
    pub witness_feasible: bool,
}

/// Builds the chain construction for each `n` and checks that `G_f` is
/// complete while the every-other-link witness passes the spectral oracle.
pub fn lowerbound_curve(f: SublinearF, ns: &[usize], c: f64, beta: f64, alpha: f64) -> Result<Vec<LowerBoundPoint>> {
    ns.iter()
        .map(|&n| {
            let gen = gen_ndependence(n, f, c, beta, alpha)?;
            let g = build_graph_with(&gen.instance, f, false, Execution::Sequential)?;
            let log2_delta = gen.instance.diversity(&gen.instance.ids()).log2();
            Ok(LowerBoundPoint {
                n,
                log2_delta,
                loglog_delta: if log2_delta > 1.0 { log2_delta.log2() } else { 0.0 },
                edges: g.graph.edge_count(),
                complete: g.graph.edge_count() == n * (n - 1) / 2,
                witness_feasible: spectral_feasibility(&gen.instance, &gen.witness)?.feasible,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Family, RandomParams};

    fn random_spec(n: usize) -> GenSpec {
        GenSpec::new(Family::RandomEuclidean(RandomParams { n, side: 200.0, ..Default::default() }), 0)
    }

    #[test]
    fn greedy_mis_is_maximal() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (3, 4)]);
        let s = greedy_mis(&g, &[1, 0, 2, 3, 4]);
        assert_eq!(s, vec![1, 3]);
        assert!(g.is_independent(&s));
    }

    #[test]
    fn single_link_calibrates_to_lower_bound() {
        let cal = calibrate_gamma(&random_spec(1), SublinearF::power(1.0, 0.9), 3, CalibrationTarget::PTauFeasible, 1, Execution::Sequential).unwrap();
        assert_eq!(cal.grid_gamma, 1.0);
        assert_eq!(cal.gamma, GAMMA_SAFETY);
    }

    #[test]
    fn calibration_is_monotone_in_trials() {
        let spec = random_spec(40);
        let f = SublinearF::power(1.0, default_delta(3.0, 2.0));
        let few = calibrate_gamma(&spec, f, 3, CalibrationTarget::PTauFeasible, 9, Execution::Sequential).unwrap();
        let more = calibrate_gamma(&spec, f, 8, CalibrationTarget::PTauFeasible, 9, Execution::Sequential).unwrap();
        assert!(more.gamma >= few.gamma);
        assert_eq!(&more.per_trial[..3], &few.per_trial[..]);
    }

    #[test]
    fn tightness_report_replays() {
        let cfg = TightnessConfig {
            spec: random_spec(30),
            f_lo: SublinearF::One,
            f_hi: SublinearF::power(4.0, 0.8),
            trials: 4,
            master_seed: 3,
            mode: PowerMode::Global,
            timing: false,
        };
        let a = run_tightness_experiment(&cfg, Execution::Parallel).unwrap();
        let b = run_tightness_experiment(&cfg, Execution::Sequential).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.report_hash, b.report_hash);
        assert_eq!(a.to_csv_rows()[0].join(","), "trial,seed,n,delta,fstar,chi_hi,slots,splits,IL,feasible,ms");
    }

    #[test]
    fn lowerbound_small_chain() {
        let pts = lowerbound_curve(SublinearF::power(1.0, 0.5), &[2, 4], 2.0, 1.0, 3.0).unwrap();
        assert!(pts.iter().all(|p| p.complete && p.witness_feasible));
    }
}
