//! Schedules and weighted capacity on top of conflict graphs.
//!
//! Every slot or set produced here is certified by an SINR check before it is
//! returned. A color class that fails certification is split first-fit into
//! certified parts, and the number of extra slots is reported.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::conflict::{build_graph_with, conflicts, SublinearF};
use crate::error::{Error, Result};
use crate::graphalg::{greedy_color, local_ratio_mwis, Graph};
use crate::model::{Instance, Link, LinkId};
use crate::par::Execution;
use crate::sinr::{is_p_feasible, kesselheim_sufficient, spectral_feasibility, FeasibilityReport, Method, PowerAssignment};

/// How slots are certified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PowerMode {
    /// Fixed oblivious power `P_tau`, checked by direct SIR.
    Oblivious { tau: f64 },
    /// Any powers: the interference-measure test, else the spectral oracle.
    Global,
}

/// Certifies one set of links under `mode`.
pub fn certify(inst: &Instance, s: &[LinkId], mode: PowerMode) -> Result<FeasibilityReport> {
    match mode {
        PowerMode::Oblivious { tau } => is_p_feasible(inst, s, &PowerAssignment::Oblivious { tau }),
        PowerMode::Global => {
            let mut rep = spectral_feasibility(inst, s)?;
            // Shared points make the measure undefined; the oracle alone decides then.
            if kesselheim_sufficient(inst, s).unwrap_or(false) {
                if !rep.feasible {
                    return Err(Error::Internal("interference measure and spectral oracle disagree".into()));
                }
                rep.method = Method::KesselheimSufficient;
            }
            Ok(rep)
        }
    }
}

/// A certified group of links sharing a time slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub links: Vec<LinkId>,
    pub report: FeasibilityReport,
}

/// A partition of links into certified slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub slots: Vec<Slot>,
    /// Number of colors of the conflict-graph coloring before certification.
    pub colors: usize,
    /// Extra slots created by splitting classes that failed certification.
    pub splits: usize,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Splits `links` first-fit, in the given order, into certified parts.
pub fn split_certified(inst: &Instance, links: &[LinkId], mode: PowerMode) -> Result<Vec<Slot>> {
    let mut parts: Vec<Slot> = Vec::new();
    for &v in links {
        let mut placed = false;
        for part in parts.iter_mut() {
            let mut trial = part.links.clone();
            trial.push(v);
            let rep = certify(inst, &trial, mode)?;
            if rep.feasible {
                *part = Slot { links: trial, report: rep };
                placed = true;
                break;
            }
        }
        if !placed {
            let rep = certify(inst, &[v], mode)?;
            if !rep.feasible {
                return Err(Error::Internal(format!("link {v} cannot be certified even alone")));
            }
            parts.push(Slot { links: vec![v], report: rep });
        }
    }
    Ok(parts)
}

/// Colors `G_hi` first-fit in sensitivity order and turns each color class into
/// a certified slot, splitting classes that fail.
pub fn tdma_schedule(inst: &Instance, f_hi: SublinearF, mode: PowerMode) -> Result<Schedule> {
    tdma_schedule_with(inst, f_hi, mode, Execution::default())
}

/// [`tdma_schedule`] with an explicit execution mode.
pub fn tdma_schedule_with(inst: &Instance, f_hi: SublinearF, mode: PowerMode, exec: Execution) -> Result<Schedule> {
    let g = build_graph_with(inst, f_hi, false, exec)?;
    let coloring = greedy_color(&g.graph, &inst.ids(), &g.order);
    let rank = g.rank();
    let classes: Vec<Vec<LinkId>> = coloring
        .classes()
        .into_iter()
        .map(|mut c| {
            c.sort_by_key(|&v| rank[v]);
            c
        })
        .collect();
    let certified = exec.map(classes.len(), |k| -> Result<Vec<Slot>> {
        let rep = certify(inst, &classes[k], mode)?;
        if rep.feasible {
            Ok(vec![Slot { links: classes[k].clone(), report: rep }])
        } else {
            split_certified(inst, &classes[k], mode)
        }
    });
    let mut slots = Vec::new();
    let mut splits = 0;
    for parts in certified {
        let parts = parts?;
        splits += parts.len() - 1;
        slots.extend(parts);
    }
    Ok(Schedule { slots, colors: coloring.num_colors, splits })
}

/// Output of [`mwisl_solve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MwislResult {
    pub set: Vec<LinkId>,
    pub weight: f64,
    pub k_observed: usize,
    pub report: FeasibilityReport,
    /// Set when certification failed and only the heaviest certified part was kept.
    pub degraded: bool,
}

/// Weighted capacity: local-ratio independent set of `G_hi`, then certification.
/// `weights` defaults to the link weights of the instance.
pub fn mwisl_solve(inst: &Instance, f_hi: SublinearF, weights: Option<&[f64]>, mode: PowerMode) -> Result<MwislResult> {
    let g = build_graph_with(inst, f_hi, false, Execution::default())?;
    let own: Vec<f64>;
    let w = match weights {
        Some(w) => w,
        None => {
            own = inst.links().iter().map(|l| l.weight).collect();
            &own
        }
    };
    let r = local_ratio_mwis(&g.graph, &g.order, w)?;
    let rep = certify(inst, &r.set, mode)?;
    if rep.feasible {
        return Ok(MwislResult { set: r.set, weight: r.weight, k_observed: r.k_observed, report: rep, degraded: false });
    }
    let parts = split_certified(inst, &r.set, mode)?;
    let weight_of = |s: &Slot| s.links.iter().map(|&i| w[i]).sum::<f64>();
    let best = parts
        .into_iter()
        .max_by(|a, b| weight_of(a).total_cmp(&weight_of(b)))
        .ok_or_else(|| Error::Internal("splitting produced no parts".into()))?;
    let weight = weight_of(&best);
    let mut set = best.links;
    set.sort_unstable();
    Ok(MwislResult { set, weight, k_observed: r.k_observed, report: best.report, degraded: true })
}

/// Online scheduling: each arriving link joins the first slot holding none of
/// its `G_hi` neighbors. If that slot then fails certification, or no such
/// slot exists, the link opens a new slot. Decisions are never revisited.
pub fn online_schedule(inst: &Instance, arrivals: &[LinkId], f_hi: SublinearF, mode: PowerMode) -> Result<Schedule> {
    f_hi.validate()?;
    inst.check_subset(arrivals)?;
    let mut slots: Vec<Slot> = Vec::new();
    let mut colors = 0;
    let mut splits = 0;
    for &v in arrivals {
        let free = slots.iter().position(|s| s.links.iter().all(|&u| !conflicts(inst, &f_hi, false, u, v)));
        let mut placed = false;
        if let Some(k) = free {
            let mut trial = slots[k].links.clone();
            trial.push(v);
            let rep = certify(inst, &trial, mode)?;
            if rep.feasible {
                slots[k] = Slot { links: trial, report: rep };
                placed = true;
            } else {
                splits += 1;
            }
        }
        if !placed {
            let rep = certify(inst, &[v], mode)?;
            if !rep.feasible {
                return Err(Error::Internal(format!("link {v} cannot be certified even alone")));
            }
            if free.is_none() {
                colors += 1;
            }
            slots.push(Slot { links: vec![v], report: rep });
        }
    }
    Ok(Schedule { slots, colors, splits })
}

/// One (sender antenna, receiver antenna, channel) copy of an original link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualLink {
    pub original: LinkId,
    pub channel: u32,
    pub sender_antenna: usize,
    pub receiver_antenna: usize,
}

/// Output of [`mcma_expand`]. Virtual links are numbered in processing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmaExpansion {
    pub links: Vec<VirtualLink>,
    pub graph: Graph,
    pub order: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Expands links over antennas and channels.
///
/// Link `i` gets one virtual copy per sender antenna, receiver antenna and
/// channel common to both endpoints. Copies of distinct originals are
/// adjacent when they use the same antenna of the same node, or when they
/// share a channel and their originals are adjacent in `G_hi`. Copies of the
/// same original are never adjacent. The order follows the originals'
/// sensitivity order, then channel and antenna indices.
pub fn mcma_expand(inst: &Instance, f_hi: SublinearF, antennas: &[usize], channels: &[BTreeSet<u32>]) -> Result<McmaExpansion> {
    let n_nodes = inst.space().n_nodes();
    if antennas.len() != n_nodes || channels.len() != n_nodes {
        return Err(Error::Invalid(format!("need antenna counts and channel sets for all {n_nodes} nodes")));
    }
    if let Some(u) = antennas.iter().position(|&a| a == 0) {
        return Err(Error::Invalid(format!("node {u} has no antenna")));
    }
    let g = build_graph_with(inst, f_hi, false, Execution::default())?;
    let mut links = Vec::new();
    let mut warnings = Vec::new();
    for &i in &g.order {
        let Link { s, r, .. } = *inst.link(i);
        let common: Vec<u32> = channels[s].intersection(&channels[r]).copied().collect();
        if common.is_empty() {
            warnings.push(format!("link {i} has no channel common to both endpoints"));
        }
        for &c in &common {
            for a in 0..antennas[s] {
                for b in 0..antennas[r] {
                    links.push(VirtualLink { original: i, channel: c, sender_antenna: a, receiver_antenna: b });
                }
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let ends = |v: &VirtualLink| {
        let l = inst.link(v.original);
        [(l.s, v.sender_antenna), (l.r, v.receiver_antenna)]
    };
    let n = links.len();
    let upper = Execution::default().map(n, |u| {
        let (lu, eu) = (&links[u], ends(&links[u]));
        (u + 1..n)
            .filter(|&v| {
                let lv = &links[v];
                if lu.original == lv.original {
                    return false;
                }
                let ev = ends(lv);
                let shared = eu.iter().any(|x| ev.contains(x));
                shared || (lu.channel == lv.channel && g.graph.has_edge(lu.original, lv.original))
            })
            .collect()
    });
    Ok(McmaExpansion { links, graph: Graph::from_upper(upper), order: (0..n).collect(), warnings })
}

/// Utility as a function of achieved SIR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Utility {
    /// Right-continuous steps: utility `u_k` once SIR reaches `x_k`. Pairs are `(x_k, u_k)`.
    Steps { points: Vec<(f64, f64)> },
    /// `scale * log2(1 + x)` for SIR `x` in `[1, max_sir]`, 0 below 1.
    Shannon { scale: f64, max_sir: f64 },
}

impl Utility {
    pub fn validate(&self) -> Result<()> {
        match self {
            Utility::Steps { points } => {
                let ok = points.iter().all(|&(x, u)| x.is_finite() && u.is_finite() && u >= 0.0)
                    && points.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1);
                if !ok {
                    return Err(Error::Invalid("step utility needs increasing thresholds and nondecreasing values".into()));
                }
                Ok(())
            }
            Utility::Shannon { scale, max_sir } => {
                if !(*scale > 0.0 && *max_sir >= 1.0 && max_sir.is_finite()) {
                    return Err(Error::Invalid("Shannon utility needs scale > 0 and max_sir >= 1".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Utility::Steps { points } => points.iter().rev().find(|p| p.0 <= x).map_or(0.0, |p| p.1),
            Utility::Shannon { scale, max_sir } => {
                if x < 1.0 {
                    0.0
                } else {
                    scale * (1.0 + x.min(*max_sir)).log2()
                }
            }
        }
    }

    /// Smallest SIR at which the utility reaches `target`, if it ever does.
    pub fn min_sir_for(&self, target: f64) -> Option<f64> {
        match self {
            Utility::Steps { points } => points.iter().find(|p| p.1 >= target).map(|p| p.0),
            Utility::Shannon { scale, max_sir } => {
                let x = ((target / scale).exp2() - 1.0).max(1.0);
                (x <= *max_sir).then_some(x)
            }
        }
    }

    /// Range of positive utility values, `(smallest, largest)`.
    fn range(&self) -> Option<(f64, f64)> {
        match self {
            Utility::Steps { points } => {
                let lo = points.iter().map(|p| p.1).find(|&u| u > 0.0)?;
                Some((lo, points.last()?.1))
            }
            Utility::Shannon { scale, max_sir } => Some((self.eval(1.0), scale * (1.0 + max_sir).log2())),
        }
    }
}

/// Output of [`rate_control_replicas`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReplicas {
    /// Replicas on the original points, with per-level thresholds and weights.
    pub instance: Instance,
    /// Original link of each replica.
    pub original: Vec<LinkId>,
    /// Dyadic level `k` of each replica; its weight is `2^(k - 1)`.
    pub level: Vec<i32>,
}

/// Replaces each link by co-located replicas, one per dyadic utility level.
///
/// Level `k` needs SIR `beta_k = min{x : u(x) >= 2^(k - 1)}` and weighs
/// `2^(k - 1)`. Levels with `beta_k < 1` keep threshold 1 and weight 0.
/// Levels that share a threshold keep only the heaviest, and at most
/// `max_levels` of the top levels are kept per link (default `ceil(log2 n) + 1`).
pub fn rate_control_replicas(inst: &Instance, utilities: &[Utility], max_levels: Option<usize>) -> Result<RateReplicas> {
    if utilities.len() != inst.n_links() {
        return Err(Error::Invalid(format!("need one utility per link, got {} for {}", utilities.len(), inst.n_links())));
    }
    let n = inst.n_links().max(1);
    let cap = max_levels.unwrap_or(((n as f64).log2().ceil() as usize) + 1).max(1);
    let mut links = Vec::new();
    let mut original = Vec::new();
    let mut level = Vec::new();
    for (i, u) in utilities.iter().enumerate() {
        u.validate()?;
        let Some((u_min, u_max)) = u.range() else { continue };
        let k_lo = u_min.log2().floor() as i32 + 1;
        let k_hi = u_max.log2().floor() as i32 + 1;
        // (threshold, weight, level), keeping the heaviest level per threshold.
        let mut reps: Vec<(f64, f64, i32)> = Vec::new();
        for k in k_lo..=k_hi {
            let w = 2f64.powi(k - 1);
            let Some(b) = u.min_sir_for(w) else { continue };
            let (b, w) = if b < 1.0 { (1.0, 0.0) } else { (b, w) };
            match reps.iter_mut().find(|r| r.0 == b) {
                Some(r) if r.1 < w => *r = (b, w, k),
                Some(_) => {}
                None => reps.push((b, w, k)),
            }
        }
        reps.sort_by(|a, b| b.1.total_cmp(&a.1));
        reps.truncate(cap);
        reps.sort_by_key(|r| r.2);
        let base = inst.link(i);
        for (b, w, k) in reps {
            links.push(Link { s: base.s, r: base.r, beta: b, weight: w, noise: base.noise });
            original.push(i);
            level.push(k);
        }
    }
    let mut instance = Instance::new(inst.metric().clone(), inst.space().clone(), links)?.with_floor(inst.floor());
    instance = instance.with_provenance(serde_json::json!({ "kind": "rate-replicas", "original": original }));
    Ok(RateReplicas { instance, original, level })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MetricContext, Space};

    fn row(n: usize, gap: f64) -> Instance {
        let mut pts = Vec::new();
        let mut links = Vec::new();
        for k in 0..n {
            let x = k as f64 * gap;
            pts.push(vec![x, 0.0]);
            pts.push(vec![x + 1.0, 0.0]);
            links.push(Link::new(2 * k, 2 * k + 1).with_weight(1.0 + k as f64));
        }
        Instance::new(MetricContext::euclidean(2, 3.0), Space::euclidean(&pts).unwrap(), links).unwrap()
    }

    #[test]
    fn single_link_schedules_in_one_slot() {
        let inst = row(1, 1.0);
        for mode in [PowerMode::Global, PowerMode::Oblivious { tau: 0.8 }] {
            let s = tdma_schedule(&inst, SublinearF::power(2.0, 0.8), mode).unwrap();
            assert_eq!(s.len(), 1);
            assert_eq!(s.splits, 0);
        }
    }

    #[test]
    fn every_link_lands_in_exactly_one_certified_slot() {
        let inst = row(12, 3.0);
        let s = tdma_schedule(&inst, SublinearF::power(1.0, 0.8), PowerMode::Global).unwrap();
        let mut seen: Vec<usize> = s.slots.iter().flat_map(|x| x.links.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, inst.ids());
        assert!(s.slots.iter().all(|x| x.report.feasible));
        let o = online_schedule(&inst, &inst.ids(), SublinearF::power(1.0, 0.8), PowerMode::Global).unwrap();
        assert_eq!(o.slots.iter().map(|x| x.links.len()).sum::<usize>(), 12);
    }

    #[test]
    fn mwisl_output_is_certified() {
        let inst = row(8, 2.5);
        let r = mwisl_solve(&inst, SublinearF::power(2.0, 0.8), None, PowerMode::Global).unwrap();
        assert!(r.report.feasible);
        assert!(r.weight > 0.0);
    }

    #[test]
    fn single_antenna_single_channel_expansion_matches_g_hi() {
        let inst = row(5, 2.0);
        let f = SublinearF::power(2.0, 0.8);
        let n_nodes = inst.space().n_nodes();
        let ch = vec![BTreeSet::from([0u32]); n_nodes];
        let e = mcma_expand(&inst, f, &vec![1; n_nodes], &ch).unwrap();
        let g = build_graph_with(&inst, f, false, Execution::Sequential).unwrap();
        assert_eq!(e.links.len(), 5);
        for u in 0..5 {
            for v in 0..5 {
                if u != v {
                    assert_eq!(e.graph.has_edge(u, v), g.graph.has_edge(e.links[u].original, e.links[v].original));
                }
            }
        }
    }

    #[test]
    fn empty_channel_intersection_warns() {
        let inst = row(1, 1.0);
        let ch = vec![BTreeSet::from([0u32]), BTreeSet::from([1u32])];
        let e = mcma_expand(&inst, SublinearF::One, &[1, 1], &ch).unwrap();
        assert!(e.links.is_empty());
        assert_eq!(e.warnings.len(), 1);
    }

    #[test]
    fn replica_levels() {
        let inst = row(1, 1.0);
        let steps = Utility::Steps { points: vec![(1.0, 1.0), (2.0, 2.0), (4.0, 4.0), (8.0, 8.0)] };
        let r = rate_control_replicas(&inst, &[steps], Some(8)).unwrap();
        let w: Vec<f64> = r.instance.links().iter().map(|l| l.weight).collect();
        let b: Vec<f64> = r.instance.links().iter().map(|l| l.beta).collect();
        assert_eq!(w, vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(b, vec![1.0, 2.0, 4.0, 8.0]);
        let flat = Utility::Steps { points: vec![(1.0, 5.0)] };
        let r = rate_control_replicas(&inst, &[flat], Some(8)).unwrap();
        assert_eq!(r.instance.n_links(), 1);
        assert_eq!(r.instance.link(0).weight, 4.0);
    }
}
