//! Threshold functions and the conflict graphs they induce.
//!
//! Two links `i, j` conflict in `G_f` when
//! `d_ij * d_ji < l_i * l_j * f(l_max / l_min)`, where `l` is sensitivity and
//! `l_max / l_min` is the ratio for the pair. In uniform mode the test is
//! `d(i, j) < l_min * f(l_max / l_min)` on the closest endpoints instead.
//! Both tests are strict, so ties are not edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphalg::{greedy_color, Graph};
use crate::model::{Instance, LinkId};
use crate::par::Execution;

/// Iteration cap for [`SublinearF::star`].
pub const FSTAR_MAX_ITER: usize = 1_000_000;

/// A nondecreasing threshold function `f: [1, inf) -> [1, inf)`. Logarithms are base 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SublinearF {
    /// `f(x) = 1`.
    One,
    /// `f(x) = gamma * x^delta`.
    Power { gamma: f64, delta: f64 },
    /// `f(x) = gamma * max(log^t x, 1)`.
    Polylog { gamma: f64, t: f64 },
    /// `f(x) = gamma * max(log^(2 / (alpha - m)) x, 1)`.
    Hatlog { gamma: f64 },
}

impl SublinearF {
    pub fn power(gamma: f64, delta: f64) -> Self {
        SublinearF::Power { gamma, delta }
    }

    pub fn polylog(gamma: f64, t: f64) -> Self {
        SublinearF::Polylog { gamma, t }
    }

    pub fn hatlog(gamma: f64) -> Self {
        SublinearF::Hatlog { gamma }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            SublinearF::One => 1.0,
            SublinearF::Power { gamma, .. } | SublinearF::Polylog { gamma, .. } | SublinearF::Hatlog { gamma } => gamma,
        }
    }

    /// Same kind and shape with a different constant factor.
    pub fn with_gamma(&self, g: f64) -> Self {
        match *self {
            SublinearF::One => SublinearF::One,
            SublinearF::Power { delta, .. } => SublinearF::Power { gamma: g, delta },
            SublinearF::Polylog { t, .. } => SublinearF::Polylog { gamma: g, t },
            SublinearF::Hatlog { .. } => SublinearF::Hatlog { gamma: g },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        match *self {
            SublinearF::One => Ok(()),
            SublinearF::Power { gamma, delta } => {
                if !(gamma.is_finite() && gamma >= 1.0) {
                    return bad(format!("gamma = {gamma} must be >= 1"));
                }
                if !(delta > 0.0 && delta < 1.0) {
                    return bad(format!("power exponent delta = {delta} must lie in (0, 1)"));
                }
                Ok(())
            }
            SublinearF::Polylog { gamma, t } => {
                if !(gamma.is_finite() && gamma >= 1.0) {
                    return bad(format!("gamma = {gamma} must be >= 1"));
                }
                if !(t.is_finite() && t > 0.0) {
                    return bad(format!("polylog exponent t = {t} must be positive"));
                }
                Ok(())
            }
            SublinearF::Hatlog { gamma } => {
                if !(gamma.is_finite() && gamma >= 1.0) {
                    return bad(format!("gamma = {gamma} must be >= 1"));
                }
                Ok(())
            }
        }
    }

    /// Evaluates `f(x)`. `alpha` and `m` are only read by the hatlog kind.
    #[inline]
    pub fn eval(&self, x: f64, alpha: f64, m: f64) -> f64 {
        match *self {
            SublinearF::One => 1.0,
            SublinearF::Power { gamma, delta } => gamma * x.powf(delta),
            SublinearF::Polylog { gamma, t } => gamma * log_floor(x, t),
            SublinearF::Hatlog { gamma } => gamma * log_floor(x, 2.0 / (alpha - m)),
        }
    }

    /// `x0 = sup{x >= 1 : f(x) >= x} + 1`, with the supremum located by
    /// bisection to 1e-9 and rounded up.
    pub fn x0(&self, alpha: f64, m: f64) -> Result<f64> {
        let f = |x: f64| self.eval(x, alpha, m);
        // Scan u = log2 x on a grid. Past `peak`, f(x) / x is decreasing in u,
        // so the first grid point beyond it with f(x) < x ends the scan and the
        // last grid point with f(x) >= x brackets the supremum.
        const STEP: f64 = 0.25;
        let peak = match *self {
            SublinearF::One | SublinearF::Power { .. } => 0.0,
            SublinearF::Polylog { t, .. } => t / std::f64::consts::LN_2,
            SublinearF::Hatlog { .. } => 2.0 / (alpha - m) / std::f64::consts::LN_2,
        };
        let mut last_ok = 0.0f64;
        let mut u = STEP;
        loop {
            if u > 1000.0 {
                return Err(Error::Domain(format!("{self:?} is not sublinear on [1, 2^1000]")));
            }
            let x = u.exp2();
            if f(x) >= x {
                last_ok = u;
            } else if u > peak {
                break;
            }
            u += STEP;
        }
        let (mut lo, mut hi) = (last_ok.exp2(), (last_ok + STEP).exp2());
        if f(lo) < lo {
            // Only possible at x = 1 for f(1) < 1, which validation rules out.
            return Ok(2.0);
        }
        while hi - lo > 1e-9 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi + 1.0)
    }

    /// Number of applications of `f` needed to bring `x` to at most `x0`
    /// (1 when `x <= x0` already).
    pub fn star(&self, x: f64, alpha: f64, m: f64) -> Result<u32> {
        if !(x >= 1.0) {
            return Err(Error::Domain(format!("f* is defined on x >= 1, got {x}")));
        }
        let x0 = self.x0(alpha, m)?;
        if x <= x0 {
            return Ok(1);
        }
        let mut y = self.eval(x, alpha, m);
        let mut c = 1u32;
        while y > x0 {
            if c as usize >= FSTAR_MAX_ITER {
                return Err(Error::Domain(format!("f* did not settle within {FSTAR_MAX_ITER} iterations")));
            }
            y = self.eval(y, alpha, m);
            c += 1;
        }
        Ok(c)
    }
}

#[inline]
fn log_floor(x: f64, t: f64) -> f64 {
    let l = x.log2();
    if l <= 1.0 {
        1.0
    } else {
        l.powf(t)
    }
}

/// Link ids sorted by nondecreasing sensitivity, ties broken by id.
pub fn sensitivity_order(inst: &Instance) -> Vec<LinkId> {
    let mut order = inst.ids();
    order.sort_by(|&a, &b| inst.sensitivity(a).total_cmp(&inst.sensitivity(b)).then(a.cmp(&b)));
    order
}

/// The conflict graph `G_f` of an instance together with its processing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflictGraph {
    pub graph: Graph,
    pub f: SublinearF,
    pub uniform_mode: bool,
    /// Nondecreasing sensitivity, ties by id.
    pub order: Vec<LinkId>,
}

impl ConflictGraph {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn rank(&self) -> Vec<usize> {
        let mut rank = vec![0; self.order.len()];
        for (k, &v) in self.order.iter().enumerate() {
            rank[v] = k;
        }
        rank
    }
}

/// Edge test for one pair of links.
#[inline]
pub fn conflicts(inst: &Instance, f: &SublinearF, uniform_mode: bool, i: LinkId, j: LinkId) -> bool {
    if inst.co_located(i, j) {
        return true;
    }
    let (li, lj) = (inst.sensitivity(i), inst.sensitivity(j));
    let (lo, hi) = if li <= lj { (li, lj) } else { (lj, li) };
    let fx = f.eval(hi / lo, inst.alpha(), inst.m());
    if uniform_mode {
        inst.link_distance(i, j) / lo < fx
    } else {
        (inst.d_sr(i, j) / li) * (inst.d_sr(j, i) / lj) < fx
    }
}

/// Builds `G_f` over all links of `inst`.
///
/// Links on identical positions are always adjacent: two such links can never
/// share a slot, and distances between them may be zero.
pub fn build_graph(inst: &Instance, f: SublinearF, uniform_mode: bool) -> Result<ConflictGraph> {
    build_graph_with(inst, f, uniform_mode, Execution::default())
}

/// [`build_graph`] with an explicit execution mode.
pub fn build_graph_with(inst: &Instance, f: SublinearF, uniform_mode: bool, exec: Execution) -> Result<ConflictGraph> {
    f.validate()?;
    if uniform_mode && !uniform_thresholds(inst) {
        return Err(Error::Precondition("uniform mode needs identical beta on every link".into()));
    }
    let n = inst.n_links();
    let upper = exec.map(n, |i| (i + 1..n).filter(|&j| conflicts(inst, &f, uniform_mode, i, j)).collect());
    Ok(ConflictGraph { graph: Graph::from_upper(upper), f, uniform_mode, order: sensitivity_order(inst) })
}

/// Whether every link has the same SINR threshold.
pub fn uniform_thresholds(inst: &Instance) -> bool {
    inst.links().windows(2).all(|w| w[0].beta == w[1].beta)
}

/// Whether `s` is independent in `g`.
pub fn is_independent(g: &ConflictGraph, s: &[LinkId]) -> bool {
    g.graph.is_independent(s)
}

/// Result of [`measure_tightness`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tightness {
    pub chi_hi: usize,
    pub fstar_bound: u32,
    pub delta: f64,
}

/// Colors `G_hi[s]` greedily in sensitivity order for a set `s` that is
/// independent in `G_lo`, and reports the count next to `f_hi*(Delta(s))`.
pub fn measure_tightness(inst: &Instance, s: &[LinkId], f_lo: SublinearF, f_hi: SublinearF) -> Result<Tightness> {
    inst.check_subset(s)?;
    let sub = inst.subset(s);
    let lo = build_graph_with(&sub, f_lo, false, Execution::Sequential)?;
    if lo.graph.edge_count() != 0 {
        return Err(Error::Precondition("set is not independent in the low-threshold graph".into()));
    }
    let hi = build_graph_with(&sub, f_hi, false, Execution::Sequential)?;
    let all = sub.ids();
    let chi_hi = greedy_color(&hi.graph, &all, &hi.order).num_colors;
    let delta = sub.diversity(&all);
    let fstar_bound = f_hi.star(delta, inst.alpha(), inst.m())?;
    Ok(Tightness { chi_hi, fstar_bound, delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Link, MetricContext, Space};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Independent f* oracle: iterate f from x until the value drops to x0.
    fn fstar_oracle(f: &SublinearF, x: f64, x0: f64) -> u32 {
        if x <= x0 {
            return 1;
        }
        let (mut v, mut c) = (f.eval(x, 3.0, 2.0), 1);
        while v > x0 {
            v = f.eval(v, 3.0, 2.0);
            c += 1;
        }
        c
    }

    #[test]
    fn fstar_of_square_root() {
        let f = SublinearF::power(1.0, 0.5);
        // x0 = 1^(1/(1 - 1/2)) + 1 = 2.
        assert_eq!(fstar_oracle(&f, 16.0, 2.0), 2);
        assert_eq!(fstar_oracle(&f, 65536.0, 2.0), 4);
        assert_eq!(f.star(16.0, 3.0, 2.0).unwrap(), 2);
        assert_eq!(f.star(65536.0, 3.0, 2.0).unwrap(), 4);
        assert_eq!(f.star(1.5, 3.0, 2.0).unwrap(), 1);
        assert!(f.star(0.5, 3.0, 2.0).is_err());
    }

    #[test]
    fn x0_of_power_matches_closed_form() {
        for (g, d) in [(1.0, 0.5), (3.0, 0.5), (2.0, 5.0 / 6.0), (10.0, 0.25)] {
            let f = SublinearF::power(g, d);
            let closed = g.powf(1.0 / (1.0 - d)) + 1.0;
            let x0 = f.x0(3.0, 2.0).unwrap();
            assert!(x0 >= closed && x0 <= closed * (1.0 + 1e-8), "{x0} vs {closed}");
        }
    }

    #[test]
    fn x0_of_polylog_finds_last_crossing() {
        // log^3 x exceeds x again on [2^9, ~2^9.9] after dropping below it at x = 2.
        let f = SublinearF::polylog(1.0, 3.0);
        let x0 = f.x0(3.0, 1.0).unwrap();
        let sup = x0 - 1.0;
        assert!(f.eval(sup * (1.0 - 1e-6), 3.0, 1.0) >= sup * (1.0 - 1e-6));
        assert!(f.eval(sup * (1.0 + 1e-6), 3.0, 1.0) < sup * (1.0 + 1e-6));
        assert!(sup > 512.0);
    }

    #[test]
    fn one_has_fstar_one() {
        assert_eq!(SublinearF::One.star(1e12, 3.0, 2.0).unwrap(), 1);
    }

    fn line(points: &[f64], links: Vec<Link>, alpha: f64) -> Instance {
        let pts: Vec<Vec<f64>> = points.iter().map(|&x| vec![x]).collect();
        Instance::new(MetricContext::euclidean(1, alpha), Space::euclidean(&pts).unwrap(), links).unwrap()
    }

    #[test]
    fn two_unit_links_adjacency_flips_with_gamma() {
        // Unit links [0,1] and [3,4] without floor: d_12 * d_21 = 4 * 2 = 8.
        let inst = line(&[0.0, 1.0, 3.0, 4.0], vec![Link::new(0, 1), Link::new(2, 3)], 3.0).with_floor(false);
        let g = build_graph(&inst, SublinearF::One, false).unwrap();
        assert_eq!(g.graph.edge_count(), 0);
        let g = build_graph(&inst, SublinearF::power(8.0, 0.5), false).unwrap();
        assert_eq!(g.graph.edge_count(), 0, "tie at 8 is not an edge");
        let g = build_graph(&inst, SublinearF::power(8.0 + 1e-9, 0.5), false).unwrap();
        assert_eq!(g.graph.edge_count(), 1);
    }

    #[test]
    fn uniform_mode_requires_uniform_beta() {
        let inst = line(&[0.0, 1.0, 3.0, 4.0], vec![Link::new(0, 1).with_beta(2.0), Link::new(2, 3)], 3.0);
        assert!(matches!(build_graph(&inst, SublinearF::One, true), Err(Error::Precondition(_))));
    }

    #[test]
    fn tightness_rejects_dependent_set() {
        let inst = line(&[0.0, 1.0, 1.5, 2.5], vec![Link::new(0, 1), Link::new(2, 3)], 3.0);
        assert!(measure_tightness(&inst, &[0, 1], SublinearF::One, SublinearF::power(2.0, 0.5)).is_err());
    }

    fn arb_instance() -> impl Strategy<Value = Instance> {
        proptest::collection::vec((0.0..100.0f64, 0.0..100.0f64, 0.0..6.3f64, 0.0..3.0f64, 1.0..20.0f64), 2..25).prop_map(|v| {
            let mut pts = Vec::new();
            let mut links = Vec::new();
            for (k, (x, y, a, lg, b)) in v.into_iter().enumerate() {
                let len = 10f64.powf(lg - 1.0);
                pts.push(vec![x, y]);
                pts.push(vec![x + len * a.cos(), y + len * a.sin()]);
                links.push(Link::new(2 * k, 2 * k + 1).with_beta(b));
            }
            Instance::new(MetricContext::euclidean(2, 3.0), Space::euclidean(&pts).unwrap(), links).unwrap()
        })
    }

    proptest! {
        #[test]
        fn edges_grow_with_gamma(inst in arb_instance(), g1 in 1.0..50.0f64, mult in 1.0..10.0f64, d in 0.1..0.9f64) {
            let a = build_graph(&inst, SublinearF::power(g1, d), false).unwrap();
            let b = build_graph(&inst, SublinearF::power(g1 * mult, d), false).unwrap();
            for (u, v) in a.graph.edges() {
                prop_assert!(b.graph.has_edge(u, v));
            }
        }

        #[test]
        fn f_one_gives_g_lo(inst in arb_instance()) {
            let g = build_graph(&inst, SublinearF::One, false).unwrap();
            for i in 0..inst.n_links() {
                for j in i + 1..inst.n_links() {
                    let edge = inst.d_sr(i, j) * inst.d_sr(j, i) < inst.sensitivity(i) * inst.sensitivity(j);
                    prop_assert_eq!(g.graph.has_edge(i, j), edge);
                }
            }
        }

        #[test]
        fn order_and_graph_are_consistent(inst in arb_instance(), g in 1.0..20.0f64) {
            let cg = build_graph(&inst, SublinearF::hatlog(g), false).unwrap();
            for w in cg.order.windows(2) {
                prop_assert!(inst.sensitivity(w[0]) <= inst.sensitivity(w[1]));
            }
            let seq = build_graph_with(&inst, SublinearF::hatlog(g), false, Execution::Sequential).unwrap();
            prop_assert_eq!(cg, seq);
        }

        #[test]
        fn fstar_matches_oracle(g in 1.0..4.0f64, d in 0.3..0.8f64, lx in 0.0..40.0f64) {
            let f = SublinearF::power(g, d);
            let x = lx.exp2();
            let closed_x0 = g.powf(1.0 / (1.0 - d)) + 1.0;
            prop_assert_eq!(f.star(x, 3.0, 2.0).unwrap(), fstar_oracle(&f, x, closed_x0));
        }
    }

    #[test]
    fn hatlog_uses_dimension_gap() {
        let f = SublinearF::hatlog(1.0);
        assert_relative_eq!(f.eval(16.0, 3.0, 2.0), 16.0);
        assert_relative_eq!(f.eval(16.0, 4.0, 2.0), 4.0);
        assert_relative_eq!(f.eval(1.5, 4.0, 2.0), 1.0);
    }
}
