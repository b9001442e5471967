//! SINR feasibility: power assignments, direct SIR checks, affectance,
//! the sufficient interference-measure test and the spectral oracle.
//!
//! A set `S` is feasible under powers `P` when every link `i` in `S` has
//! `(P(i) / l_i^alpha) / (sum_{j != i} P(j) / d_ji^alpha + N_i) > beta_i`.
//! Sums are evaluated in log space so that very diverse instances do not
//! overflow.

mod spectral;
mod strong;
mod weak;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, LinkId};

pub use spectral::{spectral_feasibility, SPECTRAL_MAX_ITER, SPECTRAL_MARGIN, SPECTRAL_TOL};
pub use strong::{affectance_normalized, is_t_strong, t_strong_partition, TStrongPartition};
pub use weak::{g_affectance_sum, g_inverse, g_weak, weak_link_transform, WeakTransform};

/// How transmit powers are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PowerAssignment {
    /// Every link transmits with `p0`.
    Uniform { p0: f64 },
    /// `P(i) = l_i^(tau * alpha)` on sensitivities, scale 1.
    Oblivious { tau: f64 },
    /// Powers listed per link id, serialized as `[id, power]` pairs.
    Explicit {
        #[serde(with = "id_pairs")]
        powers: BTreeMap<LinkId, f64>,
    },
}

/// Integer-keyed maps as pair lists; tagged enums cannot read integer map keys back.
mod id_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::model::LinkId;

    pub fn serialize<S: Serializer>(map: &BTreeMap<LinkId, f64>, ser: S) -> Result<S::Ok, S::Error> {
        map.iter().collect::<Vec<_>>().serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BTreeMap<LinkId, f64>, D::Error> {
        Ok(Vec::<(LinkId, f64)>::deserialize(de)?.into_iter().collect())
    }
}

impl PowerAssignment {
    /// Natural log of the power of link `i`.
    pub fn ln_power(&self, inst: &Instance, i: LinkId) -> Result<f64> {
        match self {
            PowerAssignment::Uniform { p0 } => {
                if !(*p0 > 0.0 && p0.is_finite()) {
                    return Err(Error::Invalid(format!("uniform power {p0} must be positive")));
                }
                Ok(p0.ln())
            }
            PowerAssignment::Oblivious { tau } => {
                if !(0.0..=1.0).contains(tau) {
                    return Err(Error::Domain(format!("tau = {tau} must lie in [0, 1]")));
                }
                Ok(tau * inst.alpha() * inst.sensitivity(i).ln())
            }
            PowerAssignment::Explicit { powers } => match powers.get(&i) {
                Some(&p) if p > 0.0 && p.is_finite() => Ok(p.ln()),
                Some(&p) => Err(Error::Invalid(format!("power {p} of link {i} must be positive"))),
                None => Err(Error::Invalid(format!("no power given for link {i}"))),
            },
        }
    }

    pub fn power(&self, inst: &Instance, i: LinkId) -> Result<f64> {
        Ok(self.ln_power(inst, i)?.exp())
    }
}

/// How a feasibility verdict was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DirectSir,
    Bidirectional,
    KesselheimSufficient,
    SpectralOracle,
}

/// Three-way outcome; only the spectral oracle can be indeterminate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Feasible,
    Infeasible,
    Indeterminate,
}

/// Outcome of a feasibility check on a set of links.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub method: Method,
    pub feasible: bool,
    pub verdict: Verdict,
    /// Link ids in the order of `per_link_sir`.
    pub links: Vec<LinkId>,
    #[serde(with = "crate::nonfinite::vec")]
    pub per_link_sir: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<PowerAssignment>,
    /// Spectral radius estimate, for the spectral oracle.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::nonfinite::opt")]
    pub radius: Option<f64>,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
}

/// SIR of `i` against the other links of `s`, with interference measured at
/// distance `dist(j, i)`.
fn sir_with(inst: &Instance, s: &[LinkId], i: LinkId, p: &PowerAssignment, dist: impl Fn(LinkId, LinkId) -> f64) -> Result<f64> {
    let a = inst.alpha();
    let signal = p.ln_power(inst, i)? - a * inst.length(i).ln();
    let mut terms = Vec::with_capacity(s.len());
    for &j in s {
        if j != i {
            terms.push(p.ln_power(inst, j)? - a * dist(j, i).ln());
        }
    }
    let noise = inst.link(i).noise;
    if noise > 0.0 {
        terms.push(noise.ln());
    }
    if terms.is_empty() {
        return Ok(f64::INFINITY);
    }
    Ok((signal - log_sum_exp(&terms)).exp())
}

/// Signal-to-interference(-plus-noise) ratio of link `i` inside `s`.
pub fn sir(inst: &Instance, s: &[LinkId], i: LinkId, p: &PowerAssignment) -> Result<f64> {
    sir_with(inst, s, i, p, |j, i| inst.d_sr(j, i))
}

/// Checks `SIR(i) > beta_i` for every link of `s` under `p`.
pub fn is_p_feasible(inst: &Instance, s: &[LinkId], p: &PowerAssignment) -> Result<FeasibilityReport> {
    inst.check_subset(s)?;
    let per_link_sir = s.iter().map(|&i| sir(inst, s, i, p)).collect::<Result<Vec<_>>>()?;
    let feasible = s.iter().zip(&per_link_sir).all(|(&i, &x)| x > inst.link(i).beta);
    Ok(FeasibilityReport {
        method: Method::DirectSir,
        feasible,
        verdict: if feasible { Verdict::Feasible } else { Verdict::Infeasible },
        links: s.to_vec(),
        per_link_sir,
        witness: Some(p.clone()),
        radius: None,
    })
}

/// Conservative check that `s` is feasible under oblivious power `P_tau` for
/// every orientation of its links. Interference is measured at the closest
/// endpoint distance, which lower-bounds every orientation's distance.
pub fn bidirectional_report(inst: &Instance, s: &[LinkId], tau: f64) -> Result<FeasibilityReport> {
    inst.check_subset(s)?;
    let p = PowerAssignment::Oblivious { tau };
    let per_link_sir = s.iter().map(|&i| sir_with(inst, s, i, &p, |j, i| inst.link_distance(j, i))).collect::<Result<Vec<_>>>()?;
    let feasible = s.iter().zip(&per_link_sir).all(|(&i, &x)| x > inst.link(i).beta);
    Ok(FeasibilityReport {
        method: Method::Bidirectional,
        feasible,
        verdict: if feasible { Verdict::Feasible } else { Verdict::Infeasible },
        links: s.to_vec(),
        per_link_sir,
        witness: Some(p),
        radius: None,
    })
}

/// Boolean form of [`bidirectional_report`].
pub fn is_bidirectionally_p_feasible(inst: &Instance, s: &[LinkId], tau: f64) -> Result<bool> {
    Ok(bidirectional_report(inst, s, tau)?.feasible)
}

/// Affectance of `j` on `i` under `P_tau`: `l_j^(tau a) l_i^((1 - tau) a) / d_ji^a`.
pub fn affectance_tau(inst: &Instance, j: LinkId, i: LinkId, tau: f64) -> f64 {
    let a = inst.alpha();
    (tau * a * inst.sensitivity(j).ln() + (1.0 - tau) * a * inst.sensitivity(i).ln() - a * inst.d_sr(j, i).ln()).exp()
}

/// Total affectance on `i` from the rest of `s` under `P_tau`.
///
/// With zero noise this equals `(l_i / len_i)^alpha / SIR(i)`, so the sum is
/// below 1 exactly when `SIR(i)` exceeds the effective threshold
/// [`effective_threshold`]. That threshold is `beta_i` when the sensitivity
/// floor is off and at least `beta_i` when it is on.
pub fn affectance_tau_sum(inst: &Instance, s: &[LinkId], i: LinkId, tau: f64) -> f64 {
    s.iter().filter(|&&j| j != i).map(|&j| affectance_tau(inst, j, i, tau)).sum()
}

/// `(l_i / len_i)^alpha`: the SIR threshold implied by the sensitivity of `i`.
pub fn effective_threshold(inst: &Instance, i: LinkId) -> f64 {
    (inst.sensitivity(i) / inst.length(i)).powf(inst.alpha())
}

/// Interval of valid oblivious-power exponents for a power-law threshold `gamma x^delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauInterval {
    pub delta0: f64,
    pub b: f64,
    pub e: f64,
    /// Midpoint of `(b, e)`, the default exponent.
    pub tau: f64,
}

/// Smallest admissible power-law exponent, `(alpha - m + 1) / (2 (alpha - m) + 1)`.
pub fn delta0(alpha: f64, m: f64) -> f64 {
    (alpha - m + 1.0) / (2.0 * (alpha - m) + 1.0)
}

/// Default exponent `(delta0 + 1) / 2`.
pub fn default_delta(alpha: f64, m: f64) -> f64 {
    (delta0(alpha, m) + 1.0) / 2.0
}

/// `b = 1 - delta (alpha - m) / alpha` and `e = 1 - (1 - delta)(alpha - m + 1) / alpha`.
pub fn tau_interval(alpha: f64, m: f64, delta: f64) -> Result<TauInterval> {
    if !(alpha > m && m > 0.0) {
        return Err(Error::Domain(format!("need alpha > m > 0, got alpha = {alpha}, m = {m}")));
    }
    let delta0 = delta0(alpha, m);
    if !(delta > delta0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta = {delta} must lie in ({delta0}, 1)")));
    }
    let b = 1.0 - delta * (alpha - m) / alpha;
    let e = 1.0 - (1.0 - delta) * (alpha - m + 1.0) / alpha;
    Ok(TauInterval { delta0, b, e, tau: 0.5 * (b + e) })
}

/// `1 / (12 * 3^alpha)`: interference-measure level below which a set is feasible.
pub fn kesselheim_threshold(alpha: f64) -> f64 {
    1.0 / (12.0 * 3f64.powf(alpha))
}

/// Interference measure `I(S) = max_i sum_{j shorter than i} (l_j / d(i, j))^alpha`,
/// where `l` is sensitivity and "shorter" compares lengths with ties broken by id.
pub fn kesselheim_i(inst: &Instance, s: &[LinkId]) -> Result<f64> {
    inst.check_subset(s)?;
    let a = inst.alpha();
    let mut worst = 0.0f64;
    for &i in s {
        let key_i = (inst.length(i), i);
        let mut sum = 0.0;
        for &j in s {
            if j == i || (inst.length(j), j) > key_i {
                continue;
            }
            let d = inst.link_distance(i, j);
            if d == 0.0 {
                return Err(Error::Domain(format!("links {i} and {j} share a point")));
            }
            sum += (a * (inst.sensitivity(j).ln() - d.ln())).exp();
        }
        worst = worst.max(sum);
    }
    Ok(worst)
}

/// Whether `I(S) < 1 / (12 * 3^alpha)`, which guarantees feasibility.
pub fn kesselheim_sufficient(inst: &Instance, s: &[LinkId]) -> Result<bool> {
    Ok(kesselheim_i(inst, s)? < kesselheim_threshold(inst.alpha()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Link, MetricContext, Space};
    use approx::assert_relative_eq;

    fn line(points: &[f64], links: Vec<Link>, alpha: f64) -> Instance {
        let pts: Vec<Vec<f64>> = points.iter().map(|&x| vec![x]).collect();
        Instance::new(MetricContext::euclidean(1, alpha), Space::euclidean(&pts).unwrap(), links).unwrap()
    }

    #[test]
    fn two_unit_links_sir_is_four() {
        // Receiver of link 0 at 1, sender of link 1 at 3: d_10 = 2 and 2^2 = 4.
        let inst = line(&[0.0, 1.0, 3.0, 4.0], vec![Link::new(0, 1), Link::new(2, 3)], 2.0);
        let x = sir(&inst, &[0, 1], 0, &PowerAssignment::Uniform { p0: 1.0 }).unwrap();
        assert_relative_eq!(x, 4.0, max_relative = 1e-14);
        let rep = is_p_feasible(&inst, &[0, 1], &PowerAssignment::Uniform { p0: 1.0 }).unwrap();
        assert!(rep.feasible);
    }

    #[test]
    fn tau_interval_values() {
        let t = tau_interval(3.0, 2.0, 5.0 / 6.0).unwrap();
        assert_relative_eq!(t.delta0, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(t.b, 13.0 / 18.0, max_relative = 1e-15);
        assert_relative_eq!(t.e, 8.0 / 9.0, max_relative = 1e-15);
        assert_relative_eq!(default_delta(3.0, 2.0), 5.0 / 6.0, max_relative = 1e-15);
        let t = tau_interval(2.0, 1.0, 0.8).unwrap();
        assert_relative_eq!(t.b, 0.6, max_relative = 1e-15);
        assert_relative_eq!(t.e, 0.8, max_relative = 1e-15);
        assert!(tau_interval(3.0, 2.0, 0.6).is_err());
        assert!(tau_interval(3.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn kesselheim_two_unit_links() {
        // Unit links [0,1] and [5,6]: closest endpoints are 4 apart, so I = 1/16.
        let inst = line(&[0.0, 1.0, 5.0, 6.0], vec![Link::new(0, 1), Link::new(2, 3)], 2.0).with_floor(false);
        assert_relative_eq!(kesselheim_i(&inst, &[0, 1]).unwrap(), 1.0 / 16.0, max_relative = 1e-14);
        assert!(!kesselheim_sufficient(&inst, &[0, 1]).unwrap());
        let shared = line(&[0.0, 1.0, 2.0], vec![Link::new(0, 1), Link::new(1, 2)], 2.0);
        assert!(matches!(kesselheim_i(&shared, &[0, 1]), Err(Error::Domain(_))));
    }

    #[test]
    fn affectance_matches_sir_identity() {
        let inst = line(&[0.0, 1.0, 3.5, 5.5, 9.0, 9.3], vec![Link::new(0, 1).with_beta(3.0), Link::new(2, 3), Link::new(4, 5).with_beta(70.0)], 3.0);
        let s = [0, 1, 2];
        for tau in [0.0, 0.3, 0.8056, 1.0] {
            let p = PowerAssignment::Oblivious { tau };
            for &i in &s {
                let lhs = affectance_tau_sum(&inst, &s, i, tau);
                let rhs = effective_threshold(&inst, i) / sir(&inst, &s, i, &p).unwrap();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn bidirectional_is_conservative() {
        let inst = line(&[0.0, 1.0, 4.0, 5.0], vec![Link::new(0, 1), Link::new(2, 3)], 3.0);
        let d = bidirectional_report(&inst, &[0, 1], 0.5).unwrap();
        let p = is_p_feasible(&inst, &[0, 1], &PowerAssignment::Oblivious { tau: 0.5 }).unwrap();
        for k in 0..2 {
            assert!(d.per_link_sir[k] <= p.per_link_sir[k]);
        }
    }
}
