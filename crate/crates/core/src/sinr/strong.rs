//! Partitioning a feasible set into `t`-strong parts.
//!
//! A set is `t`-strong under `P` when every member satisfies
//! `P(i) / l_i^alpha > t * sum_{j != i} P(j) / d_ji^alpha + N_i`, with `l` the
//! sensitivity. Writing `a(j, i)` for the interference of `j` on `i` divided
//! by the slack `P(i) / l_i^alpha - N_i`, the condition is `t * sum_j a(j, i) < 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, LinkId};

use super::PowerAssignment;

/// Normalized affectance `a(j, i)`. Infinite when `i` has no slack or `d_ji = 0`.
pub fn affectance_normalized(inst: &Instance, p: &PowerAssignment, j: LinkId, i: LinkId) -> Result<f64> {
    let a = inst.alpha();
    let ln_signal = p.ln_power(inst, i)? - a * inst.sensitivity(i).ln();
    let ln_interf = p.ln_power(inst, j)? - a * inst.d_sr(j, i).ln();
    let noise = inst.link(i).noise;
    if noise == 0.0 {
        return Ok((ln_interf - ln_signal).exp());
    }
    let slack = ln_signal.exp() - noise;
    if slack <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(ln_interf.exp() / slack)
}

fn affectance_matrix(inst: &Instance, s: &[LinkId], p: &PowerAssignment) -> Result<Vec<Vec<f64>>> {
    s.iter()
        .map(|&j| s.iter().map(|&i| if i == j { Ok(0.0) } else { affectance_normalized(inst, p, j, i) }).collect())
        .collect()
}

/// Whether `s` is `t`-strong under `p`.
pub fn is_t_strong(inst: &Instance, s: &[LinkId], p: &PowerAssignment, t: f64) -> Result<bool> {
    inst.check_subset(s)?;
    for &i in s {
        let a = inst.alpha();
        let slack = (p.ln_power(inst, i)? - a * inst.sensitivity(i).ln()).exp() - inst.link(i).noise;
        if slack <= 0.0 {
            return Ok(false);
        }
        let mut sum = 0.0;
        for &j in s {
            if j != i {
                sum += affectance_normalized(inst, p, j, i)?;
            }
        }
        if t * sum >= 1.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Output of [`t_strong_partition`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TStrongPartition {
    pub parts: Vec<Vec<LinkId>>,
    pub t: f64,
    /// Whether the part count stayed within `ceil(2t)`.
    pub within_bound: bool,
}

/// Greedily splits a 1-strong set into `t`-strong parts.
///
/// Links are taken in nondecreasing sensitivity. Each joins the part that
/// stays `t`-strong with it and has the least combined incoming and outgoing
/// affectance with it; if no part qualifies a new one is opened.
pub fn t_strong_partition(inst: &Instance, s: &[LinkId], p: &PowerAssignment, t: f64) -> Result<TStrongPartition> {
    if !(t >= 1.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must be at least 1")));
    }
    if !is_t_strong(inst, s, p, 1.0)? {
        return Err(Error::Precondition("input set is not 1-strong under the given powers".into()));
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| inst.sensitivity(s[a]).total_cmp(&inst.sensitivity(s[b])).then(s[a].cmp(&s[b])));
    let aff = affectance_matrix(inst, s, p)?;
    let mut parts: Vec<Vec<usize>> = Vec::new();
    // Incoming affectance of each placed link from its own part.
    let mut load = vec![0.0; s.len()];
    for &v in &order {
        let mut best: Option<(f64, usize)> = None;
        for (k, part) in parts.iter().enumerate() {
            let incoming: f64 = part.iter().map(|&u| aff[u][v]).sum();
            if t * incoming >= 1.0 {
                continue;
            }
            if part.iter().any(|&u| t * (load[u] + aff[v][u]) >= 1.0) {
                continue;
            }
            let cost = incoming + part.iter().map(|&u| aff[v][u]).sum::<f64>();
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, k));
            }
        }
        match best {
            Some((_, k)) => {
                for &u in &parts[k] {
                    load[u] += aff[v][u];
                    load[v] += aff[u][v];
                }
                parts[k].push(v);
            }
            None => parts.push(vec![v]),
        }
    }
    let within_bound = parts.len() as f64 <= (2.0 * t).ceil();
    if !within_bound {
        log::warn!("t-strong partition used {} parts, above ceil(2t) = {}", parts.len(), (2.0 * t).ceil());
    }
    let parts = parts
        .into_iter()
        .map(|part| {
            let mut ids: Vec<LinkId> = part.into_iter().map(|u| s[u]).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    Ok(TStrongPartition { parts, t, within_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Link, MetricContext, Space};

    fn row(n: usize, gap: f64) -> Instance {
        let mut pts = Vec::new();
        let mut links = Vec::new();
        for k in 0..n {
            let x = k as f64 * gap;
            pts.push(vec![x, 0.0]);
            pts.push(vec![x + 1.0, 0.0]);
            links.push(Link::new(2 * k, 2 * k + 1));
        }
        Instance::new(MetricContext::euclidean(2, 3.0), Space::euclidean(&pts).unwrap(), links).unwrap().with_floor(false)
    }

    #[test]
    fn well_separated_set_stays_whole() {
        let inst = row(4, 100.0);
        let p = PowerAssignment::Uniform { p0: 1.0 };
        let part = t_strong_partition(&inst, &inst.ids(), &p, 2.0).unwrap();
        assert_eq!(part.parts, vec![vec![0, 1, 2, 3]]);
        assert!(part.within_bound);
    }

    #[test]
    fn rejects_infeasible_input() {
        let inst = row(3, 1.5);
        let p = PowerAssignment::Uniform { p0: 1.0 };
        assert!(matches!(t_strong_partition(&inst, &inst.ids(), &p, 2.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn parts_are_t_strong_on_tight_row() {
        // Spacing chosen so the whole row is 1-strong but not 2-strong.
        let inst = row(6, 2.2);
        let p = PowerAssignment::Uniform { p0: 1.0 };
        assert!(is_t_strong(&inst, &inst.ids(), &p, 1.0).unwrap());
        assert!(!is_t_strong(&inst, &inst.ids(), &p, 2.0).unwrap());
        let part = t_strong_partition(&inst, &inst.ids(), &p, 2.0).unwrap();
        assert!(part.parts.len() >= 2);
        for q in &part.parts {
            assert!(is_t_strong(&inst, q, &p, 2.0).unwrap());
        }
    }
}
