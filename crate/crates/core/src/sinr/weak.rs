//! Reduction from noisy, power-limited instances to weak links.
//!
//! With maximum power `P_max` and noise `N`, a link of length `x` can be heard
//! at all only if `x < l_max = (P_max / N)^(1/alpha)`, and it is weak when
//! `P_max <= 2 N x^alpha`. Uniform-power feasibility with noise is the
//! noiseless condition with each length `x` replaced by
//! `g(x) = x / (1 - (x / l_max)^alpha)^(1/alpha)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Link, LinkId, MetricContext, MetricKind, Space};

/// `g(x) = x / (1 - (x / l_max)^alpha)^(1/alpha)` for `0 <= x < l_max`.
pub fn g_weak(x: f64, l_max: f64, alpha: f64) -> f64 {
    x / (1.0 - (x / l_max).powf(alpha)).powf(1.0 / alpha)
}

/// Inverse of [`g_weak`] by bisection on `[0, l_max)`, run until the bracket
/// stops shrinking (well past relative precision 1e-12).
pub fn g_inverse(y: f64, l_max: f64, alpha: f64) -> Result<f64> {
    if !(y >= 0.0 && y.is_finite()) {
        return Err(Error::Domain(format!("g^-1 needs a finite y >= 0, got {y}")));
    }
    let (mut lo, mut hi) = (0.0f64, l_max.min(y));
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g_weak(mid, l_max, alpha) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sum over `j` in `s` of `(g(len_i) / d_ji)^alpha`. Uniform power `P_max`
/// with noise `N` is feasible for `s` (at `beta = 1`) iff this is below 1 for every `i`.
pub fn g_affectance_sum(inst: &Instance, s: &[LinkId], i: LinkId, l_max: f64) -> f64 {
    let a = inst.alpha();
    let gi = g_weak(inst.length(i), l_max, a);
    s.iter().filter(|&&j| j != i).map(|&j| (gi / inst.d_sr(j, i)).powf(a)).sum()
}

/// Output of [`weak_link_transform`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTransform {
    /// The transformed links, in the order of the input set.
    pub instance: Instance,
    pub pmax: f64,
    pub noise: f64,
    pub l_max: f64,
    /// Scale factor `l_max / l_min` applied to sender positions.
    pub scale: f64,
}

/// Maps a set of non-weak links to weak links.
///
/// Senders are scaled by `X = l_max / l_min` and each receiver is placed in
/// its original direction at distance `g^-1(X len_i)` from its sender. The
/// output has `beta = 1` and noise `N` on every link. If the input set is
/// `4^alpha`-strong in the `g` sense, the output is `P_max`-feasible.
pub fn weak_link_transform(inst: &Instance, s: &[LinkId], pmax: f64, noise: f64) -> Result<WeakTransform> {
    inst.check_subset(s)?;
    if inst.metric().kind != MetricKind::Euclidean {
        return Err(Error::Precondition("the weak-link transform needs a Euclidean instance".into()));
    }
    if !(pmax > 0.0 && noise > 0.0 && pmax.is_finite() && noise.is_finite()) {
        return Err(Error::Domain("P_max and N must be positive and finite".into()));
    }
    if s.is_empty() {
        return Err(Error::Precondition("the weak-link transform needs at least one link".into()));
    }
    let a = inst.alpha();
    let l_max = (pmax / noise).powf(1.0 / a);
    let border = l_max / 2f64.powf(1.0 / a);
    if let Some(&i) = s.iter().find(|&&i| inst.length(i) >= border) {
        return Err(Error::Precondition(format!("link {i} of length {} is already weak (border {border})", inst.length(i))));
    }
    let l_min = s.iter().map(|&i| inst.length(i)).fold(f64::INFINITY, f64::min);
    let scale = l_max / l_min;
    let space = inst.space();
    let dim = inst.metric().dim.unwrap_or(1);
    let mut points = Vec::with_capacity(2 * s.len());
    let mut links = Vec::with_capacity(s.len());
    for (k, &i) in s.iter().enumerate() {
        let (ps, pr) = (space.point(inst.link(i).s).unwrap(), space.point(inst.link(i).r).unwrap());
        let len = inst.length(i);
        let new_len = g_inverse(scale * len, l_max, a)?;
        let sender: Vec<f64> = ps.iter().map(|x| scale * x).collect();
        let receiver: Vec<f64> = (0..dim).map(|c| sender[c] + new_len * (pr[c] - ps[c]) / len).collect();
        points.push(sender);
        points.push(receiver);
        links.push(Link::new(2 * k, 2 * k + 1).with_noise(noise).with_weight(inst.link(i).weight));
    }
    let instance = Instance::new(MetricContext::euclidean(dim, a), Space::euclidean(&points)?, links)?;
    Ok(WeakTransform { instance, pmax, noise, l_max, scale })
}
