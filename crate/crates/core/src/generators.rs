//! Instance generators: random Euclidean families and extremal constructions.
//!
//! Every generator is a pure function of its parameters and seed. Generated
//! instances carry a `provenance` block recording the generator, parameters,
//! seed and a hash of the spec. The extremal constructions switch the
//! sensitivity floor off, since they are stated for `beta^(1/alpha) l` exactly.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::conflict::SublinearF;
use crate::error::{Error, Result};
use crate::model::{Instance, Link, LinkId, MetricContext, Space};

/// Largest coordinate or length a construction may produce.
pub const FLOAT_CEILING: f64 = 1e300;

/// Copies per level allowed without an explicit scale cap.
pub const HARD_COPIES_MAX: usize = 64;

/// SplitMix64 step, used to derive independent per-trial seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `t` under master seed `master`.
pub fn trial_seed(master: u64, t: u64) -> u64 {
    splitmix64(master.wrapping_add(t.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Deterministic RNG for a seed.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Parameters of the random Euclidean family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomParams {
    pub n: usize,
    pub dim: usize,
    /// Senders are uniform in `[0, side]^dim`.
    pub side: f64,
    /// Lengths are log-uniform in this range.
    pub length: (f64, f64),
    /// Thresholds are log-uniform in this range.
    pub beta: (f64, f64),
    /// Weights are log-uniform in this range.
    pub weight: (f64, f64),
    pub alpha: f64,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams { n: 200, dim: 2, side: 1000.0, length: (1.0, 50.0), beta: (1.0, 1.0), weight: (1.0, 1.0), alpha: 3.0 }
    }
}

/// Random links: uniform senders, uniform directions, log-uniform lengths and thresholds.
pub fn gen_random(p: &RandomParams, seed: u64) -> Result<Instance> {
    let ok_range = |r: (f64, f64)| r.0 > 0.0 && r.0 <= r.1 && r.1.is_finite();
    if p.dim == 0 || !ok_range(p.length) || !ok_range(p.weight) || !(p.beta.0 >= 1.0 && ok_range(p.beta)) || !(p.side >= 0.0) {
        return Err(Error::Invalid("random family needs dim >= 1, positive ranges and beta >= 1".into()));
    }
    let mut rng = rng_for(seed);
    let mut pts = Vec::with_capacity(2 * p.n);
    let mut links = Vec::with_capacity(p.n);
    for k in 0..p.n {
        let sender: Vec<f64> = (0..p.dim).map(|_| rng.gen::<f64>() * p.side).collect();
        let dir = random_direction(&mut rng, p.dim);
        let len = log_uniform(&mut rng, p.length.0, p.length.1);
        let beta = log_uniform(&mut rng, p.beta.0, p.beta.1);
        let weight = log_uniform(&mut rng, p.weight.0, p.weight.1);
        pts.push(sender.clone());
        pts.push(sender.iter().zip(&dir).map(|(x, d)| x + len * d).collect());
        links.push(Link::new(2 * k, 2 * k + 1).with_beta(beta).with_weight(weight));
    }
    Instance::new(MetricContext::euclidean(p.dim, p.alpha), Space::euclidean(&pts)?, links)
}

fn random_direction(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    match dim {
        1 => vec![if rng.gen::<bool>() { 1.0 } else { -1.0 }],
        2 => {
            let a = rng.gen::<f64>() * TAU;
            vec![a.cos(), a.sin()]
        }
        _ => loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-3 && norm <= 1.0 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        },
    }
}

/// A generated instance plus construction metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub instance: Instance,
    /// Distinguished subset, when the construction has one.
    pub witness: Vec<LinkId>,
    /// Set when a size cap shortened the construction.
    pub truncated: bool,
    pub meta: Value,
}

/// Chain of links on a line where every pair conflicts in `G_f` yet every
/// other link forms a feasible set.
///
/// Link `i` ends where link `i + 1` starts. `len_0 = 1` and each next length
/// is the least `L >= c len_i` with `2 d(s_new, r_j) <= len_j f(L / len_j)`
/// for all earlier `j`, found by doubling and bisection and rounded up.
/// `n` is the total number of links; the witness holds ids `0, 2, 4, ...`.
pub fn gen_ndependence(n: usize, f: SublinearF, c: f64, beta: f64, alpha: f64) -> Result<Generated> {
    f.validate()?;
    if f == SublinearF::One {
        return Err(Error::Precondition("the chain needs an unbounded threshold function".into()));
    }
    if n == 0 || !(c >= 2.0) || !(beta >= 1.0) || !(alpha > 1.0) {
        return Err(Error::Invalid("chain needs n >= 1, c >= 2, beta >= 1, alpha > 1".into()));
    }
    let m = 1.0;
    let mut len = vec![1.0f64];
    while len.len() < n {
        let i = len.len();
        // gaps[j] = distance from the new sender to the receiver of j = sum of len[j+1..i].
        let mut gaps = vec![0.0; i];
        for j in (0..i.saturating_sub(1)).rev() {
            gaps[j] = gaps[j + 1] + len[j + 1];
        }
        let ok = |l: f64| (0..i).all(|j| 2.0 * gaps[j] <= len[j] * f.eval(l / len[j], alpha, m));
        let start = c * len[i - 1];
        let mut hi = start;
        while !ok(hi) {
            hi *= 2.0;
            if hi > FLOAT_CEILING {
                return Err(Error::Size(format!("chain lengths exceed float range after {i} links")));
            }
        }
        let mut lo = (hi / 2.0).max(start);
        if hi > start && !ok(lo) {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-12 * hi {
                    break;
                }
            }
        }
        let next = hi;
        let end: f64 = len.iter().sum::<f64>() + next;
        if !end.is_finite() || end > FLOAT_CEILING {
            return Err(Error::Size(format!("chain positions exceed float range after {i} links")));
        }
        len.push(next);
    }
    let mut pos = vec![0.0];
    for l in &len {
        pos.push(pos.last().unwrap() + l);
    }
    let pts: Vec<Vec<f64>> = pos.iter().map(|&x| vec![x]).collect();
    let links = (0..n).map(|i| Link::new(i, i + 1).with_beta(beta)).collect();
    let instance = Instance::new(MetricContext::euclidean(1, alpha), Space::euclidean(&pts)?, links)?.with_floor(false);
    let witness: Vec<LinkId> = (0..n).step_by(2).collect();
    let log2_delta = (len[n - 1] / len[0]).log2();
    Ok(Generated { instance, witness, truncated: false, meta: json!({ "lengths": len, "log2_delta": log2_delta }) })
}

/// One level of the recursive construction, in its own frame `[0, diam]`.
struct Level {
    diam: f64,
    /// Length of the long link at the left end (absent on the first level).
    long: Option<f64>,
    /// `(gap, scale)` of copies `s = 1..=k` of the level below; copy `s`
    /// starts `gap` to the right of the long link's receiver.
    copies: Vec<(f64, f64)>,
}

/// Node of the recursive construction: a path of copy indices from the top
/// level down, and a position in the innermost frame.
#[derive(Clone, Debug)]
struct Locator {
    path: Vec<usize>,
    local: f64,
}

/// Position of `loc` in the frame at `depth`, split as `anchor + offset` with
/// `anchor` either 0 or the long link's length. Keeping the parts apart avoids
/// cancelling large coordinates when two nodes sit near the same anchor.
fn locate(levels: &[Level], top: usize, depth: usize, loc: &Locator) -> (f64, f64) {
    let level = &levels[top - depth];
    if depth == loc.path.len() {
        return match level.long {
            Some(_) => (loc.local, 0.0),
            None => (0.0, loc.local),
        };
    }
    let (gap, scale) = level.copies[loc.path[depth]];
    let (a, b) = locate(levels, top, depth + 1, loc);
    (level.long.unwrap_or(0.0), gap + scale * (a + b))
}

fn hard_distance(levels: &[Level], top: usize, a: &Locator, b: &Locator) -> f64 {
    let mut depth = 0;
    let mut scale = 1.0;
    while depth < a.path.len() && depth < b.path.len() && a.path[depth] == b.path[depth] {
        scale *= levels[top - depth].copies[a.path[depth]].1;
        depth += 1;
    }
    let (pa, qa) = locate(levels, top, depth, a);
    let (pb, qb) = locate(levels, top, depth, b);
    ((pa - pb) + (qa - qb)).abs() * scale
}

/// Parameters of the recursive log*-type construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HardParams {
    pub t_max: usize,
    /// Level `t + 1` holds `k = 2^(c diam_t)` copies of level `t`.
    pub c: f64,
    /// Constant of `g(x) = C log^(1/alpha) x`.
    pub big_c: f64,
    pub alpha: f64,
    /// Upper bound on `k`; exceeding it truncates the construction.
    pub scale_cap: Option<usize>,
}

impl Default for HardParams {
    fn default() -> Self {
        HardParams { t_max: 2, c: 4.0, big_c: 1.0, alpha: 3.0, scale_cap: None }
    }
}

/// Recursive line construction whose links are pairwise far apart relative to
/// `g(x) = C log^(1/alpha) x` but not feasible together.
///
/// Level 1 is a unit link. Level `t + 1` is a long link of length
/// `8^(k+1) diam_t` followed by copies of level `t` scaled by `8^s`,
/// `s = 1..k`, each placed `9 diam_t^s g(len_long / diam_t^s)` to the right
/// of the long link. All thresholds are `3^alpha`. Distances are exact per
/// frame and emitted as a matrix metric declared with `m = 1`.
pub fn gen_hardinstance(p: &HardParams) -> Result<Generated> {
    let HardParams { t_max, c, big_c, alpha, scale_cap } = *p;
    if t_max == 0 || !(c > 0.0) || !(big_c >= 1.0) || !(alpha > 1.0) {
        return Err(Error::Invalid("construction needs t_max >= 1, c > 0, C >= 1, alpha > 1".into()));
    }
    let g = |x: f64| big_c * x.log2().powf(1.0 / alpha);
    let mut levels = vec![Level { diam: 1.0, long: None, copies: Vec::new() }];
    let mut truncated = false;
    let mut ks = Vec::new();
    for _ in 1..t_max {
        let below = levels.last().unwrap().diam;
        let want = (c * below).exp2().ceil();
        let k = match scale_cap {
            Some(cap) if want > cap as f64 => {
                truncated = true;
                cap.max(1)
            }
            None if want > HARD_COPIES_MAX as f64 => {
                return Err(Error::Size(format!("level needs {want} copies; set a scale cap")));
            }
            _ => want as usize,
        };
        ks.push(k);
        let long = 8f64.powi(k as i32 + 1) * below;
        let mut copies = vec![(0.0, 1.0)];
        let mut prev_end = 0.0;
        for s in 1..=k {
            let scale = 8f64.powi(s as i32);
            let copy_diam = scale * below;
            let gap = 9.0 * copy_diam * g(long / copy_diam);
            if gap <= prev_end {
                return Err(Error::Internal(format!("copy {s} overlaps its left neighbor")));
            }
            prev_end = gap + copy_diam;
            copies.push((gap, scale));
        }
        let diam = long + prev_end;
        if !(diam < FLOAT_CEILING) {
            return Err(Error::Size("construction exceeds float range".into()));
        }
        levels.push(Level { diam, long: Some(long), copies });
    }
    // Collect links as locator pairs, depth-first, long link first.
    let top = levels.len() - 1;
    let mut ends: Vec<(Locator, Locator)> = Vec::new();
    let mut meta_links = Vec::new();
    fn walk(levels: &[Level], lvl: usize, path: &mut Vec<usize>, ends: &mut Vec<(Locator, Locator)>, meta: &mut Vec<Value>) {
        let level = &levels[lvl];
        match level.long {
            None => {
                ends.push((Locator { path: path.clone(), local: 0.0 }, Locator { path: path.clone(), local: 1.0 }));
                meta.push(json!({ "path": path, "level": lvl + 1, "long": false }));
            }
            Some(long) => {
                ends.push((Locator { path: path.clone(), local: 0.0 }, Locator { path: path.clone(), local: long }));
                meta.push(json!({ "path": path, "level": lvl + 1, "long": true }));
                for s in 1..level.copies.len() {
                    path.push(s);
                    walk(levels, lvl - 1, path, ends, meta);
                    path.pop();
                }
            }
        }
    }
    walk(&levels, top, &mut Vec::new(), &mut ends, &mut meta_links);
    let nodes: Vec<&Locator> = ends.iter().flat_map(|(a, b)| [a, b]).collect();
    let nn = nodes.len();
    let mut rows = vec![vec![0.0; nn]; nn];
    for u in 0..nn {
        for v in u + 1..nn {
            let d = hard_distance(&levels, top, nodes[u], nodes[v]);
            rows[u][v] = d;
            rows[v][u] = d;
        }
    }
    let beta = 3f64.powf(alpha);
    let links = (0..ends.len()).map(|i| Link::new(2 * i, 2 * i + 1).with_beta(beta)).collect();
    let instance = Instance::new(MetricContext::matrix(alpha, 1.0), Space::matrix(&rows)?, links)?.with_floor(false);
    let diams: Vec<f64> = levels.iter().map(|l| l.diam).collect();
    let meta = json!({ "links": meta_links, "copies_per_level": ks, "diameters": diams });
    Ok(Generated { instance, witness: Vec::new(), truncated, meta })
}

/// Links of lengths `n^i` on a line that are pairwise far apart but, under
/// uniform power, form a chain of mutually weak interferers.
///
/// `k = floor(n / log2 n)` links; the gap between links `i` and `i + 1` is
/// `len_{i+1}^2 / ((h + 1) len_i) - (h + 1) len_i`. Needs `n > 4 (h + 1)^2`.
pub fn gen_uniform_power_clique(n: usize, h: f64, alpha: f64) -> Result<Generated> {
    let nf = n as f64;
    if !(h >= 0.0) || !(nf > 4.0 * (h + 1.0) * (h + 1.0)) {
        return Err(Error::Precondition(format!("need n > 4 (h + 1)^2, got n = {n}, h = {h}")));
    }
    if !(alpha > 1.0) {
        return Err(Error::Invalid("alpha must exceed 1 on a line".into()));
    }
    let exact = nf / nf.log2();
    let k = (exact.floor() as usize).max(1);
    let len: Vec<f64> = (1..=k).map(|i| nf.powi(i as i32)).collect();
    let mut pts = Vec::with_capacity(2 * k);
    let mut x = 0.0;
    for i in 0..k {
        if i > 0 {
            x += len[i] * len[i] / ((h + 1.0) * len[i - 1]) - (h + 1.0) * len[i - 1];
        }
        pts.push(vec![x]);
        x += len[i];
        pts.push(vec![x]);
        if !(x < FLOAT_CEILING) {
            return Err(Error::Size(format!("positions exceed float range at link {i}")));
        }
    }
    let links = (0..k).map(|i| Link::new(2 * i, 2 * i + 1)).collect();
    let instance = Instance::new(MetricContext::euclidean(1, alpha), Space::euclidean(&pts)?, links)?.with_floor(false);
    // Interference-to-signal of the longer link of each pair, at closest distance.
    let mut max_isr = 0.0f64;
    for i in 0..k {
        for j in 0..i {
            max_isr = max_isr.max((instance.length(i) / instance.link_distance(i, j)).powf(alpha));
        }
    }
    let log2_delta = (k as f64 - 1.0) * nf.log2();
    let meta = json!({ "k": k, "log2_delta": log2_delta, "max_pairwise_isr": max_isr, "isr_bound": 1.0 / nf });
    Ok(Generated { instance, witness: Vec::new(), truncated: exact.fract() != 0.0, meta })
}

/// Unit links on a star-like metric: senders pairwise `2 beta f(1)` apart,
/// receivers `2 beta f(1) + 2`, cross pairs `2 beta f(1) + 1`.
pub fn gen_general_metric_star(n: usize, f_at_1: f64, beta: f64, alpha: f64, m: f64) -> Result<Generated> {
    if n == 0 || !(f_at_1 >= 1.0) || !(beta >= 1.0) {
        return Err(Error::Invalid("star needs n >= 1, f(1) >= 1, beta >= 1".into()));
    }
    let d = 2.0 * beta * f_at_1;
    let mut rows = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let (si, ri, sj, rj) = (i, n + i, j, n + j);
            if i == j {
                rows[si][ri] = 1.0;
                rows[ri][si] = 1.0;
            } else {
                rows[si][sj] = d;
                rows[ri][rj] = d + 2.0;
                rows[si][rj] = d + 1.0;
                rows[rj][si] = d + 1.0;
            }
        }
    }
    let links = (0..n).map(|i| Link::new(i, n + i).with_beta(beta)).collect();
    let instance = Instance::new(MetricContext::matrix(alpha, m), Space::matrix(&rows)?, links)?.with_floor(false);
    let bound = (2.0 * f_at_1 + 1.0).powi(2) / (beta * beta) + 1.0;
    let meta = json!({ "size_bound": bound, "exact_size_bound": (d + 1.0).powf(alpha) / beta + 1.0 });
    Ok(Generated { instance, witness: Vec::new(), truncated: false, meta })
}

/// Generator family with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Family {
    RandomEuclidean(RandomParams),
    NdependenceChain { n: usize, f: SublinearF, #[serde(default = "two")] c: f64, #[serde(default = "one")] beta: f64, #[serde(default = "three")] alpha: f64 },
    HardinstanceRecursive(HardParams),
    UniformPowerClique { n: usize, #[serde(default = "one")] h: f64, #[serde(default = "two")] alpha: f64 },
    GeneralMetricStar { n: usize, #[serde(default = "one")] f_at_1: f64, #[serde(default = "one")] beta: f64, #[serde(default = "three")] alpha: f64, #[serde(default = "one")] m: f64 },
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn three() -> f64 {
    3.0
}

/// A generator family plus seed; the unit of reproducibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub seed: u64,
}

impl GenSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        GenSpec { family, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        GenSpec { family: self.family.clone(), seed }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("spec serialization cannot fail");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    pub fn kind(&self) -> &'static str {
        match self.family {
            Family::RandomEuclidean(_) => "random-euclidean",
            Family::NdependenceChain { .. } => "ndependence-chain",
            Family::HardinstanceRecursive(_) => "hardinstance-recursive",
            Family::UniformPowerClique { .. } => "uniform-power-clique",
            Family::GeneralMetricStar { .. } => "general-metric-star",
        }
    }

    /// Runs the generator and attaches provenance.
    pub fn generate(&self) -> Result<Generated> {
        let mut out = match &self.family {
            Family::RandomEuclidean(p) => {
                Generated { instance: gen_random(p, self.seed)?, witness: Vec::new(), truncated: false, meta: Value::Null }
            }
            Family::NdependenceChain { n, f, c, beta, alpha } => gen_ndependence(*n, *f, *c, *beta, *alpha)?,
            Family::HardinstanceRecursive(p) => gen_hardinstance(p)?,
            Family::UniformPowerClique { n, h, alpha } => gen_uniform_power_clique(*n, *h, *alpha)?,
            Family::GeneralMetricStar { n, f_at_1, beta, alpha, m } => gen_general_metric_star(*n, *f_at_1, *beta, *alpha, *m)?,
        };
        let spec = serde_json::to_value(self)?;
        let provenance = json!({
            "generator": self.kind(),
            "params": spec["params"],
            "seed": self.seed,
            "spec_hash": self.hash(),
            "truncated": out.truncated,
            "witness": out.witness,
            "meta": out.meta,
        });
        out.instance = out.instance.with_provenance(provenance);
        Ok(out)
    }
}
