//! Links, metric spaces and instances.
//!
//! An [`Instance`] owns a finite point set (Euclidean coordinates or an
//! explicit distance matrix) and a list of directed links between points.
//! Link lengths and sensitivities are computed once at construction, so an
//! instance is immutable and safe to share across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a link inside its instance.
pub type LinkId = usize;

/// Relative slack allowed when checking the triangle inequality.
pub const TRIANGLE_TOL: f64 = 1e-9;

/// Above this many nodes the triangle inequality is checked on samples.
pub const TRIANGLE_EXACT_MAX: usize = 512;

const TRIANGLE_SAMPLES: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Matrix,
}

/// Path-loss exponent, doubling dimension and the kind of metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricContext {
    pub kind: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub alpha: f64,
    pub m: f64,
}

impl MetricContext {
    pub fn euclidean(dim: usize, alpha: f64) -> Self {
        MetricContext { kind: MetricKind::Euclidean, dim: Some(dim), alpha, m: dim as f64 }
    }

    pub fn matrix(alpha: f64, m: f64) -> Self {
        MetricContext { kind: MetricKind::Matrix, dim: None, alpha, m }
    }
}

/// Point set the links live on.
#[derive(Clone, Debug, PartialEq)]
pub enum Space {
    /// Row-major coordinates, `dim` values per node.
    Euclidean { dim: usize, coords: Vec<f64> },
    /// Row-major symmetric distance matrix.
    Matrix { n: usize, d: Vec<f64> },
}

impl Space {
    pub fn euclidean(points: &[Vec<f64>]) -> Result<Space> {
        let dim = points.first().map_or(1, |p| p.len());
        if dim == 0 {
            return Err(Error::Invalid("points must have at least one coordinate".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::Invalid("points have inconsistent dimension".into()));
            }
            coords.extend_from_slice(p);
        }
        Ok(Space::Euclidean { dim, coords })
    }

    pub fn matrix(rows: &[Vec<f64>]) -> Result<Space> {
        let n = rows.len();
        let mut d = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Invalid("distance matrix must be square".into()));
            }
            d.extend_from_slice(row);
        }
        Ok(Space::Matrix { n, d })
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            Space::Euclidean { dim, coords } => coords.len() / dim,
            Space::Matrix { n, .. } => *n,
        }
    }

    /// Distance between two nodes.
    #[inline]
    pub fn dist(&self, u: usize, v: usize) -> f64 {
        match self {
            Space::Euclidean { dim, coords } => {
                let (a, b) = (&coords[u * dim..(u + 1) * dim], &coords[v * dim..(v + 1) * dim]);
                if *dim == 1 {
                    (a[0] - b[0]).abs()
                } else {
                    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
                }
            }
            Space::Matrix { n, d } => d[u * n + v],
        }
    }

    /// Coordinates of a node, if the space is Euclidean.
    pub fn point(&self, u: usize) -> Option<&[f64]> {
        match self {
            Space::Euclidean { dim, coords } => Some(&coords[u * dim..(u + 1) * dim]),
            Space::Matrix { .. } => None,
        }
    }

    fn validate_matrix(&self) -> Result<()> {
        let Space::Matrix { n, d } = self else { return Ok(()) };
        let n = *n;
        for u in 0..n {
            if d[u * n + u] != 0.0 {
                return Err(Error::Invalid(format!("distance matrix diagonal at {u} is not zero")));
            }
            for v in 0..n {
                let x = d[u * n + v];
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::Invalid(format!("distance d({u},{v}) = {x} is not a finite non-negative number")));
                }
                if x != d[v * n + u] {
                    return Err(Error::Invalid(format!("distance matrix is not symmetric at ({u},{v})")));
                }
            }
        }
        let check = |a: usize, b: usize, c: usize| -> Result<()> {
            let (ab, bc, ac) = (d[a * n + b], d[b * n + c], d[a * n + c]);
            if ac > (ab + bc) * (1.0 + TRIANGLE_TOL) {
                return Err(Error::Invalid(format!(
                    "triangle inequality violated: d({a},{c}) = {ac} > d({a},{b}) + d({b},{c}) = {}",
                    ab + bc
                )));
            }
            Ok(())
        };
        if n <= TRIANGLE_EXACT_MAX {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        check(a, b, c)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7269_616e_676c_6500);
            for _ in 0..TRIANGLE_SAMPLES {
                check(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n))?;
            }
        }
        Ok(())
    }
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn is_true(b: &bool) -> bool {
    *b
}

fn yes() -> bool {
    true
}

/// A directed link from sender node `s` to receiver node `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub s: usize,
    pub r: usize,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub beta: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub noise: f64,
}

impl Link {
    pub fn new(s: usize, r: usize) -> Self {
        Link { s, r, beta: 1.0, weight: 1.0, noise: 0.0 }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }
}

/// On-disk JSON layout of an instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub metric: MetricContext,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dmatrix: Option<Vec<Vec<f64>>>,
    pub links: Vec<Link>,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub sensitivity_floor: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

/// A validated set of links on a metric space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct Instance {
    metric: MetricContext,
    space: Space,
    links: Vec<Link>,
    floor: bool,
    provenance: Option<serde_json::Value>,
    length: Vec<f64>,
    sens: Vec<f64>,
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Instance> {
        let space = match (f.metric.kind, f.nodes, f.dmatrix) {
            (MetricKind::Euclidean, Some(nodes), None) => Space::euclidean(&nodes)?,
            (MetricKind::Matrix, None, Some(rows)) => Space::matrix(&rows)?,
            (MetricKind::Euclidean, _, _) => {
                return Err(Error::Invalid("euclidean instances need \"nodes\" and no \"dmatrix\"".into()))
            }
            (MetricKind::Matrix, _, _) => {
                return Err(Error::Invalid("matrix instances need \"dmatrix\" and no \"nodes\"".into()))
            }
        };
        let mut inst = Instance::new(f.metric, space, f.links)?.with_floor(f.sensitivity_floor);
        inst.provenance = f.provenance;
        Ok(inst)
    }
}

impl From<Instance> for InstanceFile {
    fn from(inst: Instance) -> InstanceFile {
        let (nodes, dmatrix) = match &inst.space {
            Space::Euclidean { dim, coords } => (Some(coords.chunks(*dim).map(<[f64]>::to_vec).collect()), None),
            Space::Matrix { n, d } => (None, Some(d.chunks(*n).map(<[f64]>::to_vec).collect())),
        };
        InstanceFile {
            metric: inst.metric,
            nodes,
            dmatrix,
            links: inst.links,
            sensitivity_floor: inst.floor,
            provenance: inst.provenance,
        }
    }
}

impl Instance {
    /// Validates and builds an instance. The sensitivity floor is on.
    pub fn new(metric: MetricContext, space: Space, links: Vec<Link>) -> Result<Instance> {
        let MetricContext { kind, dim, alpha, m } = metric;
        if !(alpha.is_finite() && m.is_finite() && m > 0.0) {
            return Err(Error::Invalid(format!("alpha = {alpha} and m = {m} must be finite with m > 0")));
        }
        if alpha <= m {
            return Err(Error::Invalid(format!("path-loss exponent alpha = {alpha} must exceed m = {m}")));
        }
        match (&space, kind) {
            (Space::Euclidean { dim: d, coords }, MetricKind::Euclidean) => {
                if dim.is_some_and(|x| x != *d) {
                    return Err(Error::Invalid(format!("declared dim {dim:?} does not match points of dimension {d}")));
                }
                if m != *d as f64 {
                    return Err(Error::Invalid(format!("euclidean metric needs m = dim = {d}, got m = {m}")));
                }
                if coords.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Invalid("node coordinates must be finite".into()));
                }
            }
            (Space::Matrix { .. }, MetricKind::Matrix) => space.validate_matrix()?,
            _ => return Err(Error::Invalid("metric kind does not match the point set".into())),
        }
        let n_nodes = space.n_nodes();
        let mut length = Vec::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            if l.s >= n_nodes || l.r >= n_nodes {
                return Err(Error::Invalid(format!("link {i} refers to a node outside 0..{n_nodes}")));
            }
            if !(l.beta.is_finite() && l.beta >= 1.0) {
                return Err(Error::Invalid(format!("link {i}: beta = {} must be >= 1", l.beta)));
            }
            if !(l.weight.is_finite() && l.weight >= 0.0) {
                return Err(Error::Invalid(format!("link {i}: weight = {} must be >= 0", l.weight)));
            }
            if !(l.noise.is_finite() && l.noise >= 0.0) {
                return Err(Error::Invalid(format!("link {i}: noise = {} must be >= 0", l.noise)));
            }
            let len = space.dist(l.s, l.r);
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::Invalid(format!("link {i} has non-positive length {len}")));
            }
            length.push(len);
        }
        let mut inst = Instance {
            metric: MetricContext { dim: dim.or(space_dim(&space)), ..metric },
            space,
            links,
            floor: true,
            provenance: None,
            length,
            sens: Vec::new(),
        };
        inst.recompute_sensitivity();
        Ok(inst)
    }

    fn recompute_sensitivity(&mut self) {
        let a = self.metric.alpha;
        self.sens = (0..self.links.len())
            .map(|i| {
                let raw = self.links[i].beta.powf(1.0 / a) * self.length[i];
                if self.floor {
                    raw.max(4.0 * self.length[i])
                } else {
                    raw
                }
            })
            .collect();
    }

    /// Returns a copy with the sensitivity floor `max(., 4 l)` switched on or off.
    pub fn with_floor(mut self, floor: bool) -> Instance {
        if self.floor != floor {
            self.floor = floor;
            self.recompute_sensitivity();
        }
        self
    }

    pub fn with_provenance(mut self, provenance: serde_json::Value) -> Instance {
        self.provenance = Some(provenance);
        self
    }

    pub fn metric(&self) -> &MetricContext {
        &self.metric
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn alpha(&self) -> f64 {
        self.metric.alpha
    }

    pub fn m(&self) -> f64 {
        self.metric.m
    }

    pub fn floor(&self) -> bool {
        self.floor
    }

    pub fn provenance(&self) -> Option<&serde_json::Value> {
        self.provenance.as_ref()
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, i: LinkId) -> &Link {
        &self.links[i]
    }

    pub fn ids(&self) -> Vec<LinkId> {
        (0..self.links.len()).collect()
    }

    /// Link length `d(s_i, r_i)`.
    #[inline]
    pub fn length(&self, i: LinkId) -> f64 {
        self.length[i]
    }

    /// Sensitivity `beta_i^(1/alpha) l_i`, raised to at least `4 l_i` when the floor is on.
    #[inline]
    pub fn sensitivity(&self, i: LinkId) -> f64 {
        self.sens[i]
    }

    /// Distance from the sender of `i` to the receiver of `j`.
    #[inline]
    pub fn d_sr(&self, i: LinkId, j: LinkId) -> f64 {
        self.space.dist(self.links[i].s, self.links[j].r)
    }

    /// Smallest distance between an endpoint of `i` and an endpoint of `j`.
    #[inline]
    pub fn link_distance(&self, i: LinkId, j: LinkId) -> f64 {
        let (a, b) = (&self.links[i], &self.links[j]);
        let sp = &self.space;
        sp.dist(a.s, b.s).min(sp.dist(a.s, b.r)).min(sp.dist(a.r, b.s)).min(sp.dist(a.r, b.r))
    }

    /// Whether two links sit on the same pair of positions.
    pub fn co_located(&self, i: LinkId, j: LinkId) -> bool {
        let (a, b) = (&self.links[i], &self.links[j]);
        self.space.dist(a.s, b.s) == 0.0 && self.space.dist(a.r, b.r) == 0.0
    }

    /// Sensitivity diversity `max l / min l` over `s` (1 for sets of size < 2).
    pub fn diversity(&self, s: &[LinkId]) -> f64 {
        if s.len() < 2 {
            return 1.0;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for &i in s {
            lo = lo.min(self.sens[i]);
            hi = hi.max(self.sens[i]);
        }
        hi / lo
    }

    /// Returns an instance with the same points and only the links in `s`, renumbered in order.
    pub fn subset(&self, s: &[LinkId]) -> Instance {
        Instance {
            metric: self.metric.clone(),
            space: self.space.clone(),
            links: s.iter().map(|&i| self.links[i].clone()).collect(),
            floor: self.floor,
            provenance: None,
            length: s.iter().map(|&i| self.length[i]).collect(),
            sens: s.iter().map(|&i| self.sens[i]).collect(),
        }
    }

    /// Checks that every id in `s` is a valid link and appears once.
    pub fn check_subset(&self, s: &[LinkId]) -> Result<()> {
        let mut seen = vec![false; self.links.len()];
        for &i in s {
            if i >= self.links.len() {
                return Err(Error::Invalid(format!("link id {i} out of range 0..{}", self.links.len())));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Invalid(format!("link id {i} appears twice")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }
}

fn space_dim(space: &Space) -> Option<usize> {
    match space {
        Space::Euclidean { dim, .. } => Some(*dim),
        Space::Matrix { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(points: &[f64], links: Vec<Link>, alpha: f64) -> Instance {
        let pts: Vec<Vec<f64>> = points.iter().map(|&x| vec![x]).collect();
        Instance::new(MetricContext::euclidean(1, alpha), Space::euclidean(&pts).unwrap(), links).unwrap()
    }

    #[test]
    fn unit_link_sensitivity_with_and_without_floor() {
        let inst = line(&[0.0, 1.0], vec![Link::new(0, 1).with_beta(8.0)], 3.0);
        assert_relative_eq!(inst.sensitivity(0), 4.0);
        let inst = inst.with_floor(false);
        assert_relative_eq!(inst.sensitivity(0), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn distances_between_links() {
        let inst = line(&[0.0, 1.0, 3.0, 4.0], vec![Link::new(0, 1), Link::new(2, 3)], 2.0);
        assert_eq!(inst.d_sr(0, 1), 4.0);
        assert_eq!(inst.d_sr(1, 0), 2.0);
        assert_eq!(inst.link_distance(0, 1), 2.0);
        assert_eq!(inst.diversity(&[0, 1]), 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let pts = Space::euclidean(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let bad_alpha = Instance::new(MetricContext::euclidean(2, 2.0), pts.clone(), vec![Link::new(0, 1)]);
        assert!(matches!(bad_alpha, Err(Error::Invalid(_))));
        let zero_len = Instance::new(MetricContext::euclidean(2, 3.0), pts.clone(), vec![Link::new(0, 0)]);
        assert!(zero_len.is_err());
        let low_beta = Instance::new(MetricContext::euclidean(2, 3.0), pts, vec![Link::new(0, 1).with_beta(0.5)]);
        assert!(low_beta.is_err());
    }

    #[test]
    fn rejects_non_metric_matrix() {
        let rows = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        let r = Instance::new(MetricContext::matrix(3.0, 1.0), Space::matrix(&rows).unwrap(), vec![Link::new(0, 1)]);
        assert!(matches!(r, Err(Error::Invalid(msg)) if msg.contains("triangle")));
        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(Instance::new(MetricContext::matrix(3.0, 1.0), Space::matrix(&asym).unwrap(), vec![]).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let inst = line(&[0.1, 0.7 + 1e-13, 1.0 / 3.0, 2.0f64.sqrt()], vec![Link::new(0, 1).with_beta(2.5), Link::new(2, 3).with_noise(1e-7)], 3.0);
        let text = inst.to_json();
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(inst, back);
        assert_eq!(text, back.to_json());
    }

    #[test]
    fn matrix_json_requires_dmatrix() {
        let text = r#"{"metric":{"kind":"matrix","alpha":3,"m":1},"nodes":[[0],[1]],"links":[]}"#;
        assert!(Instance::from_json(text).is_err());
        let text = r#"{"metric":{"kind":"matrix","alpha":3,"m":1},"dmatrix":[[0,2],[2,0]],"links":[{"s":0,"r":1}]}"#;
        let inst = Instance::from_json(text).unwrap();
        assert_eq!(inst.length(0), 2.0);
    }
}
