//! Structural checks of the extremal constructions.

use sinr_sketch::conflict::{build_graph, SublinearF};
use sinr_sketch::generators::{gen_general_metric_star, gen_hardinstance, gen_ndependence, gen_random, Family, GenSpec, HardParams, RandomParams};
use sinr_sketch::model::Space;
use sinr_sketch::sinr::spectral_feasibility;

#[test]
fn generators_are_deterministic() {
    let specs = [
        GenSpec::new(Family::RandomEuclidean(RandomParams { n: 20, ..Default::default() }), 11),
        GenSpec::new(Family::NdependenceChain { n: 5, f: SublinearF::power(1.0, 0.5), c: 2.0, beta: 1.0, alpha: 3.0 }, 0),
        GenSpec::new(Family::HardinstanceRecursive(HardParams::default()), 0),
        GenSpec::new(Family::UniformPowerClique { n: 20, h: 1.0, alpha: 2.0 }, 0),
        GenSpec::new(Family::GeneralMetricStar { n: 5, f_at_1: 1.0, beta: 1.0, alpha: 3.0, m: 1.0 }, 0),
    ];
    for spec in &specs {
        let (a, b) = (spec.generate().unwrap(), spec.generate().unwrap());
        assert_eq!(a.instance.to_json(), b.instance.to_json(), "{}", spec.kind());
    }
    assert_eq!(gen_random(&RandomParams::default(), 4).unwrap(), gen_random(&RandomParams::default(), 4).unwrap());
}

#[test]
fn chain_grows_geometrically() {
    for c in [2.0, 3.0] {
        let g = gen_ndependence(8, SublinearF::power(1.0, 0.5), c, 1.0, 3.0).unwrap();
        for i in 0..7 {
            assert!(g.instance.length(i + 1) >= c * g.instance.length(i));
        }
    }
}

/// Links in top-level copies `r < s` are more than `27 C (s - r)` times the
/// diameter of copy `r` apart.
fn check_cross_copy_separation(p: &HardParams) {
    let g = gen_hardinstance(p).unwrap();
    let meta = &g.meta["links"];
    let diams: Vec<f64> = g.meta["diameters"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let below = diams[diams.len() - 2];
    let copy = |i: usize| meta[i]["path"].as_array().unwrap().first().map(|v| v.as_u64().unwrap() as i32);
    let mut checked = 0;
    for i in 0..g.instance.n_links() {
        for k in 0..g.instance.n_links() {
            if let (Some(r), Some(s)) = (copy(i), copy(k)) {
                if r < s {
                    let bound = 27.0 * p.big_c * (s - r) as f64 * 8f64.powi(r) * below;
                    assert!(g.instance.link_distance(i, k) > bound, "links {i}, {k}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn recursive_copies_are_separated() {
    check_cross_copy_separation(&HardParams::default());
    check_cross_copy_separation(&HardParams { t_max: 3, scale_cap: Some(3), ..Default::default() });
}

/// At level two the set has no conflict edges. Its spectral radius is at least
/// that of the star between the long link and the 16 copies, computed here
/// from closed-form positions.
#[test]
fn recursive_level_two_has_no_edges() {
    let p = HardParams::default();
    let g = gen_hardinstance(&p).unwrap();
    let f = SublinearF::polylog(p.big_c, 1.0 / p.alpha);
    assert_eq!(build_graph(&g.instance, f, false).unwrap().graph.edge_count(), 0);
    let beta = 27.0f64;
    let long = 8f64.powi(17);
    let star: f64 = (1..=16)
        .map(|s| {
            let len = 8f64.powi(s);
            let gap = 9.0 * len * (long / len).log2().cbrt();
            beta * beta * (long * len / (gap * (long + gap + len))).powi(3)
        })
        .sum();
    let rho = spectral_feasibility(&g.instance, &g.instance.ids()).unwrap().radius.unwrap();
    assert!(rho >= star.sqrt() * (1.0 - 1e-9), "rho {rho} below star bound {}", star.sqrt());
}

#[test]
fn star_matrix_is_a_metric_and_saturates_its_bound() {
    let g = gen_general_metric_star(5, 1.0, 1.0, 2.0, 1.0).unwrap();
    let Space::Matrix { n, d } = g.instance.space() else { panic!("star is a matrix metric") };
    let at = |u: usize, v: usize| d[u * n + v];
    for u in 0..*n {
        for v in 0..*n {
            assert_eq!(at(u, v), at(v, u));
            for w in 0..*n {
                assert!(at(u, w) <= at(u, v) + at(v, w));
            }
        }
    }
    // With alpha = 2 and beta = 1, sets of size k are feasible iff k - 1 < (2 f(1) + 1)^2.
    let bound = g.meta["size_bound"].as_f64().unwrap();
    assert_eq!(bound, 10.0);
    let big = gen_general_metric_star(10, 1.0, 1.0, 2.0, 1.0).unwrap();
    let all: Vec<usize> = (0..9).collect();
    assert!(spectral_feasibility(&big.instance, &all).unwrap().feasible);
    assert!(!spectral_feasibility(&big.instance, &big.instance.ids()).unwrap().feasible);
}
