mod common;

use proptest::prelude::*;

use common::weighted_cost;
use ssac::exact::brute_kmeans;
use ssac::geometry::scatter_about;
use ssac::harness::lloyd;
use ssac::oracle::AssignmentFromSame;
use ssac::{
    centroid, cost_delta_add, kmeans_cost, max_margin, satisfies_gamma_margin, Clustering, Instance, Oracle, Point,
    TruthOracle,
};

/// Points in the plane with labels covering `0..k`.
fn labelled(max_n: usize) -> impl Strategy<Value = (Vec<[f64; 2]>, Vec<usize>, usize)> {
    (2..=max_n).prop_flat_map(|n| {
        (1..=n.min(4)).prop_flat_map(move |k| {
            (
                prop::collection::vec([-50.0..50.0f64, -50.0..50.0f64], n),
                prop::collection::vec(0..k, n),
                Just(k),
            )
                .prop_map(|(pts, mut labels, k)| {
                    for (c, l) in labels.iter_mut().take(k).enumerate() {
                        *l = c;
                    }
                    (pts, labels, k)
                })
        })
    })
}

fn instance(pts: &[[f64; 2]]) -> Instance {
    Instance::from_rows(pts.iter().map(|p| p.to_vec()).collect()).unwrap()
}

fn transform(pts: &[[f64; 2]], angle: f64, shift: [f64; 2], scale: f64) -> Instance {
    let (s, c) = angle.sin_cos();
    instance(
        &pts.iter()
            .map(|p| [scale * (c * p[0] - s * p[1]) + shift[0], scale * (s * p[0] + c * p[1]) + shift[1]])
            .collect::<Vec<_>>(),
    )
}

proptest! {
    #[test]
    fn cost_is_isometry_invariant_and_scales_quadratically(
        (pts, labels, k) in labelled(12),
        angle in 0.0..std::f64::consts::TAU,
        shift in [-100.0..100.0f64, -100.0..100.0f64],
        scale in 0.1..10.0f64,
    ) {
        let c = Clustering::new(labels, k).unwrap();
        let base = kmeans_cost(&instance(&pts), &c).unwrap();
        let moved = kmeans_cost(&transform(&pts, angle, shift, 1.0), &c).unwrap();
        let scaled = kmeans_cost(&transform(&pts, angle, shift, scale), &c).unwrap();
        let tol = 1e-8 * base.max(1.0) * scale * scale;
        prop_assert!((base - moved).abs() <= tol);
        prop_assert!((scaled - scale * scale * base).abs() <= tol);
    }

    #[test]
    fn cost_delta_matches_recomputation(
        pts in prop::collection::vec([-20.0..20.0f64, -20.0..20.0f64], 2..10),
        weights in prop::collection::vec(0.5..5.0f64, 10),
        split in 1usize..9,
    ) {
        let n = pts.len();
        let split = split.min(n - 1);
        let inst = Instance::with_weights(
            pts.iter().map(|p| Point::new(p.to_vec())).collect(),
            weights[..n].to_vec(),
        ).unwrap();
        let cluster: Vec<usize> = (0..split).collect();
        let z = n - 1;
        let mut with = cluster.clone();
        with.push(z);
        let delta = cost_delta_add(&inst, &cluster, z).unwrap();
        let direct = weighted_cost(&inst, &with) - weighted_cost(&inst, &cluster);
        prop_assert!((delta - direct).abs() <= 1e-8 * direct.abs().max(1.0));
    }

    #[test]
    fn centroid_minimizes_scatter(
        pts in prop::collection::vec([-20.0..20.0f64, -20.0..20.0f64], 1..10),
        other in [-30.0..30.0f64, -30.0..30.0f64],
    ) {
        let inst = instance(&pts);
        let all: Vec<usize> = (0..pts.len()).collect();
        let mu = centroid(&inst, &all).unwrap();
        let at_mu = scatter_about(&inst, &all, &mu);
        let elsewhere = scatter_about(&inst, &all, &Point::new(other.to_vec()));
        prop_assert!(at_mu <= elsewhere + 1e-9);
    }

    #[test]
    fn margin_is_similarity_invariant(
        (pts, labels, k) in labelled(10),
        angle in 0.0..std::f64::consts::TAU,
        shift in [-100.0..100.0f64, -100.0..100.0f64],
        scale in 0.1..10.0f64,
    ) {
        let c = Clustering::new(labels, k).unwrap();
        let a = max_margin(&instance(&pts), &c).unwrap().gamma_star;
        let b = max_margin(&transform(&pts, angle, shift, scale), &c).unwrap().gamma_star;
        if a.is_finite() {
            prop_assert!((a - b).abs() <= 1e-7 * a.max(1.0));
        } else {
            prop_assert!(!b.is_finite() || b > 1e6);
        }
    }

    #[test]
    fn margin_predicate_agrees_with_margin_value((pts, labels, k) in labelled(10), t in 0.05..0.95f64) {
        let inst = instance(&pts);
        let c = Clustering::new(labels, k).unwrap();
        let star = max_margin(&inst, &c).unwrap().gamma_star;
        if star.is_finite() && star > 0.0 {
            prop_assert!(satisfies_gamma_margin(&inst, &c, star * t).unwrap());
            prop_assert!(!satisfies_gamma_margin(&inst, &c, star * (1.0 + t)).unwrap());
        }
    }

    #[test]
    fn simulated_assignments_relabel_the_truth((_, labels, k) in labelled(30), perm in Just(()).prop_perturb(|_, mut rng| {
        let mut p: Vec<usize> = (0..30).collect();
        for i in (1..p.len()).rev() {
            p.swap(i, rng.random_range(0..=i));
        }
        p
    })) {
        let truth = Clustering::new(labels, k).unwrap();
        let n = truth.len();
        let mut o = AssignmentFromSame::new(TruthOracle::new(&truth));
        let mut found = vec![0; n];
        for &i in perm.iter().filter(|&&i| i < n) {
            found[i] = o.cluster_assignment(i).unwrap();
        }
        prop_assert!(Clustering::new(found, k).unwrap().same_partition(&truth));
        prop_assert!(o.query_counts().same_cluster_count <= (n * k) as u64);
    }

    #[test]
    fn brute_force_never_loses_to_lloyd((pts, _, k) in labelled(9), seed in any::<u64>()) {
        let inst = instance(&pts);
        let brute = brute_kmeans(&inst, k).unwrap();
        let heuristic = lloyd(&inst, k, seed).unwrap();
        prop_assert!(brute.cost <= heuristic.cost + 1e-9 * heuristic.cost.max(1.0));
    }
}
