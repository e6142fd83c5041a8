use std::collections::BTreeMap;

use faer::Mat;
use morphrom::codec::{decode, encode};
use morphrom::dense::symmetric_eigen;
use morphrom::distfield::{BoundaryIndex, KdTree};
use morphrom::geom::closest_on_segment;
use morphrom::mesh::{shape_regularity, synth_plate, BoundaryPolyline, PolyLoop};
use morphrom::regress::{matern52, q2_score, GprConfig, GprModel};
use morphrom::Vec2;
use proptest::prelude::*;

fn star(radii: &[f64]) -> Vec<Vec2> {
    let n = radii.len() as f64;
    radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let t = std::f64::consts::TAU * i as f64 / n;
            Vec2::new(r * t.cos(), r * t.sin())
        })
        .collect()
}

fn polyline(points: Vec<Vec2>) -> BoundaryPolyline {
    let n = points.len();
    BoundaryPolyline::from_parts(vec![PolyLoop { points, tags: vec![0; n] }], vec!["wall".into()], BTreeMap::new())
        .unwrap()
}

fn brute_distance(points: &[Vec2], p: Vec2) -> f64 {
    (0..points.len())
        .map(|i| closest_on_segment(p, points[i], points[(i + 1) % points.len()]).1)
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

fn point() -> impl Strategy<Value = Vec2> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signed_distance_is_lipschitz_and_exact(
        radii in prop::collection::vec(0.5..1.5f64, 5..24),
        p in point(),
        q in point(),
    ) {
        let pts = star(&radii);
        let index = BoundaryIndex::build(&polyline(pts.clone())).unwrap();
        let (sp, sq) = (index.signed_distance(p), index.signed_distance(q));
        prop_assert!((sp - sq).abs() <= (p - q).norm() + 1e-12);
        prop_assert!((sp.abs() - brute_distance(&pts, p)).abs() < 1e-12);
        // A star polygon contains every point closer to the origin than its
        // smallest vertex radius times the cosine of half the angular step.
        let inner = 0.5 * (std::f64::consts::PI / radii.len() as f64).cos();
        if p.norm() < inner {
            prop_assert!(sp < 0.0);
        }
        if p.norm() > 1.5 {
            prop_assert!(sp > 0.0);
        }
    }

    #[test]
    fn kdtree_nearest_matches_brute_force(
        pts in prop::collection::vec(point(), 1..60),
        q in point(),
    ) {
        let (_, d2) = KdTree::new(&pts).nearest(q).unwrap();
        let best = pts.iter().map(|&p| (p - q).norm2()).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(d2, best);
    }

    #[test]
    fn q2_is_invariant_under_affine_maps(
        data in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3..30),
        a in prop_oneof![-4.0..-0.25f64, 0.25..4.0f64],
        b in -10.0..10.0f64,
    ) {
        let t: Vec<f64> = data.iter().map(|d| d.0).collect();
        let p: Vec<f64> = data.iter().map(|d| d.1).collect();
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        prop_assume!(t.iter().map(|x| (x - mean).powi(2)).sum::<f64>() > 1e-6);
        let q = q2_score(&t, &p).unwrap();
        let ta: Vec<f64> = t.iter().map(|x| a * x + b).collect();
        let pa: Vec<f64> = p.iter().map(|x| a * x + b).collect();
        let qa = q2_score(&ta, &pa).unwrap();
        prop_assert!((q - qa).abs() <= 1e-9 * (1.0 + q.abs()));
        prop_assert_eq!(q2_score(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn codec_roundtrips_bitwise(v in prop::collection::vec(any::<f64>(), 0..40)) {
        let back = decode(&encode(&v)).unwrap();
        prop_assert_eq!(back.len(), v.len());
        for (x, y) in v.iter().zip(&back) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn matern_kernel_matrix_is_psd(
        pts in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 3), 2..25),
        scale in prop::collection::vec(0.1..3.0f64, 3),
    ) {
        let n = pts.len();
        let k = Mat::from_fn(n, n, |i, j| {
            let r2: f64 = (0..3).map(|d| ((pts[i][d] - pts[j][d]) / scale[d]).powi(2)).sum();
            matern52(r2.sqrt())
        });
        let (values, _) = symmetric_eigen(&k).unwrap();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(min > -1e-10 * n as f64, "smallest eigenvalue {min}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shape_regularity_is_invariant_under_similarity(
        angle in -3.2..3.2f64,
        shift in point(),
        scale in 0.1..10.0f64,
    ) {
        let mesh = synth_plate(0.4, 0.2).unwrap();
        let base = shape_regularity(&mesh, mesh.vertices(), None).unwrap();
        let moved: Vec<Vec2> = mesh.vertices().iter().map(|&p| p.rotate(angle) * scale + shift).collect();
        let q = shape_regularity(&mesh, &moved, None).unwrap();
        for (a, b) in base.per_element.iter().zip(&q.per_element) {
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }
        prop_assert!((base.max - q.max).abs() <= 1e-9 * base.max);
    }

    #[test]
    fn gpr_is_invariant_under_sample_order(
        xs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 6..14),
        seed in any::<u64>(),
        q in (-1.0..1.0f64, -1.0..1.0f64),
    ) {
        // Well separated inputs keep the likelihood surface tame.
        for (i, a) in xs.iter().enumerate() {
            for b in &xs[..i] {
                prop_assume!((a.0 - b.0).hypot(a.1 - b.1) > 0.05);
            }
        }
        let x: Vec<Vec<f64>> = xs.iter().map(|p| vec![p.0, p.1]).collect();
        let y: Vec<Vec<f64>> = xs.iter().map(|p| vec![(2.0 * p.0).sin() + p.1 * p.1]).collect();
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let xp: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<Vec<f64>> = order.iter().map(|&i| y[i].clone()).collect();
        let cfg = GprConfig::default();
        let a = GprModel::train(&x, &y, &cfg).unwrap().predict(&[q.0, q.1]).unwrap();
        let b = GprModel::train(&xp, &yp, &cfg).unwrap().predict(&[q.0, q.1]).unwrap();
        prop_assert!((a.mean[0] - b.mean[0]).abs() < 1e-5, "{} vs {}", a.mean[0], b.mean[0]);
        prop_assert!((a.variance[0] - b.variance[0]).abs() < 1e-5);
    }
}
