mod support;

use std::f64::consts::PI;

use manifold_nets::manifolds::linalg::{unvec_sym, vec_sym};
use manifold_nets::manifolds::preshape::similarity_transform;
use manifold_nets::manifolds::spd::{affine_distance, exp_at, log_at, log_euclidean_distance};
use manifold_nets::manifolds::{
    frechet_mean, geodesic_distance, normal_coords, partition_weights, preshape, shape_distance, sphere,
    vw_embed, Atlas, Chart, Manifold, ManifoldPoint,
};
use manifold_nets::rng_from_seed;
use manifold_nets::synthdata::uniform_sphere;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use support::{random_orthogonal, random_spd, random_symmetric};

fn gaussian(n: usize, rng: &mut manifold_nets::Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Tangent vector at `p` with the given norm.
fn tangent(p: &DVector<f64>, norm: f64, rng: &mut manifold_nets::Rng) -> DVector<f64> {
    let g = gaussian(p.len(), rng);
    let v = &g - p * p.dot(&g);
    v.normalize() * norm
}

fn landmarks(k: usize, rng: &mut manifold_nets::Rng) -> Vec<[f64; 2]> {
    (0..k).map(|_| [StandardNormal.sample(rng), StandardNormal.sample(rng)]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sphere_log_inverts_exp(seed in any::<u64>(), dim in 1usize..8, r in 0.0..(PI - 0.1)) {
        let mut rng = rng_from_seed(seed);
        let p = uniform_sphere(dim, &mut rng);
        let v = tangent(&p, r, &mut rng);
        let q = sphere::exp(&p, &v).unwrap();
        prop_assert!((q.norm() - 1.0).abs() < 1e-12);
        prop_assert!((sphere::log(&p, &q).unwrap() - &v).norm() < 1e-8);
        prop_assert!((sphere::distance(&p, &q) - r).abs() < 1e-8);
    }

    #[test]
    fn sphere_distance_is_a_metric(seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = rng_from_seed(seed);
        let [a, b, c] = [0, 1, 2].map(|_| uniform_sphere(dim, &mut rng));
        let d = sphere::distance;
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-14);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert!(d(&a, &a) < 1e-7);
    }

    #[test]
    fn spd_log_inverts_exp(seed in any::<u64>(), n in 2usize..6, r in 0.0..5.0f64) {
        let mut rng = rng_from_seed(seed);
        let p = random_spd(n, 0.2, 5.0, &mut rng);
        let s = random_symmetric(n, &mut rng);
        let s = &s / s.norm() * r;
        let q = exp_at(&p, &s).unwrap();
        prop_assert!((log_at(&p, &q).unwrap() - &s).norm() < 1e-8);
    }

    #[test]
    fn affine_distance_is_congruence_invariant(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = rng_from_seed(seed);
        let p = random_spd(n, 0.2, 5.0, &mut rng);
        let q = random_spd(n, 0.2, 5.0, &mut rng);
        // Well-conditioned invertible G = U diag(σ) Vᵀ.
        let sig = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(0.5..2.0)));
        let g = random_orthogonal(n, &mut rng) * sig * random_orthogonal(n, &mut rng);
        let before = affine_distance(&p, &q).unwrap();
        let after = affine_distance(&(&g * &p * g.transpose()), &(&g * &q * g.transpose())).unwrap();
        prop_assert!((before - after).abs() < 1e-8);
        prop_assert!((before - affine_distance(&q, &p).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn log_euclidean_distance_is_rotation_invariant(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = rng_from_seed(seed);
        let p = random_spd(n, 0.2, 5.0, &mut rng);
        let q = random_spd(n, 0.2, 5.0, &mut rng);
        let u = random_orthogonal(n, &mut rng);
        let d0 = log_euclidean_distance(&p, &q).unwrap();
        let d1 = log_euclidean_distance(&(&u * &p * u.transpose()), &(&u * &q * u.transpose())).unwrap();
        prop_assert!((d0 - d1).abs() < 1e-9);
    }

    #[test]
    fn vw_embedding_ignores_similarity(seed in any::<u64>(), k in 3usize..12, angle in -PI..PI, scale in 0.1..10.0f64) {
        let mut rng = rng_from_seed(seed);
        let z = landmarks(k, &mut rng);
        let shift = [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)];
        let moved = similarity_transform(&z, angle, scale, shift);
        let a = vw_embed(&preshape(&z).unwrap()).unwrap();
        let b = vw_embed(&preshape(&moved).unwrap()).unwrap();
        prop_assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn preshape_removes_translation_and_scale(seed in any::<u64>(), k in 3usize..12, scale in 0.1..10.0f64) {
        let mut rng = rng_from_seed(seed);
        let z = landmarks(k, &mut rng);
        let u = preshape(&z).unwrap();
        let v = preshape(&similarity_transform(&z, 0.0, scale, [5.0, -3.0])).unwrap();
        let (ua, va) = (u.as_vector().unwrap(), v.as_vector().unwrap());
        prop_assert!((ua - va).norm() < 1e-10);
        prop_assert!((ua.norm() - 1.0).abs() < 1e-10);
        let (sx, sy) = (0..k).fold((0.0, 0.0), |(x, y), j| (x + ua[2 * j], y + ua[2 * j + 1]));
        prop_assert!(sx.abs() < 1e-10 && sy.abs() < 1e-10);
    }

    #[test]
    fn shape_distance_ignores_rotation(seed in any::<u64>(), k in 3usize..10, angle in -PI..PI) {
        let mut rng = rng_from_seed(seed);
        let a = landmarks(k, &mut rng);
        let b = landmarks(k, &mut rng);
        let d0 = shape_distance(&preshape(&a).unwrap(), &preshape(&b).unwrap()).unwrap();
        let rotated = preshape(&similarity_transform(&b, angle, 1.0, [0.0, 0.0])).unwrap();
        let d1 = shape_distance(&preshape(&a).unwrap(), &rotated).unwrap();
        prop_assert!((d0 - d1).abs() < 1e-10);
        prop_assert!(d0 <= PI / 2.0 + 1e-12);
    }

    #[test]
    fn partition_of_unity_on_the_sphere(seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = rng_from_seed(seed);
        let atlas = Atlas::two_pole(Manifold::Sphere { dim }, 1.9).unwrap();
        let x = ManifoldPoint::Sphere(uniform_sphere(dim, &mut rng));
        let w = partition_weights(&atlas, &x).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&t| (0.0..=1.0).contains(&t)));
    }

    #[test]
    fn normal_coordinates_preserve_distance_to_base(seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = rng_from_seed(seed);
        let base = ManifoldPoint::Sphere(uniform_sphere(dim, &mut rng));
        let chart = Chart::new(0, base.clone(), 3.0).unwrap();
        let x = ManifoldPoint::Sphere(uniform_sphere(dim, &mut rng));
        let c = normal_coords(&chart, &x).unwrap();
        prop_assert_eq!(c.len(), dim);
        prop_assert!((c.norm() - geodesic_distance(&base, &x).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn spd_normal_coordinates_preserve_distance(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = rng_from_seed(seed);
        let base = ManifoldPoint::spd(random_spd(n, 0.3, 3.0, &mut rng)).unwrap();
        let x = ManifoldPoint::spd(random_spd(n, 0.3, 3.0, &mut rng)).unwrap();
        let chart = Chart::new(0, base.clone(), f64::MAX).unwrap();
        let c = normal_coords(&chart, &x).unwrap();
        prop_assert_eq!(c.len(), n * (n + 1) / 2);
        prop_assert!((c.norm() - geodesic_distance(&base, &x).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn vec_sym_is_an_isometry(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = rng_from_seed(seed);
        let s = random_symmetric(n, &mut rng);
        let v = vec_sym(&s);
        prop_assert!((v.norm() - s.norm()).abs() < 1e-12);
        prop_assert!((unvec_sym(&v, n) - &s).norm() < 1e-14);
    }

    #[test]
    fn frechet_mean_is_rotation_equivariant(seed in any::<u64>(), dim in 2usize..5) {
        let mut rng = rng_from_seed(seed);
        let center = uniform_sphere(dim, &mut rng);
        let pts: Vec<DVector<f64>> = (0..12)
            .map(|_| sphere::exp(&center, &tangent(&center, rng.random_range(0.0..0.8), &mut rng)).unwrap())
            .collect();
        let r = random_orthogonal(dim + 1, &mut rng);
        let wrap = |v: &[DVector<f64>]| v.iter().map(|x| ManifoldPoint::Sphere(x.clone())).collect::<Vec<_>>();
        let m0 = frechet_mean(&wrap(&pts)).unwrap();
        let rotated: Vec<DVector<f64>> = pts.iter().map(|x| &r * x).collect();
        let m1 = frechet_mean(&wrap(&rotated)).unwrap();
        prop_assert!((&r * m0.as_vector().unwrap() - m1.as_vector().unwrap()).norm() < 1e-8);
    }
}

#[test]
fn two_pole_atlas_covers_uniform_s2_samples() {
    let atlas = Atlas::two_pole(Manifold::Sphere { dim: 2 }, 1.9).unwrap();
    let mut rng = rng_from_seed(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let x = ManifoldPoint::Sphere(uniform_sphere(2, &mut rng));
        let w = partition_weights(&atlas, &x).expect("every point is covered");
        worst = worst.max((w.iter().sum::<f64>() - 1.0).abs());
    }
    assert!(worst < 1e-12, "partition sum off by {worst:e}");
}

#[test]
fn frechet_mean_of_spd_pair_is_geodesic_midpoint() {
    let mut rng = rng_from_seed(5);
    let p = random_spd(3, 0.3, 3.0, &mut rng);
    let q = random_spd(3, 0.3, 3.0, &mut rng);
    let m = frechet_mean(&[ManifoldPoint::spd(p.clone()).unwrap(), ManifoldPoint::spd(q.clone()).unwrap()]).unwrap();
    let mid = exp_at(&p, &(log_at(&p, &q).unwrap() * 0.5)).unwrap();
    assert!((m.as_matrix().unwrap() - mid).norm() < 1e-8);
}
