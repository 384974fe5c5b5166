mod support;

use manifold_nets::synthdata::{sample_vmf, VmfParams};
use nalgebra::DVector;
use support::{ks_critical_001, ks_statistic, CosineMarginal};

fn pole(m: usize) -> DVector<f64> {
    let mut mu = DVector::zeros(m);
    mu[m - 1] = 1.0;
    mu
}

fn cosines(d: usize, kappa: f64, n: usize, seed: u64) -> Vec<f64> {
    let mu = pole(d + 1);
    let params = VmfParams::new(mu.clone(), kappa).unwrap();
    sample_vmf(&params, n, seed).iter().map(|x| x.dot(&mu)).collect()
}

#[test]
fn quadrature_oracle_matches_closed_form_on_s2() {
    // On S^2 the marginal is exponential: F(w) = (e^{κw} − e^{−κ}) / (e^κ − e^{−κ}).
    let kappa = 4.0;
    let q = CosineMarginal::new(2, kappa);
    for w in [-0.9, -0.2, 0.0, 0.5, 0.95] {
        let exact = ((kappa * w).exp() - (-kappa).exp()) / (kappa.exp() - (-kappa).exp());
        assert!((q.cdf(w) - exact).abs() < 1e-9);
    }
    let mean = 1.0 / kappa.tanh() - 1.0 / kappa;
    assert!((q.mean() - mean).abs() < 1e-9);
}

#[test]
fn cosine_marginal_passes_ks() {
    let n = 100_000;
    for (i, (d, kappa)) in [(2, 4.0), (10, 20.0), (50, 20.0)].into_iter().enumerate() {
        let q = CosineMarginal::new(d, kappa);
        let mut w = cosines(d, kappa, n, 100 + i as u64);
        let stat = ks_statistic(&mut w, |x| q.cdf(x));
        assert!(stat < ks_critical_001(n), "d={d} κ={kappa}: D={stat:.5}");
    }
}

#[test]
fn uniform_case_passes_ks() {
    // κ = 0 on S^3: density ∝ (1 − w²)^{1/2}.
    let n = 50_000;
    let q = CosineMarginal::new(3, 0.0);
    let mut w = cosines(3, 0.0, n, 7);
    assert!(ks_statistic(&mut w, |x| q.cdf(x)) < ks_critical_001(n));
}

#[test]
fn mean_cosine_matches_quadrature() {
    let n = 100_000;
    let w = cosines(2, 5.0, n, 9);
    let empirical = w.iter().sum::<f64>() / n as f64;
    assert!((empirical - CosineMarginal::new(2, 5.0).mean()).abs() < 0.02);
}

#[test]
fn samples_are_unit_and_direction_is_isotropic() {
    let d = 4;
    let params = VmfParams::new(pole(d + 1), 3.0).unwrap();
    let xs = sample_vmf(&params, 20_000, 3);
    assert!(xs.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
    // The component orthogonal to μ averages to zero.
    let mut sum = DVector::zeros(d + 1);
    for x in &xs {
        sum += x;
    }
    sum /= xs.len() as f64;
    assert!(sum.rows(0, d).norm() < 0.03);
}

#[test]
fn same_seed_same_samples() {
    let params = VmfParams::new(pole(3), 2.0).unwrap();
    assert_eq!(sample_vmf(&params, 50, 11), sample_vmf(&params, 50, 11));
    assert_ne!(sample_vmf(&params, 50, 11), sample_vmf(&params, 50, 12));
}
