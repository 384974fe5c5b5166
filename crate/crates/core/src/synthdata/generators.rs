use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::vmf::{sample_vmf_with, uniform_sphere, VmfParams};
use super::{Dataset, Provenance};
use crate::manifolds::linalg::symmetrize;
use crate::manifolds::preshape::similarity_transform;
use crate::manifolds::spd::{check_spd, exp_with, SpdRoots};
use crate::manifolds::{preshape, Manifold, ManifoldPoint};
use crate::nn::Targets;
use crate::{rng_from_seed, Error, Result, Rng};

/// Hierarchical vMF mixture on `S^dim`: each class draws `sub_centers`
/// centers around its mean direction, and each observation picks one of
/// them uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub dim: usize,
    pub classes: usize,
    /// Class mean directions; `None` uses the first coordinate axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
    pub kappa1: f64,
    pub kappa2: f64,
    pub sub_centers: usize,
    pub n_per_class: usize,
    pub seed: u64,
}

impl MixtureSpec {
    fn class_centers(&self) -> Result<Vec<VmfParams>> {
        let m = self.dim + 1;
        let dirs: Vec<DVector<f64>> = match &self.centers {
            Some(c) => c.iter().map(|v| DVector::from_column_slice(v)).collect(),
            None => {
                if self.classes > m {
                    return Err(Error::InvalidSpec(format!(
                        "{} classes need explicit centers on S^{}",
                        self.classes, self.dim
                    )));
                }
                (0..self.classes)
                    .map(|i| {
                        let mut v = DVector::zeros(m);
                        v[i] = 1.0;
                        v
                    })
                    .collect()
            }
        };
        if dirs.len() != self.classes {
            return Err(Error::InvalidSpec(format!(
                "{} centers for {} classes",
                dirs.len(),
                self.classes
            )));
        }
        dirs.into_iter()
            .map(|d| {
                if d.len() != m {
                    return Err(Error::Shape(format!("center of length {} on S^{}", d.len(), self.dim)));
                }
                VmfParams::new(d, self.kappa1)
            })
            .collect()
    }
}

pub fn sample_mixture(spec: &MixtureSpec) -> Result<Dataset> {
    if spec.dim == 0 || spec.classes == 0 || spec.n_per_class == 0 || spec.sub_centers == 0 {
        return Err(Error::InvalidSpec("mixture sizes must be positive".into()));
    }
    if !(spec.kappa2 >= 0.0) {
        return Err(Error::InvalidSpec(format!("kappa2 must be >= 0, got {}", spec.kappa2)));
    }
    let centers = spec.class_centers()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut inputs = Vec::with_capacity(spec.classes * spec.n_per_class);
    let mut labels = Vec::with_capacity(inputs.capacity());
    for (class, center) in centers.iter().enumerate() {
        let subs = (0..spec.sub_centers)
            .map(|_| VmfParams::new(sample_vmf_with(center, &mut rng), spec.kappa2))
            .collect::<Result<Vec<_>>>()?;
        for _ in 0..spec.n_per_class {
            let m = &subs[rng.random_range(0..subs.len())];
            inputs.push(ManifoldPoint::Sphere(sample_vmf_with(m, &mut rng)));
            labels.push(class);
        }
    }
    Dataset::new(
        Manifold::Sphere { dim: spec.dim },
        inputs,
        Targets::Labels {
            labels,
            classes: spec.classes,
        },
        Provenance::new("mixture", Some(spec.seed), spec),
    )
}

/// Noisy, randomly posed copies of landmark templates, one class per
/// template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub templates: Vec<Vec<[f64; 2]>>,
    /// Standard deviation of the i.i.d. landmark noise, relative to the
    /// template as given.
    pub noise: f64,
    pub n_per_class: usize,
    /// Rotations are drawn uniformly from `[−max_rotation, max_rotation]`.
    pub max_rotation: f64,
    pub seed: u64,
}

/// `k` points on a bent ellipse: `(cos t, aspect·sin t + bend·cos 2t)`.
pub fn ellipse_template(k: usize, aspect: f64, bend: f64) -> Vec<[f64; 2]> {
    (0..k)
        .map(|j| {
            let t = std::f64::consts::TAU * j as f64 / k as f64;
            [t.cos(), aspect * t.sin() + bend * (2.0 * t).cos()]
        })
        .collect()
}

pub fn gen_planar_shapes(spec: &ShapeSpec) -> Result<Dataset> {
    let k = spec.templates.first().map_or(0, Vec::len);
    if spec.templates.is_empty() || spec.templates.iter().any(|t| t.len() != k) {
        return Err(Error::InvalidSpec("templates must be nonempty with equal landmark counts".into()));
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::InvalidSpec(format!("noise must be >= 0, got {}", spec.noise)));
    }
    for (i, t) in spec.templates.iter().enumerate() {
        preshape(t).map_err(|e| match e {
            Error::DegenerateShape(m) => Error::DegenerateShape(format!("template {i}: {m}")),
            e => e,
        })?;
    }
    let mut rng = rng_from_seed(spec.seed);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (class, template) in spec.templates.iter().enumerate() {
        for _ in 0..spec.n_per_class {
            let noisy: Vec<[f64; 2]> = template
                .iter()
                .map(|p| [p[0] + noise.sample(&mut rng), p[1] + noise.sample(&mut rng)])
                .collect();
            let angle = if spec.max_rotation > 0.0 {
                rng.random_range(-spec.max_rotation..=spec.max_rotation)
            } else {
                0.0
            };
            let scale = rng.random_range(0.5f64..2.0);
            let shift = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            inputs.push(preshape(&similarity_transform(&noisy, angle, scale, shift))?);
            labels.push(class);
        }
    }
    Dataset::new(
        Manifold::Preshape { landmarks: k },
        inputs,
        Targets::Labels {
            labels,
            classes: spec.templates.len(),
        },
        Provenance::new("planar-shapes", Some(spec.seed), spec),
    )
}

/// SPD classes scattered around base points: `Exp_{P0}(P0^{1/2} Z P0^{1/2})`
/// with `Z` symmetric, i.i.d. `N(0, spread²)` entries on and above the
/// diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdClassSpec {
    pub size: usize,
    pub bases: Vec<DMatrix<f64>>,
    pub spread: f64,
    pub n_per_class: usize,
    pub seed: u64,
}

fn symmetric_gaussian(n: usize, rng: &mut Rng) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = StandardNormal.sample(rng);
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    z
}

/// `classes` base points `exp(separation · B_k)` with `B_k` random
/// symmetric of unit Frobenius norm, so each lies at affine distance
/// `separation / 2` from the identity.
pub fn random_spd_bases(size: usize, classes: usize, separation: f64, seed: u64) -> Vec<DMatrix<f64>> {
    let mut rng = rng_from_seed(seed);
    let roots = SpdRoots {
        sqrt: DMatrix::identity(size, size),
        inv_sqrt: DMatrix::identity(size, size),
    };
    (0..classes)
        .map(|_| {
            let b = symmetric_gaussian(size, &mut rng);
            let b = &b / b.norm();
            exp_with(&roots, &(b * separation)).expect("symmetric tangent")
        })
        .collect()
}

pub fn gen_spd_dataset(spec: &SpdClassSpec) -> Result<Dataset> {
    if spec.bases.is_empty() {
        return Err(Error::InvalidSpec("SPD generator needs at least one class".into()));
    }
    if !(spec.spread >= 0.0) || !spec.spread.is_finite() {
        return Err(Error::InvalidSpec(format!("spread must be >= 0, got {}", spec.spread)));
    }
    let roots = spec
        .bases
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if b.nrows() != spec.size || !b.is_square() {
                return Err(Error::Shape(format!("base {i} is not {0}x{0}", spec.size)));
            }
            let e = check_spd(b)?;
            Ok(SpdRoots::from_eigen(&e))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (class, (base, r)) in spec.bases.iter().zip(&roots).enumerate() {
        for _ in 0..spec.n_per_class {
            let p = if spec.spread == 0.0 {
                base.clone()
            } else {
                let z = symmetric_gaussian(spec.size, &mut rng) * spec.spread;
                exp_with(r, &r.unwhiten(&z))?
            };
            inputs.push(ManifoldPoint::spd(symmetrize(&p))?);
            labels.push(class);
        }
    }
    Dataset::new(
        Manifold::Spd { size: spec.size },
        inputs,
        Targets::Labels {
            labels,
            classes: spec.bases.len(),
        },
        Provenance::new("spd-classes", Some(spec.seed), spec),
    )
}

/// Regression function on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionTarget {
    Zero,
    Constant(f64),
    /// `sin(3 x_1) x_2 + x_3²`; needs at least three ambient coordinates.
    Smooth,
}

impl RegressionTarget {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            RegressionTarget::Zero => 0.0,
            RegressionTarget::Constant(c) => *c,
            RegressionTarget::Smooth => (3.0 * x[0]).sin() * x[1] + x[2] * x[2],
        }
    }

    /// Constant targets leave nothing to learn, so no rate exists.
    pub fn is_constant(&self) -> bool {
        matches!(self, RegressionTarget::Zero | RegressionTarget::Constant(_))
    }

    pub fn min_ambient_len(&self) -> usize {
        match self {
            RegressionTarget::Smooth => 3,
            _ => 1,
        }
    }
}

/// Uniform inputs on `S^dim` with targets `f0(x) + N(0, noise²)`.
pub fn gen_regression_sphere(
    f0: RegressionTarget,
    dim: usize,
    noise: f64,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if dim + 1 < f0.min_ambient_len() || dim == 0 {
        return Err(Error::InvalidSpec(format!("{f0:?} is not defined on S^{dim}")));
    }
    let normal = Normal::new(0.0, noise).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let x = uniform_sphere(dim, &mut rng);
        let eps = if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
        values.push(f0.eval(&x) + eps);
        inputs.push(ManifoldPoint::Sphere(x));
    }
    #[derive(Serialize)]
    struct Spec {
        f0: RegressionTarget,
        dim: usize,
        noise: f64,
        n: usize,
    }
    Dataset::new(
        Manifold::Sphere { dim },
        inputs,
        Targets::Values(values),
        Provenance::new("regression-sphere", Some(seed), Spec { f0, dim, noise, n }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::{geodesic_distance, vw_embed};

    fn mixture(seed: u64) -> MixtureSpec {
        MixtureSpec {
            dim: 2,
            classes: 2,
            centers: None,
            kappa1: 4.0,
            kappa2: 20.0,
            sub_centers: 10,
            n_per_class: 50,
            seed,
        }
    }

    #[test]
    fn mixture_is_deterministic_and_labeled() {
        let a = sample_mixture(&mixture(3)).unwrap();
        let b = sample_mixture(&mixture(3)).unwrap();
        assert_eq!(a.inputs(), b.inputs());
        assert_eq!(a.len(), 100);
        assert_eq!(a.targets().labels().unwrap().iter().filter(|&&l| l == 1).count(), 50);
    }

    #[test]
    fn tight_sub_centers_stay_at_class_center() {
        let mut spec = mixture(1);
        spec.kappa1 = 1e6;
        spec.kappa2 = 1e6;
        let d = sample_mixture(&spec).unwrap();
        let e0 = ManifoldPoint::Sphere(DVector::from_vec(vec![1.0, 0.0, 0.0]));
        for (x, &l) in d.inputs().iter().zip(d.targets().labels().unwrap()) {
            if l == 0 {
                assert!(geodesic_distance(x, &e0).unwrap() < 0.02);
            }
        }
    }

    #[test]
    fn noiseless_shapes_share_features() {
        let spec = ShapeSpec {
            templates: vec![ellipse_template(6, 0.5, 0.0), ellipse_template(6, 0.5, 0.3)],
            noise: 0.0,
            n_per_class: 5,
            max_rotation: std::f64::consts::PI,
            seed: 4,
        };
        let d = gen_planar_shapes(&spec).unwrap();
        let f0 = vw_embed(&d.inputs()[0]).unwrap();
        for x in &d.inputs()[1..5] {
            assert!((vw_embed(x).unwrap() - &f0).amax() < 1e-12);
        }
        assert!((vw_embed(&d.inputs()[5]).unwrap() - &f0).amax() > 1e-3);
    }

    #[test]
    fn unrotated_noiseless_shape_is_template_preshape() {
        let t = ellipse_template(5, 0.7, 0.1);
        let spec = ShapeSpec {
            templates: vec![t.clone()],
            noise: 0.0,
            n_per_class: 1,
            max_rotation: 0.0,
            seed: 0,
        };
        let d = gen_planar_shapes(&spec).unwrap();
        let want = preshape(&t).unwrap();
        let got = d.inputs()[0].as_vector().unwrap();
        assert!((got - want.as_vector().unwrap()).amax() < 1e-12);
    }

    #[test]
    fn degenerate_template_is_rejected() {
        let spec = ShapeSpec {
            templates: vec![vec![[1.0, 1.0]; 4]],
            noise: 0.1,
            n_per_class: 1,
            max_rotation: 0.0,
            seed: 0,
        };
        assert!(matches!(gen_planar_shapes(&spec), Err(Error::DegenerateShape(_))));
    }

    #[test]
    fn zero_spread_repeats_base() {
        let bases = random_spd_bases(4, 2, 1.0, 7);
        let d = gen_spd_dataset(&SpdClassSpec {
            size: 4,
            bases: bases.clone(),
            spread: 0.0,
            n_per_class: 3,
            seed: 1,
        })
        .unwrap();
        assert_eq!(d.inputs()[4].as_matrix().unwrap(), &bases[1]);
    }

    #[test]
    fn spd_samples_are_valid() {
        let d = gen_spd_dataset(&SpdClassSpec {
            size: 5,
            bases: random_spd_bases(5, 3, 2.0, 7),
            spread: 0.5,
            n_per_class: 20,
            seed: 2,
        })
        .unwrap();
        for x in d.inputs() {
            x.validate().unwrap();
        }
    }

    #[test]
    fn base_distance_from_identity() {
        let b = &random_spd_bases(3, 1, 1.4, 2)[0];
        let d = crate::manifolds::spd::affine_distance(&DMatrix::identity(3, 3), b).unwrap();
        assert!((d - 0.7).abs() < 1e-10);
    }

    #[test]
    fn noiseless_regression_is_exact() {
        let d = gen_regression_sphere(RegressionTarget::Smooth, 2, 0.0, 20, 1).unwrap();
        for (x, y) in d.inputs().iter().zip(d.targets().values().unwrap()) {
            assert_eq!(*y, RegressionTarget::Smooth.eval(x.as_vector().unwrap()));
        }
    }

    #[test]
    fn noise_variance() {
        let d = gen_regression_sphere(RegressionTarget::Zero, 2, 1.0, 10_000, 5).unwrap();
        let ys = d.targets().values().unwrap();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (ys.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05);
    }
}
