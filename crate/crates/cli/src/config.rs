//! Experiment configuration: parsing, defaults and cross-field validation.

use std::fmt;
use std::path::{Path, PathBuf};

use manifold_nets::experiments::{Family, ModelConfig, RateConfig, TrainConfig};
use manifold_nets::manifolds::Manifold;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MixtureClassify,
    ShapeClassify,
    SpdClassify,
    RateCheck,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::MixtureClassify => "mixture-classify",
            ExperimentKind::ShapeClassify => "shape-classify",
            ExperimentKind::SpdClassify => "spd-classify",
            ExperimentKind::RateCheck => "rate-check",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureData {
    pub dim: usize,
    pub classes: usize,
    pub centers: Option<Vec<Vec<f64>>>,
    pub kappa1: f64,
    pub kappa2: f64,
    pub sub_centers: usize,
    pub n_per_class: usize,
}

impl Default for MixtureData {
    fn default() -> Self {
        Self {
            dim: 2,
            classes: 2,
            centers: None,
            kappa1: 4.0,
            kappa2: 20.0,
            sub_centers: 10,
            n_per_class: 2000,
        }
    }
}

/// A landmark template: explicit `points`, or a bent ellipse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateConfig {
    pub aspect: f64,
    pub bend: f64,
    pub points: Option<Vec<[f64; 2]>>,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        Self {
            aspect: 1.0,
            bend: 0.0,
            points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeData {
    /// Landmark count of the ellipse templates.
    pub landmarks: usize,
    pub templates: Vec<TemplateConfig>,
    pub noise: f64,
    pub max_rotation: f64,
    pub n_per_class: usize,
}

impl Default for ShapeData {
    fn default() -> Self {
        Self {
            landmarks: 12,
            templates: vec![
                TemplateConfig::default(),
                TemplateConfig {
                    aspect: 1.2,
                    ..Default::default()
                },
            ],
            noise: 0.2,
            max_rotation: std::f64::consts::PI,
            n_per_class: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpdData {
    pub size: usize,
    pub classes: usize,
    /// Class bases lie at affine distance `separation / 2` from the identity.
    pub separation: f64,
    pub spread: f64,
    pub n_per_class: usize,
}

impl Default for SpdData {
    fn default() -> Self {
        Self {
            size: 20,
            classes: 3,
            separation: 1.0,
            spread: 0.15,
            n_per_class: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Seed of the generator; defaults to one derived from the experiment seed.
    pub seed: Option<u64>,
    /// Draw a fresh dataset for every split.
    pub resample_per_split: bool,
    /// Load a dataset CSV instead of generating one.
    pub path: Option<PathBuf>,
    pub mixture: MixtureData,
    pub shapes: ShapeData,
    pub spd: SpdData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_splits")]
    pub splits: usize,
    #[serde(default)]
    pub families: Vec<String>,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Also write the (first) dataset as `dataset.csv`.
    #[serde(default)]
    pub save_dataset: bool,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub rate: RateConfig,
}

fn default_seed() -> u64 {
    1
}

fn default_splits() -> usize {
    10
}

/// One failed constraint, located by its path in the config document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| CliError::Config(vec![Violation::new("<document>", e.to_string())]))
        } else {
            toml::from_str(text).map_err(|e| {
                CliError::Config(vec![Violation::new("<document>", e.to_string().trim_end().to_string())])
            })
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(vec![Violation::new("--config", format!("{}: {e}", path.display()))])
        })?;
        Self::parse(&text)
    }

    /// Manifold the experiment's data lives on, if it can be known
    /// without loading data.
    pub fn manifold(&self) -> Option<Manifold> {
        if self.data.path.is_some() && self.kind != ExperimentKind::RateCheck {
            return None;
        }
        Some(match self.kind {
            ExperimentKind::MixtureClassify => Manifold::Sphere {
                dim: self.data.mixture.dim,
            },
            ExperimentKind::ShapeClassify => Manifold::Preshape {
                landmarks: self.shape_landmarks(),
            },
            ExperimentKind::SpdClassify => Manifold::Spd {
                size: self.data.spd.size,
            },
            ExperimentKind::RateCheck => Manifold::Sphere { dim: self.rate.dim },
        })
    }

    pub fn shape_landmarks(&self) -> usize {
        self.data
            .shapes
            .templates
            .iter()
            .find_map(|t| t.points.as_ref().map(Vec::len))
            .unwrap_or(self.data.shapes.landmarks)
    }

    /// Families in config order; unknown names are skipped (they are
    /// reported by [`ExperimentConfig::violations`]).
    pub fn parsed_families(&self) -> Vec<Family> {
        self.families.iter().filter_map(|f| f.parse().ok()).collect()
    }

    /// Every violated constraint. Empty means the config can run.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let rate = self.kind == ExperimentKind::RateCheck;
        if self.splits == 0 && !rate {
            v.push(Violation::new("splits", "must be at least 1"));
        }
        if self.families.is_empty() && !rate {
            v.push(Violation::new("families", "must list at least one model family"));
        }
        let manifold = self.manifold();
        for (i, name) in self.families.iter().enumerate() {
            let path = format!("families[{i}]");
            let family: Family = match name.parse() {
                Ok(f) => f,
                Err(_) => {
                    let known: Vec<&str> = Family::ALL.iter().map(Family::name).collect();
                    v.push(Violation::new(
                        path,
                        format!("unknown model family {name:?} (expected one of {})", known.join(", ")),
                    ));
                    continue;
                }
            };
            if self.families[..i].contains(name) {
                v.push(Violation::new(&path, format!("{name} is listed twice")));
            }
            if let Some(m) = manifold {
                if !family.supports(m) {
                    v.push(Violation::new(&path, format!("{family} does not support {m} inputs")));
                }
                if family == Family::Idnn
                    && matches!(m, Manifold::Spd { .. })
                    && self.model.atlas.base_points.is_none()
                {
                    v.push(Violation::new(
                        "model.atlas.base_points",
                        "idnn on SPD inputs requires an atlas with explicit base points",
                    ));
                }
            }
        }
        if !rate {
            self.data_violations(&mut v);
        }
        for (field, msg) in self.train.violations() {
            v.push(Violation::new(format!("train.{field}"), msg));
        }
        self.model_violations(manifold, &mut v);
        if rate {
            for (field, msg) in self.rate.violations() {
                v.push(Violation::new(format!("rate.{field}"), msg));
            }
        }
        v
    }

    fn data_violations(&self, v: &mut Vec<Violation>) {
        if let Some(p) = &self.data.path {
            if !p.is_file() {
                v.push(Violation::new("data.path", format!("{} is not a readable file", p.display())));
            }
            if self.data.resample_per_split {
                v.push(Violation::new("data.resample_per_split", "cannot resample a dataset loaded from a file"));
            }
            return;
        }
        match self.kind {
            ExperimentKind::MixtureClassify => {
                let m = &self.data.mixture;
                positive(v, "data.mixture.dim", m.dim);
                positive(v, "data.mixture.classes", m.classes);
                positive(v, "data.mixture.sub_centers", m.sub_centers);
                positive(v, "data.mixture.n_per_class", m.n_per_class);
                nonnegative(v, "data.mixture.kappa1", m.kappa1);
                nonnegative(v, "data.mixture.kappa2", m.kappa2);
                match &m.centers {
                    None if m.classes > m.dim + 1 => v.push(Violation::new(
                        "data.mixture.centers",
                        format!("{} classes on S^{} need explicit centers", m.classes, m.dim),
                    )),
                    Some(c) => {
                        if c.len() != m.classes {
                            v.push(Violation::new(
                                "data.mixture.centers",
                                format!("{} centers for {} classes", c.len(), m.classes),
                            ));
                        }
                        for (i, c) in c.iter().enumerate() {
                            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
                            if c.len() != m.dim + 1 || (norm - 1.0).abs() > 1e-9 {
                                v.push(Violation::new(
                                    format!("data.mixture.centers[{i}]"),
                                    format!("must be a unit vector of length {}", m.dim + 1),
                                ));
                            }
                        }
                    }
                    None => {}
                }
            }
            ExperimentKind::ShapeClassify => {
                let s = &self.data.shapes;
                if s.templates.len() < 2 {
                    v.push(Violation::new("data.shapes.templates", "needs at least two templates"));
                }
                let k = self.shape_landmarks();
                if k < 3 {
                    v.push(Violation::new("data.shapes.landmarks", "needs at least 3 landmarks"));
                }
                for (i, t) in s.templates.iter().enumerate() {
                    if let Some(p) = &t.points {
                        if p.len() != k {
                            v.push(Violation::new(
                                format!("data.shapes.templates[{i}].points"),
                                format!("has {} landmarks, expected {k}", p.len()),
                            ));
                        }
                    } else if !(t.aspect.is_finite() && t.bend.is_finite()) {
                        v.push(Violation::new(format!("data.shapes.templates[{i}]"), "aspect and bend must be finite"));
                    }
                }
                nonnegative(v, "data.shapes.noise", s.noise);
                nonnegative(v, "data.shapes.max_rotation", s.max_rotation);
                positive(v, "data.shapes.n_per_class", s.n_per_class);
            }
            ExperimentKind::SpdClassify => {
                let s = &self.data.spd;
                positive(v, "data.spd.size", s.size);
                positive(v, "data.spd.classes", s.classes);
                positive(v, "data.spd.n_per_class", s.n_per_class);
                nonnegative(v, "data.spd.separation", s.separation);
                nonnegative(v, "data.spd.spread", s.spread);
            }
            ExperimentKind::RateCheck => {}
        }
    }

    fn model_violations(&self, manifold: Option<Manifold>, v: &mut Vec<Violation>) {
        let m = &self.model;
        if m.hidden.contains(&0) {
            v.push(Violation::new("model.hidden", "layer widths must be positive"));
        }
        if m.knn_k.is_empty() || m.knn_k.contains(&0) {
            v.push(Violation::new("model.knn_k", "must list positive neighbour counts"));
        }
        if !(m.reeig_epsilon > 0.0) {
            v.push(Violation::new("model.reeig_epsilon", "must be positive"));
        }
        if !(m.stiefel_learning_rate > 0.0 && m.stiefel_learning_rate.is_finite()) {
            v.push(Violation::new("model.stiefel_learning_rate", "must be a positive number"));
        }
        if !(m.atlas.radius > 0.0) {
            v.push(Violation::new("model.atlas.radius", "must be positive"));
        }
        if !(m.atlas.sharpness > 0.0 && m.atlas.sharpness.is_finite()) {
            v.push(Violation::new("model.atlas.sharpness", "must be a positive number"));
        }
        if let (Some(points), Some(manifold)) = (&m.atlas.base_points, manifold) {
            if points.is_empty() {
                v.push(Violation::new("model.atlas.base_points", "must not be empty"));
            }
            for (i, p) in points.iter().enumerate() {
                if p.len() != manifold.flat_len() {
                    v.push(Violation::new(
                        format!("model.atlas.base_points[{i}]"),
                        format!("has {} coordinates, {manifold} needs {}", p.len(), manifold.flat_len()),
                    ));
                }
            }
        }
        if let (Some(sizes), Some(Manifold::Spd { size })) = (&m.spd_sizes, manifold) {
            if sizes.first() != Some(&size) {
                v.push(Violation::new("model.spd_sizes", format!("must start at the input size {size}")));
            }
            if sizes.len() < 2 || sizes.windows(2).any(|w| w[1] > w[0] || w[1] == 0) {
                v.push(Violation::new("model.spd_sizes", "must be a non-increasing list of at least two positive sizes"));
            }
        }
    }

    /// Canonical JSON of the settings that determine the results; the
    /// output directory is excluded.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let value = serde_json::to_value(&c).expect("config serializes");
        // `serde_json::Value` objects keep keys sorted.
        serde_json::to_string(&value).expect("value serializes")
    }

    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

fn positive(v: &mut Vec<Violation>, path: &str, x: usize) {
    if x == 0 {
        v.push(Violation::new(path, "must be positive"));
    }
}

fn nonnegative(v: &mut Vec<Violation>, path: &str, x: f64) {
    if !(x >= 0.0 && x.is_finite()) {
        v.push(Violation::new(path, format!("must be a finite number >= 0, got {x}")));
    }
}
