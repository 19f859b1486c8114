//! Pool-based active learning over probabilistic detections: predictive
//! sample averaging, per-cluster Bayesian fusion of classification and box
//! regression, entropy information scores, configurable acquisition, and a
//! synthetic end-to-end loop against a uniform-random baseline.
//!
//! The detector itself is out of scope; a pluggable oracle supplies
//! predictive samples whose spread grows with distance from labeled
//! coverage, which preserves the acquisition-versus-random comparison.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

use nalgebra::{Matrix4, Vector4};

#[derive(Debug, Error)]
pub enum ActiveLearningError {
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("covariance is singular or not positive definite")]
    SingularCovariance,
    #[error("invalid categorical: {0}")]
    BadCategorical(String),
    #[error("invalid gaussian box: {0}")]
    BadGaussian(String),
    #[error("query size {k} exceeds pool size {pool}")]
    KTooLarge { k: usize, pool: usize },
    #[error("class counts differ: {0} vs {1}")]
    ClassMismatch(usize, usize),
    #[error("invalid pool configuration: {0}")]
    BadPool(String),
}

/// Probability distribution over object classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Categorical {
    probabilities: Vec<f64>,
}

impl Categorical {
    pub fn new(probabilities: Vec<f64>) -> Result<Self, ActiveLearningError> {
        if probabilities.len() < 2 {
            return Err(ActiveLearningError::BadCategorical(format!(
                "{} classes, need at least 2",
                probabilities.len()
            )));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ActiveLearningError::BadCategorical(
                "negative or non-finite probability".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ActiveLearningError::BadCategorical(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { probabilities })
    }

    /// Normalize arbitrary non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, ActiveLearningError> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(ActiveLearningError::BadCategorical("weights sum to zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_probability(&self) -> f64 {
        self.probabilities.iter().copied().fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for Categorical {
    type Error = ActiveLearningError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Categorical::new(v)
    }
}

impl From<Categorical> for Vec<f64> {
    fn from(c: Categorical) -> Self {
        c.probabilities
    }
}

/// Gaussian belief over a bounding box `(u₁, v₁, u₂, v₂)` in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBox {
    mean: Vector4<f64>,
    covariance: Matrix4<f64>,
}

impl GaussianBox {
    pub fn new(mean: Vector4<f64>, covariance: Matrix4<f64>) -> Result<Self, ActiveLearningError> {
        for i in 0..4 {
            for j in 0..4 {
                if !covariance[(i, j)].is_finite() {
                    return Err(ActiveLearningError::BadGaussian("non-finite covariance".into()));
                }
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-9 {
                    return Err(ActiveLearningError::BadGaussian("asymmetric covariance".into()));
                }
            }
        }
        let eig = covariance.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(ActiveLearningError::BadGaussian(
                "covariance eigenvalues must be positive".into(),
            ));
        }
        Ok(Self { mean, covariance })
    }

    pub fn mean(&self) -> &Vector4<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix4<f64> {
        &self.covariance
    }
}

/// Anchor cluster: the highest-score anchor is the center, the remaining
/// anchors act as measurements fused into it.
#[derive(Clone, Debug)]
pub struct DetectionCluster {
    center: (Categorical, GaussianBox),
    members: Vec<(Categorical, GaussianBox)>,
}

impl DetectionCluster {
    pub fn new(
        center: (Categorical, GaussianBox),
        members: Vec<(Categorical, GaussianBox)>,
    ) -> Result<Self, ActiveLearningError> {
        let center_score = center.0.max_probability();
        for (c, _) in &members {
            if c.len() != center.0.len() {
                return Err(ActiveLearningError::ClassMismatch(center.0.len(), c.len()));
            }
            if c.max_probability() > center_score + 1e-12 {
                return Err(ActiveLearningError::BadCategorical(
                    "cluster center must carry the highest score".into(),
                ));
            }
        }
        Ok(Self { center, members })
    }

    pub fn center(&self) -> &(Categorical, GaussianBox) {
        &self.center
    }

    pub fn members(&self) -> &[(Categorical, GaussianBox)] {
        &self.members
    }
}

/// Monte-Carlo model average: elementwise mean of the per-sample class
/// distributions, renormalized.
pub fn mc_average_categorical(samples: &[Categorical]) -> Result<Categorical, ActiveLearningError> {
    let first = samples.first().ok_or(ActiveLearningError::EmptyInput)?;
    let classes = first.len();
    let mut mean = vec![0.0; classes];
    for s in samples {
        if s.len() != classes {
            return Err(ActiveLearningError::ClassMismatch(classes, s.len()));
        }
        for (m, p) in mean.iter_mut().zip(s.probabilities()) {
            *m += p;
        }
    }
    Categorical::from_weights(mean)
}

/// Regularization added to moment-matched covariances, in px².
pub const MOMENT_EPSILON: f64 = 1e-6;

/// Moment-match box samples: sample mean and unbiased covariance,
/// symmetrized and regularized by `+εI`.
pub fn mc_moments_box(samples: &[Vector4<f64>]) -> Result<GaussianBox, ActiveLearningError> {
    if samples.len() < 2 {
        return Err(ActiveLearningError::TooFewSamples {
            need: 2,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean: Vector4<f64> = samples.iter().sum::<Vector4<f64>>() / n;
    let mut cov = Matrix4::zeros();
    for s in samples {
        let d = s - mean;
        cov += d * d.transpose();
    }
    cov /= n - 1.0;
    cov = (cov + cov.transpose()) * 0.5;
    cov += Matrix4::identity() * MOMENT_EPSILON;
    GaussianBox::new(mean, cov)
}

/// Probability floor applied before the log-space product.
pub const FUSION_FLOOR: f64 = 1e-12;

/// Cluster fusion for the classification head: normalized elementwise
/// product of the center distribution with every member likelihood,
/// computed in log space with flooring. Uniform members are the identity.
pub fn fuse_cluster_classification(cluster: &DetectionCluster) -> Categorical {
    let center = &cluster.center.0;
    let classes = center.len();
    let mut log_p: Vec<f64> = center
        .probabilities()
        .iter()
        .map(|p| p.max(FUSION_FLOOR).ln())
        .collect();
    for (member, _) in &cluster.members {
        for (acc, p) in log_p.iter_mut().zip(member.probabilities()) {
            *acc += p.max(FUSION_FLOOR).ln();
        }
    }
    let max_log = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_p.iter().map(|l| (l - max_log).exp()).collect();
    Categorical::from_weights(weights).unwrap_or_else(|_| {
        Categorical::from_weights(vec![1.0; classes]).expect("uniform is valid")
    })
}

/// Cluster fusion for the regression head: conjugate Gaussian product.
/// Posterior precision is the sum of precisions, posterior mean the
/// precision-weighted mean, so information never decreases.
pub fn fuse_cluster_regression(cluster: &DetectionCluster) -> Result<GaussianBox, ActiveLearningError> {
    let invert = |g: &GaussianBox| -> Result<Matrix4<f64>, ActiveLearningError> {
        g.covariance
            .try_inverse()
            .ok_or(ActiveLearningError::SingularCovariance)
    };
    let mut precision = invert(&cluster.center.1)?;
    let mut info = precision * cluster.center.1.mean;
    for (_, member) in &cluster.members {
        let p = invert(member)?;
        precision += p;
        info += p * member.mean;
    }
    let covariance = precision
        .try_inverse()
        .ok_or(ActiveLearningError::SingularCovariance)?;
    let covariance = (covariance + covariance.transpose()) * 0.5;
    let mean = covariance * info;
    GaussianBox::new(mean, covariance)
}

/// Shannon entropy in nats, with `0·ln 0 = 0`.
pub fn entropy_categorical(c: &Categorical) -> f64 {
    -c.probabilities()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Differential entropy `½ ln((2πe)⁴ det Σ)` in nats; negative for tight
/// covariances.
pub fn entropy_gaussian(g: &GaussianBox) -> Result<f64, ActiveLearningError> {
    let det = g.covariance.determinant();
    if det <= 0.0 || !det.is_finite() {
        return Err(ActiveLearningError::SingularCovariance);
    }
    Ok(0.5 * ((2.0 * std::f64::consts::PI * std::f64::consts::E).powi(4) * det).ln())
}

/// How the semantic score `U_cls` is computed from the fused distribution:
/// total categorical entropy (default) or the sum of per-class marginal
/// (binary) entropies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UClsMode {
    #[default]
    TotalEntropy,
    PerClassMarginal,
}

pub fn u_cls(c: &Categorical, mode: UClsMode) -> f64 {
    match mode {
        UClsMode::TotalEntropy => entropy_categorical(c),
        UClsMode::PerClassMarginal => c
            .probabilities()
            .iter()
            .map(|&p| {
                let q = 1.0 - p;
                let mut h = 0.0;
                if p > 0.0 {
                    h -= p * p.ln();
                }
                if q > 0.0 {
                    h -= q * q.ln();
                }
                h
            })
            .sum(),
    }
}

/// Combination of the semantic and spatial scores of one detection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Comb {
    WeightedSum { w: f64 },
    Max,
}

/// Aggregation over the detections of one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agg {
    Sum,
    Average,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub comb: Comb,
    pub agg: Agg,
    #[serde(default)]
    pub u_cls_mode: UClsMode,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            comb: Comb::WeightedSum { w: 0.5 },
            agg: Agg::Sum,
            u_cls_mode: UClsMode::TotalEntropy,
        }
    }
}

/// Image informativeness `A(x) = agg_j(comb(U_cls, U_reg))`. An image with
/// no detections carries no measured uncertainty and ranks last.
pub fn image_score(detections: &[(f64, f64)], cfg: &AcquisitionConfig) -> f64 {
    if detections.is_empty() {
        return f64::NEG_INFINITY;
    }
    let combined = detections.iter().map(|&(cls, reg)| match cfg.comb {
        Comb::WeightedSum { w } => w * cls + (1.0 - w) * reg,
        Comb::Max => cls.max(reg),
    });
    match cfg.agg {
        Agg::Sum => combined.sum(),
        Agg::Average => combined.sum::<f64>() / detections.len() as f64,
    }
}

/// Indices of the `K` largest scores, ties broken toward the lowest index.
pub fn query_top_k(scores: &[f64], k: usize) -> Result<Vec<usize>, ActiveLearningError> {
    if k > scores.len() {
        return Err(ActiveLearningError::KTooLarge {
            k,
            pool: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(order)
}

/// One unlabeled sample in the synthetic pool: a point in a 2-D latent
/// scene space with a fixed number of detectable objects.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PoolSample {
    pub position: [f64; 2],
    pub detections: usize,
}

/// Synthetic pool with a held-out evaluation set. The oracle detector's
/// predictive spread grows with the distance from a sample to its nearest
/// labeled neighbor, so coverage of the latent space drives the test
/// metric.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticPool {
    pub samples: Vec<PoolSample>,
    pub heldout: Vec<[f64; 2]>,
    pub num_classes: usize,
    /// Distance scale at which predictive uncertainty saturates.
    pub reach: f64,
}

impl SyntheticPool {
    pub fn validate(&self) -> Result<(), ActiveLearningError> {
        if self.samples.is_empty() || self.heldout.is_empty() {
            return Err(ActiveLearningError::BadPool("empty pool or held-out set".into()));
        }
        if self.num_classes < 2 {
            return Err(ActiveLearningError::BadPool("need at least 2 classes".into()));
        }
        if self.reach <= 0.0 {
            return Err(ActiveLearningError::BadPool("reach must be positive".into()));
        }
        Ok(())
    }

    /// Redundant dense blob plus a handful of small distant clusters;
    /// the held-out set spreads across all of them.
    pub fn designed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::new();
        let gauss = |rng: &mut ChaCha8Rng| -> f64 {
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        // 150 redundant samples around the origin.
        for _ in 0..150 {
            samples.push(PoolSample {
                position: [gauss(&mut rng) * 0.3, gauss(&mut rng) * 0.3],
                detections: 2,
            });
        }
        // Five rare clusters far out.
        let centers = [[4.0, 0.0], [-4.0, 1.0], [0.0, 4.5], [3.0, -3.5], [-3.0, -4.0]];
        for c in centers {
            for _ in 0..10 {
                samples.push(PoolSample {
                    position: [c[0] + gauss(&mut rng) * 0.2, c[1] + gauss(&mut rng) * 0.2],
                    detections: 2,
                });
            }
        }
        // Held-out: even coverage of blob and clusters.
        let mut heldout = Vec::new();
        for _ in 0..12 {
            heldout.push([gauss(&mut rng) * 0.3, gauss(&mut rng) * 0.3]);
        }
        for c in centers {
            for _ in 0..10 {
                heldout.push([c[0] + gauss(&mut rng) * 0.2, c[1] + gauss(&mut rng) * 0.2]);
            }
        }
        Self {
            samples,
            heldout,
            num_classes: 3,
            reach: 1.0,
        }
    }

    fn distance_to_labeled(&self, position: &[f64; 2], labeled: &[usize]) -> f64 {
        labeled
            .iter()
            .map(|&i| {
                let p = self.samples[i].position;
                ((p[0] - position[0]).powi(2) + (p[1] - position[1]).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Saturating uncertainty level in [0, 1) for a latent position given
    /// the labeled coverage.
    fn uncertainty_level(&self, position: &[f64; 2], labeled: &[usize]) -> f64 {
        let d = self.distance_to_labeled(position, labeled);
        if d.is_infinite() {
            return 1.0;
        }
        d / (d + self.reach)
    }

    /// Oracle predictive samples for one detection of one pool sample:
    /// `count` categorical draws and box corners whose spread follows the
    /// uncertainty level.
    fn predictive_samples(
        &self,
        sample_idx: usize,
        detection_idx: usize,
        labeled: &[usize],
        count: usize,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<Categorical>, Vec<Vector4<f64>>) {
        let sample = &self.samples[sample_idx];
        let level = self.uncertainty_level(&sample.position, labeled);
        let base_class = (sample_idx + detection_idx) % self.num_classes;
        let base_box = Vector4::new(
            100.0 + 20.0 * detection_idx as f64,
            80.0,
            180.0 + 20.0 * detection_idx as f64,
            160.0,
        );
        let gauss = |rng: &mut ChaCha8Rng| -> f64 {
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let mut classes = Vec::with_capacity(count);
        let mut boxes = Vec::with_capacity(count);
        for _ in 0..count {
            let alpha = (level * (1.0 + 0.3 * gauss(rng))).clamp(0.0, 1.0);
            let mut weights = vec![alpha / self.num_classes as f64; self.num_classes];
            weights[base_class] += 1.0 - alpha;
            classes.push(Categorical::from_weights(weights).expect("positive weights"));
            let sigma = 0.5 + 30.0 * level;
            boxes.push(Vector4::new(
                base_box[0] + sigma * gauss(rng),
                base_box[1] + sigma * gauss(rng),
                base_box[2] + sigma * gauss(rng),
                base_box[3] + sigma * gauss(rng),
            ));
        }
        (classes, boxes)
    }

    /// Test metric in [0, 1]: one minus the mean normalized predictive
    /// entropy over the held-out set, evaluated in closed form.
    pub fn test_metric(&self, labeled: &[usize]) -> f64 {
        let ln_c = (self.num_classes as f64).ln();
        let mean_entropy: f64 = self
            .heldout
            .iter()
            .map(|position| {
                let level = self.uncertainty_level(position, labeled);
                let mut weights = vec![level / self.num_classes as f64; self.num_classes];
                weights[0] += 1.0 - level;
                let dist = Categorical::from_weights(weights).expect("positive weights");
                entropy_categorical(&dist) / ln_c
            })
            .sum::<f64>()
            / self.heldout.len() as f64;
        1.0 - mean_entropy
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Entropy,
    Random,
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Entropy => "entropy",
            Strategy::Random => "random",
        }
    }
}

/// Loop configuration: query size, step count, Monte-Carlo sample count
/// (30 by default) and the acquisition function.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AlConfig {
    pub query_size: usize,
    pub query_steps: usize,
    pub initial_labels: usize,
    pub mc_samples: usize,
    pub acquisition: AcquisitionConfig,
}

impl Default for AlConfig {
    fn default() -> Self {
        Self {
            query_size: 10,
            query_steps: 15,
            initial_labels: 5,
            mc_samples: 30,
            acquisition: AcquisitionConfig::default(),
        }
    }
}

/// One learning-curve row: metric after `step` queries.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub step: usize,
    pub fraction_labeled: f64,
    pub metric: f64,
}

#[derive(Clone, Debug)]
pub struct LearningCurve {
    pub strategy: Strategy,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    /// CSV rows `step,fraction_labeled,strategy,seed,metric`.
    pub fn append_csv(&self, out: &mut String) {
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{}",
                p.step,
                p.fraction_labeled,
                self.strategy.label(),
                self.seed,
                p.metric
            )
            .unwrap();
        }
    }
}

pub fn curves_to_csv(curves: &[LearningCurve]) -> String {
    let mut out = String::from("step,fraction_labeled,strategy,seed,metric\n");
    for c in curves {
        c.append_csv(&mut out);
    }
    out
}

/// Run the pool loop for both strategies on every seed. Deterministic:
/// identical inputs produce identical curves byte for byte.
pub fn al_loop(
    pool: &SyntheticPool,
    cfg: &AlConfig,
    seeds: &[u64],
) -> Result<Vec<LearningCurve>, ActiveLearningError> {
    pool.validate()?;
    if cfg.query_size == 0 {
        return Err(ActiveLearningError::BadPool("query size must be positive".into()));
    }
    let mut curves = Vec::new();
    for &seed in seeds {
        for strategy in [Strategy::Entropy, Strategy::Random] {
            curves.push(run_strategy(pool, cfg, seed, strategy)?);
        }
    }
    Ok(curves)
}

fn run_strategy(
    pool: &SyntheticPool,
    cfg: &AlConfig,
    seed: u64,
    strategy: Strategy,
) -> Result<LearningCurve, ActiveLearningError> {
    let n = pool.samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(match strategy {
        Strategy::Entropy => 1,
        Strategy::Random => 2,
    }));
    // Both strategies share the same seeded initial label set.
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(&mut init_rng);
    let mut labeled: Vec<usize> = all[..cfg.initial_labels.min(n)].to_vec();
    let mut unlabeled: Vec<usize> = all[cfg.initial_labels.min(n)..].to_vec();
    unlabeled.sort_unstable();
    labeled.sort_unstable();

    let mut points = vec![CurvePoint {
        step: 0,
        fraction_labeled: labeled.len() as f64 / n as f64,
        metric: pool.test_metric(&labeled),
    }];

    for step in 1..=cfg.query_steps {
        if unlabeled.is_empty() {
            break;
        }
        let k = cfg.query_size.min(unlabeled.len());
        let chosen: Vec<usize> = match strategy {
            Strategy::Random => {
                let mut pick = unlabeled.clone();
                pick.shuffle(&mut rng);
                pick.truncate(k);
                pick
            }
            Strategy::Entropy => {
                let scores: Vec<f64> = unlabeled
                    .iter()
                    .map(|&idx| score_sample(pool, idx, &labeled, cfg, &mut rng))
                    .collect();
                let top = query_top_k(&scores, k)?;
                top.into_iter().map(|i| unlabeled[i]).collect()
            }
        };
        labeled.extend(chosen.iter().copied());
        labeled.sort_unstable();
        unlabeled.retain(|i| !chosen.contains(i));
        points.push(CurvePoint {
            step,
            fraction_labeled: labeled.len() as f64 / n as f64,
            metric: pool.test_metric(&labeled),
        });
    }
    Ok(LearningCurve {
        strategy,
        seed,
        points,
    })
}

/// Full scoring path for one pool sample: predictive samples → model
/// averaging and moment matching → cluster fusion → entropies → image score.
fn score_sample(
    pool: &SyntheticPool,
    sample_idx: usize,
    labeled: &[usize],
    cfg: &AlConfig,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let sample = &pool.samples[sample_idx];
    let mut scores = Vec::with_capacity(sample.detections);
    for d in 0..sample.detections {
        let (classes, boxes) = pool.predictive_samples(sample_idx, d, labeled, cfg.mc_samples, rng);
        let Ok(avg_class) = mc_average_categorical(&classes) else {
            continue;
        };
        let Ok(avg_box) = mc_moments_box(&boxes) else {
            continue;
        };
        // A cluster of the averaged anchor with two jittered members keeps
        // the fusion path exercised end to end.
        let member_box = GaussianBox::new(*avg_box.mean(), *avg_box.covariance() * 2.0)
            .expect("scaled SPD stays SPD");
        let cluster = DetectionCluster::new(
            (avg_class.clone(), avg_box),
            vec![(avg_class.clone(), member_box)],
        )
        .expect("consistent cluster");
        let fused_class = fuse_cluster_classification(&cluster);
        let Ok(fused_box) = fuse_cluster_regression(&cluster) else {
            continue;
        };
        let cls = u_cls(&fused_class, cfg.acquisition.u_cls_mode);
        let Ok(reg) = entropy_gaussian(&fused_box) else {
            continue;
        };
        scores.push((cls, reg));
    }
    image_score(&scores, &cfg.acquisition)
}
