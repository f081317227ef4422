use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{DropoutMask, EmbeddingModel, Gradients, DEFAULT_HIDDEN};
use crate::error::{Error, Result};
use crate::types::Segmentation;

/// Anchor, positive (same story) and negative (other story) descriptors.
#[derive(Debug, Clone, Copy)]
pub struct Triplet<'a> {
    pub anchor: &'a [f64],
    pub positive: &'a [f64],
    pub negative: &'a [f64],
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `max(0, ‖φ(a) − φ(p)‖² + 1 − ‖φ(a) − φ(n)‖²)`, all three branches
/// sharing `mask`.
pub fn triplet_loss(model: &EmbeddingModel, triplet: &Triplet<'_>, mask: Option<&DropoutMask>) -> Result<f64> {
    let a = model.forward(triplet.anchor, mask)?;
    let p = model.forward(triplet.positive, mask)?;
    let n = model.forward(triplet.negative, mask)?;
    Ok((sq_dist(&a, &p) + 1.0 - sq_dist(&a, &n)).max(0.0))
}

fn check_masks(triplets: usize, masks: Option<&[DropoutMask]>) -> Result<()> {
    match masks {
        Some(m) if m.len() != triplets => Err(Error::shape(format!(
            "{} dropout masks for {triplets} triplets",
            m.len()
        ))),
        _ => Ok(()),
    }
}

/// `(λ/2)‖w‖²` plus the mean triplet loss; biases are not penalized.
pub fn batch_loss(
    model: &EmbeddingModel,
    triplets: &[Triplet<'_>],
    masks: Option<&[DropoutMask]>,
    lambda: f64,
) -> Result<f64> {
    check_masks(triplets.len(), masks)?;
    let mut sum = 0.0;
    for (i, t) in triplets.iter().enumerate() {
        sum += triplet_loss(model, t, masks.map(|m| &m[i]))?;
    }
    let mean = if triplets.is_empty() { 0.0 } else { sum / triplets.len() as f64 };
    Ok(0.5 * lambda * model.weight_norm_sq() + mean)
}

/// Batch loss and its gradient with respect to every weight and bias.
/// Triplets whose hinge is inactive contribute nothing.
pub fn batch_gradient(
    model: &EmbeddingModel,
    triplets: &[Triplet<'_>],
    masks: Option<&[DropoutMask]>,
    lambda: f64,
) -> Result<(f64, Gradients)> {
    check_masks(triplets.len(), masks)?;
    let mut grads = Gradients::zeros_like(model);
    let mut sum = 0.0;
    for (i, t) in triplets.iter().enumerate() {
        for x in [t.anchor, t.positive, t.negative] {
            if x.len() != model.input_dim() {
                return Err(Error::shape(format!(
                    "triplet {i} has a {}-dimensional member, model expects {}",
                    x.len(),
                    model.input_dim()
                )));
            }
        }
        let mask = masks.map(|m| &m[i]);
        let ta = model.trace(t.anchor, mask);
        let tp = model.trace(t.positive, mask);
        let tn = model.trace(t.negative, mask);
        let (a, p, n) = (ta.output(), tp.output(), tn.output());
        let margin = sq_dist(a, p) + 1.0 - sq_dist(a, n);
        if margin <= 0.0 {
            continue;
        }
        sum += margin;
        // d/da = 2(n - p), d/dp = -2(a - p), d/dn = 2(a - n)
        let ga: Vec<f64> = n.iter().zip(p).map(|(n, p)| 2.0 * (n - p)).collect();
        let gp: Vec<f64> = a.iter().zip(p).map(|(a, p)| -2.0 * (a - p)).collect();
        let gn: Vec<f64> = a.iter().zip(n).map(|(a, n)| 2.0 * (a - n)).collect();
        model.backward(&ta, mask, &ga, Some(&mut grads), false);
        model.backward(&tp, mask, &gp, Some(&mut grads), false);
        model.backward(&tn, mask, &gn, Some(&mut grads), false);
    }
    let n = triplets.len().max(1) as f64;
    grads.scale(1.0 / n);
    for (g, w) in grads.weights.iter_mut().flatten().zip(model.weights.iter().flatten()) {
        *g += lambda * w;
    }
    Ok((0.5 * lambda * model.weight_norm_sq() + sum / n, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    /// The learning rate is multiplied by `decay_factor` once this many
    /// iterations have run.
    pub decay_after: usize,
    pub decay_factor: f64,
    pub momentum: f64,
    /// Retain probability of hidden units; 1 disables dropout.
    pub dropout_keep: f64,
    pub hidden: Vec<usize>,
    pub final_relu: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 100,
            batch_size: 500,
            lambda: 0.0005,
            learning_rate: 0.01,
            decay_after: 50,
            decay_factor: 0.1,
            momentum: 0.9,
            dropout_keep: 0.5,
            hidden: DEFAULT_HIDDEN.to_vec(),
            final_relu: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.decay_factor];
        if self.batch_size == 0
            || positive.iter().any(|x| !(*x > 0.0 && x.is_finite()))
            || !(self.lambda >= 0.0 && self.lambda.is_finite())
            || !(0.0..1.0).contains(&self.momentum)
            || !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0)
            || self.hidden.is_empty()
            || self.hidden.contains(&0)
        {
            return Err(Error::invalid(format!("invalid training configuration {self:?}")));
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, iteration: usize) -> f64 {
        if iteration >= self.decay_after {
            self.learning_rate * self.decay_factor
        } else {
            self.learning_rate
        }
    }
}

/// Shot descriptors of one video with its ground-truth stories.
#[derive(Debug, Clone, Copy)]
pub struct TrainingVideo<'a> {
    pub features: &'a [Vec<f64>],
    pub truth: &'a Segmentation,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    /// Batch objective at every iteration, measured before its update.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Anchor {
    video: usize,
    shot: usize,
    story: usize,
}

/// Uniform triplet sampling inside single videos.
struct TripletSampler<'a> {
    corpus: &'a [TrainingVideo<'a>],
    labels: Vec<Vec<usize>>,
    anchors: Vec<Anchor>,
}

impl<'a> TripletSampler<'a> {
    fn new(corpus: &'a [TrainingVideo<'a>], dim: usize) -> Result<Self> {
        let mut anchors = Vec::new();
        let mut labels = Vec::with_capacity(corpus.len());
        for (v, video) in corpus.iter().enumerate() {
            if video.features.len() != video.truth.n_shots() {
                return Err(Error::shape(format!(
                    "video {v}: {} feature rows for {} annotated shots",
                    video.features.len(),
                    video.truth.n_shots()
                )));
            }
            if let Some(i) = video.features.iter().position(|r| r.len() != dim) {
                return Err(Error::shape(format!(
                    "video {v} shot {i}: dimension {} differs from the corpus dimension {dim}",
                    video.features[i].len()
                )));
            }
            let stories = video.truth.stories();
            if stories.iter().all(|s| s.len() == 1) {
                return Err(Error::invalid(format!(
                    "video {v}: every story has a single shot, so no positive pairs exist"
                )));
            }
            if stories.len() >= 2 {
                for (si, s) in stories.iter().enumerate() {
                    if s.len() >= 2 {
                        anchors.extend(s.shots().map(|shot| Anchor { video: v, shot, story: si }));
                    }
                }
            }
            labels.push(video.truth.labels());
        }
        if anchors.is_empty() {
            return Err(Error::invalid(
                "no training video has two or more stories to draw triplets from",
            ));
        }
        Ok(TripletSampler { corpus, labels, anchors })
    }

    fn sample(&self, rng: &mut impl Rng) -> Triplet<'a> {
        let a = self.anchors[rng.random_range(0..self.anchors.len())];
        let video = &self.corpus[a.video];
        let story = video.truth.stories()[a.story];
        debug_assert_eq!(self.labels[a.video][a.shot], a.story);
        let mut pos = story.first_shot + rng.random_range(0..story.len() - 1);
        if pos >= a.shot {
            pos += 1;
        }
        let mut neg = rng.random_range(0..video.features.len() - story.len());
        if neg >= story.first_shot {
            neg += story.len();
        }
        Triplet {
            anchor: &video.features[a.shot],
            positive: &video.features[pos],
            negative: &video.features[neg],
        }
    }
}

/// Mini-batch gradient descent with momentum on the triplet objective.
///
/// Each iteration draws `batch_size` triplets (anchor uniform over shots of
/// multi-shot stories, positive from the anchor's story, negative from
/// another story of the same video), samples one dropout mask per triplet
/// shared by its three branches, and applies
/// `v ← γv + η∇L`, `θ ← θ − v` to weights and biases.
pub fn train(corpus: &[TrainingVideo<'_>], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let Some(first) = corpus.iter().find_map(|v| v.features.first()) else {
        return Err(Error::invalid("training corpus has no shots"));
    };
    let dim = first.len();
    let sampler = TripletSampler::new(corpus, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut dims = vec![dim];
    dims.extend(&cfg.hidden);
    let mut model = EmbeddingModel::glorot(&dims, cfg.final_relu, &mut rng)?;
    let mut velocity = Gradients::zeros_like(&model);
    let mut loss_history = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let triplets: Vec<Triplet<'_>> = (0..cfg.batch_size).map(|_| sampler.sample(&mut rng)).collect();
        let masks: Option<Vec<DropoutMask>> = (cfg.dropout_keep < 1.0).then(|| {
            (0..cfg.batch_size)
                .map(|_| DropoutMask::sample(&model, cfg.dropout_keep, &mut rng))
                .collect()
        });
        let (loss, grads) = batch_gradient(&model, &triplets, masks.as_deref(), cfg.lambda)?;
        if !loss.is_finite() {
            return Err(Error::invalid(format!("training diverged at iteration {it}")));
        }
        loss_history.push(loss);
        momentum_step(&mut model, &mut velocity, &grads, cfg.learning_rate_at(it), cfg.momentum);
    }
    Ok(TrainOutcome { model, loss_history })
}

pub(crate) fn momentum_step(
    model: &mut EmbeddingModel,
    velocity: &mut Gradients,
    grads: &Gradients,
    eta: f64,
    gamma: f64,
) {
    let params = model.weights.iter_mut().chain(model.biases.iter_mut()).flatten();
    let vel = velocity.weights.iter_mut().chain(velocity.biases.iter_mut()).flatten();
    let g = grads.weights.iter().chain(&grads.biases).flatten();
    for ((p, v), g) in params.zip(vel).zip(g) {
        *v = gamma * *v + eta * g;
        *p -= *v;
    }
}
