//! Synthetic corpus with known story structure.
//!
//! Each story gets a center in a low-dimensional signal subspace of the
//! visual descriptor; shots are the center plus isotropic noise over all
//! dimensions. Each story also talks about one dominant concept: its
//! transcript mentions words of that concept at times inside the story, and
//! the matching concept detector fires on the story's shots.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    assemble_video_features, spectral_cluster_terms, ConceptGroups, SemanticConfig, TermEmbeddings, TranscriptTerm,
};
use crate::retrieval::{
    thumbnail_features, HypercolumnConfig, PreferencePair, ThumbnailActivations, N_GROUPS,
};
use crate::types::{Segmentation, ShotRecord, Tensor3, Video, VideoFeatures};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_videos: usize,
    /// Inclusive range.
    pub shots_per_video: (usize, usize),
    /// Inclusive range. Every story has at least two shots.
    pub stories_per_video: (usize, usize),
    /// Dimension of the visual descriptor.
    pub dim: usize,
    /// Number of leading visual dimensions that carry story centers.
    pub signal_dims: usize,
    /// Minimum distance between any two story centers of a video.
    pub separation: f64,
    /// Standard deviation of the per-shot noise.
    pub noise: f64,
    /// Extra per-shot standard deviation on the dimensions outside the
    /// signal subspace, shared by all stories.
    pub nuisance: f64,
    pub fps: f64,
    /// Inclusive range of shot lengths in frames.
    pub shot_frames: (u64, u64),
    /// Number of concepts, which is also the number of concept groups.
    pub n_concepts: usize,
    pub words_per_concept: usize,
    pub word_dim: usize,
    /// Inclusive range of term occurrences per story.
    pub terms_per_story: (usize, usize),
    /// Also emit keyframe activations and preference pairs.
    pub thumbnails: bool,
    /// Adjacent keyframes whose planted scores differ by less than this
    /// many standard deviations of the video's scores get no preference.
    pub preference_margin: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_videos: 10,
            shots_per_video: (40, 80),
            stories_per_video: (4, 8),
            dim: 32,
            signal_dims: 8,
            separation: 4.0,
            noise: 1.0,
            nuisance: 0.0,
            fps: 25.0,
            shot_frames: (100, 300),
            n_concepts: 8,
            words_per_concept: 5,
            word_dim: 16,
            terms_per_story: (3, 6),
            thumbnails: false,
            preference_margin: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(a, b): (usize, usize)| a <= b;
        if self.n_videos == 0 {
            return Err(Error::invalid("n_videos must be at least 1"));
        }
        if !range_ok(self.shots_per_video)
            || !range_ok(self.stories_per_video)
            || !range_ok(self.terms_per_story)
            || self.shot_frames.0 > self.shot_frames.1
        {
            return Err(Error::invalid("every range must have min <= max"));
        }
        if self.stories_per_video.0 == 0 || self.shot_frames.0 == 0 {
            return Err(Error::invalid("stories per video and shot lengths must be positive"));
        }
        if 2 * self.stories_per_video.1 > self.shots_per_video.0 {
            return Err(Error::invalid(format!(
                "{} stories of at least two shots do not fit in {} shots",
                self.stories_per_video.1, self.shots_per_video.0
            )));
        }
        if self.dim == 0 || self.signal_dims == 0 || self.signal_dims > self.dim {
            return Err(Error::invalid("need 1 <= signal_dims <= dim"));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::invalid("separation must be positive"));
        }
        if !(self.nuisance >= 0.0 && self.nuisance.is_finite()) {
            return Err(Error::invalid("nuisance must be non-negative"));
        }
        if !(self.preference_margin >= 0.0 && self.preference_margin.is_finite()) {
            return Err(Error::invalid("preference_margin must be non-negative"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) || !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::invalid("noise must be non-negative and fps positive"));
        }
        if self.n_concepts < 2 || self.words_per_concept == 0 || self.word_dim < self.n_concepts {
            return Err(Error::invalid(
                "need at least two concepts, one word per concept, and word_dim >= n_concepts",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub id: String,
    pub video: Video,
    pub terms: Vec<TranscriptTerm>,
    pub truth: Segmentation,
    pub features: VideoFeatures,
    /// One keyframe per shot when thumbnails are requested.
    pub thumbnails: Vec<ThumbnailActivations>,
    /// `(story index, pair)` preferences between keyframes of one story.
    pub preferences: Vec<(usize, String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub videos: Vec<SyntheticVideo>,
    pub embeddings: TermEmbeddings,
    pub groups: ConceptGroups,
    pub semantic: SemanticConfig,
    /// Planted aesthetic weights behind the preferences.
    pub planted_rank: Vec<f64>,
    pub hypercolumns: HypercolumnConfig,
}

/// Side of the maps used to build synthetic thumbnail descriptors.
pub const SYNTH_THUMBNAIL_SIZE: usize = 8;

fn word(concept: usize, i: usize) -> String {
    format!("c{concept}w{i}")
}

/// Story lengths of at least two shots summing to `n`, uniform over such
/// compositions.
fn draw_lengths(rng: &mut impl Rng, n: usize, stories: usize) -> Vec<usize> {
    let free = n - 2 * stories;
    let slots = free + stories - 1;
    let mut pos: Vec<usize> = (0..slots).collect();
    pos.shuffle(rng);
    let mut bars: Vec<usize> = pos[..stories - 1].to_vec();
    bars.sort_unstable();
    let mut lengths = Vec::with_capacity(stories);
    let mut prev = 0usize;
    for (i, &b) in bars.iter().enumerate() {
        lengths.push(2 + b - prev - if i == 0 { 0 } else { 1 });
        prev = b;
    }
    let last_free = if stories == 1 { free } else { slots - prev - 1 };
    lengths.push(2 + last_free);
    lengths
}

fn draw_centers(rng: &mut impl Rng, count: usize, dims: usize, separation: f64) -> Result<Vec<Vec<f64>>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for _attempt in 0..1000 {
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(count);
        let mut tries = 0;
        while centers.len() < count && tries < 10_000 {
            tries += 1;
            let mut u: Vec<f64> = (0..dims).map(|_| normal.sample(rng)).collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            u.iter_mut().for_each(|x| *x *= separation / norm);
            let far = centers
                .iter()
                .all(|c| c.iter().zip(&u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= separation);
            if far {
                centers.push(u);
            }
        }
        if centers.len() == count {
            return Ok(centers);
        }
    }
    Err(Error::invalid(format!(
        "cannot place {count} story centers {separation} apart in {dims} signal dimensions"
    )))
}

fn draw_thumbnail(rng: &mut impl Rng, id: String, shot: usize) -> ThumbnailActivations {
    let groups = (0..N_GROUPS)
        .map(|g| {
            let side = 8 >> g.min(3);
            let gain: f64 = rng.random_range(0.2..2.0);
            let data = (0..side * side * 2).map(|_| gain * rng.random::<f64>()).collect();
            vec![Tensor3 {
                shape: [side, side, 2],
                data,
            }]
        })
        .collect();
    ThumbnailActivations { id, shot, groups }
}

pub fn generate_synthetic_corpus(cfg: &SynthConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    // Concept anchors are orthogonal axes; words scatter tightly around them.
    let mut embeddings = TermEmbeddings::new();
    for c in 0..cfg.n_concepts {
        for i in 0..cfg.words_per_concept {
            let v: Vec<f64> = (0..cfg.word_dim)
                .map(|d| if d == c { 1.0 } else { 0.0 } + 0.1 * normal.sample(&mut rng))
                .collect();
            embeddings.insert(word(c, i), v);
        }
    }
    let groups = spectral_cluster_terms(&embeddings, cfg.n_concepts, cfg.seed)?;
    let semantic = SemanticConfig {
        sigma_a: 20.0 * cfg.fps,
        k: cfg.n_concepts,
    };
    let hypercolumns = HypercolumnConfig {
        size: SYNTH_THUMBNAIL_SIZE,
        ..HypercolumnConfig::default()
    };
    let planted_rank: Vec<f64> = (0..2 * N_GROUPS).map(|_| normal.sample(&mut rng)).collect();

    let mut videos = Vec::with_capacity(cfg.n_videos);
    for v in 0..cfg.n_videos {
        let id = format!("video{v:03}");
        let n = rng.random_range(cfg.shots_per_video.0..=cfg.shots_per_video.1);
        let n_stories = rng.random_range(cfg.stories_per_video.0..=cfg.stories_per_video.1);
        let lengths = draw_lengths(&mut rng, n, n_stories);
        let centers = draw_centers(&mut rng, n_stories, cfg.signal_dims, cfg.separation)?;
        let mut concepts = Vec::with_capacity(n_stories);
        for s in 0..n_stories {
            let mut c = rng.random_range(0..cfg.n_concepts);
            while s > 0 && c == concepts[s - 1] {
                c = rng.random_range(0..cfg.n_concepts);
            }
            concepts.push(c);
        }

        let mut labels = Vec::with_capacity(n);
        for (s, &len) in lengths.iter().enumerate() {
            labels.extend(std::iter::repeat_n(s, len));
        }
        let mut shots = Vec::with_capacity(n);
        let mut frame = 0u64;
        for (i, &s) in labels.iter().enumerate() {
            let len = rng.random_range(cfg.shot_frames.0..=cfg.shot_frames.1);
            let mut shot = ShotRecord::new(i, frame, frame + len);
            frame += len;
            shot.word_count = rng.random_range(0..=20);
            let visual: Vec<f64> = (0..cfg.dim)
                .map(|d| match centers[s].get(d) {
                    Some(c) => c + cfg.noise * normal.sample(&mut rng),
                    None => (cfg.noise + cfg.nuisance) * normal.sample(&mut rng),
                })
                .collect();
            shot.visual = Some(visual);
            shots.push(shot);
        }
        let video = Video { fps: cfg.fps, shots };
        let truth = Segmentation::from_labels(&labels)?;

        let mut terms = Vec::new();
        for (s, story) in truth.stories().iter().enumerate() {
            let span = video.timeline().story_span(*story);
            let count = rng.random_range(cfg.terms_per_story.0..=cfg.terms_per_story.1);
            for _ in 0..count {
                let t_u = rng.random_range(span.start as f64..span.end as f64);
                let probs = rng.random_bool(0.8).then(|| {
                    labels
                        .iter()
                        .map(|&l| if l == s { rng.random_range(0.6..0.95) } else { rng.random_range(0.0..0.1) })
                        .collect()
                });
                terms.push(TranscriptTerm {
                    unigram: word(concepts[s], rng.random_range(0..cfg.words_per_concept)),
                    t_u,
                    svm_probs: probs,
                });
            }
        }
        terms.sort_by(|a, b| a.t_u.total_cmp(&b.t_u));
        let features = assemble_video_features(&video, &terms, &groups, &semantic)?;

        let mut thumbnails = Vec::new();
        let mut preferences = Vec::new();
        if cfg.thumbnails {
            let mut scores = Vec::with_capacity(n);
            for i in 0..n {
                let act = draw_thumbnail(&mut rng, format!("{id}-k{i}"), i);
                let tau = thumbnail_features(&act, &hypercolumns)?.tau;
                scores.push(tau.iter().zip(&planted_rank).map(|(a, b)| a * b).sum::<f64>());
                thumbnails.push(act);
            }
            let mean = scores.iter().sum::<f64>() / n as f64;
            let sd = (scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            for (s, story) in truth.stories().iter().enumerate() {
                let shots: Vec<usize> = story.shots().collect();
                for w in shots.windows(2) {
                    if (scores[w[0]] - scores[w[1]]).abs() < cfg.preference_margin * sd {
                        continue;
                    }
                    let (a, b) = if scores[w[0]] >= scores[w[1]] { (w[0], w[1]) } else { (w[1], w[0]) };
                    preferences.push((s, thumbnails[a].id.clone(), thumbnails[b].id.clone()));
                }
            }
        }

        videos.push(SyntheticVideo {
            id,
            video,
            terms,
            truth,
            features,
            thumbnails,
            preferences,
        });
    }
    Ok(SyntheticCorpus {
        videos,
        embeddings,
        groups,
        semantic,
        planted_rank,
        hypercolumns,
    })
}

/// Preference pairs of a synthetic corpus as descriptor pairs.
pub fn synthetic_preference_pairs(corpus: &SyntheticCorpus) -> Result<Vec<PreferencePair>> {
    let mut out = Vec::new();
    for v in &corpus.videos {
        let tau = |id: &str| -> Result<Vec<f64>> {
            let act = v
                .thumbnails
                .iter()
                .find(|t| t.id == id)
                .ok_or_else(|| Error::invalid(format!("unknown keyframe {id}")))?;
            Ok(thumbnail_features(act, &corpus.hypercolumns)?.tau)
        };
        for (_, better, worse) in &v.preferences {
            out.push(PreferencePair {
                better: tau(better)?,
                worse: tau(worse)?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::segmentation_iou;
    use crate::segment::auto_segment;

    #[test]
    fn lengths_are_valid_compositions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let stories = rng.random_range(1..8);
            let n = rng.random_range(2 * stories..40);
            let l = draw_lengths(&mut rng, n, stories);
            assert_eq!(l.len(), stories);
            assert_eq!(l.iter().sum::<usize>(), n);
            assert!(l.iter().all(|&x| x >= 2));
        }
    }

    #[test]
    fn default_corpus_shape() {
        let c = generate_synthetic_corpus(&SynthConfig::default()).unwrap();
        assert_eq!(c.videos.len(), 10);
        for v in &c.videos {
            let n = v.video.n_shots();
            assert!((40..=80).contains(&n));
            assert!((4..=8).contains(&v.truth.n_stories()));
            assert_eq!(v.features.n_shots(), n);
            assert_eq!(v.features.dim(), 32 + 1 + 2 + 2 * 8);
            v.video.validate().unwrap();
        }
    }

    #[test]
    fn centers_respect_separation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = draw_centers(&mut rng, 8, 8, 4.0).unwrap();
        for i in 0..8 {
            for j in i + 1..8 {
                let d: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(d >= 4.0);
            }
        }
    }

    #[test]
    fn noiseless_visual_descriptors_recover_truth() {
        let cfg = SynthConfig {
            noise: 0.0,
            n_videos: 3,
            ..SynthConfig::default()
        };
        let c = generate_synthetic_corpus(&cfg).unwrap();
        for v in &c.videos {
            let visual: Vec<Vec<f64>> = v.video.shots.iter().map(|s| s.visual.clone().unwrap()).collect();
            let seg = auto_segment(&visual, 0.001).unwrap().segmentation;
            assert_eq!(segmentation_iou(&seg, &v.truth, &v.video.timeline()).unwrap(), 1.0);
        }
    }

    #[test]
    fn single_story_videos() {
        let cfg = SynthConfig {
            stories_per_video: (1, 1),
            n_videos: 2,
            ..SynthConfig::default()
        };
        let c = generate_synthetic_corpus(&cfg).unwrap();
        assert!(c.videos.iter().all(|v| v.truth.n_stories() == 1));
    }

    #[test]
    fn infeasible_ranges_rejected() {
        let bad = [
            SynthConfig { shots_per_video: (10, 5), ..SynthConfig::default() },
            SynthConfig { stories_per_video: (4, 30), ..SynthConfig::default() },
            SynthConfig { separation: 0.0, ..SynthConfig::default() },
            SynthConfig { signal_dims: 40, ..SynthConfig::default() },
        ];
        for cfg in bad {
            assert!(generate_synthetic_corpus(&cfg).is_err());
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SynthConfig { n_videos: 2, thumbnails: true, ..SynthConfig::default() };
        assert_eq!(generate_synthetic_corpus(&cfg).unwrap(), generate_synthetic_corpus(&cfg).unwrap());
    }

    #[test]
    fn thumbnail_preferences_follow_planted_model() {
        let cfg = SynthConfig { n_videos: 2, thumbnails: true, ..SynthConfig::default() };
        let c = generate_synthetic_corpus(&cfg).unwrap();
        let pairs = synthetic_preference_pairs(&c).unwrap();
        assert!(!pairs.is_empty());
        for p in pairs {
            let s = |t: &[f64]| t.iter().zip(&c.planted_rank).map(|(a, b)| a * b).sum::<f64>();
            assert!(s(&p.better) >= s(&p.worse));
        }
    }
}
