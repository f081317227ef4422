//! Domain types shared across the crate: shots, stories, segmentations and
//! the per-shot feature layout.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `H x W x K` activation tensor, row-major with the channel axis
/// varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    pub shape: [usize; 3],
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(shape: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let t = Tensor3 { shape, data };
        t.validate()?;
        Ok(t)
    }

    pub fn zeros(shape: [usize; 3]) -> Self {
        Tensor3 {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected: usize = self.shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::shape(format!(
                "tensor declares shape {:?} ({} values) but holds {}",
                self.shape,
                expected,
                self.data.len()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, k: usize) -> f64 {
        let [_, w, c] = self.shape;
        self.data[(y * w + x) * c + k]
    }
}

/// One shot of an edited video together with its raw per-shot inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    #[serde(default)]
    pub index: usize,
    pub start_frame: u64,
    /// Exclusive.
    pub end_frame: u64,
    #[serde(default)]
    pub word_count: u32,
    /// CNN activations of the shot's keyframes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keyframes: Vec<Tensor3>,
    /// Precomputed visual descriptor, used when no keyframe tensors are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<Vec<f64>>,
}

impl ShotRecord {
    pub fn new(index: usize, start_frame: u64, end_frame: u64) -> Self {
        ShotRecord {
            index,
            start_frame,
            end_frame,
            word_count: 0,
            keyframes: Vec::new(),
            visual: None,
            audio: None,
        }
    }

    pub fn len_frames(&self) -> u64 {
        self.end_frame - self.start_frame
    }

    /// Representative timestamp of the shot: its midpoint frame.
    pub fn timestamp(&self) -> f64 {
        (self.start_frame + self.end_frame) as f64 / 2.0
    }
}

/// A video as a contiguous, sorted list of shots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Video {
    pub fps: f64,
    pub shots: Vec<ShotRecord>,
}

impl Video {
    pub fn n_shots(&self) -> usize {
        self.shots.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::invalid(format!("fps must be positive, got {}", self.fps)));
        }
        if self.shots.is_empty() {
            return Err(Error::invalid("video has no shots"));
        }
        for (i, shot) in self.shots.iter().enumerate() {
            if shot.index != i {
                return Err(Error::invalid(format!(
                    "shot at position {i} has index {}",
                    shot.index
                )));
            }
            if shot.start_frame >= shot.end_frame {
                return Err(Error::invalid(format!(
                    "shot {i}: start_frame {} is not before end_frame {}",
                    shot.start_frame, shot.end_frame
                )));
            }
            if i > 0 && self.shots[i - 1].end_frame != shot.start_frame {
                return Err(Error::invalid(format!(
                    "shot {i} starts at frame {} but shot {} ends at {}",
                    shot.start_frame,
                    i - 1,
                    self.shots[i - 1].end_frame
                )));
            }
            if let Some(first) = shot.keyframes.first() {
                for t in &shot.keyframes {
                    t.validate()?;
                    if t.shape != first.shape {
                        return Err(Error::shape(format!(
                            "shot {i}: keyframe shapes {:?} and {:?} differ",
                            first.shape, t.shape
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn timeline(&self) -> Timeline {
        let mut offsets = Vec::with_capacity(self.shots.len() + 1);
        offsets.extend(self.shots.iter().map(|s| s.start_frame));
        offsets.push(self.shots.last().map_or(0, |s| s.end_frame));
        Timeline { offsets }
    }
}

/// Half-open frame interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start: u64,
    pub end: u64,
}

impl Interval {
    pub fn new(start: u64, end: u64) -> Self {
        debug_assert!(start < end);
        Interval { start, end }
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Frame extents of every shot of a video: `offsets[i]` is where shot `i`
/// starts and `offsets[n]` is where the last shot ends.
///
/// When frame data is unavailable, [`Timeline::unit`] weighs every shot as
/// one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timeline {
    offsets: Vec<u64>,
}

impl Timeline {
    pub fn unit(n_shots: usize) -> Self {
        Timeline {
            offsets: (0..=n_shots as u64).collect(),
        }
    }

    pub fn from_offsets(offsets: Vec<u64>) -> Result<Self> {
        if offsets.len() < 2 {
            return Err(Error::invalid("timeline needs at least one shot"));
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("timeline offsets must be strictly increasing"));
        }
        Ok(Timeline { offsets })
    }

    pub fn n_shots(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Frame interval spanned by shots `first..=last`.
    #[inline]
    pub fn span(&self, first: usize, last: usize) -> Interval {
        Interval::new(self.offsets[first], self.offsets[last + 1])
    }

    pub fn story_span(&self, story: Story) -> Interval {
        self.span(story.first_shot, story.last_shot)
    }

    pub fn total_frames(&self) -> u64 {
        self.offsets[self.offsets.len() - 1] - self.offsets[0]
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }
}

/// Contiguous run of shots, `first_shot..=last_shot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Story {
    pub first_shot: usize,
    pub last_shot: usize,
}

impl Story {
    pub fn new(first_shot: usize, last_shot: usize) -> Result<Self> {
        if first_shot > last_shot {
            return Err(Error::InvalidSegmentation(format!(
                "story starts at shot {first_shot} after it ends at {last_shot}"
            )));
        }
        Ok(Story {
            first_shot,
            last_shot,
        })
    }

    pub fn len(&self) -> usize {
        self.last_shot - self.first_shot + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shots(&self) -> std::ops::RangeInclusive<usize> {
        self.first_shot..=self.last_shot
    }
}

impl fmt::Display for Story {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.first_shot, self.last_shot)
    }
}

#[derive(Serialize, Deserialize)]
struct SegmentationFile {
    n_shots: usize,
    boundaries: Vec<usize>,
}

/// Ordered partition of a video's shots into contiguous stories.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SegmentationFile", into = "SegmentationFile")]
pub struct Segmentation {
    stories: Vec<Story>,
    n_shots: usize,
}

impl TryFrom<SegmentationFile> for Segmentation {
    type Error = Error;

    fn try_from(f: SegmentationFile) -> Result<Self> {
        Segmentation::from_boundaries(f.n_shots, &f.boundaries)
    }
}

impl From<Segmentation> for SegmentationFile {
    fn from(s: Segmentation) -> Self {
        SegmentationFile {
            n_shots: s.n_shots,
            boundaries: s.boundaries(),
        }
    }
}

impl Segmentation {
    /// Builds a segmentation from the shot ordinals where stories start.
    /// The first boundary must be 0 and boundaries must strictly increase.
    pub fn from_boundaries(n_shots: usize, boundaries: &[usize]) -> Result<Self> {
        if n_shots == 0 {
            return Err(Error::InvalidSegmentation("n_shots must be at least 1".into()));
        }
        match boundaries.first() {
            Some(0) => {}
            Some(b) => {
                return Err(Error::InvalidSegmentation(format!(
                    "first boundary must be 0, got {b}"
                )))
            }
            None => return Err(Error::InvalidSegmentation("no boundaries".into())),
        }
        if let Some(w) = boundaries.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSegmentation(format!(
                "boundaries must strictly increase ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(&last) = boundaries.last() {
            if last >= n_shots {
                return Err(Error::InvalidSegmentation(format!(
                    "boundary {last} is outside 0..{n_shots}"
                )));
            }
        }
        let stories = boundaries
            .iter()
            .enumerate()
            .map(|(i, &start)| {
                let end = boundaries.get(i + 1).copied().unwrap_or(n_shots);
                Story {
                    first_shot: start,
                    last_shot: end - 1,
                }
            })
            .collect();
        Ok(Segmentation { stories, n_shots })
    }

    /// Validates that `stories` are ordered, disjoint and cover `0..n_shots`.
    pub fn from_stories(n_shots: usize, stories: Vec<Story>) -> Result<Self> {
        if stories.is_empty() {
            return Err(Error::InvalidSegmentation("no stories".into()));
        }
        let mut expected = 0;
        for s in &stories {
            if s.first_shot > s.last_shot {
                return Err(Error::InvalidSegmentation(format!("malformed story {s}")));
            }
            if s.first_shot != expected {
                let what = if s.first_shot < expected { "overlaps" } else { "leaves a gap before" };
                return Err(Error::InvalidSegmentation(format!(
                    "story {s} {what} shot {expected}"
                )));
            }
            expected = s.last_shot + 1;
        }
        if expected != n_shots {
            return Err(Error::InvalidSegmentation(format!(
                "stories cover {expected} shots, video has {n_shots}"
            )));
        }
        Ok(Segmentation { stories, n_shots })
    }

    /// Builds a segmentation from one story label per shot, starting a new
    /// story wherever the label changes.
    pub fn from_labels<T: PartialEq>(labels: &[T]) -> Result<Self> {
        let mut boundaries = vec![0];
        boundaries.extend((1..labels.len()).filter(|&i| labels[i] != labels[i - 1]));
        Segmentation::from_boundaries(labels.len(), &boundaries)
    }

    pub fn single(n_shots: usize) -> Result<Self> {
        Segmentation::from_boundaries(n_shots, &[0])
    }

    pub fn singletons(n_shots: usize) -> Result<Self> {
        Segmentation::from_boundaries(n_shots, &(0..n_shots).collect::<Vec<_>>())
    }

    pub fn stories(&self) -> &[Story] {
        &self.stories
    }

    pub fn n_shots(&self) -> usize {
        self.n_shots
    }

    pub fn n_stories(&self) -> usize {
        self.stories.len()
    }

    pub fn boundaries(&self) -> Vec<usize> {
        self.stories.iter().map(|s| s.first_shot).collect()
    }

    /// Story ordinal of every shot.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = Vec::with_capacity(self.n_shots);
        for (i, s) in self.stories.iter().enumerate() {
            labels.extend(std::iter::repeat_n(i, s.len()));
        }
        labels
    }
}

/// Several human segmentations of the same video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    annotations: Vec<Segmentation>,
}

impl AnnotationSet {
    pub fn new(annotations: Vec<Segmentation>) -> Result<Self> {
        let Some(first) = annotations.first() else {
            return Err(Error::EmptyAnnotations);
        };
        let n = first.n_shots();
        if let Some(bad) = annotations.iter().find(|a| a.n_shots() != n) {
            return Err(Error::Incompatible(format!(
                "annotations cover {n} and {} shots",
                bad.n_shots()
            )));
        }
        Ok(AnnotationSet { annotations })
    }

    pub fn annotations(&self) -> &[Segmentation] {
        &self.annotations
    }

    pub fn n_shots(&self) -> usize {
        self.annotations[0].n_shots()
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }
}

/// Feature families in the order they are concatenated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureBlock {
    Visual,
    Audio,
    Qos,
    Time,
    VisualSemantic,
    TextualSemantic,
}

impl FeatureBlock {
    pub const ALL: [FeatureBlock; 6] = [
        FeatureBlock::Visual,
        FeatureBlock::Audio,
        FeatureBlock::Qos,
        FeatureBlock::Time,
        FeatureBlock::VisualSemantic,
        FeatureBlock::TextualSemantic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureBlock::Visual => "visual",
            FeatureBlock::Audio => "audio",
            FeatureBlock::Qos => "qos",
            FeatureBlock::Time => "time",
            FeatureBlock::VisualSemantic => "visual_semantic",
            FeatureBlock::TextualSemantic => "textual_semantic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRange {
    pub block: FeatureBlock,
    pub start: usize,
    pub end: usize,
}

/// Which slice of a feature vector holds which feature family. Ranges tile
/// `[0, dim)` in [`FeatureBlock::ALL`] order; absent blocks have empty ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockMap {
    pub blocks: Vec<BlockRange>,
}

impl BlockMap {
    pub fn from_sizes(sizes: [usize; 6]) -> Self {
        let mut start = 0;
        let blocks = FeatureBlock::ALL
            .iter()
            .zip(sizes)
            .map(|(&block, len)| {
                let r = BlockRange {
                    block,
                    start,
                    end: start + len,
                };
                start += len;
                r
            })
            .collect();
        BlockMap { blocks }
    }

    pub fn dim(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    pub fn range(&self, block: FeatureBlock) -> Option<Range<usize>> {
        self.blocks
            .iter()
            .find(|b| b.block == block)
            .map(|b| b.start..b.end)
    }

    pub fn validate(&self) -> Result<()> {
        let mut expected = 0;
        for b in &self.blocks {
            if b.start != expected || b.end < b.start {
                return Err(Error::shape(format!(
                    "block {} range {}..{} does not continue at {expected}",
                    b.block.name(),
                    b.start,
                    b.end
                )));
            }
            expected = b.end;
        }
        Ok(())
    }
}

/// Concatenated descriptor of one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub block_map: BlockMap,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn block(&self, block: FeatureBlock) -> &[f64] {
        match self.block_map.range(block) {
            Some(r) => &self.values[r],
            None => &[],
        }
    }
}

/// Feature vectors of every shot of one video, sharing a block layout.
/// This is also the on-disk features file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoFeatures {
    pub block_map: BlockMap,
    pub shots: Vec<Vec<f64>>,
}

impl VideoFeatures {
    pub fn from_vectors(vectors: Vec<FeatureVector>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::invalid("no feature vectors"));
        };
        let block_map = first.block_map.clone();
        let mut shots = Vec::with_capacity(vectors.len());
        for (i, v) in vectors.into_iter().enumerate() {
            if v.block_map != block_map {
                return Err(Error::shape(format!(
                    "shot {i} has a different block layout (dim {} vs {})",
                    v.block_map.dim(),
                    block_map.dim()
                )));
            }
            shots.push(v.values);
        }
        Ok(VideoFeatures { block_map, shots })
    }

    pub fn dim(&self) -> usize {
        self.block_map.dim()
    }

    pub fn n_shots(&self) -> usize {
        self.shots.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.block_map.validate()?;
        let d = self.dim();
        if let Some((i, row)) = self.shots.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::shape(format!(
                "shot {i} has {} values, block map declares {d}",
                row.len()
            )));
        }
        Ok(())
    }
}
