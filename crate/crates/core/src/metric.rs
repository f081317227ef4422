//! Intersection-over-union between stories and between whole segmentations.

use crate::error::{Error, Result};
use crate::types::{AnnotationSet, Interval, Segmentation, Story, Timeline};

/// `|a ∩ b| / |a ∪ b|` in frames; 0 for disjoint intervals.
pub fn interval_iou(a: Interval, b: Interval) -> f64 {
    let inter = a.end.min(b.end).saturating_sub(a.start.max(b.start));
    if inter == 0 {
        return 0.0;
    }
    let union = a.end.max(b.end) - a.start.min(b.start);
    inter as f64 / union as f64
}

pub fn story_iou(a: Story, b: Story, timeline: &Timeline) -> f64 {
    interval_iou(timeline.story_span(a), timeline.story_span(b))
}

fn check_compatible(a: &Segmentation, b: &Segmentation, timeline: &Timeline) -> Result<()> {
    if a.n_shots() != b.n_shots() {
        return Err(Error::Incompatible(format!(
            "segmentations cover {} and {} shots",
            a.n_shots(),
            b.n_shots()
        )));
    }
    if timeline.n_shots() != a.n_shots() {
        return Err(Error::Incompatible(format!(
            "timeline has {} shots, segmentations have {}",
            timeline.n_shots(),
            a.n_shots()
        )));
    }
    Ok(())
}

/// For every story of `from`, the best IoU against any story of `to`.
///
/// Both lists are sorted and tile the same range, so the stories of `to`
/// overlapping a given story form a contiguous window that only moves forward.
fn best_matches(from: &[Story], to: &[Story], timeline: &Timeline) -> f64 {
    let mut sum = 0.0;
    let mut lo = 0;
    for &a in from {
        while to[lo].last_shot < a.first_shot {
            lo += 1;
        }
        let mut best = 0.0f64;
        let mut j = lo;
        while j < to.len() && to[j].first_shot <= a.last_shot {
            best = best.max(story_iou(a, to[j], timeline));
            j += 1;
        }
        sum += best;
    }
    sum / from.len() as f64
}

/// Symmetric best-match IoU of two segmentations of the same video:
/// the mean over stories of `a` of their best IoU in `b`, averaged with the
/// same quantity taken from `b`'s side.
pub fn segmentation_iou(a: &Segmentation, b: &Segmentation, timeline: &Timeline) -> Result<f64> {
    check_compatible(a, b, timeline)?;
    let ab = best_matches(a.stories(), b.stories(), timeline);
    let ba = best_matches(b.stories(), a.stories(), timeline);
    Ok(0.5 * (ab + ba))
}

/// [`segmentation_iou`] with every shot weighted as one frame.
pub fn segmentation_iou_shots(a: &Segmentation, b: &Segmentation) -> Result<f64> {
    segmentation_iou(a, b, &Timeline::unit(a.n_shots()))
}

/// Mean of [`segmentation_iou`] between `a` and every annotation.
pub fn mean_iou(a: &Segmentation, set: &AnnotationSet, timeline: &Timeline) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyAnnotations);
    }
    let mut total = 0.0;
    for s in set.annotations() {
        total += segmentation_iou(a, s, timeline)?;
    }
    Ok(total / set.len() as f64)
}
