use crate::error::{Error, Result};
use crate::types::{ShotRecord, Tensor3};

/// Element-wise maximum over the keyframe tensors of a shot.
pub fn temporal_max_pool(tensors: &[Tensor3]) -> Result<Tensor3> {
    let Some(first) = tensors.first() else {
        return Err(Error::invalid("temporal pooling needs at least one tensor"));
    };
    first.validate()?;
    let mut out = first.clone();
    for t in &tensors[1..] {
        t.validate()?;
        if t.shape != first.shape {
            return Err(Error::shape(format!(
                "cannot pool tensors of shape {:?} and {:?}",
                first.shape, t.shape
            )));
        }
        for (o, &v) in out.data.iter_mut().zip(&t.data) {
            if v > *o {
                *o = v;
            }
        }
    }
    Ok(out)
}

/// Per-shot word counts normalized by the video's maximum. A silent video
/// maps to all zeros.
pub fn quantity_of_speech(word_counts: &[u32]) -> Vec<f64> {
    let max = word_counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return vec![0.0; word_counts.len()];
    }
    word_counts
        .iter()
        .map(|&c| c as f64 / max as f64)
        .collect()
}

/// `(timestamp, length)` of each shot, both as fractions of the video length.
pub fn time_features(shots: &[ShotRecord]) -> Vec<(f64, f64)> {
    let (Some(first), Some(last)) = (shots.first(), shots.last()) else {
        return Vec::new();
    };
    let origin = first.start_frame;
    let total = (last.end_frame - origin) as f64;
    shots
        .iter()
        .map(|s| {
            (
                (s.start_frame - origin) as f64 / total,
                s.len_frames() as f64 / total,
            )
        })
        .collect()
}
