use super::pooling::{quantity_of_speech, temporal_max_pool, time_features};
use super::semantic::{textual_semantic_vector, validate_terms, visual_semantic_vector, SemanticConfig, TranscriptTerm};
use super::spectral::ConceptGroups;
use crate::error::{Error, Result};
use crate::types::{BlockMap, FeatureVector, Video, VideoFeatures};

/// Every feature family computed for one shot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShotBlocks {
    /// Flattened pooled activations or a provided descriptor; empty if absent.
    pub visual: Vec<f64>,
    /// Empty if absent.
    pub audio: Vec<f64>,
    pub qos: f64,
    pub time: (f64, f64),
    pub visual_semantic: Vec<f64>,
    pub textual_semantic: Vec<f64>,
}

/// Concatenates the blocks in fixed order: visual, audio, quantity of
/// speech, time, visual concepts, textual concepts.
pub fn assemble_feature_vector(blocks: &ShotBlocks) -> FeatureVector {
    let block_map = BlockMap::from_sizes([
        blocks.visual.len(),
        blocks.audio.len(),
        1,
        2,
        blocks.visual_semantic.len(),
        blocks.textual_semantic.len(),
    ]);
    let mut values = Vec::with_capacity(block_map.dim());
    values.extend_from_slice(&blocks.visual);
    values.extend_from_slice(&blocks.audio);
    values.push(blocks.qos);
    values.push(blocks.time.0);
    values.push(blocks.time.1);
    values.extend_from_slice(&blocks.visual_semantic);
    values.extend_from_slice(&blocks.textual_semantic);
    FeatureVector { values, block_map }
}

/// Computes every block for every shot of `video` and assembles them.
pub fn assemble_video_features(
    video: &Video,
    terms: &[TranscriptTerm],
    groups: &ConceptGroups,
    cfg: &SemanticConfig,
) -> Result<VideoFeatures> {
    video.validate()?;
    cfg.validate()?;
    validate_terms(terms, video)?;
    let counts: Vec<u32> = video.shots.iter().map(|s| s.word_count).collect();
    let qos = quantity_of_speech(&counts);
    let times = time_features(&video.shots);
    let mut vectors = Vec::with_capacity(video.n_shots());
    for (i, shot) in video.shots.iter().enumerate() {
        let visual = if !shot.keyframes.is_empty() {
            temporal_max_pool(&shot.keyframes)?.data
        } else {
            shot.visual.clone().unwrap_or_default()
        };
        let blocks = ShotBlocks {
            visual,
            audio: shot.audio.clone().unwrap_or_default(),
            qos: qos[i],
            time: times[i],
            visual_semantic: visual_semantic_vector(shot, terms, groups, cfg)?,
            textual_semantic: textual_semantic_vector(shot, terms, groups, cfg)?,
        };
        vectors.push(assemble_feature_vector(&blocks));
    }
    VideoFeatures::from_vectors(vectors).map_err(|e| match e {
        Error::Shape(m) => Error::Shape(format!("inconsistent feature dimensions within video: {m}")),
        other => other,
    })
}

/// Checks that every video of a corpus shares one feature layout.
pub fn check_corpus_layout<'a>(videos: impl IntoIterator<Item = &'a VideoFeatures>) -> Result<()> {
    let mut first: Option<&BlockMap> = None;
    for (i, v) in videos.into_iter().enumerate() {
        v.validate()?;
        match first {
            None => first = Some(&v.block_map),
            Some(m) if *m != v.block_map => {
                return Err(Error::shape(format!(
                    "video {i} has feature dimension {} but the corpus uses {}",
                    v.dim(),
                    m.dim()
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FeatureBlock, ShotRecord, Tensor3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_sizes() {
        let blocks = ShotBlocks {
            visual: vec![1.0; 4],
            audio: vec![2.0; 3],
            qos: 0.5,
            time: (0.1, 0.2),
            visual_semantic: vec![3.0; 2],
            textual_semantic: vec![4.0; 2],
        };
        let fv = assemble_feature_vector(&blocks);
        assert_eq!(fv.dim(), 14);
        assert_eq!(fv.block_map, BlockMap::from_sizes([4, 3, 1, 2, 2, 2]));
        assert_eq!(fv.block(FeatureBlock::Audio), &[2.0; 3]);
        assert_eq!(fv.block(FeatureBlock::Time), &[0.1, 0.2]);
        assert_eq!(fv.block(FeatureBlock::TextualSemantic), &[4.0, 4.0]);
    }

    fn groups(k: usize) -> ConceptGroups {
        ConceptGroups {
            k,
            assignment: [("a".to_string(), 0)].into_iter().collect(),
        }
    }

    #[test]
    fn optional_blocks_absent() {
        let video = Video {
            fps: 25.0,
            shots: vec![ShotRecord::new(0, 0, 100), ShotRecord::new(1, 100, 300)],
        };
        let k = 3;
        let f = assemble_video_features(&video, &[], &groups(k), &SemanticConfig { sigma_a: 500.0, k }).unwrap();
        assert_eq!(f.dim(), 1 + 2 + 2 * k);
        assert_eq!(f.shots[1][1..3], [1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn pooled_keyframes_feed_visual_block() {
        let mut shot = ShotRecord::new(0, 0, 10);
        shot.keyframes = vec![
            Tensor3::new([1, 1, 2], vec![1.0, 5.0]).unwrap(),
            Tensor3::new([1, 1, 2], vec![3.0, 2.0]).unwrap(),
        ];
        let video = Video { fps: 25.0, shots: vec![shot] };
        let f = assemble_video_features(&video, &[], &groups(1), &SemanticConfig { sigma_a: 10.0, k: 1 }).unwrap();
        assert_eq!(&f.shots[0][..2], &[3.0, 5.0]);
    }

    #[test]
    fn inconsistent_dimensions_error() {
        let mut a = ShotRecord::new(0, 0, 10);
        a.visual = Some(vec![1.0, 2.0]);
        let mut b = ShotRecord::new(1, 10, 20);
        b.visual = Some(vec![1.0]);
        let video = Video { fps: 25.0, shots: vec![a, b] };
        let r = assemble_video_features(&video, &[], &groups(1), &SemanticConfig { sigma_a: 10.0, k: 1 });
        assert!(matches!(r, Err(Error::Shape(_))));

        let x = VideoFeatures { block_map: BlockMap::from_sizes([1, 0, 1, 2, 1, 1]), shots: vec![vec![0.0; 6]] };
        let y = VideoFeatures { block_map: BlockMap::from_sizes([2, 0, 1, 2, 1, 1]), shots: vec![vec![0.0; 7]] };
        assert!(check_corpus_layout([&x, &x]).is_ok());
        assert!(check_corpus_layout([&x, &y]).is_err());
    }

    #[test]
    fn features_file_round_trips_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let block_map = BlockMap::from_sizes([5, 2, 1, 2, 3, 3]);
        let shots = (0..12)
            .map(|_| {
                (0..16)
                    .map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-30..30)) - 0.5)
                    .collect()
            })
            .collect();
        let f = VideoFeatures { block_map, shots };
        let back: VideoFeatures = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        for (a, b) in f.shots.iter().flatten().zip(back.shots.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back, f);
    }
}
