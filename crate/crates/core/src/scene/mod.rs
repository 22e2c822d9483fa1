//! Frame sequences, synthetic scenes and every persistent file format.

mod frame;
pub mod records;
mod synth;

pub use frame::{
    frame_file_name, load_images, load_sequence, write_frames, write_sequence, Frame, FrameSequence,
    MIN_FRAME_SIDE,
};
pub use records::{
    read_jsonl, read_model, write_jsonl, write_model, BoxRecord, LogRecord, ModelFile, MODEL_FORMAT_VERSION,
};
pub use synth::{synth_negatives, synth_scene, DistractorStyle, SynthConfig};

use serde::{Deserialize, Serialize};

use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub bbox: BBox,
    pub id: u64,
}

/// Per-frame object boxes. Used for evaluation only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frames: Vec<Vec<GtBox>>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> GroundTruth {
        GroundTruth {
            frames: self.frames[range].to_vec(),
        }
    }

    pub fn to_records(&self) -> Vec<BoxRecord> {
        self.frames
            .iter()
            .enumerate()
            .flat_map(|(f, boxes)| {
                boxes.iter().map(move |g| BoxRecord {
                    id: Some(g.id),
                    ..BoxRecord::from_box(f, &g.bbox)
                })
            })
            .collect()
    }

    /// Rebuild from records; `frames` fixes the frame count so that
    /// trailing empty frames survive a round trip.
    pub fn from_records(records: &[BoxRecord], frames: usize) -> GroundTruth {
        let n = records.iter().map(|r| r.frame + 1).max().unwrap_or(0).max(frames);
        let mut out = vec![Vec::new(); n];
        for (k, r) in records.iter().enumerate() {
            out[r.frame].push(GtBox {
                bbox: r.bbox(),
                id: r.id.unwrap_or(k as u64),
            });
        }
        GroundTruth { frames: out }
    }
}
