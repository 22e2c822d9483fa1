//! JSONL box/log records and the JSON model file.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::plm::LatentModel;
use crate::types::{Hyperparams, ProposalSource, Provenance};

/// One box per line: annotations, detections, proposals and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ProposalSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
}

impl BoxRecord {
    pub fn from_box(frame: usize, b: &BBox) -> Self {
        BoxRecord {
            frame,
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
            score: None,
            label: None,
            provenance: None,
            iteration: None,
            source: None,
            id: None,
        }
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(self.x, self.y, self.w, self.h)
    }
}

/// Per-iteration learning statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iteration: usize,
    /// Error rate of the labeled set under the model at the end of the iteration.
    pub xi: f64,
    /// Signed counterpart of `xi` (mean of calibrated score minus label).
    pub xi_signed: f64,
    pub xi_l: f64,
    pub xi_u: f64,
    pub gamma: f64,
    pub u: usize,
    pub alpha: [f64; 3],
    pub positives: usize,
    pub negatives: usize,
    pub hard_negatives: usize,
    pub objective: f64,
    pub lambda_effective: f64,
    pub proposals: usize,
    pub stability_warning: bool,
    #[serde(default)]
    pub events: Vec<String>,
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::CorruptFile(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(item);
    }
    Ok(out)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub window_w: usize,
    pub window_h: usize,
    pub feature_dim: usize,
    pub bias: f64,
    pub weights: Vec<f64>,
    pub hyperparams: Hyperparams,
    pub iteration: usize,
}

pub fn write_model(model: &LatentModel, hyperparams: &Hyperparams, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        window_w: model.window_w,
        window_h: model.window_h,
        feature_dim: model.weights.len(),
        bias: model.bias,
        weights: model.weights.clone(),
        hyperparams: hyperparams.clone(),
        iteration: model.training_iteration,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(LatentModel, Hyperparams)> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::CorruptFile(format!("{}: {e}", path.display())))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CorruptFile(format!("{}: missing format_version", path.display())))?;
    if version != MODEL_FORMAT_VERSION as u64 {
        return Err(Error::VersionMismatch {
            found: version as u32,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::CorruptFile(format!("{}: {e}", path.display())))?;
    if file.weights.len() != file.feature_dim {
        return Err(Error::CorruptFile(format!(
            "{}: feature_dim {} but {} weights",
            path.display(),
            file.feature_dim,
            file.weights.len()
        )));
    }
    let model = LatentModel {
        weights: file.weights,
        bias: file.bias,
        window_w: file.window_w,
        window_h: file.window_h,
        training_iteration: file.iteration,
    };
    Ok((model, file.hyperparams))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let weights: Vec<f64> = (0..756).map(|i| ((i as f64) * 0.7311).sin() / 3.0).collect();
        let model = LatentModel {
            weights,
            bias: -0.123456789012345,
            window_w: 32,
            window_h: 64,
            training_iteration: 4,
        };
        write_model(&model, &Hyperparams::default(), &path).unwrap();
        let (back, hp) = read_model(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(hp, Hyperparams::default());
        let first = fs::read(&path).unwrap();
        write_model(&back, &hp, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn zero_model_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.json");
        let model = LatentModel::zeros(756, 32, 64);
        write_model(&model, &Hyperparams::default(), &path).unwrap();
        let (back, _) = read_model(&path).unwrap();
        assert!(back.weights.iter().all(|&w| w == 0.0));
        assert_eq!(back.bias, 0.0);
    }

    #[test]
    fn version_mismatch_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        write_model(&LatentModel::zeros(4, 32, 64), &Hyperparams::default(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 999");
        fs::write(&path, text).unwrap();
        assert!(matches!(read_model(&path), Err(Error::VersionMismatch { found: 999, .. })));
        fs::write(&path, "{ not json").unwrap();
        assert!(matches!(read_model(&path), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn jsonl_records_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dets.jsonl");
        let recs = vec![
            BoxRecord {
                score: Some(1.0 / 3.0),
                source: Some(ProposalSource::Tracked),
                ..BoxRecord::from_box(3, &BBox::new(1.25, 2.5, 10.0, 20.0))
            },
            BoxRecord {
                label: Some(0),
                provenance: Some(Provenance::HardNegative),
                iteration: Some(2),
                ..BoxRecord::from_box(0, &BBox::new(0.1, 0.2, 0.3, 0.4))
            },
        ];
        write_jsonl(&path, &recs).unwrap();
        let back: Vec<BoxRecord> = read_jsonl(&path).unwrap();
        assert_eq!(back, recs);
    }
}
