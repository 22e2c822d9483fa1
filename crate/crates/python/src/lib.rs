//! Python bindings. Frames cross the boundary as `(width, height, bytes)`
//! and boxes as `(x, y, w, h)` tuples.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use scenedet::config::LearnConfig;
use scenedet::detect::{detect as run_detect, DetectParams, Detection};
use scenedet::eval::evaluate as run_evaluate;
use scenedet::features::extract_features;
use scenedet::pipeline::self_learn;
use scenedet::propagation::{build_graph, propagate as run_propagate};
use scenedet::scene::{
    load_images, load_sequence, read_model, synth_negatives, synth_scene, write_model, DistractorStyle, Frame,
    GroundTruth, GtBox, SynthConfig,
};
use scenedet::{BBox, Error};

type PyBox = (f64, f64, f64, f64);
type PyFrame = (usize, usize, Vec<u8>);

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::DimensionMismatch { .. } | Error::ZeroAreaBox | Error::EmptyInput(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn bbox(b: PyBox) -> BBox {
    BBox::new(b.0, b.1, b.2, b.3)
}

fn tuple(b: &BBox) -> PyBox {
    (b.x, b.y, b.w, b.h)
}

fn frame(index: usize, f: PyFrame) -> PyResult<Frame> {
    Frame::new(index, f.0, f.1, f.2).map_err(err)
}

/// Intersection over union of two `(x, y, w, h)` boxes.
#[pyfunction]
fn iou(a: PyBox, b: PyBox) -> f64 {
    scenedet::iou(&bbox(a), &bbox(b))
}

/// HOG descriptor of a window of a grayscale frame.
#[pyfunction]
fn hog(image: PyFrame, window: PyBox) -> PyResult<Vec<f64>> {
    let f = frame(0, image)?;
    Ok(extract_features(&f, &bbox(window)).map_err(err)?.values)
}

/// Render a synthetic scene. Returns `(frames, boxes, negatives)` where
/// `boxes[t]` lists the ground-truth boxes of frame `t`.
#[pyfunction]
#[pyo3(signature = (seed=7, frames=200, sprites=3, distractors=2, part_like=false, negatives=10))]
fn synth(
    seed: u64,
    frames: usize,
    sprites: usize,
    distractors: usize,
    part_like: bool,
    negatives: usize,
) -> PyResult<(Vec<PyFrame>, Vec<Vec<PyBox>>, Vec<PyFrame>)> {
    let cfg = SynthConfig {
        seed,
        frames,
        sprites,
        distractors,
        negatives,
        distractor_style: if part_like {
            DistractorStyle::PartLike
        } else {
            DistractorStyle::Vehicle
        },
        ..SynthConfig::default()
    };
    let (video, gt) = synth_scene(&cfg).map_err(err)?;
    let negs = synth_negatives(&cfg).map_err(err)?;
    let pack = |f: &Frame| (f.width, f.height, f.pixels.clone());
    Ok((
        video.frames.iter().map(pack).collect(),
        gt.frames.iter().map(|bs| bs.iter().map(|g| tuple(&g.bbox)).collect()).collect(),
        negs.iter().map(pack).collect(),
    ))
}

/// Harmonic label propagation over a kNN graph. The first
/// `len(labels)` rows of `features` are the labeled vertices. Returns one
/// score per row, labeled rows first.
#[pyfunction]
#[pyo3(signature = (features, labels, k=5))]
fn propagate(features: Vec<Vec<f64>>, labels: Vec<f64>, k: usize) -> PyResult<Vec<f64>> {
    let graph = build_graph(&features, labels.len(), k).map_err(err)?;
    let scores = run_propagate(&graph, &labels).map_err(err)?.scores;
    Ok(labels.into_iter().chain(scores).collect())
}

/// Learn a detector from PGM directories and write `model.json` to
/// `model_path`. `config` maps configuration keys to values. Returns the
/// per-iteration error rates.
#[pyfunction]
#[pyo3(signature = (video_dir, negatives_dir, model_path, config=None))]
fn learn(
    video_dir: PathBuf,
    negatives_dir: PathBuf,
    model_path: PathBuf,
    config: Option<&Bound<'_, PyDict>>,
) -> PyResult<Vec<f64>> {
    let mut cfg = LearnConfig::default();
    if let Some(d) = config {
        for (k, v) in d.iter() {
            let key: String = k.extract()?;
            cfg.set(&key, &v.str()?.to_string()).map_err(err)?;
        }
    }
    let video = load_sequence(&video_dir).map_err(err)?;
    let negatives = load_images(&negatives_dir).map_err(err)?;
    let out = self_learn(&video, &negatives, &cfg).map_err(err)?;
    write_model(&out.model, &cfg.hyper, &model_path).map_err(err)?;
    Ok(out.log.iter().map(|r| r.xi).collect())
}

/// Detections `(frame, (x, y, w, h), score)` of a saved model over a PGM
/// directory.
#[pyfunction]
#[pyo3(signature = (model_path, frames_dir, threshold=0.0))]
fn detect(model_path: PathBuf, frames_dir: PathBuf, threshold: f64) -> PyResult<Vec<(usize, PyBox, f64)>> {
    let (model, hyper) = read_model(&model_path).map_err(err)?;
    let params = DetectParams {
        threshold,
        nms_iou: hyper.nms_iou,
        ..DetectParams::default()
    };
    let seq = load_sequence(&frames_dir).map_err(err)?;
    let mut out = Vec::new();
    for f in &seq.frames {
        for d in run_detect(&model, f, &params).map_err(err)? {
            out.push((d.frame_index, tuple(&d.bbox), d.score));
        }
    }
    Ok(out)
}

/// Average precision and maximum recall of detections against per-frame
/// ground truth.
#[pyfunction]
#[pyo3(signature = (detections, ground_truth, iou_match=0.5))]
fn evaluate(
    detections: Vec<(usize, PyBox, f64)>,
    ground_truth: Vec<Vec<PyBox>>,
    iou_match: f64,
) -> (f64, f64) {
    let gt = GroundTruth {
        frames: ground_truth
            .iter()
            .map(|bs| {
                bs.iter()
                    .enumerate()
                    .map(|(i, b)| GtBox {
                        bbox: bbox(*b),
                        id: i as u64,
                    })
                    .collect()
            })
            .collect(),
    };
    let dets: Vec<Detection> = detections
        .iter()
        .map(|&(frame_index, b, score)| Detection {
            bbox: bbox(b),
            score,
            frame_index,
        })
        .collect();
    let curve = run_evaluate(&dets, &gt, iou_match);
    (curve.ap, curve.max_recall())
}

#[pymodule]
#[pyo3(name = "scenedet")]
fn scenedet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(hog, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
