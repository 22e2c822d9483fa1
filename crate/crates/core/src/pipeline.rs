//! The self-learning loop: discovery, enforcement and propagation,
//! repeated until the labeled-sample error rate settles.

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::LearnConfig;
use crate::detect::{nms, score_windows, DetectParams};
use crate::error::{Error, Result};
use crate::features::{extract_features, WINDOW_H, WINDOW_W};
use crate::geometry::{iou, mean_aspect, BBox};
use crate::integral::IntegralImage;
use crate::motion::motion_maps;
use crate::plm::{cccp_train, mine_hard_negatives, CccpParams, CccpReport, LatentModel, SolverParams, TrainingInstance};
use crate::propagation::{build_graph, gamma_line_search, instance_error_rate, propagate, LineSearchInput, PoolEntry};
use crate::proposals::{edge_map, generate_with_cues, track_proposals, FrameCues};
use crate::ranking::{combinatorial_score, rank_and_split, score_triplet, update_rank_weights, RankWeights};
use crate::scene::{Frame, FrameSequence, LogRecord};
use crate::types::{normalize_to_aspect, LabeledSample, Proposal, ProposalSource, Provenance};

pub const MIN_FRAMES: usize = 20;
pub const MIN_NEGATIVE_IMAGES: usize = 5;
/// Hard negatives kept across iterations, per positive.
const HARD_NEGATIVE_CAP: usize = 10;
/// Negatives in the propagation graph, per positive.
const GRAPH_NEGATIVE_RATIO: usize = 2;
const LINE_SEARCH_MAX_OUTER: usize = 5;
/// Scans of the negative images during discovery.
const MINING_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnState {
    pub iteration: usize,
    pub model: LatentModel,
    pub positives: Vec<LabeledSample>,
    pub negatives: Vec<LabeledSample>,
    pub hard_negatives: Vec<LabeledSample>,
    /// Candidate windows of each positive frame, in bag order.
    pub candidates: Vec<Vec<Proposal>>,
    pub rank_weights: RankWeights,
    pub alpha_history: Vec<[f64; 3]>,
    pub xi_history: Vec<f64>,
    pub gamma_history: Vec<f64>,
    pub positive_history: Vec<usize>,
    pub aspect: f64,
    pub seed: u64,
}

impl LearnState {
    /// All labeled samples: positives, negatives, then hard negatives.
    pub fn labels(&self) -> Vec<LabeledSample> {
        let mut out = self.positives.clone();
        out.extend(self.negatives.iter().cloned());
        out.extend(self.hard_negatives.iter().cloned());
        out
    }
}

#[derive(Debug, Clone)]
pub struct LearnOutput {
    pub model: LatentModel,
    pub state: LearnState,
    pub log: Vec<LogRecord>,
}

#[derive(Debug, Clone)]
struct Sample {
    proposal: Proposal,
    features: Vec<f64>,
}

/// A positive frame: its candidate windows and the currently chosen one.
#[derive(Debug, Clone)]
struct Bag {
    frame: usize,
    candidates: Vec<Sample>,
    latent: usize,
}

impl Bag {
    fn chosen(&self) -> &Sample {
        &self.candidates[self.latent]
    }
}

fn same_window(a: &Proposal, b: &Proposal) -> bool {
    a.frame_index == b.frame_index && a.bbox == b.bbox
}

fn sample_of(frame: &Frame, proposal: Proposal) -> Result<Sample> {
    let features = extract_features(frame, &proposal.bbox)?.values;
    Ok(Sample { proposal, features })
}

/// `n` indices spread evenly over `0..len`.
fn spread(len: usize, n: usize) -> Vec<usize> {
    if n >= len {
        return (0..len).collect();
    }
    (0..n).map(|k| k * len / n).collect()
}

struct Learner<'a> {
    cfg: &'a LearnConfig,
    frames: &'a [Frame],
    negative_images: &'a [Frame],
    motion: Vec<IntegralImage>,
    edges: Vec<IntegralImage>,
    /// Objectness and tracked proposals from the first iteration.
    base: Vec<Vec<Proposal>>,
    /// Current proposals per frame.
    proposals: Vec<Vec<Proposal>>,
    bags: Vec<Bag>,
    video_negatives: Vec<Sample>,
    image_negatives: Vec<Sample>,
    /// Hard negatives with the bag they were mined around.
    hard: Vec<(Sample, usize)>,
    /// Propagated samples with their propagated score.
    propagated: Vec<(Sample, f64, usize)>,
    model: LatentModel,
    weights: RankWeights,
    aspect: f64,
    rng: ChaCha8Rng,
    lambda_effective: f64,
    events: Vec<String>,
}

impl<'a> Learner<'a> {
    fn cues(&self, frame: usize) -> FrameCues<'_> {
        FrameCues {
            frame: &self.frames[frame],
            motion: &self.motion[frame],
            edges: &self.edges[frame],
        }
    }

    fn margin(&self) -> f64 {
        self.cfg.proposals.border_margin_fraction
    }

    /// Reshape to the current aspect, rescore the cues and re-apply the
    /// motion gate.
    fn normalize(&self, proposals: Vec<Proposal>) -> Result<Vec<Proposal>> {
        let (w, h) = (self.frames[0].width, self.frames[0].height);
        let mut out = Vec::with_capacity(proposals.len());
        for mut p in normalize_to_aspect(&proposals, self.aspect, w, h) {
            self.cues(p.frame_index).score(&mut p, self.margin())?;
            if p.motion_score >= self.cfg.hyper.bg_threshold && !out.iter().any(|q: &Proposal| q.bbox == p.bbox) {
                out.push(p);
            }
        }
        Ok(out)
    }

    fn discover_proposals(&mut self) -> Result<()> {
        let n = self.frames.len();
        let mut per_frame: Vec<Vec<Proposal>> = Vec::with_capacity(n);
        for i in 0..n {
            per_frame.push(generate_with_cues(&self.cues(i), &self.cfg.proposals, self.cfg.hyper.bg_threshold, None)?);
        }
        if per_frame.iter().all(Vec::is_empty) {
            return Err(Error::NoProposalsSurvived);
        }
        let mut track_id = 0u64;
        let mut tracked: Vec<Vec<Proposal>> = vec![Vec::new(); n];
        for props in &per_frame {
            for seed in props.iter().take(self.cfg.track_seeds) {
                for p in track_proposals(self.frames, seed, self.cfg.hyper.tau, track_id)?.into_iter().skip(1) {
                    tracked[p.frame_index].push(p);
                }
                track_id += 1;
            }
        }
        for (i, extra) in tracked.into_iter().enumerate() {
            per_frame[i].extend(extra);
        }
        self.aspect = mean_aspect(per_frame.iter().flatten().map(|p| &p.bbox)).unwrap_or(0.5);
        for i in 0..n {
            per_frame[i] = self.normalize(std::mem::take(&mut per_frame[i]))?;
        }
        if per_frame.iter().all(Vec::is_empty) {
            return Err(Error::NoProposalsSurvived);
        }
        self.base = per_frame.clone();
        self.proposals = per_frame;
        Ok(())
    }

    /// Frames holding a high-ranked proposal become positive bags. A bag's
    /// candidates are the frame's best-ranked proposals.
    fn add_positive_candidates(&mut self, positives: &[Proposal]) -> Result<usize> {
        let mut frames: Vec<usize> = positives.iter().map(|p| p.frame_index).collect();
        frames.sort_unstable();
        frames.dedup();
        let mut added = 0;
        for f in frames {
            let mut ranked: Vec<(f64, &Proposal)> = self.proposals[f]
                .iter()
                .map(|p| (combinatorial_score(&self.weights, p), p))
                .collect();
            ranked.sort_by(|a, b| {
                b.0.total_cmp(&a.0)
                    .then(a.1.bbox.y.total_cmp(&b.1.bbox.y))
                    .then(a.1.bbox.x.total_cmp(&b.1.bbox.x))
            });
            let k = match self.bags.iter().position(|b| b.frame == f) {
                Some(k) => k,
                None => {
                    self.bags.push(Bag {
                        frame: f,
                        candidates: Vec::new(),
                        latent: 0,
                    });
                    self.bags.len() - 1
                }
            };
            let mut fresh = Vec::new();
            for (_, p) in ranked {
                let bag = &self.bags[k];
                if bag.candidates.len() + fresh.len() >= self.cfg.max_positive_candidates {
                    break;
                }
                if bag.candidates.iter().any(|c| c.proposal.bbox == p.bbox) || self.is_negative(p) {
                    continue;
                }
                fresh.push(sample_of(&self.frames[f], p.clone())?);
            }
            added += fresh.len();
            self.bags[k].candidates.extend(fresh);
        }
        self.bags.retain(|b| !b.candidates.is_empty());
        self.bags.sort_by_key(|b| b.frame);
        Ok(added)
    }

    fn is_negative(&self, p: &Proposal) -> bool {
        self.video_negatives.iter().any(|s| same_window(&s.proposal, p))
            || self.hard.iter().any(|(s, _)| same_window(&s.proposal, p))
            || self
                .propagated
                .iter()
                .any(|(s, g, _)| *g < 0.5 && same_window(&s.proposal, p))
    }

    fn is_labeled(&self, p: &Proposal) -> bool {
        self.bags.iter().any(|b| b.candidates.iter().any(|c| same_window(&c.proposal, p)))
            || self.video_negatives.iter().any(|s| same_window(&s.proposal, p))
            || self.hard.iter().any(|(s, _)| same_window(&s.proposal, p))
            || self.propagated.iter().any(|(s, _, _)| same_window(&s.proposal, p))
    }

    /// Scan the negative images with the current model and add the
    /// highest-scoring windows that are not negatives already.
    fn mine_image_negatives(&mut self) -> Result<usize> {
        let offset = self.frames.len();
        let params = DetectParams {
            aspect: Some(self.aspect),
            threshold: -1.0,
            ..self.cfg.detect.clone()
        };
        let mut added = 0;
        for (k, img) in self.negative_images.iter().enumerate() {
            let mut dets = score_windows(&self.model, &Frame { index: offset + k, ..img.clone() }, &params)?;
            dets.retain(|d| d.score > params.threshold);
            let mut taken = 0;
            for d in nms(&dets, params.nms_iou) {
                if taken >= self.cfg.mined_windows {
                    break;
                }
                if self.image_negatives.iter().any(|s| s.proposal.frame_index == d.frame_index && s.proposal.bbox == d.bbox) {
                    continue;
                }
                let mut p = Proposal::new(d.frame_index, d.bbox, ProposalSource::SlidingWindow);
                p.detection_score = d.score;
                let features = extract_features(img, &p.bbox)?.values;
                self.image_negatives.push(Sample { proposal: p, features });
                taken += 1;
            }
            added += taken;
        }
        Ok(added)
    }

    fn sample_image_negatives(&mut self) -> Result<()> {
        let offset = self.frames.len();
        for (k, img) in self.negative_images.iter().enumerate() {
            let heights: Vec<f64> = self
                .cfg
                .proposals
                .scales
                .iter()
                .copied()
                .filter(|&h| h <= img.height as f64 && h * self.aspect <= img.width as f64)
                .collect();
            if heights.is_empty() {
                continue;
            }
            for _ in 0..self.cfg.negative_windows {
                let h = heights[self.rng.random_range(0..heights.len())];
                let w = h * self.aspect;
                let x = self.rng.random_range(0.0..=(img.width as f64 - w)).floor();
                let y = self.rng.random_range(0.0..=(img.height as f64 - h)).floor();
                let mut p = Proposal::new(offset + k, BBox::new(x, y, w, h), ProposalSource::SlidingWindow);
                let features = extract_features(img, &p.bbox)?.values;
                p.detection_score = 0.0;
                self.image_negatives.push(Sample { proposal: p, features });
            }
        }
        if self.image_negatives.is_empty() {
            return Err(Error::NoNegatives);
        }
        Ok(())
    }

    fn instances(&self) -> Result<Vec<TrainingInstance>> {
        let mut out = Vec::new();
        for bag in &self.bags {
            let cands = bag.candidates.iter().map(|c| c.features.clone()).collect();
            out.push(TrainingInstance::new(out.len(), 1, cands, 1.0)?);
        }
        for (s, g, _) in &self.propagated {
            let e = PoolEntry {
                features: Vec::new(),
                g: *g,
            };
            out.push(TrainingInstance::single(out.len(), e.label(), s.features.clone(), e.weight())?);
        }
        for s in self
            .video_negatives
            .iter()
            .chain(&self.image_negatives)
            .chain(self.hard.iter().map(|(s, _)| s))
        {
            out.push(TrainingInstance::single(out.len(), 0, s.features.clone(), 1.0)?);
        }
        Ok(out)
    }

    /// Starting point for discovery: every bag candidate is a positive
    /// weighted by the inverse bag size.
    fn bag_mean_model(&mut self) -> Result<()> {
        let mut out = Vec::new();
        for bag in &self.bags {
            let w = 1.0 / bag.candidates.len() as f64;
            for c in &bag.candidates {
                out.push(TrainingInstance::single(out.len(), 1, c.features.clone(), w)?);
            }
        }
        for s in self.video_negatives.iter().chain(&self.image_negatives) {
            out.push(TrainingInstance::single(out.len(), 0, s.features.clone(), 1.0)?);
        }
        let params = self.cccp_params(0.0, self.cfg.solver_passes, 1);
        self.model = cccp_train(&out, &[], &params, None)?.model;
        Ok(())
    }

    fn pairs(&self, lambda: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
        if lambda <= 0.0 {
            return Vec::new();
        }
        self.hard
            .iter()
            .map(|(s, b)| (self.bags[*b].chosen().features.clone(), s.features.clone()))
            .collect()
    }

    fn cccp_params(&self, lambda: f64, passes: usize, max_outer: usize) -> CccpParams {
        CccpParams {
            c: self.cfg.hyper.c,
            lambda,
            max_outer,
            rel_tol: 1e-6,
            solver: SolverParams {
                max_passes: passes,
                tol: 1e-4,
                seed: self.cfg.seed,
            },
            curvature_bound: 0.25,
        }
    }

    fn train(&mut self, lambda: f64, warm: bool) -> Result<CccpReport> {
        let instances = self.instances()?;
        let pairs = self.pairs(lambda);
        let params = self.cccp_params(lambda, self.cfg.solver_passes, self.cfg.cccp_max_outer);
        let init = if warm { Some(self.model.clone()) } else { None };
        let mut report = cccp_train(&instances, &pairs, &params, init.as_ref())?;
        for (bag, &h) in self.bags.iter_mut().zip(&report.latent) {
            bag.latent = h;
        }
        report.model.window_h = WINDOW_H;
        report.model.window_w = ((self.aspect * WINDOW_H as f64).round() as usize).max(1);
        self.model = report.model.clone();
        self.lambda_effective = report.lambda_effective;
        self.events.extend(report.events.iter().cloned());
        Ok(report)
    }

    fn mine(&mut self) -> Result<usize> {
        let k = self.cfg.hard_negatives_per_anchor;
        let mut fresh = Vec::new();
        for (b, bag) in self.bags.iter().enumerate() {
            let anchor = &bag.chosen().proposal;
            let frame = &self.frames[bag.frame];
            let set = mine_hard_negatives(frame, &self.proposals[bag.frame], anchor, &self.model, k)?;
            for m in set.members {
                fresh.push((m, b));
            }
        }
        let mut added = 0;
        for (p, b) in fresh {
            if self.is_labeled(&p) {
                continue;
            }
            let frame = &self.frames[p.frame_index];
            self.hard.push((sample_of(frame, p)?, b));
            added += 1;
        }
        let cap = HARD_NEGATIVE_CAP * self.positive_count().max(1);
        if self.hard.len() > cap {
            let model = &self.model;
            let mut scored: Vec<(f64, usize)> =
                self.hard.iter().enumerate().map(|(i, (s, _))| (model.score(&s.features), i)).collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut keep: Vec<usize> = scored[..cap].iter().map(|x| x.1).collect();
            keep.sort_unstable();
            self.hard = keep.into_iter().map(|i| self.hard[i].clone()).collect();
        }
        Ok(added)
    }

    fn positive_count(&self) -> usize {
        self.bags.len() + self.propagated.iter().filter(|(_, g, _)| *g >= 0.5).count()
    }

    fn error_rate(&self) -> Result<(f64, f64)> {
        instance_error_rate(&self.model, &self.instances()?)
    }

    /// Proposals for iteration >= 2: detector-driven windows plus the
    /// first-iteration proposals, all scored by the current model.
    fn refresh_proposals(&mut self) -> Result<()> {
        if self.cfg.recompute_aspect {
            let positives: Vec<BBox> = self
                .bags
                .iter()
                .map(|b| b.chosen().proposal.bbox)
                .chain(self.propagated.iter().filter(|(_, g, _)| *g >= 0.5).map(|(s, _, _)| s.proposal.bbox))
                .collect();
            if let Some(a) = mean_aspect(positives.iter()) {
                self.aspect = a;
            }
        }
        for i in 0..self.frames.len() {
            let detector = generate_with_cues(
                &self.cues(i),
                &self.cfg.proposals,
                self.cfg.hyper.bg_threshold,
                Some(&self.model),
            )?;
            let mut all = self.normalize(detector)?;
            for p in &self.base[i] {
                if !all.iter().any(|q| q.bbox == p.bbox) {
                    all.push(p.clone());
                }
            }
            for p in &mut all {
                p.detection_score = self.model.score(&extract_features(&self.frames[i], &p.bbox)?.values);
            }
            self.proposals[i] = all;
        }
        Ok(())
    }

    fn update_weights(&mut self) -> Result<()> {
        let all: Vec<&Proposal> = self.proposals.iter().flatten().collect();
        let mut scored: Vec<(f64, usize)> =
            all.iter().enumerate().map(|(i, p)| (combinatorial_score(&self.weights, p), i)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let top: Vec<[f64; 3]> = scored[..scored.len().div_ceil(2)]
            .iter()
            .map(|&(_, i)| score_triplet(all[i]))
            .collect();
        if top.len() >= 3 {
            self.weights = update_rank_weights(&top)?;
        }
        Ok(())
    }

    /// Propagate labels from the current labeled set to the best-ranked
    /// unlabeled proposals and accept as many as the error-rate line
    /// search allows.
    fn propagate_labels(&mut self, iteration: usize, lambda: f64) -> Result<(f64, f64, f64, usize)> {
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<f64> = Vec::new();
        for bag in &self.bags {
            vertices.push(bag.chosen().features.clone());
            labels.push(1.0);
        }
        for (s, g, _) in &self.propagated {
            if *g >= 0.5 {
                vertices.push(s.features.clone());
                labels.push(1.0);
            }
        }
        let negatives: Vec<&Sample> = self
            .video_negatives
            .iter()
            .chain(&self.image_negatives)
            .chain(self.hard.iter().map(|(s, _)| s))
            .chain(self.propagated.iter().filter(|(_, g, _)| *g < 0.5).map(|(s, _, _)| s))
            .collect();
        for k in spread(negatives.len(), GRAPH_NEGATIVE_RATIO * labels.len()) {
            vertices.push(negatives[k].features.clone());
            labels.push(0.0);
        }
        let labeled = vertices.len();

        let ranked = {
            let mut all: Vec<(f64, &Proposal)> = self
                .proposals
                .iter()
                .flatten()
                .map(|p| (combinatorial_score(&self.weights, p), p))
                .collect();
            all.sort_by(|a, b| {
                b.0.total_cmp(&a.0)
                    .then(a.1.frame_index.cmp(&b.1.frame_index))
                    .then(a.1.bbox.y.total_cmp(&b.1.bbox.y))
                    .then(a.1.bbox.x.total_cmp(&b.1.bbox.x))
            });
            all
        };
        let mut pool: Vec<Sample> = Vec::new();
        for (_, p) in ranked {
            if pool.len() >= self.cfg.pool_size {
                break;
            }
            let overlaps_positive = self
                .bags
                .iter()
                .any(|b| b.frame == p.frame_index && iou(&b.chosen().proposal.bbox, &p.bbox) >= 0.5)
                || self
                    .propagated
                    .iter()
                    .any(|(s, _, _)| s.proposal.frame_index == p.frame_index && iou(&s.proposal.bbox, &p.bbox) >= 0.5)
                || pool
                    .iter()
                    .any(|s| s.proposal.frame_index == p.frame_index && iou(&s.proposal.bbox, &p.bbox) >= 0.5);
            if overlaps_positive || self.is_labeled(p) {
                continue;
            }
            pool.push(sample_of(&self.frames[p.frame_index], p.clone())?);
        }
        if pool.is_empty() {
            return Ok((0.0, 0.0, 0.0, 0));
        }
        vertices.extend(pool.iter().map(|s| s.features.clone()));
        let graph = build_graph(&vertices, labeled, self.cfg.hyper.k_nn)?;
        let result = propagate(&graph, &labels)?;
        if !result.unreachable.is_empty() {
            self.events
                .push(format!("{} pool vertices unreachable from labeled data", result.unreachable.len()));
        }
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| result.scores[b].total_cmp(&result.scores[a]).then(a.cmp(&b)));
        let entries: Vec<PoolEntry> = order
            .iter()
            .map(|&i| PoolEntry {
                features: pool[i].features.clone(),
                g: result.scores[i],
            })
            .collect();

        let existing = self.instances()?;
        let pairs = self.pairs(lambda);
        let outcome = gamma_line_search(&LineSearchInput {
            existing: &existing,
            pairs: &pairs,
            pool: &entries,
            labeled,
            r: self.cfg.hyper.r,
            gamma_max: self.cfg.hyper.gamma_max,
            incumbent: &self.model,
            cccp: self.cccp_params(lambda, self.cfg.line_search_passes, LINE_SEARCH_MAX_OUTER),
        })?;
        for t in &outcome.trials {
            debug!(
                "gamma {:.1}: u {} xi_l {:.4} xi_u {:.4}",
                t.gamma, t.u, t.xi_l, t.xi_u
            );
        }
        let est = outcome.estimate;
        for &i in order.iter().take(est.u) {
            let mut s = pool[i].clone();
            s.proposal.detection_score = self.model.score(&s.features);
            self.propagated.push((s, result.scores[i], iteration));
        }
        Ok((est.gamma, est.xi_l, est.xi_u, est.u))
    }

    fn state(&self, iteration: usize, history: &History) -> Result<LearnState> {
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for bag in &self.bags {
            let mut p = bag.chosen().proposal.clone();
            p.detection_score = self.model.score(&bag.chosen().features);
            positives.push(LabeledSample::new(p, 1, Provenance::Discovered, 1, 1.0)?);
        }
        for (s, g, it) in &self.propagated {
            let sample = LabeledSample::new(s.proposal.clone(), (*g >= 0.5) as u8, Provenance::Propagated, *it, *g)?;
            if sample.is_positive() {
                positives.push(sample);
            } else {
                negatives.push(sample);
            }
        }
        for s in &self.video_negatives {
            negatives.push(LabeledSample::new(s.proposal.clone(), 0, Provenance::Discovered, 1, 0.0)?);
        }
        for s in &self.image_negatives {
            negatives.push(LabeledSample::new(s.proposal.clone(), 0, Provenance::NegativeImage, 1, 0.0)?);
        }
        let hard_negatives = self
            .hard
            .iter()
            .map(|(s, _)| LabeledSample::new(s.proposal.clone(), 0, Provenance::HardNegative, iteration, 0.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(LearnState {
            iteration,
            model: self.model.clone(),
            positives,
            negatives,
            hard_negatives,
            candidates: self
                .bags
                .iter()
                .map(|b| b.candidates.iter().map(|c| c.proposal.clone()).collect())
                .collect(),
            rank_weights: self.weights,
            alpha_history: history.alpha.clone(),
            xi_history: history.xi.clone(),
            gamma_history: history.gamma.clone(),
            positive_history: history.positives.clone(),
            aspect: self.aspect,
            seed: self.cfg.seed,
        })
    }
}

#[derive(Default)]
struct History {
    alpha: Vec<[f64; 3]>,
    xi: Vec<f64>,
    gamma: Vec<f64>,
    positives: Vec<usize>,
}

/// Learn a detector from an unlabeled video and a pool of negative images.
///
/// Deterministic for a given configuration. Ground truth is never used.
pub fn self_learn(video: &FrameSequence, negatives: &[Frame], cfg: &LearnConfig) -> Result<LearnOutput> {
    cfg.validate()?;
    if video.len() < MIN_FRAMES {
        return Err(Error::InsufficientFrames {
            need: MIN_FRAMES,
            got: video.len(),
        });
    }
    if negatives.len() < MIN_NEGATIVE_IMAGES {
        return Err(Error::TooFewSamples {
            need: MIN_NEGATIVE_IMAGES,
            got: negatives.len(),
        });
    }
    let frames = &video.frames;
    let maps = motion_maps(frames, cfg.seed_median_background)?;
    let motion = maps.iter().map(|m| m.integral()).collect();
    let edges = frames.iter().map(|f| edge_map(f).integral()).collect();
    let lambda = cfg.hyper.lambda;
    let mut learner = Learner {
        cfg,
        frames,
        negative_images: negatives,
        motion,
        edges,
        base: Vec::new(),
        proposals: Vec::new(),
        bags: Vec::new(),
        video_negatives: Vec::new(),
        image_negatives: Vec::new(),
        hard: Vec::new(),
        propagated: Vec::new(),
        model: LatentModel::zeros(crate::features::FEATURE_DIM, WINDOW_W, WINDOW_H),
        weights: RankWeights::initial(),
        aspect: WINDOW_W as f64 / WINDOW_H as f64,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        lambda_effective: 0.0,
        events: Vec::new(),
    };
    let mut history = History::default();
    let mut log: Vec<LogRecord> = Vec::new();

    // Iteration 1: discovery from motion and objectness, then enforcement.
    learner.discover_proposals()?;
    let all: Vec<Proposal> = learner.proposals.iter().flatten().cloned().collect();
    let (pos, neg) = rank_and_split(&all, &learner.weights, cfg.pos_quantile, cfg.neg_quantile);
    learner.add_positive_candidates(&pos)?;
    if learner.bags.is_empty() {
        return Err(Error::NoPositives);
    }
    for k in spread(neg.len(), cfg.max_video_negatives) {
        let p = neg[k].clone();
        if learner.bags.iter().any(|b| b.candidates.iter().any(|c| same_window(&c.proposal, &p))) {
            continue;
        }
        let s = sample_of(&frames[p.frame_index], p)?;
        learner.video_negatives.push(s);
    }
    learner.sample_image_negatives()?;
    info!(
        "iteration 1: {} proposals, {} positive frames, {} negatives",
        all.len(),
        learner.bags.len(),
        learner.video_negatives.len() + learner.image_negatives.len()
    );
    learner.bag_mean_model()?;
    if learner.mine_image_negatives()? > 0 {
        learner.bag_mean_model()?;
    }
    let mut report = learner.train(0.0, true)?;
    for _ in 0..MINING_ROUNDS {
        if learner.mine_image_negatives()? == 0 {
            break;
        }
        report = learner.train(0.0, true)?;
    }
    if lambda > 0.0 {
        learner.mine()?;
        report = learner.train(lambda, true)?;
    }
    let (mut xi, mut xi_signed) = learner.error_rate()?;
    history.alpha.push(learner.weights.alpha);
    history.xi.push(xi);
    history.gamma.push(0.0);
    history.positives.push(learner.positive_count());
    log.push(LogRecord {
        iteration: 1,
        xi,
        xi_signed,
        xi_l: xi,
        xi_u: 0.0,
        gamma: 0.0,
        u: 0,
        alpha: learner.weights.alpha,
        positives: learner.positive_count(),
        negatives: learner.video_negatives.len() + learner.image_negatives.len(),
        hard_negatives: learner.hard.len(),
        objective: *report.objectives.last().unwrap_or(&f64::NAN),
        lambda_effective: learner.lambda_effective,
        proposals: all.len(),
        stability_warning: false,
        events: std::mem::take(&mut learner.events),
    });
    info!("iteration 1: xi {xi:.4}, positives {}", learner.positive_count());

    let mut iteration = 1;
    while iteration < cfg.hyper.max_iterations {
        iteration += 1;
        learner.refresh_proposals()?;
        learner.update_weights()?;
        let all: Vec<Proposal> = learner.proposals.iter().flatten().cloned().collect();
        let (pos, _) = rank_and_split(&all, &learner.weights, cfg.pos_quantile, cfg.neg_quantile);
        learner.add_positive_candidates(&pos)?;
        let (gamma, xi_l, xi_u, u) = learner.propagate_labels(iteration, lambda)?;
        if lambda > 0.0 {
            learner.mine()?;
        }
        report = learner.train(lambda, true)?;
        let prev = xi;
        (xi, xi_signed) = learner.error_rate()?;
        let warning = xi > prev + cfg.hyper.stop_epsilon;
        if warning {
            learner
                .events
                .push(format!("error rate rose from {prev:.5} to {xi:.5}"));
        }
        history.alpha.push(learner.weights.alpha);
        history.xi.push(xi);
        history.gamma.push(gamma);
        history.positives.push(learner.positive_count());
        log.push(LogRecord {
            iteration,
            xi,
            xi_signed,
            xi_l,
            xi_u,
            gamma,
            u,
            alpha: learner.weights.alpha,
            positives: learner.positive_count(),
            negatives: learner.video_negatives.len()
                + learner.image_negatives.len()
                + learner.propagated.iter().filter(|(_, g, _)| *g < 0.5).count(),
            hard_negatives: learner.hard.len(),
            objective: *report.objectives.last().unwrap_or(&f64::NAN),
            lambda_effective: learner.lambda_effective,
            proposals: all.len(),
            stability_warning: warning,
            events: std::mem::take(&mut learner.events),
        });
        info!(
            "iteration {iteration}: xi {xi:.4} (gamma {gamma:.1}, u {u}), positives {}",
            learner.positive_count()
        );
        if (xi - prev).abs() < cfg.hyper.stop_epsilon {
            break;
        }
    }
    learner.model.training_iteration = iteration;
    let state = learner.state(iteration, &history)?;
    Ok(LearnOutput {
        model: learner.model.clone(),
        state,
        log,
    })
}
