//! Self-learning scene-specific object detector.
//!
//! A latent SVM over HOG windows is bootstrapped from motion and objectness
//! proposals in an unlabeled video plus a pool of negative images, then
//! refined by hard-negative enforcement and graph label propagation.

pub mod config;
pub mod detect;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod integral;
pub mod motion;
pub mod pipeline;
pub mod plm;
pub mod propagation;
pub mod proposals;
pub mod ranking;
pub mod scene;
pub mod types;

pub use error::{Error, Result};
pub use geometry::{iou, BBox};
pub use plm::LatentModel;
pub use types::{Hyperparams, LabeledSample, Proposal, ProposalSource, Provenance};
