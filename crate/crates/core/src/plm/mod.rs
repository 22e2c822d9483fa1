//! Latent SVM with a spatial object-enforcement term, trained by the
//! concave-convex procedure.

mod cccp;
mod hard_negatives;
mod loss;
mod model;
mod solver;

pub use cccp::{cccp_train, full_objective, CccpParams, CccpReport};
pub use hard_negatives::{
    mine_hard_negatives, part_windows, select_hard_negatives, HardNegativeSet, HARD_NEGATIVE_IOU_MAX, PART_SCALE,
};
pub use loss::{dc_loss, infer_latent, objective_fl, spatial_reg_fs, LatentChoice, TrainingInstance};
pub use model::{LatentModel, BIAS_FEATURE};
pub use solver::{solve_inner, HingeGroup, InnerProblem, InnerSolution, SolverParams, SolverReport};
