//! The learnable two-layer transport model: potential mapping, forward
//! prediction, training and layer-wise decomposition.

mod fit;
mod flow;
mod params;
mod predict;

pub use fit::{
    cross_validate, fit, subject_folds, FitOptions, FitResult, FoldResult, Layout, Objective,
    Optimizer, ParamGroup,
};
pub use params::{init_latent, phi, phi_inverse, Ablation, GainSource, TransportParameters};
pub use predict::{
    closed_loop_generator, decompose, evaluate, forward_predict, loss, predict_all,
    ErrorSummary, PredictionOutput, PropagationDecomposition, Sample, TrainingSet,
};
