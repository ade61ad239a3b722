//! Trainable time warping: aligns a set of equal-length series at once by
//! learning smooth, monotone warps through a windowed-sinc reader, then
//! averages the synchronized series into a centroid.
//!
//! ```
//! use ttw::{average_ttw, LabeledDataset, TrainConfig};
//!
//! let rows: Vec<Vec<f64>> = (0..4)
//!     .map(|n| (0..40).map(|t| ((t as f64 + n as f64) * 0.2).sin()).collect())
//!     .collect();
//! let data = LabeledDataset::unlabeled(rows).unwrap();
//! let (centroid, result) = average_ttw(&data, &TrainConfig::default()).unwrap();
//! assert_eq!(centroid.len(), 40);
//! assert!(result.loss_trace.last().unwrap() <= &result.loss_trace[0]);
//! ```

pub mod cli;
pub mod dtw;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod series;
pub mod sinc;
pub mod trainer;
pub mod warp;

pub use dtw::{dtw_brute_force, dtw_cost, dtw_distance, dtw_sum, DtwResult};
pub use error::{Result, TtwError};
pub use io::{load_result, load_ucr, parse_ucr, save_result, LoadOptions, Manifest, OutputFormat};
pub use pipeline::{
    average_avg, average_ttw, averaging_experiment, classify, fit_nearest_centroid,
    stratified_halves, tune_k, AveragingReport, ClassificationReport, ExperimentSpec, KScore,
    KSelection, KTuning, Method, NearestCentroidModel,
};
pub use series::{
    validate_dataset, within_group_loss, AlignmentResult, LabeledDataset, Matrix, TimeSeries,
    WarpCoefficients, WarpingFunctions,
};
pub use sinc::{sinc, sinc_derivative, warp_signal, warp_signal_derivative, SincWindow};
pub use trainer::{
    adam_update, backward, forward, train, train_with_progress, AdamState, Aligner, ForwardPass,
    GradientMode, TrainConfig, Trainer,
};
pub use warp::{coefficients_to_warps, project_monotone, warp_jacobian, DstBasis};
