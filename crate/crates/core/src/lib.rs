//! Evaluation and black-box explanation tooling for video explanation masks.
//!
//! * [`maskio`]: mask containers, file formats and the post-processing pipeline
//! * [`metrics`]: variance, inter-frame and intra-frame consistency, centredness
//! * [`segment`]: 2D superpixels and 3D supervoxels, plus superpixel muting
//! * [`shapkernel`]: Kernel SHAP over segments with a brute-force Shapley oracle
//! * [`predictor`]: the black-box scoring boundary
//! * [`stats`]: vote aggregation, exact sign test, ROC AUC and balanced accuracy
//! * [`selection`]: face-box stability filter for building a video pool

pub mod maskio;
pub mod metrics;
pub mod predictor;
pub mod selection;
pub mod stats;
pub mod segment;
pub mod shapkernel;
