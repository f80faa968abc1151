//! Contribution analysis and adaptive pruning for 3D Gaussian splat scenes.
//!
//! The pipeline renders a cloud from a set of viewpoints, measures how much
//! each primitive contributes to the composited images, clusters primitives in
//! a standardized position/opacity/contribution feature space and removes
//! clusters (and unclustered points) whose contribution falls well below the
//! scene average. Primitives that only show up from unusual viewpoints, such
//! as embedded watermark structures, are the ones that get removed.

pub mod camera;
pub mod cluster;
pub mod error;
pub mod imageio;
pub mod metrics;
pub mod pipeline;
pub mod ply;
pub mod purify;
pub mod render;
pub mod sh;
pub mod splat;
pub mod synth;

pub use camera::{CameraView, Orbit, ViewSet};
pub use cluster::{ClusterAssignment, ClusterParams, FeatureMatrix};
pub use error::{Error, Result};
pub use imageio::ImageRgb;
pub use purify::{PruneThresholds, PurificationReport};
pub use render::{ContributionReport, RenderOutput, RenderSettings};
pub use splat::{GaussianPrimitive, SplatCloud};
