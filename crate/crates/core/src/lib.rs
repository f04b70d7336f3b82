//! Tracked semantic 4D point clouds built from monocular video perception
//! outputs (depth maps, camera parameters, 2D point tracks, semantic masks).
//!
//! The pipeline runs in three stages:
//!
//! 1. [`lifting`] turns 2D tracks into a sparse, time-indexed 3D control cloud
//!    and removes unreliable tracks.
//! 2. [`densification`] anchors image pixels in 3D and advects them with the
//!    displacement field of their nearest control points.
//! 3. [`semantics`] groups dense points into time-persistent instances by
//!    merging per-frame connected components with a union-find.
//!
//! [`toolkit`] exposes spatiotemporal queries over the result and
//! [`evaluation`] scores grounding predictions against annotations.

pub mod camera;
pub mod densification;
pub mod evaluation;
pub mod fixture;
pub mod knn;
pub mod lifting;
pub mod pipeline;
pub mod ply;
pub mod scene_io;
pub mod semantics;
pub mod stats;
pub mod tensor;
pub mod toolkit;
pub mod union_find;

pub use camera::{CameraModel, Intrinsics, Pose};
pub use densification::{DenseAssignment, DensePointCloud, DensifyConfig};
pub use lifting::{ControlPointCloud, LiftConfig};
pub use pipeline::PipelineConfig;
pub use toolkit::Scene4D;
pub use scene_io::{load_scene, validate_bundle, SceneBundle, SceneManifest, ValidationReport};
pub use semantics::{FrameInstance, InstanceTable, MergeConfig};
