//! Lateral localisation of a road vehicle against a prior map of road
//! boundaries seen in bird's-eye-view LiDAR grids.

pub mod bev;
pub mod boundary;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod geometry;
pub mod icp;
pub mod map;
pub mod pipeline;
pub mod seeds;
pub mod world;

pub use bev::{BevGrid, CellLabel};
pub use boundary::{BoundaryCloud, BoundaryObservation, BoundarySource, DetectionMode, OracleSource};
pub use error::{Error, Result};
pub use geometry::{Point2, Pose2, Transform2};
pub use icp::{icp_align, IcpConfig, IcpResult, KdTree};
pub use map::{build_map, HintProvider, MapStore, NearestPoseHints, TableHints};
pub use pipeline::{localise_frame, run_sequence, FrameEstimate, FrameStatus};
pub use world::{generate_world, sample_trajectory, Trajectory, WorldModel, WorldParams};
