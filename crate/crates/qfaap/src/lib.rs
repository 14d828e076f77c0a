//! Safe-grasping pipeline built around a dense grasp-quality network: a
//! quality patch optimized to attract high scores, a masked projected-gradient
//! refinement that molds the patch to an arbitrary hand mask, and a selection
//! policy that steers the grasp away from the hand and whatever it touches.

pub mod aqp;
pub mod data;
pub mod error;
pub mod grasp;
pub mod imgio;
pub mod model;
pub mod nn;
pub mod policy;
pub mod pqgd;
pub mod resize;
pub mod types;
pub mod viz;

pub use error::{Error, Result};
pub use types::{Frame, HandMask};
