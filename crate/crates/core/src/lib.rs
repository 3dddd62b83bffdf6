//! Pseudo-stereo view synthesis at desk scale.
//!
//! The pipeline turns a single left-view image into a novel-view renderer in
//! three stages:
//!
//! 1. [`stereosynth`] — synthesize a pseudo right view by learned horizontal
//!    warping, then detect and inpaint unreliable regions (self-rectification
//!    via network pruning and bidirectional matching).
//! 2. [`mpi`] — lift the (left, pseudo-right) pair into a plane-sweep volume,
//!    estimate a multiplane image, and render novel views by per-plane
//!    homography warping and back-to-front alpha compositing.
//! 3. [`scenegen`] — a procedural stereo scene generator with closed-form
//!    ground truth (disparity, occlusion, novel views) that serves as the
//!    training corpus and as the oracle for every numeric check.
//!
//! [`imagecore`] holds the shared pixel containers, sampling, metrics, and
//! file I/O; [`tinynet`] is the minimal reverse-mode autodiff engine that the
//! flow networks are built on.

pub mod imagecore;
pub mod mpi;
pub mod scenegen;
pub mod stereosynth;
pub mod tinynet;

pub use imagecore::{BinaryMask, ConfidenceMap, FlowField, Image};
