//! Topological features for grayscale scan classification.
//!
//! Each image goes through two filtrations:
//!
//! * a Vietoris–Rips filtration over the *feature point cloud*: centroids of the
//!   8-connected components of intensity-band preimages, living in
//!   `(row, col, intensity)` space ([`imaging`], [`filtration`]);
//! * a lower-star filtration on the 8-connected pixel graph.
//!
//! Their persistence diagrams ([`persistence`]) are smoothed into densities,
//! mapped onto the unit Hilbert sphere by the square-root transform, and reduced
//! with principal geodesic analysis ([`riemannian`]). The concatenated
//! coordinates feed a PCA + RBF-SVM classifier evaluated by stratified k-fold
//! cross-validation ([`classifier`]). [`pipeline`] ties the stages together with
//! a content-addressed cache.

pub mod classifier;
pub mod envelope;
pub mod error;
pub mod filtration;
pub mod imaging;
pub mod linalg;
pub mod persistence;
pub mod pipeline;
pub mod riemannian;
pub mod synthetic;

pub use error::{Error, Result};
