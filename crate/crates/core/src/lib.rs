//! Estimation of the sample Fréchet mean of a set of same-size simple graphs.
//!
//! The crate bundles exact baselines (closed-form thresholding, the sample
//! medoid, exhaustive search on tiny graphs), a from-scratch miniature U-Net
//! that maps the sample mean adjacency matrix to a mean graph, and the
//! dataset generation, training and evaluation pipeline around it.
//!
//! ```
//! use fgl::graph::{sample_mean, threshold_half, Graph};
//!
//! let sample = vec![Graph::complete(3), Graph::complete(3), Graph::empty(3)];
//! let naive = threshold_half(&sample_mean(&sample).unwrap());
//! assert_eq!(naive, Graph::complete(3));
//! ```

pub mod config;
pub mod ensembles;
pub mod error;
pub mod frechet;
pub mod graph;
pub mod minicnn;
pub mod oracle;
pub mod pipeline;
pub mod spectra;

pub use error::{Error, Result};
pub use graph::{Graph, WeightedMatrix};
pub use spectra::Metric;
