//! A from-scratch miniature U-Net with hand-derived gradients, binary
//! cross-entropy, Adam and a binary checkpoint format.
//!
//! Layout of the network for an `s x s x 1` input with base width `b`:
//!
//! ```text
//! s   : conv3x3+relu (1->b), conv3x3+relu (b->b) -------------------- skip1
//! s/2 : pool, conv3x3+relu (b->2b), conv3x3+relu (2b->2b) ---- skip2   |
//! s/4 : pool, conv3x3+relu (2b->4b), conv3x3+relu (4b->4b)       |     |
//! s/2 : upsample, concat(., skip2), conv3x3+relu (6b->2b), (2b->2b)    |
//! s   : upsample, concat(., skip1), conv3x3+relu (3b->b), (b->b)
//! s   : conv1x1+sigmoid (b->1)
//! ```
//!
//! Production models use `s = 28` and `b = 16`; everything is generic over
//! the float type so gradients can be checked in 64-bit arithmetic.

mod adam;
mod checkpoint;
mod loss;
mod model;
mod tensor;

use std::fmt::Debug;
use std::iter::Sum;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use loss::{bce_loss, BCE_CLAMP};
pub use model::{
    train_step, unet_layers, ForwardCache, LayerDesc, LayerKind, ModelParams, DEFAULT_BASE_CHANNELS,
    PIPELINE_SIDE,
};
pub use tensor::{concat_channels, conv1x1_sigmoid, conv3x3_backward, conv3x3_same, maxpool2x2, relu, upsample2x, Tensor3};

/// Floating-point element type of tensors and parameters.
pub trait Scalar: num_traits::Float + Default + Debug + Send + Sync + Sum + 'static {
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
