//! Periodic truncation of the line and the Fourier-multiplier operator toolbox.

mod field;
mod grid;
mod operators;
mod smoothing;

pub use field::{FieldState, SpectralProfile};
pub use field::fmt_f64;
pub use grid::{Grid, GridSpec};
pub use operators::*;
pub(crate) use operators::g_factor;
pub use smoothing::{gmres, hilbert_transform, smoothing_s, smoothing_s_inverse, GmresReport};
