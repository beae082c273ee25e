//! Sampling masks, synthetic objects and coils, and the multi-coil Fourier
//! forward model with its adjoint and Gauss-Newton linearization.

mod coils;
mod mask;
mod operator;
mod phantom;
mod sobolev;

pub use coils::{in_central_band, lowpass_random_field, simulate_coils, CoilSet};
pub use mask::{
    make_mask_1d, make_mask_2d, make_mask_poisson, make_mask_poisson_with, PoissonOptions,
    SamplingMask,
};
pub use operator::{
    adjoint, adjoint_model, forward, forward_model, jacobian_adjoint, jacobian_apply,
};
pub use phantom::{phantom, smooth_phase, PhantomKind, PhaseModel};
pub use sobolev::{sobolev_weight, SobolevWeight, DEFAULT_SOBOLEV_A, DEFAULT_SOBOLEV_L};
