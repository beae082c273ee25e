//! Reconstruction drivers: PICS with known coils and NLINV with jointly
//! estimated coils.

mod calib;
pub mod linalg;
mod nlinv;
mod pics;

pub use calib::estimate_coils_calib;
pub use nlinv::{nlinv, NlinvConfig, NlinvOutput, NlinvStep};
pub use pics::{
    bound_level, lipschitz, pics_cg, pics_fista, zero_filled, PicsConfig, DEFAULT_PICS_ITERS,
};
