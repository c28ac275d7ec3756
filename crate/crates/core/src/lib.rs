//! Semi-implicit BDF2 projection solver for the Landau-Lifshitz equation
//!
//! ```text
//! m_t = -m × Δm - α m × (m × Δm) + f,   ∂m/∂ν = 0 on the boundary,
//! ```
//!
//! on 1-D and 3-D cell-centered grids, together with manufactured
//! solutions and the convergence and stability studies built on them.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the type
//! aliases below fix it to `f64`, which is what the studies use.

// `!(x > 0)` is how NaN gets rejected; band and block kernels index by hand.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod harness;
pub mod linear_system;
pub mod mesh;
pub mod mms;
pub mod ops;
pub mod scalar;
pub mod scheme;
pub mod vec3;

pub use error::{Error, Result};
pub use linear_system::{SolverConfig, SolverMethod};
pub use mesh::restrict_factor3;
pub use mms::ManufacturedSolution;
pub use scalar::Real;
pub use scheme::{bdf2_step, init, run, Control, ForcingTime, StartHistory};

pub type Grid = mesh::GridSpec<f64>;
pub type Field = mesh::VectorField<f64>;
pub type Faces = ops::FaceField<f64>;
pub type Params = scheme::SchemeParams<f64>;
pub type State = scheme::SchemeState<f64>;
pub type System = linear_system::BlockSparseSystem<f64>;
