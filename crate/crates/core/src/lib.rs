//! Numerical Randers geometry for deterministic dynamics.
//!
//! A Randers norm `F(x, y) = sqrt(a_ij(x) y^i y^j) + beta_i(x) y^i` is given by a
//! Riemannian metric `a` and a one-form `beta` with `|beta| < 1` in the inverse metric.
//! The crate computes its fundamental and Cartan tensors, the Chern and Cartan
//! connections, indicatrix averages, the flow of `H = 2 beta . p`, and a spectral toy
//! model of the quantized Hamiltonian.
//!
//! ```
//! use randers::{finsler_norm, RandersField};
//!
//! let field = RandersField::constant(&[0.5, 0.0]);
//! assert_eq!(finsler_norm(&field, &[0.0, 0.0], &[1.0, 0.0]).unwrap(), 1.5);
//! assert_eq!(finsler_norm(&field, &[0.0, 0.0], &[-1.0, 0.0]).unwrap(), 0.5);
//! ```

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod averaging;
pub mod connections;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod field;
pub mod finsler;
pub mod sampling;
pub mod spectral;
pub mod tensor;

pub use averaging::{average_hamiltonian, average_metric, AveragingScheme, IntegrationDomain};
pub use connections::{cartan_connection, chern_connection, ConnectionBundle};
pub use dynamics::{bounds_check, classical_hamiltonian, flow, Trajectory};
pub use error::{Error, Result};
pub use field::{Domain, RandersField, ScalarField, Table};
pub use finsler::{
    cartan_tensor, finsler_norm, fundamental_tensor, legendre_dual, validate_randers, TensorMode, ValidationReport,
};
pub use tensor::Tensor3;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/fields.md")]
    struct Fields;
    #[doc = include_str!("../../../book/src/geometry.md")]
    struct Geometry;
    #[doc = include_str!("../../../book/src/connections.md")]
    struct Connections;
    #[doc = include_str!("../../../book/src/averaging.md")]
    struct Averaging;
    #[doc = include_str!("../../../book/src/dynamics.md")]
    struct Dynamics;
    #[doc = include_str!("../../../book/src/spectral.md")]
    struct Spectral;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
