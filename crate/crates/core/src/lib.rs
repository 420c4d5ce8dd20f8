//! Order-1 and order-2 digital sequences over F2, exact Haar coefficients of
//! their discrepancy function, and the norms built on top of them.

pub mod dyadic;
pub mod error;
pub mod f2linalg;
pub mod genmat;
pub mod haar;
pub mod netquality;
pub mod norms;
pub mod points;
pub mod studies;

pub use dyadic::{DyadicRational, Scalar};
pub use error::{Error, Result};
pub use f2linalg::{BitMatrix, BitVec};
pub use genmat::{F2Poly, GeneratingMatrixSet, MatrixKind};
pub use haar::{HaarIndex, HaarTable};
pub use netquality::{FairIntervalAudit, TValueReport};
pub use norms::{Arithmetic, NormKind, NormReport};
pub use points::DyadicPointSet;
pub use studies::{BoundCase, Regime, ScalingRow, StudyNorm};
