pub mod analysis;
pub mod coeffs;
pub mod dense;
pub mod error;
pub mod field;
pub mod krylov;
pub mod operators;
pub mod preconditioners;
pub mod problems;
pub mod scalar;
pub mod scheme;
pub mod transforms;

pub use error::{Error, Result};
pub use field::Field;
pub use scalar::Scalar;

pub type Field64 = Field<f64>;
pub type GridSpec64 = operators::GridSpec<f64>;
pub type FractionalOrder64 = coeffs::FractionalOrder<f64>;
pub type CoefficientTable64 = coeffs::CoefficientTable<f64>;
pub type Diffusivity64 = operators::Diffusivity<f64>;
pub type ToeplitzOperator64 = operators::ToeplitzOperator<f64>;
pub type CnFvOperator64 = operators::CnFvOperator<f64>;
pub type TauPreconditioner64 = preconditioners::TauPreconditioner<f64>;
pub type CirculantPreconditioner64 = preconditioners::CirculantPreconditioner<f64>;
pub type DenseMatrix64 = dense::DenseMatrix<f64>;
pub type KrylovConfig64 = krylov::KrylovConfig<f64>;
pub type ProblemSpec64 = problems::ProblemSpec<f64>;
pub type SchemeOptions64 = scheme::SchemeOptions<f64>;
pub type SolveReport64 = scheme::SolveReport<f64>;
pub type BoundReport64 = analysis::BoundReport<f64>;
