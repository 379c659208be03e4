//! Numerical workbench for non-symmetric affine connection spaces and
//! equitorsion second-type almost geodesic mappings.
//!
//! Fields are built from a small expression language ([`expr`]) so every
//! derived object keeps exact partial derivatives; finite differences are
//! available as an independent check.

pub mod scalar;
pub mod expr;
pub mod tensor;
pub mod space;
pub mod curvature;
pub mod agmap;
pub mod invariants;
pub mod audit;
pub mod paths;
pub mod cli;

pub use scalar::Real;

pub type Expr = expr::ExprAst<f64>;
pub type Tensor = tensor::TensorField<f64>;
pub type Connection = space::ConnectionField<f64>;
pub type Instance = agmap::MappingInstance<f64>;
pub type Array = tensor::Dense<f64>;
