//! Jointly orthogonal polynomial systems for several simultaneous inner products.
//!
//! Given `k` weighted, disjoint intervals, a jointly orthogonal system of degree
//! `n` is the (unique up to scale and order) family of `C(n+k-1, k-1)` degree-`n`
//! polynomials whose `(k-1)`-fold products are orthogonal for every deleted
//! determinantal form. The crate computes such systems as solutions of a
//! symmetric rectangular multiparameter eigenvalue problem and cross-checks them
//! against the rank-one Gram–Schmidt equations and the classical differential
//! operators (Heun, Lamé, Ince, sextic, Heine–Stieltjes).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod cli;
pub mod error;
pub mod forms;
pub mod gs;
pub mod measure;
pub mod mep;
pub mod poly;
pub mod quadrature;

pub use error::{JopError, Result};
pub use poly::Polynomial;
