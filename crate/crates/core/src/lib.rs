//! Backpropagation through structured argmax layers.
//!
//! A structured layer maps part scores `s` to a discrete structure
//! `ẑ = argmax_{z ∈ Z} zᵀs` (a dependency tree or a semantic graph). Its
//! Jacobian is zero almost everywhere, so training a network through it needs
//! a gradient proxy. This crate provides three of them behind one interface
//! ([`proxy`]):
//!
//! * straight-through estimation, which passes `∇ẑL` through unchanged;
//! * the projected proxy, which steps from `ẑ` against `∇ẑL`, projects the
//!   result back onto the relaxed polytope and uses the difference;
//! * structured attention, which replaces the argmax with marginal inference.
//!
//! Supporting modules supply exact decoders ([`decode`]), marginal inference
//! ([`marginals`]), Euclidean projections onto the relaxed polytopes
//! ([`project`]), a small differentiable scaffold and joint pipeline trainer
//! ([`learn`]), and synthetic experiments plus analysis ([`bench`]).

pub mod bench;
pub mod decode;
mod error;
pub mod learn;
pub mod marginals;
pub mod project;
pub mod proxy;
pub mod structures;

pub use error::{Error, Result};
