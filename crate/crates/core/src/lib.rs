//! Exact magnetic systems on a tubular chart `S^1 x R^(m-1)` around a closed
//! loop `t -> (t, 0)`: coefficient fields, pointwise geometry, the local
//! constructions of semi-strong pairs and their rescalings, numerical
//! certification of the coordinate conditions, magnetic geodesic flow, and the
//! strict Mane critical value together with the measure-mixing audit.

pub mod exec;
pub mod fieldexpr;
pub mod catalog;
pub mod chartgeom;
pub mod sampling;
pub mod verifier;
pub mod constructor;
pub mod flow;
pub mod mane;
pub mod document;
