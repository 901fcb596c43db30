//! Planar rod toolkit: injective polyline approximation, convex-envelope
//! relaxation with laminates, thin-strip extrusion and interpenetration
//! diagnostics.

pub mod curve;
pub mod energy;
pub mod error;
pub mod exact;
pub mod extrusion;
pub mod fixtures;
pub mod gamma_lab;
pub mod geometry;
pub mod injectify;
pub mod quad;
pub mod relaxation;
pub mod witness;

pub use curve::{c0_distance, constant_speed_reparam, sobolev_distance, PolylineCurve, Vec2};
pub use error::{Result, RodError};
