//! Virtual prototyping toolkit for tangible user interfaces.
//!
//! A deterministic rigid-body world ([`physics`]) populated from declarative
//! scene files ([`scene`]) carries virtual sensors and displays ([`devices`]).
//! Everything talks over one in-process bus ([`msgbus`]) that can record and
//! replay traffic, so application nodes ([`apps`]) cannot tell whether a
//! device is simulated or replayed. [`runtime`] ties the pieces together.

pub mod apps;
pub mod devices;
pub mod msgbus;
pub mod physics;
pub mod runtime;
pub mod scene;
