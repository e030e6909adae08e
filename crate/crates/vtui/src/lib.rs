//! `vtui` command line and WebSocket gateway on top of [`vtui_core`].

pub mod cli;
pub mod gateway;
pub mod protocol;

pub use gateway::{Gateway, Hub, Tap};
