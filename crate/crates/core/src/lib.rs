//! Analytic model of a two-node bacterial molecular communication link.
//!
//! Two chambers of bacteria talk over a diffusion channel. The transmitter
//! population turns a stimulus concentration into a signal emission rate,
//! the signal spreads by free 3-D diffusion, and the receiver population's
//! activated-receptor count is the channel output. The crate covers the
//! noise chain and what it implies for link capacity and signaling speed.
//!
//! The crate is `no_std` with `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod capacity;
pub mod channel;
pub mod error;
pub mod kinetics;
pub mod modulation;
pub mod receiver;
pub mod special;
pub mod timing;
pub mod transmitter;

pub use error::{Error, Result};
pub use kinetics::KineticParams;
pub use special::Tolerance;
pub use transmitter::NodeParams;
pub use channel::ChannelParams;
