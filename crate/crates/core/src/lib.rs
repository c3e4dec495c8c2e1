//! Radially symmetric laboratory for the quasilinear chemotaxis system with
//! indirect signal production
//!
//! ```text
//! u_t = div(D(u) grad u - S(u) grad v)
//! v_t = Δv - v + w
//! w_t = Δw - w + u
//! ```
//!
//! on a ball with homogeneous Neumann data.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod identities;
pub mod initdata;
pub mod interp;
pub mod kinetics;
pub mod plots;
pub mod quad;
pub mod runner;
pub mod simulator;
pub mod stationary;
pub mod sweep;
pub mod tridiag;
pub mod verify;

pub use error::{Error, Result};
pub use grid::RadialGrid;
pub use kinetics::Kinetics;
pub use simulator::State;
