//! Adaptive state observers that learn a matched uncertainty in a
//! vector-valued reproducing kernel Hilbert space.
//!
//! - [`kernel`]: kernels, center sets, Grammian factorization, power function.
//! - [`linalg`]: Lyapunov and Lur'e solvers, spectral helpers.
//! - [`observer`]: observer design, adaptive law, dead-zone radii.
//! - [`dynamics`]: plants, rigid bodies, references, controllers, disturbances.
//! - [`sim`]: fixed-step co-integration and run metrics.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod observer;
pub mod sim;
pub mod special;

pub use nalgebra;

pub use error::{Error, Result};
pub use kernel::{CenterSet, JitterPolicy, KernelFamily, KernelModel, ProbeBox, RkhsElement};
pub use observer::{AdaptationGate, AdaptiveObserverState, DeadZone, ObserverDesign, ObserverParams};
pub use sim::{integrate, run_summary, RunSummary, Scenario, SimConfig, SimOutput, SimRecord};
