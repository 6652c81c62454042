//! Hamiltonian dynamics of higher-derivative Lagrangians that arise from a
//! first-order Lagrangian through a velocity-dependent change of variables
//! `q = α(q̄) + β(q̄)·q̄̇`.
//!
//! The pieces, roughly in the order they build on each other:
//!
//! * [`model`]: the `Lagrangian` and `Transform` traits and their validation.
//! * [`kinematics`]: the lift to `q`, Ostrogradsky momenta, jet ↔ canonical map.
//! * [`dynamics`]: the induced Lagrangian, `H`, its gradient and the flow.
//! * [`constraints`]: brackets, the constraint chain, Dirac brackets, projection.
//! * [`integrate`]: RK4 in free or projected mode, fits and trajectory I/O.
//! * [`oscillator`] and [`gravwave`]: the two worked systems.
//! * [`verify`] and [`registry`]: self-checks and built-in model lookup.
//!
//! ```
//! use ostrogradsky::constraints::{build_constraint_chain, probe_states};
//! use ostrogradsky::oscillator::{make_oscillator, OscillatorParams};
//!
//! let model = make_oscillator(&OscillatorParams::isotropic(1.0, 1.0, 2.0)).unwrap();
//! let chain = build_constraint_chain(&model, 6, &probe_states(2, 24, 1)).unwrap();
//! assert_eq!(chain.closure.level, 4);
//! ```

pub mod constraints;
pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod gravwave;
pub mod integrate;
pub mod kinematics;
pub mod model;
pub mod oscillator;
pub mod registry;
pub mod scalar;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use kinematics::{CanonicalState, Jet};
pub use model::{Lagrangian, Model, ModelSpec, Transform};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/canonical.md")]
    mod canonical {}
    #[doc = include_str!("../../../book/src/constraints.md")]
    mod constraints {}
    #[doc = include_str!("../../../book/src/integration.md")]
    mod integration {}
    #[doc = include_str!("../../../book/src/oscillator.md")]
    mod oscillator {}
    #[doc = include_str!("../../../book/src/gravwave.md")]
    mod gravwave {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
