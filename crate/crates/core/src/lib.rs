//! Simulation and analysis of blind quantum computation.
//!
//! The crate is organised bottom-up:
//!
//! - [`qsim`]: a dense statevector engine restricted to what the protocols need
//!   (Bell pairs, controlled-Z, Bell-basis and equatorial measurements) plus the
//!   eight-element angle algebra every protocol angle lives in.
//! - [`mbqc`]: graph states, measurement patterns with adaptive corrections and a
//!   direct (non-blind) executor that serves as the correctness oracle.
//! - [`parties`]: the client, servers and trusted center as parties exchanging
//!   messages over policy-checked channels, implementing the single-server BFK
//!   protocol, the double- and triple-server protocols, and the entanglement
//!   swapping single-server protocol with its classical-client variant.
//! - [`analysis`]: homogeneity, blindness-by-enumeration, decoy detection and
//!   forwarding statistics.
//! - [`cli`]: the command line front end used by the `blindqc` binary.
//!
//! Qubit 0 is always the least-significant bit of a basis index.

pub mod analysis;
pub mod cli;
pub mod enumerate;
pub mod mbqc;
pub mod parties;
pub mod qsim;
pub mod sampling;
pub mod seed;
pub mod stats;

pub use qsim::{Angle, BellLabel, Statevector};
