//! Optimal transmission of a spatial reference frame through a quantum
//! channel.
//!
//! Three covariant protocols are implemented, each reducing the average
//! fidelity to a small symmetric tridiagonal eigenproblem over irrep
//! weights:
//!
//! * **single** — one system carrying each spin `j = 0..J` once (a hydrogen
//!   atom, or `N = 2J` spins ignoring multiplicities);
//! * **multiplicity** — `N` spins (N odd) with the equivalent spin-`j`
//!   representations entangled against the magnetic number;
//! * **entangled** — sender and receiver share a maximally entangled state
//!   (dense covariant coding), with an exact closed-form optimum.
//!
//! Every headline number can be recomputed three independent ways: the
//! eigensolver ([`protocols`]), exact group quadrature and Monte Carlo
//! ([`verify`]), plus closed forms and characteristic-polynomial roots
//! ([`spectra`]) where available.

pub mod protocols;
pub mod so3;
pub mod spectra;
pub mod su2;
pub mod verify;

pub use protocols::{Protocol, ProtocolResult};
pub use so3::EulerAngles;
pub use spectra::SymTridiag;
pub use su2::Spin;
pub use verify::{So3Quadrature, SimulationReport};
