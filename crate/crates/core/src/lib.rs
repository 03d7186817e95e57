//! Statevector simulation of biorthogonal readout for non-Hermitian
//! Hamiltonians: SWAP-test generalized expectation values, preparation of
//! left and right eigenstates, dilation circuits, and spin-texture winding
//! numbers of the nonreciprocal SSH model.
//!
//! The guide in `book/` walks through each layer.

pub mod dilation;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod genexp;
pub mod linalg;
pub mod readout;
pub mod ssh;
pub mod statevector;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
pub use statevector::StateVector;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/genexp.md")]
    mod genexp {}
    #[doc = include_str!("../../../book/src/preparation.md")]
    mod preparation {}
    #[doc = include_str!("../../../book/src/dilation.md")]
    mod dilation {}
    #[doc = include_str!("../../../book/src/ssh.md")]
    mod ssh {}
    #[doc = include_str!("../../../book/src/winding.md")]
    mod winding {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
