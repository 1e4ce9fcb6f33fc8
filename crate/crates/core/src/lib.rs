//! Pure-birth Crump–Mode–Jagers branching processes, general preferential
//! attachment trees, and numeric certificates for explosion and
//! non-explosion.
//!
//! The crate is `no_std` and needs only `alloc`. IO, the command-line front
//! end and the parallel replicate harness live in the `cmj` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod certificates;
pub mod cmj;
pub mod error;
pub mod fenwick;
pub mod numeric;
pub mod patree;
pub mod purebirth;
pub mod rates;
pub mod rng;

pub use error::{Error, Result};
pub use rates::{Log2Rate, RateSequence};
pub use rng::CounterRng;
