//! Driven ring-up and ring-down of the resonator-magnon pair in the time
//! domain, with ideal homodyne detection and decay fitting.

mod decay;
mod simulate;

pub use decay::{decay_rate_conversion, fit_decaying_sinusoid, fit_exponential_decay};
pub use simulate::{max_stable_dt, simulate_ringdown, write_trace, read_trace, RingdownDrive, RingdownMeta, RingdownTrace};
