//! Sparse recovery with Frank-Wolfe on the l1 ball.
//!
//! [`dictionary`] measures how well-conditioned a dictionary is (coherence,
//! Babel function, ERC); [`synth`] draws seeded Gaussian dictionaries and
//! m-sparse signals; [`pursuit`] runs Frank-Wolfe, MP and OMP with full
//! per-iteration traces; [`theory`] checks a trace against the recovery and
//! rate bounds that the dictionary metrics imply.

pub mod dictionary;
pub mod error;
pub mod io;
pub mod pursuit;
pub mod rng;
pub mod synth;
pub mod theory;

pub use dictionary::{Dictionary, DictionaryMetrics, Support};
pub use error::{Error, Result};
pub use pursuit::{
    fw_solve, mp_solve, omp_solve, Algorithm, FwConfig, GreedyConfig, IterationRecord, SolverTrace,
    StopReason,
};
pub use synth::{gen_dictionary, gen_instance, SparseInstance, SynthConfig};
pub use theory::{validate_trace, TheoryReport};
