//! Random diffusion coefficient and parameter sample streams.

mod kl;
mod samples;
mod sobol;
mod sobol_table;
mod truncnorm;

pub use kl::{
    default_kl_spec, evaluate_kappa, DEFAULT_AMPLITUDE, DEFAULT_CORRELATION_LENGTH, DEFAULT_KAPPA_FLOOR,
    DEFAULT_TERMS, modes_1d, CellField, KlFieldSpec, KlTerm, Mode1d, Parity,
};
pub use samples::{iid_samples, qmc_samples, Provenance, SampleSet};
pub use sobol::{Sobol, SOBOL_MAX_DIM};
pub use truncnorm::{
    normal_cdf, normal_quantile, truncnorm_cdf, truncnorm_inverse_cdf, TRUNCATION,
};
