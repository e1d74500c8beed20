//! Thermodynamic formalism for one-step matrix cocycles over the full shift.
//!
//! The crate computes finite-depth pressure of the generalized singular value
//! function `ψ^q(A) = σ_1(A)^{q_1} ⋯ σ_d(A)^{q_d}`, Lyapunov exponent vectors
//! of Bernoulli and Markov measures, estimates of the exponent range and the
//! Legendre spectrum `S(α) = inf_q {P(q) − ⟨q, α⟩}`. It also checks the
//! typicality (pinching and twisting) and domination hypotheses under which
//! that spectrum describes the level sets of Lyapunov exponents.
//!
//! All logarithms are natural.

pub mod error;
pub mod geometry;
pub mod io;
pub mod matrix;
pub mod measures;
pub mod pressure;
pub mod shift;
pub mod spectrum;
pub mod typicality;

pub use error::{Error, Result};
pub use matrix::{
    exterior_power, log_psi, log_psi_via_exterior_powers, scaled_multiply, singular_values,
    Matrix, QVector, ScaledMatrix, SingularSpectrum,
};
pub use measures::{
    bowen_check, entropy, lyapunov_vector, variational_crosscheck, BernoulliMeasure,
    CrosscheckResult, ExponentVector, Family, MarkovMeasure, Measure,
};
pub use pressure::{
    pressure, pressure_bracket, pressure_grid, LogSpectrumCloud, PressureEstimate,
};
pub use shift::{enumerate_products, fold_products, word_product, EnumConfig, OneStepCocycle, Word};
pub use io::{load_cocycle, parse_cocycle_json, parse_real_list, parse_usize_list};
pub use spectrum::{
    estimate_omega, spectrum_curve, spectrum_point, OmegaEstimate, SpectrumOptions, SpectrumPoint,
    SpectrumSolver, SpectrumStatus,
};
pub use typicality::{
    check_dominated, check_one_typical, check_typical, holonomy_loop, search_homoclinic,
    Condition, DominationMode, DominationReport, DominationVerdict, HomoclinicSpec, SearchOutcome,
    TypicalityReport, TypicalityVerdict,
};
