//! Numerics for the nonlocal dispersal equation
//!
//! ```text
//! u_t = D (J * u - u) + f(x, u)
//! ```
//!
//! on a uniform grid: dispersal kernels, the linear semigroup as a Poisson
//! series of iterated convolutions, reaction terms and steady states, the
//! nonlinear semiflow, spreading speeds, and pointwise checks of the
//! compactness estimates behind the spreading-speed theory.

pub mod compactness;
pub mod error;
pub mod evolve;
pub mod gridfn;
pub mod kernel;
pub mod reaction;
pub mod semigroup;
pub mod speed;

pub use compactness::{
    contraction_diagnostic, diameter_proxy, make_ensemble, verify_linear_ingredients, CheckRecord,
    DiagnosticOptions, DiagnosticsReport, Ensemble, EnsembleSpec, IngredientOptions,
    IngredientReport,
};
pub use error::{Error, Result};
pub use evolve::{
    check_order_preserving, evolve, step_rk4, step_voc, EvolveOptions, OrderReport, Scheme,
    Trajectory,
};
pub use gridfn::{
    compact_open_distance, convolve, sup_distance_on, ConvolutionMethod, Convolver, Extension,
    Grid, GridFunction, TruncatedDistance, Window,
};
pub use kernel::{make_kernel, Kernel, Profile};
pub use reaction::{evaluate_reaction, lipschitz_estimate, steady_state, Cap, Model, Reaction};
pub use semigroup::{
    apply_linear, apply_linear_ode, plan_series, series_terms, split_compact_part, SeriesPlan,
};
pub use speed::{
    dispersion_rate, front_position, linear_speed, observed_speed, DispersionPoint, LinearSpeed,
    SpeedReport,
};
