//! Finite-support test distributions, exact and Monte Carlo expectations,
//! instance generators and inequality checks.

mod conditions;
mod generate;
mod monte_carlo;
mod spec;
mod verify;

pub use conditions::{check_conditions, ConstraintReport, CONDITION_SLACK};
pub use generate::{extremal_spec, random_valid_spec, random_zero_mean_spec, ExtremalSpec, MAX_RANDOM_VARS};
pub use monte_carlo::{monte_carlo_expectation, monte_carlo_expectation_workers, McEstimate, MIN_SAMPLES};
pub use spec::{
    exact_expectation, exact_expectation_truncated, Atom, AtomicVariable, DistributionSpec, SumLaw, PROB_SUM_TOL,
    SUPPORT_LIMIT,
};
pub use verify::{
    check_spec, mean_plus_via_majorant, soundness_sweep, sweep_seeds, verify_inequality, SweepCheck, SweepConfig,
    SweepReport, Tally, Target, Verdict, Violation, DEFAULT_THRESHOLDS, MARGIN_TOL,
};
