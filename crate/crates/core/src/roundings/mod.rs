//! Rounding primitives and the sampling-based roundings of decoupled
//! pseudo-distributions.

mod bilinear;
pub(crate) use bilinear::sphere_bilinear_from_gram;
mod cubic;
mod scalar_fix;

pub use bilinear::{
    charikar_wirth_from_moments, charikar_wirth_sample, grothendieck_round, krivine_c, sphere_bilinear_round,
    sphere_eigen_round, BilinearRounding, CwOutcome, KrivineSampler, SphereRounding,
};
pub use cubic::{
    default_trials, round_cubic_deg6, round_cubic_deg6k, round_cubic_sphere, round_decoupled, round_high_degree,
    RoundingOutcome, TrialRecord, GROTHENDIECK_TRIALS,
};
pub use scalar_fix::{required_degree, scalar_fix, FixBranch, ScalarFix};
