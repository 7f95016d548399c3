//! Numerical tolerances and tunable constants shared across modules.

/// Tolerances used by validation, reweighting and feasibility decisions.
#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub normalization: f64,
    pub consistency: f64,
    pub psd: f64,
    pub domain_identity: f64,
    pub reweight: f64,
    pub assignment_norm: f64,
    /// Relative objective change allowed when repairing a solver iterate.
    pub extraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            normalization: 1e-7,
            consistency: 1e-7,
            psd: 1e-6,
            domain_identity: 1e-6,
            reweight: 1e-9,
            assignment_norm: 1e-9,
            extraction: 1e-4,
        }
    }
}

/// Target constants for the rounding gates. None of these are claimed as sharp.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundingConstants {
    /// Multiplier in the `c * sqrt(k/n) * SOS` targets.
    pub sqrt_ratio: f64,
    /// Constant in the Khot-Naor target `c * sqrt(ln n / n) * OPT`.
    pub khot_naor: f64,
    /// Krivine rounding guarantee `2 ln(1+sqrt 2) / pi`.
    pub krivine: f64,
}

impl Default for RoundingConstants {
    fn default() -> Self {
        Self {
            sqrt_ratio: 1.0 / 8.0,
            khot_naor: 0.1,
            krivine: 2.0 * (1.0 + 2f64.sqrt()).ln() / std::f64::consts::PI,
        }
    }
}

/// Default cap on moment-basis sizes.
pub const DEFAULT_BASIS_CAP: usize = 1500;
