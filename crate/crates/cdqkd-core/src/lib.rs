//! Photon-number-resolved simulation and analytics for BB84 with weak
//! coherent pulses and coincidence-detection (CD) monitoring.
//!
//! A weak coherent pulse carries a Poisson-distributed number of photons, so
//! some pulses are multiphoton. Instead of treating those pulses purely as a
//! security liability, the CD protocol monitors the 2-fold and 3-fold
//! coincidence clicks they produce behind Bob's passive basis selector and
//! credits a fraction of them to the secret key. This crate provides:
//!
//! * [`stats`] — Poisson photon statistics, binary entropy, exact
//!   beam-splitter splitting tables and the CD contribution coefficients.
//! * [`channel`] — analytic per-photon-number yields, gains and error rates
//!   for a lossy channel with dark counts, plus a distance/attenuation model.
//! * [`keyrates`] — the ideal, GLLP, decoy-state and coincidence-detection
//!   secret-key-rate formulas and a mean-photon-number optimizer.
//! * [`sim`] — a deterministic pulse-level Monte Carlo of the full protocol:
//!   source, optional eavesdropper, channel, four-detector receiver, sifting
//!   and coincidence tallies.
//! * [`monitor`] — exact enumeration of expected coincidence counts and the
//!   abort rule that compares them against observed tallies.
//! * [`calibration`] — bundled parameter sets for the characterized
//!   free-space reference channel.

pub mod calibration;
pub mod channel;
pub mod keyrates;
pub mod monitor;
pub mod sim;
pub mod stats;

pub use channel::{gain_profile, ChannelParams, GainErrorProfile, LinkBudget, YieldConvention};
pub use keyrates::{optimal_mu, KeyRateReport, MuOptimum, Rate, RateKind};
pub use monitor::{abort_test, expected_coincidences, AbortDecision, CoincidenceExpectation};
pub use sim::{
    run_simulation, AlicePulse, Basis, ClickPattern, CoincidenceStats, EveStrategy, SimResult,
    SourceParams,
};
pub use stats::{binary_entropy, poisson_pmf, CdCoefficients, PhotonDistribution, SplittingTable};

/// Errors produced by the analytic and simulation layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument was outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The channel produces no detections at all, so conditional
    /// quantities (error rates, QBER) are undefined.
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),
    /// A monitor comparison was requested for a configuration with no
    /// statistical power (zero variance against nonzero counts).
    #[error("degenerate monitor configuration: {0}")]
    DegenerateMonitor(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
