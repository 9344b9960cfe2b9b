//! Expected coincidence counts for a characterized channel and the abort
//! rule comparing them against observed tallies.
//!
//! The expectation is an exact enumeration, not a simulation: for every
//! photon number the per-photon survival, balanced-splitter routing, port
//! resolution and dark-count convolution are summed over all sixteen
//! detector patterns. The Monte Carlo implements the same physics, so the
//! two agree to counting statistics and each serves as the other's oracle.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::sim::rng::derive_seed;
use crate::sim::{run_simulation, Basis, CoincidenceStats, EveStrategy, SourceParams};
use crate::stats::PhotonDistribution;
use crate::{Error, Result};

/// Per-photon port probabilities conditional on detection, given Alice's
/// preparation. Order `[H, V, D, A]`.
///
/// The photon picks an arm with even odds. In the arm matching its
/// preparation basis the port is deterministic up to the intrinsic
/// detector error; in the conjugate arm both ports are equally likely.
pub fn port_distribution(basis: Basis, bit: bool, e_detector: f64) -> [f64; 4] {
    let mut q = [0.0; 4];
    let arm = match basis {
        Basis::Rectilinear => 0usize,
        Basis::Diagonal => 2usize,
    };
    let conj = 2 - arm;
    let correct = arm + usize::from(bit);
    let wrong = arm + usize::from(!bit);
    q[correct] = 0.5 * (1.0 - e_detector);
    q[wrong] = 0.5 * e_detector;
    q[conj] = 0.25;
    q[conj + 1] = 0.25;
    q
}

/// Exact click-mask distribution for an `n`-photon pulse prepared as
/// `(basis, bit)`, including dark counts. Index = mask over `[H, V, D, A]`.
pub fn mask_distribution(n: u32, params: &ChannelParams, basis: Basis, bit: bool) -> [f64; 16] {
    let eps = params.eta_total();
    let ports = port_distribution(basis, bit, params.e_detector);
    let absorbed = 1.0 - eps;

    // P(all n photons land inside subset T or go undetected)
    let mut p_within = [0.0f64; 16];
    for (t, slot) in p_within.iter_mut().enumerate() {
        let mut reach = absorbed;
        for (d, q) in ports.iter().enumerate() {
            if t >> d & 1 == 1 {
                reach += eps * q;
            }
        }
        *slot = reach.powi(n as i32);
    }

    // Möbius inversion: P(signal hits exactly S)
    let mut p_exact = [0.0f64; 16];
    for (s, slot) in p_exact.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut t = s;
        loop {
            let sign = if ((s.count_ones() - t.count_ones()) & 1) == 1 {
                -1.0
            } else {
                1.0
            };
            acc += sign * p_within[t];
            if t == 0 {
                break;
            }
            t = (t - 1) & s;
        }
        *slot = acc.max(0.0);
    }

    // convolve with independent per-detector dark counts
    let pd = params.p_dark;
    let qd = 1.0 - pd;
    let mut p_mask = [0.0f64; 16];
    for (m, slot) in p_mask.iter_mut().enumerate() {
        let quiet = qd.powi(4 - m.count_ones() as i32);
        let mut acc = 0.0;
        let mut s = m;
        loop {
            let extra = (m.count_ones() - s.count_ones()) as i32;
            acc += p_exact[s] * pd.powi(extra);
            if s == 0 {
                break;
            }
            s = (s - 1) & m;
        }
        *slot = acc * quiet;
    }
    p_mask
}

/// [`mask_distribution`] averaged over the four equally likely
/// preparations.
pub fn mask_distribution_averaged(n: u32, params: &ChannelParams) -> [f64; 16] {
    let mut avg = [0.0f64; 16];
    for (basis, bit) in [
        (Basis::Rectilinear, false),
        (Basis::Rectilinear, true),
        (Basis::Diagonal, false),
        (Basis::Diagonal, true),
    ] {
        let p = mask_distribution(n, params, basis, bit);
        for (a, v) in avg.iter_mut().zip(p.iter()) {
            *a += 0.25 * v;
        }
    }
    avg
}

/// Expected coincidence counts and their counting variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceExpectation {
    pub n_pulses: u64,
    /// Mean number of exactly-two-click windows.
    pub twofold: f64,
    /// Mean number of exactly-three-click windows.
    pub threefold: f64,
    /// Mean of the monitored statistic (2-fold + 3-fold combined).
    pub total: f64,
    /// Counting variance of the monitored statistic; coincidences are rare
    /// independent per-pulse events, so Poisson variance equals the mean.
    pub variance: f64,
}

/// Exact expected coincidence counts for `n_pulses` signals.
pub fn expected_coincidences(
    source: &SourceParams,
    params: &ChannelParams,
    n_pulses: u64,
) -> Result<CoincidenceExpectation> {
    source.validate()?;
    params.validate()?;
    let distribution = PhotonDistribution::new(source.mu)?;

    let mut p2 = 0.0;
    let mut p3 = 0.0;
    for (n, pn) in distribution.pmfs().into_iter().enumerate() {
        let masks = mask_distribution_averaged(n as u32, params);
        for (m, p) in masks.iter().enumerate() {
            match m.count_ones() {
                2 => p2 += pn * p,
                3 => p3 += pn * p,
                _ => {}
            }
        }
    }

    let twofold = p2 * n_pulses as f64;
    let threefold = p3 * n_pulses as f64;
    Ok(CoincidenceExpectation {
        n_pulses,
        twofold,
        threefold,
        total: twofold + threefold,
        variance: twofold + threefold,
    })
}

/// Whether the abort statistic is checked on both sides or only against a
/// deficit of coincidences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestSides {
    /// Photon splitting depresses the counts while intercept-resend can
    /// shift them either way, so both tails are suspicious.
    #[default]
    TwoSided,
    /// Abort only when coincidences fall below the expectation.
    OneSidedLow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Continue,
    Abort,
}

/// Outcome of comparing observed coincidences against the expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbortDecision {
    pub verdict: Verdict,
    /// Normalized deviation of the combined 2-fold + 3-fold count.
    pub z_score: f64,
    /// Sigma multiplier the verdict was taken at.
    pub threshold: f64,
    /// Per-class deviations, where the class has statistical power.
    pub z_twofold: Option<f64>,
    pub z_threefold: Option<f64>,
}

/// Two-sided abort test at the given sigma threshold.
pub fn abort_test(
    expected: &CoincidenceExpectation,
    actual: &CoincidenceStats,
    threshold_sigma: f64,
) -> Result<AbortDecision> {
    abort_test_sided(expected, actual, threshold_sigma, TestSides::TwoSided)
}

/// Abort test with explicit sidedness.
pub fn abort_test_sided(
    expected: &CoincidenceExpectation,
    actual: &CoincidenceStats,
    threshold_sigma: f64,
    sides: TestSides,
) -> Result<AbortDecision> {
    if !threshold_sigma.is_finite() || threshold_sigma <= 0.0 {
        return Err(Error::domain(format!(
            "abort threshold must be positive, got {threshold_sigma}"
        )));
    }
    let observed = actual.monitored_total() as f64;
    if expected.variance <= 0.0 {
        if observed > 0.0 {
            return Err(Error::DegenerateMonitor(format!(
                "expectation carries no variance but {observed} coincidences were observed"
            )));
        }
        return Ok(AbortDecision {
            verdict: Verdict::Continue,
            z_score: 0.0,
            threshold: threshold_sigma,
            z_twofold: None,
            z_threefold: None,
        });
    }

    let z = (observed - expected.total) / expected.variance.sqrt();
    let z_class = |mean: f64, count: u64| (mean > 0.0).then(|| (count as f64 - mean) / mean.sqrt());
    let abort = match sides {
        TestSides::TwoSided => z.abs() > threshold_sigma,
        TestSides::OneSidedLow => z < -threshold_sigma,
    };
    Ok(AbortDecision {
        verdict: if abort {
            Verdict::Abort
        } else {
            Verdict::Continue
        },
        z_score: z,
        threshold: threshold_sigma,
        z_twofold: z_class(expected.twofold, actual.twofold_total()),
        z_threefold: z_class(expected.threefold, actual.threefold),
    })
}

/// One row of the expected-versus-observed coincidence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceTableRow {
    pub mu: f64,
    /// Enumeration expectation of the monitored statistic.
    pub expected: f64,
    /// Simulated observation.
    pub actual: u64,
    /// Counting standard deviation of the expectation.
    pub sigma: f64,
    /// Normalized deviation `(actual - expected) / sigma`.
    pub z: f64,
}

/// Build the expected-versus-observed table across a list of intensities,
/// simulating the "observed" column with one Monte Carlo run per row.
pub fn coincidence_table(
    mu_values: &[f64],
    params: &ChannelParams,
    n_pulses: u64,
    master_seed: u64,
) -> Result<Vec<CoincidenceTableRow>> {
    if mu_values.is_empty() {
        return Err(Error::domain("intensity list must be nonempty"));
    }
    mu_values
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let source = SourceParams::new(mu)?;
            let expected = expected_coincidences(&source, params, n_pulses)?;
            let run = run_simulation(
                &source,
                params,
                &EveStrategy::None,
                derive_seed(master_seed, i as u64),
                n_pulses,
            )?;
            let actual = run.coincidences.monitored_total();
            let sigma = expected.variance.sqrt();
            let z = if sigma > 0.0 {
                (actual as f64 - expected.total) / sigma
            } else {
                0.0
            };
            Ok(CoincidenceTableRow {
                mu,
                expected: expected.total,
                actual,
                sigma,
                z,
            })
        })
        .collect()
}
