//! Pure mathematical primitives: Poisson photon statistics, binary entropy,
//! balanced beam-splitter splitting tables and the coincidence-detection
//! contribution coefficients.
//!
//! The splitting tables and coefficients are kept as exact rationals; they
//! are converted to floating point only where a key-rate formula consumes
//! them.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Slack allowed when clamping entropy arguments back into `[0, 1]`.
///
/// Upstream ratios such as `Q_mu * E_mu / Q_1` can drift marginally out of
/// range in floating point; anything within this distance of the boundary is
/// treated as the boundary, anything further out is a domain error.
pub const ENTROPY_CLAMP: f64 = 1e-12;

/// Poisson probability mass `e^(-mu) * mu^n / n!`.
///
/// Evaluated in log space so large `n` does not overflow the factorial.
pub fn poisson_pmf(mu: f64, n: u32) -> Result<f64> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::domain(format!(
            "mean photon number must be finite and >= 0, got {mu}"
        )));
    }
    if mu == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let nf = f64::from(n);
    Ok((nf * mu.ln() - mu - ln_factorial(n)).exp())
}

/// `ln(n!)` as an exact cascade of `ln` terms; cheap for the small photon
/// numbers that occur here.
fn ln_factorial(n: u32) -> f64 {
    (2..=u64::from(n)).map(|k| (k as f64).ln()).sum()
}

/// Binary Shannon entropy `H2(x) = -x log2 x - (1-x) log2 (1-x)` with the
/// convention `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !x.is_finite() || !(-ENTROPY_CLAMP..=1.0 + ENTROPY_CLAMP).contains(&x) {
        return Err(Error::domain(format!(
            "entropy argument must lie in [0, 1], got {x}"
        )));
    }
    let x = x.clamp(0.0, 1.0);
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Truncated Poisson photon-number distribution of a weak coherent source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    /// Mean photon number per pulse.
    pub mu: f64,
    /// Truncation order of the photon-number series.
    pub n_max: usize,
}

impl PhotonDistribution {
    /// Distribution with the default truncation `20 * max(1, ceil(mu))`,
    /// which leaves tail mass below 1e-12 for any physical `mu`.
    pub fn new(mu: f64) -> Result<Self> {
        let n_max = 20 * (mu.ceil().max(1.0) as usize);
        Self::with_n_max(mu, n_max)
    }

    /// Distribution with an explicit truncation order (`n_max >= 3`).
    pub fn with_n_max(mu: f64, n_max: usize) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::domain(format!(
                "mean photon number must be finite and >= 0, got {mu}"
            )));
        }
        if n_max < 3 {
            return Err(Error::domain(format!(
                "truncation order must be >= 3, got {n_max}"
            )));
        }
        Ok(Self { mu, n_max })
    }

    /// `P(n)` for a single photon number.
    pub fn pmf(&self, n: u32) -> f64 {
        poisson_pmf(self.mu, n).expect("validated on construction")
    }

    /// All probabilities `P(0) ..= P(n_max)`.
    pub fn pmfs(&self) -> Vec<f64> {
        (0..=self.n_max as u32).map(|n| self.pmf(n)).collect()
    }
}

/// Exact binomial coefficient for the small arguments used by the tables.
fn binomial(n: u32, k: u32) -> u64 {
    let k = k.min(n - k.min(n));
    let mut c: u64 = 1;
    for i in 1..=u64::from(k) {
        c = c * (u64::from(n) - i + 1) / i;
    }
    c
}

/// Probability that `k` of `n` photons exit the transmitted port of a
/// balanced beam splitter: `C(n, k) / 2^n`.
pub fn splitting_probability(n: u32, k: u32) -> Result<f64> {
    let r = splitting_probability_exact(n, k)?;
    Ok(ratio_to_f64(r))
}

/// Exact-rational form of [`splitting_probability`].
pub fn splitting_probability_exact(n: u32, k: u32) -> Result<Ratio<u64>> {
    if n == 0 {
        return Err(Error::domain("splitting needs at least one photon"));
    }
    if k > n {
        return Err(Error::domain(format!(
            "transmitted count {k} exceeds photon count {n}"
        )));
    }
    if n > 62 {
        return Err(Error::domain(format!(
            "splitting table overflows exact arithmetic beyond n = 62, got {n}"
        )));
    }
    Ok(Ratio::new(binomial(n, k), 1u64 << n))
}

fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// One outcome of splitting an `n`-photon pulse at the balanced splitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitEntry {
    /// Photons exiting the transmitted port.
    pub transmitted: u32,
    /// Photons exiting the reflected port.
    pub reflected: u32,
    /// Exact probability of this outcome.
    pub probability: Ratio<u64>,
}

/// Full splitting table of an `n`-photon pulse at a balanced beam splitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplittingTable {
    pub n: u32,
    pub entries: Vec<SplitEntry>,
}

impl SplittingTable {
    pub fn for_photons(n: u32) -> Result<Self> {
        let entries = (0..=n)
            .map(|k| {
                Ok(SplitEntry {
                    transmitted: k,
                    reflected: n - k,
                    probability: splitting_probability_exact(n, k)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, entries })
    }

    /// Exact sum of all entry probabilities; 1 for every valid table.
    pub fn total(&self) -> Ratio<u64> {
        self.entries
            .iter()
            .fold(Ratio::from_integer(0), |acc, e| acc + e.probability)
    }
}

/// Key-contribution weights of single, double and triple photon pulses in
/// the coincidence-detection rate. The passive-basis factor is already
/// absorbed into them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CdCoefficients {
    pub c1: Ratio<u64>,
    pub c2: Ratio<u64>,
    pub c3: Ratio<u64>,
}

/// The exact coefficients `C1 = 1/2`, `C2 = 3/4`, `C3 = 7/8`.
pub fn cd_coefficients() -> CdCoefficients {
    CdCoefficients {
        c1: Ratio::new(1, 2),
        c2: Ratio::new(3, 4),
        c3: Ratio::new(7, 8),
    }
}

impl CdCoefficients {
    /// Re-derive the coefficients from the splitting tables.
    ///
    /// A splitting outcome contributes to the key when at least one photon
    /// exits the port measuring in Alice's basis. Outcomes with photons in
    /// both ports always qualify; bunched outcomes (all photons in one port)
    /// qualify only when that port happens to be the matching one, i.e. for
    /// half of their probability mass.
    pub fn derived_from_splitting() -> Result<Self> {
        let weight = |n: u32| -> Result<Ratio<u64>> {
            let table = SplittingTable::for_photons(n)?;
            Ok(table
                .entries
                .iter()
                .map(|e| {
                    if e.transmitted > 0 && e.reflected > 0 {
                        e.probability
                    } else {
                        e.probability / 2
                    }
                })
                .fold(Ratio::from_integer(0), |acc, p| acc + p))
        };
        Ok(CdCoefficients {
            c1: weight(1)?,
            c2: weight(2)?,
            c3: weight(3)?,
        })
    }

    /// Floating-point weight for an `n`-photon gain term (`n` in `1..=3`).
    pub fn weight(&self, n: u32) -> f64 {
        match n {
            1 => ratio_to_f64(self.c1),
            2 => ratio_to_f64(self.c2),
            3 => ratio_to_f64(self.c3),
            _ => 0.0,
        }
    }
}
