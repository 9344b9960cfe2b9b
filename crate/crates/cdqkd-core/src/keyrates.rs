//! Secret-key-rate formulas (ideal, GLLP, decoy-state and
//! coincidence-detection) and a mean-photon-number optimizer.

use serde::{Deserialize, Serialize};

use crate::channel::{gain_profile, ChannelParams, GainErrorProfile, YieldConvention};
use crate::stats::{binary_entropy, cd_coefficients, CdCoefficients, PhotonDistribution};
use crate::{Error, Result};

/// Basis-sifting factor of a passive balanced-splitter receiver.
pub const SIFTING_FACTOR: f64 = 0.5;

/// Default error-correction inefficiency `f(E_mu)`; typical bidirectional
/// reconciliation codes run between 1.16 and 1.22 times the Shannon limit.
pub const DEFAULT_EC_INEFFICIENCY: f64 = 1.22;

/// A per-pulse secret key rate. Formulas that evaluate negative are clamped
/// to zero and flagged insecure rather than silently truncated; distance
/// cutoffs are exactly where this flag flips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub per_pulse: f64,
    pub secure: bool,
}

impl Rate {
    fn clamped(raw: f64) -> Self {
        if raw > 0.0 {
            Rate {
                per_pulse: raw,
                secure: true,
            }
        } else {
            Rate {
                per_pulse: 0.0,
                secure: false,
            }
        }
    }

    fn insecure() -> Self {
        Rate {
            per_pulse: 0.0,
            secure: false,
        }
    }
}

/// Ideal single-photon-source rate `1 - 2 H2(E_b)`.
pub fn rate_ideal(e_b: f64) -> Result<Rate> {
    let h = binary_entropy(e_b)?;
    Ok(Rate::clamped(1.0 - 2.0 * h))
}

/// GLLP rate for weak coherent pulses without decoy states:
/// `q Q_mu { -f H2(E_mu) + Q1/Q_mu [1 - H2(Q_mu E_mu / Q1)] }`.
///
/// All error is pessimistically attributed to the single-photon fraction;
/// when the resulting entropy argument leaves `[0, 1]` the formula has no
/// secure operating point and the rate reports zero, insecure.
pub fn rate_gllp(profile: &GainErrorProfile, q: f64, f_ec: f64) -> Result<Rate> {
    check_rate_inputs(profile, q, f_ec, 1)?;
    let q1 = profile.gains[1];
    if q1 <= 0.0 {
        return Err(Error::DegenerateChannel(
            "single-photon gain is zero; GLLP rate undefined".into(),
        ));
    }
    let arg = profile.q_mu * profile.e_mu / q1;
    if arg > 1.0 + crate::stats::ENTROPY_CLAMP {
        return Ok(Rate::insecure());
    }
    let raw = q
        * profile.q_mu
        * (-f_ec * binary_entropy(profile.e_mu)?
            + q1 / profile.q_mu * (1.0 - binary_entropy(arg.clamp(0.0, 1.0))?));
    Ok(Rate::clamped(raw))
}

/// Asymptotic decoy-state rate
/// `q { -Q_mu f H2(E_mu) + Q1 [1 - H2(E1)] }`
/// using the true single-photon gain and error from the analytic profile
/// (infinite-decoy limit).
pub fn rate_decoy(profile: &GainErrorProfile, q: f64, f_ec: f64) -> Result<Rate> {
    check_rate_inputs(profile, q, f_ec, 1)?;
    let raw = q
        * (-profile.q_mu * f_ec * binary_entropy(profile.e_mu)?
            + profile.gains[1] * (1.0 - binary_entropy(profile.errors[1])?));
    Ok(Rate::clamped(raw))
}

/// Coincidence-detection rate
/// `-1/2 Q_mu f H2(E_mu) + sum_{n=1..3} C_n Q_n [1 - H2(E_n)]`.
///
/// The sifting factor is absorbed into the coefficients, so no extra `q`
/// appears here.
pub fn rate_cd(profile: &GainErrorProfile, coeffs: &CdCoefficients, f_ec: f64) -> Result<Rate> {
    check_rate_inputs(profile, SIFTING_FACTOR, f_ec, 3)?;
    let mut raw = -SIFTING_FACTOR * profile.q_mu * f_ec * binary_entropy(profile.e_mu)?;
    for n in 1..=3u32 {
        raw += coeffs.weight(n)
            * profile.gains[n as usize]
            * (1.0 - binary_entropy(profile.errors[n as usize])?);
    }
    Ok(Rate::clamped(raw))
}

fn check_rate_inputs(profile: &GainErrorProfile, q: f64, f_ec: f64, need_n: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!(
            "sifting factor must lie in [0, 1], got {q}"
        )));
    }
    if !f_ec.is_finite() || f_ec < 1.0 {
        return Err(Error::domain(format!(
            "error-correction inefficiency must be >= 1, got {f_ec}"
        )));
    }
    if profile.n_max() < need_n {
        return Err(Error::domain(format!(
            "profile truncated below n = {need_n}"
        )));
    }
    Ok(())
}

/// All four rates for one channel configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub ideal: Rate,
    pub gllp: Rate,
    pub decoy: Rate,
    pub cd: Rate,
    pub q_factor: f64,
    pub f_ec: f64,
}

impl KeyRateReport {
    pub fn evaluate(profile: &GainErrorProfile, f_ec: f64) -> Result<Self> {
        let coeffs = cd_coefficients();
        Ok(KeyRateReport {
            ideal: rate_ideal(profile.e_mu)?,
            gllp: rate_gllp(profile, SIFTING_FACTOR, f_ec)?,
            decoy: rate_decoy(profile, SIFTING_FACTOR, f_ec)?,
            cd: rate_cd(profile, &coeffs, f_ec)?,
            q_factor: SIFTING_FACTOR,
            f_ec,
        })
    }
}

/// Rate formula selector for sweeps and optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    Gllp,
    Decoy,
    Cd,
}

/// Evaluate one rate formula at a given mean photon number.
pub fn evaluate_rate(
    kind: RateKind,
    mu: f64,
    params: &ChannelParams,
    f_ec: f64,
    convention: YieldConvention,
) -> Result<Rate> {
    let source = PhotonDistribution::new(mu)?;
    let profile = gain_profile(&source, params, convention)?;
    match kind {
        RateKind::Gllp => rate_gllp(&profile, SIFTING_FACTOR, f_ec),
        RateKind::Decoy => rate_decoy(&profile, SIFTING_FACTOR, f_ec),
        RateKind::Cd => rate_cd(&profile, &cd_coefficients(), f_ec),
    }
}

/// Result of a mean-photon-number search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuOptimum {
    pub mu: f64,
    pub rate: Rate,
}

/// Locate the mean photon number maximizing a rate formula.
///
/// Coarse grid search followed by golden-section refinement inside the
/// bracket around the best grid point; ties break toward smaller `mu`. When
/// every grid point yields zero rate the result carries the insecure flag.
pub fn optimal_mu(
    kind: RateKind,
    params: &ChannelParams,
    f_ec: f64,
    convention: YieldConvention,
    mu_grid: &[f64],
) -> Result<MuOptimum> {
    if mu_grid.is_empty() {
        return Err(Error::domain("mu grid must be nonempty"));
    }
    for &mu in mu_grid {
        if !(mu > 0.0 && mu <= 2.0) {
            return Err(Error::domain(format!(
                "mu grid points must lie in (0, 2], got {mu}"
            )));
        }
    }

    let eval = |mu: f64| -> Result<f64> {
        Ok(evaluate_rate(kind, mu, params, f_ec, convention)?.per_pulse)
    };

    let mut best_idx = 0usize;
    let mut best_rate = f64::NEG_INFINITY;
    for (i, &mu) in mu_grid.iter().enumerate() {
        let r = eval(mu)?;
        // strict comparison keeps the first (smallest-mu) maximum on ties
        if r > best_rate {
            best_rate = r;
            best_idx = i;
        }
    }

    if best_rate <= 0.0 {
        return Ok(MuOptimum {
            mu: mu_grid[0],
            rate: Rate::insecure(),
        });
    }

    let lo = if best_idx == 0 {
        mu_grid[0]
    } else {
        mu_grid[best_idx - 1]
    };
    let hi = if best_idx + 1 == mu_grid.len() {
        mu_grid[best_idx]
    } else {
        mu_grid[best_idx + 1]
    };
    let mu_star = golden_section_max(&eval, lo, hi, 1e-6)?;

    let refined = eval(mu_star)?;
    let (mu, per_pulse) = if refined >= best_rate {
        (mu_star, refined)
    } else {
        (mu_grid[best_idx], best_rate)
    };
    Ok(MuOptimum {
        mu,
        rate: Rate {
            per_pulse,
            secure: per_pulse > 0.0,
        },
    })
}

fn golden_section_max(
    f: &impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if b - a <= tol {
        return Ok(0.5 * (a + b));
    }
    let mut c = b - (b - a) * INV_PHI;
    let mut d = a + (b - a) * INV_PHI;
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        // >= keeps the left interval on ties, biasing toward smaller mu
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INV_PHI;
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INV_PHI;
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Evenly spaced grid helper for sweeps.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 0 {
        return Vec::new();
    }
    if points == 1 {
        return vec![start];
    }
    let step = (stop - start) / (points - 1) as f64;
    (0..points).map(|i| start + step * i as f64).collect()
}
