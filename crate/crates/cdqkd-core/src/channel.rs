//! Analytic channel statistics: per-photon-number transmission, yields,
//! gains and error rates, plus a distance-to-transmissivity model for
//! sweeps over channel length.

use serde::{Deserialize, Serialize};

use crate::stats::PhotonDistribution;
use crate::{Error, Result};

/// Error rate assigned to background-only detections: the four receiver
/// detectors fire symmetrically, so a quarter of the vacuum events land on
/// the wrong-bit detector of the reconciled basis.
pub const VACUUM_ERROR_RATE: f64 = 0.25;

/// Which yield convention the analytic profile uses.
///
/// The halved form folds the passive basis-sifting factor into the yield
/// itself, `Y_n = (eta_n + p_dark) / 2`; part of the literature works with
/// the unhalved `Y_n = eta_n + p_dark` instead. All comparison curves must
/// be produced under a single convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YieldConvention {
    #[default]
    Halved,
    Unhalved,
}

impl YieldConvention {
    fn scale(self) -> f64 {
        match self {
            YieldConvention::Halved => 0.5,
            YieldConvention::Unhalved => 1.0,
        }
    }
}

/// Physical parameters of the quantum channel and receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Channel transmissivity (probability a photon survives the link).
    pub eta: f64,
    /// Background/dark-count probability per detector per detection window.
    pub p_dark: f64,
    /// Intrinsic wrong-port probability of the matched-basis measurement.
    pub e_detector: f64,
    /// Detector plus coupling efficiency on Bob's side.
    pub eta_detector: f64,
}

impl ChannelParams {
    pub fn new(eta: f64, p_dark: f64, e_detector: f64, eta_detector: f64) -> Result<Self> {
        let params = Self {
            eta,
            p_dark,
            e_detector,
            eta_detector,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_interval(self.eta, "eta")?;
        check_unit_interval(self.p_dark, "p_dark")?;
        check_unit_interval(self.eta_detector, "eta_detector")?;
        if !self.e_detector.is_finite() || !(0.0..=0.5).contains(&self.e_detector) {
            return Err(Error::domain(format!(
                "e_detector must lie in [0, 0.5], got {}",
                self.e_detector
            )));
        }
        Ok(())
    }

    /// Overall photon survival probability channel times receiver.
    pub fn eta_total(&self) -> f64 {
        self.eta * self.eta_detector
    }

    /// Same receiver looking through a channel of different transmissivity.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(eta, self.p_dark, self.e_detector, self.eta_detector)
    }
}

fn check_unit_interval(x: f64, name: &str) -> Result<()> {
    if !x.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("{name} must lie in [0, 1], got {x}")));
    }
    Ok(())
}

/// Exponential attenuation model for channel-length sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Transmissivity at zero length (coupling and geometry losses).
    pub eta0: f64,
    /// Attenuation coefficient in dB per kilometre.
    pub alpha_db_per_km: f64,
}

impl LinkBudget {
    pub fn new(eta0: f64, alpha_db_per_km: f64) -> Result<Self> {
        check_unit_interval(eta0, "eta0")?;
        if !alpha_db_per_km.is_finite() || alpha_db_per_km < 0.0 {
            return Err(Error::domain(format!(
                "alpha_db_per_km must be finite and >= 0, got {alpha_db_per_km}"
            )));
        }
        Ok(Self {
            eta0,
            alpha_db_per_km,
        })
    }

    /// `eta0 * 10^(-alpha * length / 10)`, monotone decreasing in length.
    pub fn transmissivity_at(&self, length_km: f64) -> Result<f64> {
        if !length_km.is_finite() || length_km < 0.0 {
            return Err(Error::domain(format!(
                "channel length must be finite and >= 0, got {length_km}"
            )));
        }
        Ok(self.eta0 * 10f64.powf(-self.alpha_db_per_km * length_km / 10.0))
    }

    /// Channel parameters at a given length, keeping the receiver fixed.
    pub fn channel_at(&self, receiver: &ChannelParams, length_km: f64) -> Result<ChannelParams> {
        receiver.with_eta(self.transmissivity_at(length_km)?)
    }
}

/// Transmission efficiency of an `n`-photon pulse: `1 - (1 - eta)^n`.
pub fn eta_n(eta_total: f64, n: u32) -> Result<f64> {
    check_unit_interval(eta_total, "eta_total")?;
    Ok(1.0 - (1.0 - eta_total).powi(n as i32))
}

/// Yield of an `n`-photon pulse under the chosen convention.
///
/// For `n >= 1` this is `(eta_n + p_dark)` scaled by the convention; the
/// vacuum yield keeps only the background term.
pub fn yield_n(params: &ChannelParams, n: u32, convention: YieldConvention) -> Result<f64> {
    params.validate()?;
    let scale = convention.scale();
    if n == 0 {
        return Ok(params.p_dark * scale);
    }
    Ok((eta_n(params.eta_total(), n)? + params.p_dark) * scale)
}

/// Per-photon-number yields, gains and error rates together with the pulse
/// totals `Q_mu` and `E_mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainErrorProfile {
    /// `Y_0 ..= Y_n_max`
    pub yields: Vec<f64>,
    /// `Q_n = Y_n * P(n)`
    pub gains: Vec<f64>,
    /// `E_0 ..= E_n_max`
    pub errors: Vec<f64>,
    /// Total gain `Q_mu = sum Q_n`.
    pub q_mu: f64,
    /// Total error rate defined through `E_mu * Q_mu = sum Q_n * E_n`.
    pub e_mu: f64,
    /// Convention the yields were computed under.
    pub convention: YieldConvention,
}

impl GainErrorProfile {
    pub fn n_max(&self) -> usize {
        self.yields.len() - 1
    }
}

/// Build the gain/error profile of a Poissonian source over a channel.
///
/// Errors follow `E_n = (eta_n E_det / 2 + (1 - eta_n) p_dark / 4) / Y_n`
/// for `n >= 1` and the fixed vacuum rate for `n = 0`. Fails when the
/// channel produces no detections at all (`Q_mu = 0`), in which case error
/// rates are undefined.
pub fn gain_profile(
    source: &PhotonDistribution,
    params: &ChannelParams,
    convention: YieldConvention,
) -> Result<GainErrorProfile> {
    params.validate()?;
    let pmfs = source.pmfs();
    let eps = params.eta_total();

    let mut yields = Vec::with_capacity(pmfs.len());
    let mut gains = Vec::with_capacity(pmfs.len());
    let mut errors = Vec::with_capacity(pmfs.len());
    for (n, &pn) in pmfs.iter().enumerate() {
        let y = yield_n(params, n as u32, convention)?;
        yields.push(y);
        gains.push(y * pn);
        if n == 0 {
            errors.push(VACUUM_ERROR_RATE);
        } else {
            let en = eta_n(eps, n as u32)?;
            let numerator = (en * params.e_detector / 2.0 + (1.0 - en) * params.p_dark / 4.0)
                * convention.scale()
                / YieldConvention::Halved.scale();
            // The numerator above is written for the halved convention; the
            // unhalved yield doubles it so the ratio E_n stays invariant.
            errors.push(if y > 0.0 { numerator / y } else { 0.0 });
        }
    }

    let q_mu: f64 = gains.iter().sum();
    if q_mu <= 0.0 {
        return Err(Error::DegenerateChannel(
            "channel yields no detections; error rates are undefined".into(),
        ));
    }
    let e_mu = gains
        .iter()
        .zip(errors.iter())
        .map(|(q, e)| q * e)
        .sum::<f64>()
        / q_mu;

    Ok(GainErrorProfile {
        yields,
        gains,
        errors,
        q_mu,
        e_mu,
        convention,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(eta: f64) -> ChannelParams {
        ChannelParams::new(eta, 1e-5, 0.01, 0.6).unwrap()
    }

    #[test]
    fn eta_n_examples() {
        assert_eq!(eta_n(0.7, 1).unwrap(), 0.7);
        assert!((eta_n(0.7, 2).unwrap() - 0.91).abs() < 1e-15);
        assert_eq!(eta_n(1.0, 5).unwrap(), 1.0);
        assert_eq!(eta_n(0.3, 0).unwrap(), 0.0);
        assert!(eta_n(1.2, 1).is_err());
    }

    #[test]
    fn eta_n_monotone_in_n_and_eta() {
        for &eps in &[0.0, 0.1, 0.5, 0.9] {
            for n in 0..12 {
                let lo = eta_n(eps, n).unwrap();
                let hi = eta_n(eps, n + 1).unwrap();
                assert!(hi >= lo);
            }
        }
        for n in 1..6 {
            let lo = eta_n(0.2, n).unwrap();
            let hi = eta_n(0.3, n).unwrap();
            assert!(hi > lo);
        }
    }

    #[test]
    fn yield_examples() {
        let nothing = ChannelParams::new(0.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(yield_n(&nothing, 0, YieldConvention::Halved).unwrap(), 0.0);

        let p = ChannelParams::new(0.7, 1e-5, 0.01, 1.0).unwrap();
        let y1 = yield_n(&p, 1, YieldConvention::Halved).unwrap();
        assert!((y1 - 0.350005).abs() < 1e-12);
        let y3 = yield_n(&p, 3, YieldConvention::Halved).unwrap();
        assert!((y3 - 0.486505).abs() < 1e-12);

        // unhalved convention drops the factor of two
        let y1u = yield_n(&p, 1, YieldConvention::Unhalved).unwrap();
        assert!((y1u - 0.700010).abs() < 1e-12);
    }

    #[test]
    fn vacuum_yield_keeps_only_background() {
        let p = params(0.7);
        assert_eq!(
            yield_n(&p, 0, YieldConvention::Halved).unwrap(),
            p.p_dark / 2.0
        );
    }

    #[test]
    fn profile_satisfies_total_error_identity() {
        // E_mu * Q_mu must equal sum Q_n E_n by construction.
        let source = PhotonDistribution::new(0.41).unwrap();
        let p = params(0.7);
        let profile = gain_profile(&source, &p, YieldConvention::Halved).unwrap();
        let lhs = profile.e_mu * profile.q_mu;
        let rhs: f64 = profile
            .gains
            .iter()
            .zip(profile.errors.iter())
            .map(|(q, e)| q * e)
            .sum();
        assert!((lhs - rhs).abs() < 1e-10);
        assert_eq!(profile.errors[0], VACUUM_ERROR_RATE);
    }

    #[test]
    fn profile_matches_direct_series() {
        // Q_mu against an independent high-truncation summation.
        let source = PhotonDistribution::with_n_max(0.41, 40).unwrap();
        let p = params(0.7);
        let profile = gain_profile(&source, &p, YieldConvention::Halved).unwrap();

        let eps = p.eta_total();
        let mut expect = 0.0;
        for n in 0..=40u32 {
            let pn = crate::stats::poisson_pmf(0.41, n).unwrap();
            let y = if n == 0 {
                p.p_dark / 2.0
            } else {
                (1.0 - (1.0 - eps).powi(n as i32) + p.p_dark) / 2.0
            };
            expect += pn * y;
        }
        assert!((profile.q_mu - expect).abs() < 1e-15);
    }

    #[test]
    fn clean_channel_has_no_multiphoton_errors() {
        let source = PhotonDistribution::new(0.3).unwrap();
        let p = ChannelParams::new(0.5, 0.0, 0.0, 1.0).unwrap();
        let profile = gain_profile(&source, &p, YieldConvention::Halved).unwrap();
        for n in 1..=profile.n_max() {
            assert_eq!(profile.errors[n], 0.0, "E_{n} should vanish");
        }
        // Only the (zero-gain) vacuum term carries error weight, so
        // E_mu * Q_mu collapses to Q_0 / 4 = 0.
        assert_eq!(profile.e_mu * profile.q_mu, profile.gains[0] / 4.0);
    }

    #[test]
    fn dead_channel_is_degenerate() {
        let source = PhotonDistribution::new(0.41).unwrap();
        let p = ChannelParams::new(0.0, 0.0, 0.01, 0.6).unwrap();
        assert!(matches!(
            gain_profile(&source, &p, YieldConvention::Halved),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn gain_stable_under_truncation_increase() {
        let p = params(0.7);
        let q20 = gain_profile(
            &PhotonDistribution::with_n_max(0.5, 20).unwrap(),
            &p,
            YieldConvention::Halved,
        )
        .unwrap()
        .q_mu;
        let q40 = gain_profile(
            &PhotonDistribution::with_n_max(0.5, 40).unwrap(),
            &p,
            YieldConvention::Halved,
        )
        .unwrap()
        .q_mu;
        assert!(q40 >= q20);
        assert!(q40 - q20 < 1e-12);
    }

    #[test]
    fn link_budget_examples() {
        let free = LinkBudget::new(1.0, 0.2).unwrap();
        assert_eq!(free.transmissivity_at(0.0).unwrap(), 1.0);
        assert!((free.transmissivity_at(50.0).unwrap() - 0.1).abs() < 1e-15);

        let lab = LinkBudget::new(0.7, 0.2).unwrap();
        assert_eq!(lab.transmissivity_at(0.0).unwrap(), 0.7);
        assert!(lab.transmissivity_at(-1.0).is_err());
    }

    #[test]
    fn link_budget_monotone() {
        let b = LinkBudget::new(0.7, 0.25).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..40 {
            let t = b.transmissivity_at(f64::from(i) * 5.0).unwrap();
            assert!(t < last && t > 0.0);
            last = t;
        }
    }

    #[test]
    fn params_validation() {
        assert!(ChannelParams::new(1.5, 0.0, 0.0, 1.0).is_err());
        assert!(ChannelParams::new(0.5, -0.1, 0.0, 1.0).is_err());
        assert!(ChannelParams::new(0.5, 0.0, 0.6, 1.0).is_err());
        assert!(ChannelParams::new(0.5, 0.0, 0.0, 1.1).is_err());
        assert!(ChannelParams::new(0.5, 0.0, 0.5, 1.0).is_ok());
    }
}
