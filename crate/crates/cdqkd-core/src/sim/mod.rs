//! Pulse-level Monte Carlo of the full protocol: Poissonian source,
//! optional eavesdropper, lossy channel, passive-basis four-detector
//! receiver, dark counts, sifting and coincidence tallies.
//!
//! Randomness is counter-based per pulse ([`rng::PulseRng`]), so a run is
//! bit-identical for a given `(seed, n_pulses, parameters)` no matter how
//! many workers the pulses are sharded across. Tally merging is plain
//! integer addition, which is associative and commutative.

pub mod rng;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::stats::PhotonDistribution;
use crate::{Error, Result};

use rng::{u64_to_unit_f64, PulseRng};

/// Measurement/preparation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// `{H, V}` arm (reflected at the balanced splitter).
    Rectilinear,
    /// `{D, A}` arm (transmitted at the balanced splitter).
    Diagonal,
}

impl Basis {
    #[inline]
    fn arm(self) -> u8 {
        match self {
            Basis::Rectilinear => 0,
            Basis::Diagonal => 1,
        }
    }

    #[inline]
    fn from_arm(arm: u8) -> Self {
        if arm == 0 {
            Basis::Rectilinear
        } else {
            Basis::Diagonal
        }
    }
}

/// Detector order used in click masks: bit 0 = H, 1 = V, 2 = D, 3 = A.
pub const DETECTOR_NAMES: [&str; 4] = ["H", "V", "D", "A"];

/// Weak-coherent-pulse source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Mean photon number per pulse.
    pub mu: f64,
    /// Pulse repetition rate; only used to convert pulse counts into
    /// integration times in reports.
    pub repetition_rate_hz: f64,
}

impl SourceParams {
    pub fn new(mu: f64) -> Result<Self> {
        let s = Self {
            mu,
            repetition_rate_hz: 80e6,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || self.mu < 0.0 {
            return Err(Error::domain(format!(
                "mean photon number must be finite and >= 0, got {}",
                self.mu
            )));
        }
        if !self.repetition_rate_hz.is_finite() || self.repetition_rate_hz <= 0.0 {
            return Err(Error::domain(format!(
                "repetition rate must be positive, got {}",
                self.repetition_rate_hz
            )));
        }
        Ok(())
    }
}

/// One emitted pulse before the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlicePulse {
    pub pulse_index: u64,
    pub n_photons: u32,
    pub basis: Basis,
    pub bit: bool,
}

/// Eavesdropper model applied pulse by pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum EveStrategy {
    /// Perfect identity on the photon stream.
    None,
    /// Measure a fraction of the pulses in a random basis and resend a
    /// fresh single photon prepared accordingly.
    InterceptResend {
        #[serde(default = "default_fraction")]
        fraction: f64,
    },
    /// Block single-photon pulses; keep one photon of every multiphoton
    /// pulse and forward the remainder over a replacement channel of
    /// transmissivity `forward_eta`. `forward_limit` caps how many photons
    /// are forwarded per pulse (`Some(0)` blocks everything).
    #[serde(rename = "pns")]
    PhotonNumberSplitting {
        #[serde(default = "default_forward_eta")]
        forward_eta: f64,
        #[serde(default)]
        forward_limit: Option<u32>,
    },
}

fn default_fraction() -> f64 {
    1.0
}

fn default_forward_eta() -> f64 {
    1.0
}

impl EveStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EveStrategy::None => Ok(()),
            EveStrategy::InterceptResend { fraction } => {
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(Error::domain(format!(
                        "attack fraction must lie in [0, 1], got {fraction}"
                    )));
                }
                Ok(())
            }
            EveStrategy::PhotonNumberSplitting { forward_eta, .. } => {
                if !(0.0..=1.0).contains(&forward_eta) {
                    return Err(Error::domain(format!(
                        "forward transmissivity must lie in [0, 1], got {forward_eta}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// What Eve lets through for one pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardedPulse {
    pub n_photons: u32,
    pub basis: Basis,
    pub bit: bool,
    /// Transmissivity the forwarded photons see between Eve and Bob.
    pub channel_eta: f64,
}

/// Apply an eavesdropping strategy to one pulse.
///
/// Intercept-resend measures the whole pulse in a random basis and resends
/// a single photon carrying Eve's result; when her basis matches Alice's
/// the result is Alice's bit, otherwise it is uniformly random. Photon
/// splitting drops single-photon pulses, keeps one photon of each
/// multiphoton pulse and forwards the rest over Eve's own channel.
pub fn apply_eve(
    pulse: &AlicePulse,
    strategy: &EveStrategy,
    channel_eta: f64,
    rng: &mut PulseRng,
) -> ForwardedPulse {
    match *strategy {
        EveStrategy::None => ForwardedPulse {
            n_photons: pulse.n_photons,
            basis: pulse.basis,
            bit: pulse.bit,
            channel_eta,
        },
        EveStrategy::InterceptResend { fraction } => {
            if fraction <= 0.0 {
                // consume no randomness so the stream matches an
                // eavesdropper-free run exactly
                return ForwardedPulse {
                    n_photons: pulse.n_photons,
                    basis: pulse.basis,
                    bit: pulse.bit,
                    channel_eta,
                };
            }
            let attacked = rng.next_f64() < fraction;
            if !attacked || pulse.n_photons == 0 {
                return ForwardedPulse {
                    n_photons: pulse.n_photons,
                    basis: pulse.basis,
                    bit: pulse.bit,
                    channel_eta,
                };
            }
            let r = rng.next_u64();
            let eve_basis = Basis::from_arm((r & 1) as u8);
            let random_bit = (r >> 1) & 1 == 1;
            let eve_bit = if eve_basis == pulse.basis {
                pulse.bit
            } else {
                random_bit
            };
            ForwardedPulse {
                n_photons: 1,
                basis: eve_basis,
                bit: eve_bit,
                channel_eta,
            }
        }
        EveStrategy::PhotonNumberSplitting {
            forward_eta,
            forward_limit,
        } => {
            let forwarded = if pulse.n_photons >= 2 {
                let split = pulse.n_photons - 1;
                forward_limit.map_or(split, |cap| split.min(cap))
            } else {
                0
            };
            ForwardedPulse {
                n_photons: forwarded,
                basis: pulse.basis,
                bit: pulse.bit,
                channel_eta: forward_eta,
            }
        }
    }
}

/// Click record of one detection window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickPattern {
    pub window_index: u64,
    /// Click mask over `[H, V, D, A]` (bit 0 = H).
    pub clicks: u8,
    /// Subset of `clicks` fired by dark counts alone.
    pub dark_flags: u8,
}

impl ClickPattern {
    pub fn click_flags(&self) -> [bool; 4] {
        [
            self.clicks & 1 != 0,
            self.clicks & 2 != 0,
            self.clicks & 4 != 0,
            self.clicks & 8 != 0,
        ]
    }
}

/// One line of the optional raw click log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickRecord {
    pub pattern: ClickPattern,
    pub basis: Basis,
    pub bit: bool,
}

/// Multi-click tallies partitioned by basis composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoincidenceStats {
    /// Windows with exactly one click.
    pub singles: u64,
    /// Two clicks inside one basis (`{H,V}` or `{D,A}`).
    pub twofold_same_basis: u64,
    /// Two clicks across conjugate bases (one per arm).
    pub twofold_conjugate: u64,
    /// Windows with exactly three clicks.
    pub threefold: u64,
    /// Saturated windows with all four detectors firing.
    pub fourfold: u64,
}

impl CoincidenceStats {
    pub fn twofold_total(&self) -> u64 {
        self.twofold_same_basis + self.twofold_conjugate
    }

    /// Combined 2-fold + 3-fold statistic the monitor tracks.
    pub fn monitored_total(&self) -> u64 {
        self.twofold_total() + self.threefold
    }

    fn add(&mut self, other: &CoincidenceStats) {
        self.singles += other.singles;
        self.twofold_same_basis += other.twofold_same_basis;
        self.twofold_conjugate += other.twofold_conjugate;
        self.threefold += other.threefold;
        self.fourfold += other.fourfold;
    }
}

/// Rows of the per-photon-number pattern histogram; the last row collects
/// every emission count at or above `PER_N_ROWS - 1`.
pub const PER_N_ROWS: usize = 16;

/// Aggregated outcome of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub n_pulses: u64,
    /// Windows with at least one click (signal or dark).
    pub detected_windows: u64,
    /// Windows that contributed a key bit after sifting.
    pub sifted_bits: u64,
    /// Sifted bits that disagree with Alice's bit.
    pub errors: u64,
    /// Windows whose reconciled-basis arm shows only the wrong-bit
    /// detector; the detection-gain-weighted error estimator is built on
    /// these.
    pub basis_error_windows: u64,
    /// Empirical detection gain under the halved yield convention,
    /// `detected / (2 n_pulses)`.
    pub q_mu_hat: f64,
    /// Empirical error-rate estimator matching the analytic `E_mu`,
    /// `2 * basis_error_windows / detected`, clamped to `[0, 1]`.
    pub e_mu_hat: f64,
    pub coincidences: CoincidenceStats,
    /// `per_n[n][mask]` counts windows by emitted photon number and click
    /// mask, for cross-checks against the exact enumeration.
    pub per_n: Vec<[u64; 16]>,
}

impl SimResult {
    /// QBER of the sifted key, `errors / sifted_bits`.
    pub fn sifted_qber(&self) -> f64 {
        if self.sifted_bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.sifted_bits as f64
        }
    }

    /// Pulses recorded for emitted photon number `n` (exact for
    /// `n < PER_N_ROWS - 1`).
    pub fn pulses_with_n(&self, n: usize) -> u64 {
        self.per_n[n.min(PER_N_ROWS - 1)].iter().sum()
    }
}

#[derive(Clone)]
struct Tally {
    detected: u64,
    sifted: u64,
    errors: u64,
    basis_errors: u64,
    stats: CoincidenceStats,
    per_n: Vec<[u64; 16]>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            detected: 0,
            sifted: 0,
            errors: 0,
            basis_errors: 0,
            stats: CoincidenceStats::default(),
            per_n: vec![[0u64; 16]; PER_N_ROWS],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.detected += other.detected;
        self.sifted += other.sifted;
        self.errors += other.errors;
        self.basis_errors += other.basis_errors;
        self.stats.add(&other.stats);
        for (row, other_row) in self.per_n.iter_mut().zip(other.per_n.iter()) {
            for (a, b) in row.iter_mut().zip(other_row.iter()) {
                *a += *b;
            }
        }
        self
    }
}

/// Cumulative-inversion sampler over the truncated photon distribution.
struct PhotonSampler {
    cumulative: Vec<f64>,
}

impl PhotonSampler {
    fn new(distribution: &PhotonDistribution) -> Self {
        let mut cumulative = Vec::with_capacity(distribution.n_max + 1);
        let mut acc = 0.0;
        for p in distribution.pmfs() {
            acc += p;
            cumulative.push(acc);
        }
        PhotonSampler { cumulative }
    }

    #[inline]
    fn sample(&self, u: f64) -> u32 {
        for (n, &c) in self.cumulative.iter().enumerate() {
            if u < c {
                return n as u32;
            }
        }
        (self.cumulative.len() - 1) as u32
    }
}

/// Cumulative walk over the 16 joint dark-count outcomes, ordered so the
/// overwhelmingly common "no dark" case exits on the first comparison.
struct DarkSampler {
    cumulative: [f64; 16],
    masks: [u8; 16],
}

impl DarkSampler {
    fn new(p_dark: f64) -> Self {
        let mut order: Vec<u8> = (0u8..16).collect();
        order.sort_by_key(|m| (m.count_ones(), *m));
        let q = 1.0 - p_dark;
        let mut cumulative = [0.0; 16];
        let mut masks = [0u8; 16];
        let mut acc = 0.0;
        for (i, &m) in order.iter().enumerate() {
            let k = m.count_ones();
            acc += p_dark.powi(k as i32) * q.powi(4 - k as i32);
            cumulative[i] = acc;
            masks[i] = m;
        }
        DarkSampler { cumulative, masks }
    }

    #[inline]
    fn sample(&self, u: f64) -> u8 {
        for i in 0..16 {
            if u < self.cumulative[i] {
                return self.masks[i];
            }
        }
        0b1111
    }
}

#[inline]
fn classify_window(tally: &mut Tally, mask: u8, alice_arm: u8, alice_bit: u8, emitted_n: u32) {
    tally.per_n[(emitted_n as usize).min(PER_N_ROWS - 1)][mask as usize] += 1;
    if mask == 0 {
        return;
    }
    tally.detected += 1;

    match mask.count_ones() {
        1 => {
            tally.stats.singles += 1;
            let det = mask.trailing_zeros() as u8;
            if det >> 1 == alice_arm {
                tally.sifted += 1;
                if det & 1 != alice_bit {
                    tally.errors += 1;
                }
            }
        }
        2 => {
            let rect = mask & 0b0011;
            let diag = mask & 0b1100;
            if rect != 0 && diag != 0 {
                tally.stats.twofold_conjugate += 1;
            } else {
                tally.stats.twofold_same_basis += 1;
            }
        }
        3 => tally.stats.threefold += 1,
        _ => tally.stats.fourfold += 1,
    }

    let correct_det = alice_arm * 2 + alice_bit;
    let wrong_det = correct_det ^ 1;
    if mask & (1 << wrong_det) != 0 && mask & (1 << correct_det) == 0 {
        tally.basis_errors += 1;
    }
}

struct RunContext<'a> {
    channel: &'a ChannelParams,
    eve: &'a EveStrategy,
    sampler: PhotonSampler,
    darks: DarkSampler,
    seed: u64,
}

impl RunContext<'_> {
    /// Simulate one pulse; returns the click pattern and Alice's state.
    #[inline]
    fn pulse(&self, index: u64, tally: &mut Tally) -> (ClickPattern, Basis, bool) {
        let mut rng = PulseRng::for_pulse(self.seed, index);

        let a = rng.next_u64();
        let alice_arm = (a & 1) as u8;
        let alice_bit = ((a >> 1) & 1) as u8;
        let basis = Basis::from_arm(alice_arm);
        let bit = alice_bit == 1;

        let n = self.sampler.sample(rng.next_f64());
        let pulse = AlicePulse {
            pulse_index: index,
            n_photons: n,
            basis,
            bit,
        };
        let forwarded = apply_eve(&pulse, self.eve, self.channel.eta, &mut rng);

        let p_detect = forwarded.channel_eta * self.channel.eta_detector;
        let photon_arm = forwarded.basis.arm();
        let photon_bit = u8::from(forwarded.bit);

        let mut signal_mask = 0u8;
        for _ in 0..forwarded.n_photons {
            if rng.next_f64() >= p_detect {
                continue;
            }
            let r = rng.next_u64();
            let arm = (r & 1) as u8;
            let detector = if arm == photon_arm {
                // matched basis: deterministic port, flipped with the
                // intrinsic detector error probability
                let flip = u64_to_unit_f64(r) < self.channel.e_detector;
                arm * 2 + (photon_bit ^ u8::from(flip))
            } else {
                // conjugate basis: even odds between the two ports
                arm * 2 + ((r >> 1) & 1) as u8
            };
            signal_mask |= 1 << detector;
        }

        let dark_mask = self.darks.sample(rng.next_f64());
        let full = signal_mask | dark_mask;
        classify_window(tally, full, alice_arm, alice_bit, n);

        (
            ClickPattern {
                window_index: index,
                clicks: full,
                dark_flags: dark_mask & !signal_mask,
            },
            basis,
            bit,
        )
    }
}

const SHARD: u64 = 1 << 16;

fn validate_run(
    source: &SourceParams,
    channel: &ChannelParams,
    eve: &EveStrategy,
    n_pulses: u64,
) -> Result<PhotonDistribution> {
    source.validate()?;
    channel.validate()?;
    eve.validate()?;
    if n_pulses == 0 {
        return Err(Error::domain("pulse count must be at least 1"));
    }
    PhotonDistribution::new(source.mu)
}

/// Run the full protocol simulation.
pub fn run_simulation(
    source: &SourceParams,
    channel: &ChannelParams,
    eve: &EveStrategy,
    seed: u64,
    n_pulses: u64,
) -> Result<SimResult> {
    let distribution = validate_run(source, channel, eve, n_pulses)?;
    let ctx = RunContext {
        channel,
        eve,
        sampler: PhotonSampler::new(&distribution),
        darks: DarkSampler::new(channel.p_dark),
        seed,
    };

    let shards = n_pulses.div_ceil(SHARD);
    let tally = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut t = Tally::new();
            let end = ((s + 1) * SHARD).min(n_pulses);
            for idx in s * SHARD..end {
                ctx.pulse(idx, &mut t);
            }
            t
        })
        .reduce(Tally::new, Tally::merge);

    Ok(finish(tally, n_pulses))
}

/// Like [`run_simulation`], additionally returning one record per
/// non-empty window, ordered by window index.
pub fn run_simulation_with_log(
    source: &SourceParams,
    channel: &ChannelParams,
    eve: &EveStrategy,
    seed: u64,
    n_pulses: u64,
) -> Result<(SimResult, Vec<ClickRecord>)> {
    let distribution = validate_run(source, channel, eve, n_pulses)?;
    let ctx = RunContext {
        channel,
        eve,
        sampler: PhotonSampler::new(&distribution),
        darks: DarkSampler::new(channel.p_dark),
        seed,
    };

    let shards = n_pulses.div_ceil(SHARD);
    let parts: Vec<(Tally, Vec<ClickRecord>)> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut t = Tally::new();
            let mut log = Vec::new();
            let end = ((s + 1) * SHARD).min(n_pulses);
            for idx in s * SHARD..end {
                let (pattern, basis, bit) = ctx.pulse(idx, &mut t);
                if pattern.clicks != 0 {
                    log.push(ClickRecord {
                        pattern,
                        basis,
                        bit,
                    });
                }
            }
            (t, log)
        })
        .collect();

    let mut tally = Tally::new();
    let mut log = Vec::new();
    for (t, mut l) in parts {
        tally = tally.merge(t);
        log.append(&mut l);
    }
    Ok((finish(tally, n_pulses), log))
}

fn finish(tally: Tally, n_pulses: u64) -> SimResult {
    let q_mu_hat = tally.detected as f64 / (2.0 * n_pulses as f64);
    let e_mu_hat = if tally.detected == 0 {
        0.0
    } else {
        (2.0 * tally.basis_errors as f64 / tally.detected as f64).min(1.0)
    };
    SimResult {
        n_pulses,
        detected_windows: tally.detected,
        sifted_bits: tally.sifted,
        errors: tally.errors,
        basis_error_windows: tally.basis_errors,
        q_mu_hat,
        e_mu_hat,
        coincidences: tally.stats,
        per_n: tally.per_n,
    }
}

/// Classify a stream of click patterns into coincidence tallies.
pub fn tally_coincidences(patterns: &[ClickPattern]) -> CoincidenceStats {
    let mut stats = CoincidenceStats::default();
    for p in patterns {
        match p.clicks.count_ones() {
            0 => {}
            1 => stats.singles += 1,
            2 => {
                if p.clicks & 0b0011 != 0 && p.clicks & 0b1100 != 0 {
                    stats.twofold_conjugate += 1;
                } else {
                    stats.twofold_same_basis += 1;
                }
            }
            3 => stats.threefold += 1,
            _ => stats.fourfold += 1,
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(dets: &[usize]) -> u8 {
        dets.iter().fold(0u8, |m, &d| m | (1 << d))
    }

    fn pattern(clicks: u8) -> ClickPattern {
        ClickPattern {
            window_index: 0,
            clicks,
            dark_flags: 0,
        }
    }

    #[test]
    fn coincidence_classification_examples() {
        // {H, D} is a conjugate-basis 2-fold
        let stats = tally_coincidences(&[pattern(mask(&[0, 2]))]);
        assert_eq!(stats.twofold_conjugate, 1);
        assert_eq!(stats.twofold_same_basis, 0);

        // {H} is a single
        let stats = tally_coincidences(&[pattern(mask(&[0]))]);
        assert_eq!(stats.singles, 1);
        assert_eq!(stats.monitored_total(), 0);

        // {H, V, D} is a 3-fold
        let stats = tally_coincidences(&[pattern(mask(&[0, 1, 2]))]);
        assert_eq!(stats.threefold, 1);

        // {H, V} and {D, A} are same-basis 2-folds
        let stats = tally_coincidences(&[pattern(mask(&[0, 1])), pattern(mask(&[2, 3]))]);
        assert_eq!(stats.twofold_same_basis, 2);

        // saturation
        let stats = tally_coincidences(&[pattern(0b1111)]);
        assert_eq!(stats.fourfold, 1);
    }

    #[test]
    fn run_is_reproducible_for_a_seed() {
        let source = SourceParams::new(0.41).unwrap();
        let channel = ChannelParams::new(0.7, 1e-5, 0.01, 0.6).unwrap();
        let a = run_simulation(&source, &channel, &EveStrategy::None, 7, 40_000).unwrap();
        let b = run_simulation(&source, &channel, &EveStrategy::None, 7, 40_000).unwrap();
        assert_eq!(a, b);
        let c = run_simulation(&source, &channel, &EveStrategy::None, 8, 40_000).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn worker_count_does_not_change_the_result() {
        let source = SourceParams::new(0.41).unwrap();
        let channel = ChannelParams::new(0.7, 1e-5, 0.01, 0.6).unwrap();
        let reference = run_simulation(&source, &channel, &EveStrategy::None, 11, 200_000).unwrap();
        for workers in [1usize, 4, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap();
            let result = pool
                .install(|| run_simulation(&source, &channel, &EveStrategy::None, 11, 200_000))
                .unwrap();
            assert_eq!(result, reference, "diverged with {workers} workers");
        }
    }

    #[test]
    fn vacuum_limit_produces_nothing() {
        let source = SourceParams::new(1e-4).unwrap();
        let channel = ChannelParams::new(0.7, 0.0, 0.01, 0.6).unwrap();
        let r = run_simulation(&source, &channel, &EveStrategy::None, 3, 200_000).unwrap();
        assert!(r.sifted_bits < 50);
        assert_eq!(r.coincidences.monitored_total(), 0);
        assert_eq!(r.errors, 0);
    }

    #[test]
    fn noiseless_channel_has_zero_qber() {
        let source = SourceParams::new(0.41).unwrap();
        let channel = ChannelParams::new(1.0, 0.0, 0.0, 1.0).unwrap();
        let r = run_simulation(&source, &channel, &EveStrategy::None, 5, 500_000).unwrap();
        assert!(r.sifted_bits > 0);
        assert_eq!(r.errors, 0);
        assert_eq!(r.e_mu_hat, 0.0);
    }

    #[test]
    fn multiphoton_pulses_split_into_conjugate_coincidences() {
        let source = SourceParams::new(0.41).unwrap();
        let channel = ChannelParams::new(0.9, 0.0, 0.0, 1.0).unwrap();
        let r = run_simulation(&source, &channel, &EveStrategy::None, 5, 500_000).unwrap();
        assert!(r.coincidences.twofold_conjugate > 0);
    }

    #[test]
    fn intercept_resend_fraction_zero_is_stream_identical_to_none() {
        let source = SourceParams::new(0.41).unwrap();
        let channel = ChannelParams::new(0.7, 1e-5, 0.01, 0.6).unwrap();
        let none = run_simulation(&source, &channel, &EveStrategy::None, 21, 100_000).unwrap();
        let idle = run_simulation(
            &source,
            &channel,
            &EveStrategy::InterceptResend { fraction: 0.0 },
            21,
            100_000,
        )
        .unwrap();
        assert_eq!(none, idle);
    }

    #[test]
    fn full_intercept_resend_induces_quarter_qber() {
        let source = SourceParams::new(0.41).unwrap();
        // clean detectors isolate the attack-induced error
        let channel = ChannelParams::new(0.7, 0.0, 0.0, 0.6).unwrap();
        let r = run_simulation(
            &source,
            &channel,
            &EveStrategy::InterceptResend { fraction: 1.0 },
            23,
            1_000_000,
        )
        .unwrap();
        let qber = r.sifted_qber();
        assert!((qber - 0.25).abs() < 0.01, "qber = {qber}");
    }

    #[test]
    fn intercept_resend_with_detector_error_shifts_qber() {
        // exhaustive two-basis bookkeeping: sifted windows split evenly
        // between Eve guessing right (error only from the detector flip)
        // and Eve guessing wrong (coin-flip port), so
        // QBER = E_det / 2 + 1/4.
        let e_det = 0.02;
        let source = SourceParams::new(0.41).unwrap();
        let channel = ChannelParams::new(0.7, 0.0, e_det, 0.6).unwrap();
        let r = run_simulation(
            &source,
            &channel,
            &EveStrategy::InterceptResend { fraction: 1.0 },
            29,
            1_000_000,
        )
        .unwrap();
        let expected = 0.25 + e_det / 2.0;
        assert!((r.sifted_qber() - expected).abs() < 0.01);
    }

    #[test]
    fn photon_splitting_blocks_singles_and_strips_one_photon() {
        let pulse = AlicePulse {
            pulse_index: 0,
            n_photons: 1,
            basis: Basis::Rectilinear,
            bit: false,
        };
        let strategy = EveStrategy::PhotonNumberSplitting {
            forward_eta: 1.0,
            forward_limit: None,
        };
        let mut rng = PulseRng::for_pulse(1, 0);
        let out = apply_eve(&pulse, &strategy, 0.7, &mut rng);
        assert_eq!(out.n_photons, 0);

        let multi = AlicePulse {
            n_photons: 3,
            ..pulse
        };
        let out = apply_eve(&multi, &strategy, 0.7, &mut rng);
        assert_eq!(out.n_photons, 2);
        assert_eq!(out.channel_eta, 1.0);
        assert_eq!(out.basis, multi.basis);
    }

    #[test]
    fn fully_blocking_splitter_leaves_only_dark_coincidences() {
        let source = SourceParams::new(0.41).unwrap();
        let channel = ChannelParams::new(0.7, 1e-4, 0.01, 0.6).unwrap();
        let blocking = EveStrategy::PhotonNumberSplitting {
            forward_eta: 1.0,
            forward_limit: Some(0),
        };
        let n = 2_000_000u64;
        let r = run_simulation(&source, &channel, &blocking, 31, n).unwrap();
        // every coincidence needs at least two dark counts
        let p_pair = 6.0 * channel.p_dark * channel.p_dark;
        let expected = n as f64 * p_pair;
        let observed = r.coincidences.monitored_total() as f64;
        assert!(
            (observed - expected).abs() < 3.0 * expected.sqrt() + 3.0,
            "observed {observed}, expected {expected}"
        );
        // detection rate collapses to the dark floor, nothing else arrives
        let p_any_dark = 1.0 - (1.0 - channel.p_dark).powi(4);
        let dark_floor = n as f64 * p_any_dark;
        assert!(
            (r.detected_windows as f64 - dark_floor).abs() < 4.0 * dark_floor.sqrt(),
            "detected {} vs dark floor {dark_floor}",
            r.detected_windows
        );
    }

    #[test]
    fn click_log_matches_tallies_and_order() {
        let source = SourceParams::new(0.41).unwrap();
        let channel = ChannelParams::new(0.7, 1e-5, 0.01, 0.6).unwrap();
        let (result, log) =
            run_simulation_with_log(&source, &channel, &EveStrategy::None, 13, 150_000).unwrap();
        assert_eq!(result.detected_windows as usize, log.len());
        assert!(log
            .windows(2)
            .all(|w| w[0].pattern.window_index < w[1].pattern.window_index));
        let patterns: Vec<ClickPattern> = log.iter().map(|r| r.pattern).collect();
        let stats = tally_coincidences(&patterns);
        assert_eq!(stats, result.coincidences);
        // dark flags are always a subset of the clicks
        assert!(log
            .iter()
            .all(|r| r.pattern.dark_flags & !r.pattern.clicks == 0));
    }

    #[test]
    fn invalid_parameters_fail_before_sampling() {
        let source = SourceParams::new(0.41).unwrap();
        let channel = ChannelParams::new(0.7, 1e-5, 0.01, 0.6).unwrap();
        assert!(run_simulation(&source, &channel, &EveStrategy::None, 1, 0).is_err());
        let bad_eve = EveStrategy::InterceptResend { fraction: 1.5 };
        assert!(run_simulation(&source, &channel, &bad_eve, 1, 10).is_err());
        let bad_source = SourceParams {
            mu: -1.0,
            repetition_rate_hz: 80e6,
        };
        assert!(run_simulation(&bad_source, &channel, &EveStrategy::None, 1, 10).is_err());
    }
}
