//! Experiment configuration: a single human-editable TOML file with
//! defaulted sections, plus `--override key=value` edits applied before
//! deserialization. Physical quantities carry their units in the key names.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cdqkd_core::channel::{ChannelParams, LinkBudget, YieldConvention};
use cdqkd_core::keyrates::RateKind;
use cdqkd_core::monitor::TestSides;
use cdqkd_core::sim::{EveStrategy, SourceParams};

use crate::CliError;

/// Experiment mode; the CLI subcommand selects one, a config file may pin
/// it redundantly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Key rate versus channel length, one curve per intensity.
    #[serde(alias = "analytic-sweep")]
    Fig2,
    /// Coincidence-detection versus decoy-state rate over distance.
    Fig3,
    /// Optimal mean photon number over distance.
    #[serde(alias = "optimal-mu")]
    Fig4,
    /// Expected versus simulated coincidence counts per intensity.
    Table3,
    /// Abort rate versus threshold under each eavesdropper strategy.
    EveRoc,
    /// Single Monte Carlo run.
    MonteCarlo,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Fig2 => "fig2",
            Mode::Fig3 => "fig3",
            Mode::Fig4 => "fig4",
            Mode::Table3 => "table3",
            Mode::EveRoc => "eve-roc",
            Mode::MonteCarlo => "monte-carlo",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional mode pin; must match the subcommand when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub source: SourceSection,
    pub channel: ChannelSection,
    pub link: LinkSection,
    pub distance: DistanceSection,
    pub mu_search: MuSearchSection,
    pub rates: RatesSection,
    pub monte_carlo: MonteCarloSection,
    pub eve: EveStrategy,
    pub eve_roc: EveRocSection,
    pub monitor: MonitorSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: None,
            source: SourceSection::default(),
            channel: ChannelSection::default(),
            link: LinkSection::default(),
            distance: DistanceSection::default(),
            mu_search: MuSearchSection::default(),
            rates: RatesSection::default(),
            monte_carlo: MonteCarloSection::default(),
            eve: EveStrategy::None,
            eve_roc: EveRocSection::default(),
            monitor: MonitorSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    /// Signal intensity for single-intensity modes.
    pub mu: f64,
    /// Intensity list for per-curve sweeps and the coincidence table.
    pub mu_values: Vec<f64>,
    pub repetition_rate_hz: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            mu: cdqkd_core::calibration::REFERENCE_MU,
            mu_values: cdqkd_core::calibration::COINCIDENCE_MU_VALUES.to_vec(),
            repetition_rate_hz: 80e6,
        }
    }
}

impl SourceSection {
    pub fn params(&self) -> SourceParams {
        SourceParams {
            mu: self.mu,
            repetition_rate_hz: self.repetition_rate_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub eta: f64,
    pub p_dark: f64,
    pub e_detector: f64,
    pub eta_detector: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let reference = cdqkd_core::calibration::reference_channel();
        ChannelSection {
            eta: reference.eta,
            p_dark: reference.p_dark,
            e_detector: reference.e_detector,
            eta_detector: reference.eta_detector,
        }
    }
}

impl ChannelSection {
    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            eta: self.eta,
            p_dark: self.p_dark,
            e_detector: self.e_detector,
            eta_detector: self.eta_detector,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub eta0: f64,
    pub alpha_db_per_km: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection {
            eta0: cdqkd_core::calibration::REFERENCE_ETA,
            alpha_db_per_km: 0.2,
        }
    }
}

impl LinkSection {
    pub fn budget(&self) -> LinkBudget {
        LinkBudget {
            eta0: self.eta0,
            alpha_db_per_km: self.alpha_db_per_km,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceSection {
    pub start_km: f64,
    pub stop_km: f64,
    pub points: usize,
}

impl Default for DistanceSection {
    fn default() -> Self {
        DistanceSection {
            start_km: 0.0,
            stop_km: 200.0,
            points: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuSearchSection {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for MuSearchSection {
    fn default() -> Self {
        MuSearchSection {
            start: 0.05,
            stop: 2.0,
            points: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSection {
    pub f_ec: f64,
    pub yield_convention: YieldConvention,
    /// Formula plotted by the per-intensity sweep.
    pub formula: RateKind,
}

impl Default for RatesSection {
    fn default() -> Self {
        RatesSection {
            f_ec: cdqkd_core::keyrates::DEFAULT_EC_INEFFICIENCY,
            yield_convention: YieldConvention::Halved,
            formula: RateKind::Cd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub n_pulses: u64,
    pub seed: u64,
    /// Emit one record per non-empty detection window.
    pub click_log: bool,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            n_pulses: 1_000_000,
            seed: 1,
            click_log: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EveRocSection {
    pub trials: u32,
    pub n_pulses: u64,
    pub thresholds: Vec<f64>,
    pub strategies: Vec<EveStrategy>,
}

impl Default for EveRocSection {
    fn default() -> Self {
        EveRocSection {
            trials: 100,
            n_pulses: 500_000,
            thresholds: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0],
            strategies: vec![
                EveStrategy::None,
                EveStrategy::InterceptResend { fraction: 1.0 },
                EveStrategy::PhotonNumberSplitting {
                    forward_eta: 1.0,
                    forward_limit: None,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSection {
    pub n_pulses: u64,
    pub threshold_sigma: f64,
    pub sides: TestSides,
}

impl Default for MonitorSection {
    fn default() -> Self {
        MonitorSection {
            n_pulses: cdqkd_core::calibration::COINCIDENCE_FIT_PULSES,
            threshold_sigma: 5.0,
            sides: TestSides::TwoSided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
        }
    }
}

/// Load, override and fully default a configuration.
///
/// `path` may point at a plain config file or at a manifest written by a
/// previous run (its `[config]` table is used), which makes reruns exact.
pub fn load(
    path: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<ExperimentConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", p.display())]))?;
            let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
                CliError::Config(vec![format!("{}: {e}", p.display())])
            })?;
            // manifests nest the effective configuration under [config]
            match (table.contains_key("run"), table.get("config")) {
                (true, Some(toml::Value::Table(inner))) => inner.clone(),
                _ => table,
            }
        }
        None => toml::Table::new(),
    };

    let mut issues = Vec::new();
    for entry in overrides {
        if let Err(msg) = apply_override(&mut table, entry) {
            issues.push(msg);
        }
    }
    if !issues.is_empty() {
        return Err(CliError::Config(issues));
    }

    let mut config: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Config(vec![format!("configuration: {e}")]))?;

    if let Some(seed) = seed {
        config.monte_carlo.seed = seed;
    }
    if let Some(out) = out {
        config.output.dir = out.to_path_buf();
    }
    Ok(config)
}

/// Apply one `section.key=value` edit to the raw TOML table. The value is
/// parsed with full TOML syntax, so strings need quotes and arrays work.
fn apply_override(table: &mut toml::Table, entry: &str) -> Result<(), String> {
    let (key, value) = entry
        .split_once('=')
        .ok_or_else(|| format!("override '{entry}' is not of the form key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(format!("override '{entry}' has an empty key"));
    }
    let parsed: toml::Table = format!("value = {}", value.trim())
        .parse()
        .or_else(|_| format!("value = \"{}\"", value.trim()).parse::<toml::Table>())
        .map_err(|e| format!("override '{entry}': {e}"))?;
    let value = parsed["value"].clone();

    let mut node = table;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| format!("override '{entry}': '{part}' is not a table"))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Validate every field, returning the complete list of failures rather
/// than stopping at the first.
pub fn validate(config: &ExperimentConfig) -> Vec<String> {
    let mut issues: Vec<String> = Vec::new();
    fn check(issues: &mut Vec<String>, ok: bool, field: &str, msg: String) {
        if !ok {
            issues.push(format!("{field}: {msg}"));
        }
    }

    let unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);

    check(
        &mut issues,
        config.source.mu.is_finite() && config.source.mu >= 0.0,
        "source.mu",
        format!("must be >= 0, got {}", config.source.mu),
    );
    check(
        &mut issues,
        !config.source.mu_values.is_empty(),
        "source.mu_values",
        "must be nonempty".into(),
    );
    for (i, &mu) in config.source.mu_values.iter().enumerate() {
        check(
            &mut issues,
            mu.is_finite() && mu >= 0.0,
            &format!("source.mu_values[{i}]"),
            format!("must be >= 0, got {mu}"),
        );
    }
    check(
        &mut issues,
        config.source.repetition_rate_hz.is_finite() && config.source.repetition_rate_hz > 0.0,
        "source.repetition_rate_hz",
        format!("must be > 0, got {}", config.source.repetition_rate_hz),
    );

    check(
        &mut issues,
        unit(config.channel.eta),
        "channel.eta",
        format!("must lie in [0, 1], got {}", config.channel.eta),
    );
    check(
        &mut issues,
        unit(config.channel.p_dark),
        "channel.p_dark",
        format!("must lie in [0, 1], got {}", config.channel.p_dark),
    );
    check(
        &mut issues,
        config.channel.e_detector.is_finite() && (0.0..=0.5).contains(&config.channel.e_detector),
        "channel.e_detector",
        format!("must lie in [0, 0.5], got {}", config.channel.e_detector),
    );
    check(
        &mut issues,
        unit(config.channel.eta_detector),
        "channel.eta_detector",
        format!("must lie in [0, 1], got {}", config.channel.eta_detector),
    );

    check(
        &mut issues,
        unit(config.link.eta0),
        "link.eta0",
        format!("must lie in [0, 1], got {}", config.link.eta0),
    );
    check(
        &mut issues,
        config.link.alpha_db_per_km.is_finite() && config.link.alpha_db_per_km >= 0.0,
        "link.alpha_db_per_km",
        format!("must be >= 0, got {}", config.link.alpha_db_per_km),
    );

    check(
        &mut issues,
        config.distance.start_km.is_finite() && config.distance.start_km >= 0.0,
        "distance.start_km",
        format!("must be >= 0, got {}", config.distance.start_km),
    );
    check(
        &mut issues,
        config.distance.stop_km > config.distance.start_km,
        "distance.stop_km",
        format!(
            "must exceed start_km = {}, got {}",
            config.distance.start_km, config.distance.stop_km
        ),
    );
    check(
        &mut issues,
        config.distance.points >= 2,
        "distance.points",
        format!("must be >= 2, got {}", config.distance.points),
    );

    check(
        &mut issues,
        config.mu_search.start > 0.0 && config.mu_search.start <= 2.0,
        "mu_search.start",
        format!("must lie in (0, 2], got {}", config.mu_search.start),
    );
    check(
        &mut issues,
        config.mu_search.stop > config.mu_search.start && config.mu_search.stop <= 2.0,
        "mu_search.stop",
        format!("must lie in (start, 2], got {}", config.mu_search.stop),
    );
    check(
        &mut issues,
        config.mu_search.points >= 2,
        "mu_search.points",
        format!("must be >= 2, got {}", config.mu_search.points),
    );

    check(
        &mut issues,
        config.rates.f_ec.is_finite() && config.rates.f_ec >= 1.0,
        "rates.f_ec",
        format!("must be >= 1, got {}", config.rates.f_ec),
    );

    check(
        &mut issues,
        config.monte_carlo.n_pulses >= 1,
        "monte_carlo.n_pulses",
        "must be >= 1".into(),
    );

    if let Err(e) = config.eve.validate() {
        issues.push(format!("eve: {e}"));
    }

    check(
        &mut issues,
        config.eve_roc.trials >= 1,
        "eve_roc.trials",
        "must be >= 1".into(),
    );
    check(
        &mut issues,
        config.eve_roc.n_pulses >= 1,
        "eve_roc.n_pulses",
        "must be >= 1".into(),
    );
    check(
        &mut issues,
        !config.eve_roc.thresholds.is_empty(),
        "eve_roc.thresholds",
        "must be nonempty".into(),
    );
    for (i, &t) in config.eve_roc.thresholds.iter().enumerate() {
        check(
            &mut issues,
            t.is_finite() && t > 0.0,
            &format!("eve_roc.thresholds[{i}]"),
            format!("must be > 0, got {t}"),
        );
    }
    for (i, strategy) in config.eve_roc.strategies.iter().enumerate() {
        if let Err(e) = strategy.validate() {
            issues.push(format!("eve_roc.strategies[{i}]: {e}"));
        }
    }
    check(
        &mut issues,
        !config.eve_roc.strategies.is_empty(),
        "eve_roc.strategies",
        "must be nonempty".into(),
    );

    check(
        &mut issues,
        config.monitor.n_pulses >= 1,
        "monitor.n_pulses",
        "must be >= 1".into(),
    );
    check(
        &mut issues,
        config.monitor.threshold_sigma.is_finite() && config.monitor.threshold_sigma > 0.0,
        "monitor.threshold_sigma",
        format!("must be > 0, got {}", config.monitor.threshold_sigma),
    );

    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let config = ExperimentConfig::default();
        assert!(validate(&config).is_empty());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config = ExperimentConfig {
            mode: Some(Mode::Fig3),
            eve: EveStrategy::InterceptResend { fraction: 0.5 },
            ..ExperimentConfig::default()
        };
        let text = toml::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let text = "[source]\nmu = 0.2\n[channel]\neta = 0.5\n";
        let config: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(config.source.mu, 0.2);
        assert_eq!(config.channel.eta, 0.5);
        assert_eq!(config.channel.e_detector, 0.01);
        assert!(validate(&config).is_empty());
    }

    #[test]
    fn validation_collects_every_failure() {
        let mut config = ExperimentConfig::default();
        config.source.mu = -0.1;
        config.channel.eta_detector = 1.5;
        config.rates.f_ec = 0.5;
        let issues = validate(&config);
        assert_eq!(issues.len(), 3, "{issues:?}");
        assert!(issues.iter().any(|m| m.starts_with("source.mu:")));
        assert!(issues
            .iter()
            .any(|m| m.starts_with("channel.eta_detector:")));
        assert!(issues.iter().any(|m| m.starts_with("rates.f_ec:")));
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let mut table = toml::Table::new();
        apply_override(&mut table, "channel.eta=0.25").unwrap();
        apply_override(&mut table, "eve.strategy=\"pns\"").unwrap();
        apply_override(&mut table, "source.mu_values=[0.1, 0.2]").unwrap();
        let config: ExperimentConfig = toml::Value::Table(table).try_into().unwrap();
        assert_eq!(config.channel.eta, 0.25);
        assert!(matches!(
            config.eve,
            EveStrategy::PhotonNumberSplitting { .. }
        ));
        assert_eq!(config.source.mu_values, vec![0.1, 0.2]);
    }

    #[test]
    fn bare_string_overrides_are_quoted_automatically() {
        let mut table = toml::Table::new();
        apply_override(&mut table, "eve.strategy=intercept-resend").unwrap();
        let config: ExperimentConfig = toml::Value::Table(table).try_into().unwrap();
        assert!(matches!(config.eve, EveStrategy::InterceptResend { .. }));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[channel]\netaa = 0.5\n";
        assert!(toml::from_str::<ExperimentConfig>(text).is_err());
    }
}
