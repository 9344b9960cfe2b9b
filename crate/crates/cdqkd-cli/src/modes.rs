//! Implementations of the experiment modes. Every mode writes its CSV
//! outputs plus a manifest into the output directory and returns the list
//! of files it produced.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cdqkd_core::channel::gain_profile;
use cdqkd_core::keyrates::{
    evaluate_rate, linspace, optimal_mu, rate_cd, rate_decoy, KeyRateReport, RateKind,
};
use cdqkd_core::monitor::{
    abort_test_sided, coincidence_table, expected_coincidences, AbortDecision, Verdict,
};
use cdqkd_core::sim::rng::derive_seed;
use cdqkd_core::sim::{run_simulation, run_simulation_with_log, Basis, EveStrategy};
use cdqkd_core::stats::{cd_coefficients, PhotonDistribution};

use crate::config::{ExperimentConfig, Mode};
use crate::csvout::{num, CsvFile};
use crate::{manifest, CliError};

pub fn run(mode: Mode, config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let dir = config.output.dir.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;

    let files = match mode {
        Mode::Fig2 => fig2(config, &dir)?,
        Mode::Fig3 => fig3(config, &dir)?,
        Mode::Fig4 => fig4(config, &dir)?,
        Mode::Table3 => table3(config, &dir)?,
        Mode::EveRoc => eve_roc(config, &dir)?,
        Mode::MonteCarlo => monte_carlo(config, &dir)?,
    };

    let names: Vec<String> = files
        .iter()
        .map(|p| {
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
        .collect();
    manifest::write(&dir, mode, config, &names)?;

    let mut all = files;
    all.push(dir.join("manifest.toml"));
    Ok(all)
}

fn distances(config: &ExperimentConfig) -> Vec<f64> {
    linspace(
        config.distance.start_km,
        config.distance.stop_km,
        config.distance.points,
    )
}

fn mu_grid(config: &ExperimentConfig) -> Vec<f64> {
    linspace(
        config.mu_search.start,
        config.mu_search.stop,
        config.mu_search.points,
    )
}

/// Key rate versus channel length, one curve per source intensity.
fn fig2(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let path = dir.join("fig2.csv");
    let mut csv = CsvFile::create(&path)?;
    csv.row(["mu", "length_km", "eta", "rate_per_pulse", "secure"])?;

    let budget = config.link.budget();
    let receiver = config.channel.params();
    for &mu in &config.source.mu_values {
        for &length in &distances(config) {
            let channel = budget.channel_at(&receiver, length)?;
            let rate = evaluate_rate(
                config.rates.formula,
                mu,
                &channel,
                config.rates.f_ec,
                config.rates.yield_convention,
            )?;
            csv.row([
                num(mu),
                num(length),
                num(channel.eta),
                num(rate.per_pulse),
                rate.secure.to_string(),
            ])?;
        }
    }
    csv.finish()?;
    Ok(vec![path])
}

/// Coincidence-detection versus decoy-state rate over distance.
fn fig3(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let path = dir.join("fig3.csv");
    let mut csv = CsvFile::create(&path)?;
    csv.row([
        "length_km",
        "eta",
        "rate_cd",
        "rate_decoy",
        "cd_secure",
        "decoy_secure",
    ])?;

    let budget = config.link.budget();
    let receiver = config.channel.params();
    let source = PhotonDistribution::new(config.source.mu)?;
    let coeffs = cd_coefficients();
    for &length in &distances(config) {
        let channel = budget.channel_at(&receiver, length)?;
        let profile = gain_profile(&source, &channel, config.rates.yield_convention)?;
        let cd = rate_cd(&profile, &coeffs, config.rates.f_ec)?;
        let decoy = rate_decoy(
            &profile,
            cdqkd_core::keyrates::SIFTING_FACTOR,
            config.rates.f_ec,
        )?;
        csv.row([
            num(length),
            num(channel.eta),
            num(cd.per_pulse),
            num(decoy.per_pulse),
            cd.secure.to_string(),
            decoy.secure.to_string(),
        ])?;
    }
    csv.finish()?;
    Ok(vec![path])
}

/// Optimal mean photon number over distance for both protocols.
fn fig4(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let path = dir.join("fig4.csv");
    let mut csv = CsvFile::create(&path)?;
    csv.row([
        "length_km",
        "eta",
        "mu_star_cd",
        "rate_cd",
        "cd_secure",
        "mu_star_decoy",
        "rate_decoy",
        "decoy_secure",
    ])?;

    let budget = config.link.budget();
    let receiver = config.channel.params();
    let grid = mu_grid(config);
    for &length in &distances(config) {
        let channel = budget.channel_at(&receiver, length)?;
        let cd = optimal_mu(
            RateKind::Cd,
            &channel,
            config.rates.f_ec,
            config.rates.yield_convention,
            &grid,
        )?;
        let decoy = optimal_mu(
            RateKind::Decoy,
            &channel,
            config.rates.f_ec,
            config.rates.yield_convention,
            &grid,
        )?;
        csv.row([
            num(length),
            num(channel.eta),
            num(cd.mu),
            num(cd.rate.per_pulse),
            cd.rate.secure.to_string(),
            num(decoy.mu),
            num(decoy.rate.per_pulse),
            decoy.rate.secure.to_string(),
        ])?;
    }
    csv.finish()?;
    Ok(vec![path])
}

fn log_abort(context: &str, decision: &AbortDecision) {
    let ts = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    eprintln!(
        "abort-decision ts={ts} {context} z={:.3} threshold={} verdict={}",
        decision.z_score,
        decision.threshold,
        match decision.verdict {
            Verdict::Continue => "continue",
            Verdict::Abort => "abort",
        }
    );
}

/// Expected versus simulated coincidence counts across the intensity list.
fn table3(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let channel = config.channel.params();
    let rows = coincidence_table(
        &config.source.mu_values,
        &channel,
        config.monitor.n_pulses,
        config.monte_carlo.seed,
    )?;

    let path = dir.join("table3.csv");
    let mut csv = CsvFile::create(&path)?;
    csv.row([
        "mu",
        "integration_s",
        "expected",
        "actual",
        "sigma",
        "z",
        "verdict",
    ])?;
    let integration = config.monitor.n_pulses as f64 / config.source.repetition_rate_hz;
    for row in &rows {
        let verdict = if row.z.abs() > config.monitor.threshold_sigma {
            "abort"
        } else {
            "continue"
        };
        csv.row([
            num(row.mu),
            num(integration),
            num(row.expected),
            row.actual.to_string(),
            num(row.sigma),
            num(row.z),
            verdict.to_string(),
        ])?;
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        eprintln!(
            "abort-decision ts={ts} mu={} z={:.3} threshold={} verdict={verdict}",
            row.mu, row.z, config.monitor.threshold_sigma
        );
    }
    csv.finish()?;
    Ok(vec![path])
}

/// Abort rate versus threshold for each configured eavesdropper strategy.
fn eve_roc(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let channel = config.channel.params();
    let source = config.source.params();
    let n_pulses = config.eve_roc.n_pulses;
    let expected = expected_coincidences(&source, &channel, n_pulses)?;

    let path = dir.join("eve_roc.csv");
    let mut csv = CsvFile::create(&path)?;
    csv.row([
        "strategy",
        "threshold_sigma",
        "trials",
        "aborts",
        "abort_rate",
    ])?;

    for (s_idx, strategy) in config.eve_roc.strategies.iter().enumerate() {
        let mut z_scores = Vec::with_capacity(config.eve_roc.trials as usize);
        for trial in 0..u64::from(config.eve_roc.trials) {
            let seed = derive_seed(config.monte_carlo.seed, ((s_idx as u64) << 32) | trial);
            let result = run_simulation(&source, &channel, strategy, seed, n_pulses)?;
            let decision = abort_test_sided(
                &expected,
                &result.coincidences,
                config.monitor.threshold_sigma,
                config.monitor.sides,
            )?;
            z_scores.push(decision.z_score);
        }
        for &threshold in &config.eve_roc.thresholds {
            let aborts = z_scores
                .iter()
                .filter(|&&z| match config.monitor.sides {
                    cdqkd_core::monitor::TestSides::TwoSided => z.abs() > threshold,
                    cdqkd_core::monitor::TestSides::OneSidedLow => z < -threshold,
                })
                .count();
            csv.row([
                strategy_label(strategy),
                num(threshold),
                config.eve_roc.trials.to_string(),
                aborts.to_string(),
                num(aborts as f64 / config.eve_roc.trials as f64),
            ])?;
        }
    }
    csv.finish()?;
    Ok(vec![path])
}

fn strategy_label(strategy: &EveStrategy) -> String {
    match strategy {
        EveStrategy::None => "none".into(),
        EveStrategy::InterceptResend { fraction } => {
            format!("intercept-resend(fraction={fraction})")
        }
        EveStrategy::PhotonNumberSplitting {
            forward_eta,
            forward_limit,
        } => match forward_limit {
            Some(cap) => format!("pns(forward_eta={forward_eta},forward_limit={cap})"),
            None => format!("pns(forward_eta={forward_eta})"),
        },
    }
}

fn mask_string(mask: u8) -> String {
    (0..4)
        .map(|i| {
            if mask >> i & 1 == 1 {
                cdqkd_core::sim::DETECTOR_NAMES[i]
            } else {
                "."
            }
        })
        .collect()
}

/// One Monte Carlo run: summary statistics plus the optional click log.
fn monte_carlo(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let channel = config.channel.params();
    let source = config.source.params();
    let n_pulses = config.monte_carlo.n_pulses;
    let seed = config.monte_carlo.seed;

    let mut files = Vec::new();
    let (result, log) = if config.monte_carlo.click_log {
        let (result, log) =
            run_simulation_with_log(&source, &channel, &config.eve, seed, n_pulses)?;
        (result, Some(log))
    } else {
        (
            run_simulation(&source, &channel, &config.eve, seed, n_pulses)?,
            None,
        )
    };

    let expected = expected_coincidences(&source, &channel, n_pulses)?;
    let decision = abort_test_sided(
        &expected,
        &result.coincidences,
        config.monitor.threshold_sigma,
        config.monitor.sides,
    )?;
    log_abort("run=monte-carlo", &decision);

    let rates = {
        let distribution = PhotonDistribution::new(source.mu)?;
        let profile = gain_profile(&distribution, &channel, config.rates.yield_convention)?;
        KeyRateReport::evaluate(&profile, config.rates.f_ec)?
    };

    let path = dir.join("summary.csv");
    let mut csv = CsvFile::create(&path)?;
    csv.row([
        "n_pulses",
        "detected_windows",
        "sifted_bits",
        "errors",
        "sifted_qber",
        "q_mu_hat",
        "e_mu_hat",
        "singles",
        "twofold_same_basis",
        "twofold_conjugate",
        "threefold",
        "fourfold",
        "expected_coincidences",
        "z",
        "verdict",
        "rate_cd_analytic",
        "rate_decoy_analytic",
    ])?;
    csv.row([
        result.n_pulses.to_string(),
        result.detected_windows.to_string(),
        result.sifted_bits.to_string(),
        result.errors.to_string(),
        num(result.sifted_qber()),
        num(result.q_mu_hat),
        num(result.e_mu_hat),
        result.coincidences.singles.to_string(),
        result.coincidences.twofold_same_basis.to_string(),
        result.coincidences.twofold_conjugate.to_string(),
        result.coincidences.threefold.to_string(),
        result.coincidences.fourfold.to_string(),
        num(expected.total),
        num(decision.z_score),
        match decision.verdict {
            Verdict::Continue => "continue".to_string(),
            Verdict::Abort => "abort".to_string(),
        },
        num(rates.cd.per_pulse),
        num(rates.decoy.per_pulse),
    ])?;
    csv.finish()?;
    files.push(path);

    if let Some(log) = log {
        let path = dir.join("clicks.csv");
        let mut csv = CsvFile::create(&path)?;
        csv.row(["window_index", "clicks", "dark_clicks", "basis", "bit"])?;
        for record in &log {
            csv.row([
                record.pattern.window_index.to_string(),
                mask_string(record.pattern.clicks),
                mask_string(record.pattern.dark_flags),
                match record.basis {
                    Basis::Rectilinear => "rect".to_string(),
                    Basis::Diagonal => "diag".to_string(),
                },
                u8::from(record.bit).to_string(),
            ])?;
        }
        csv.finish()?;
        files.push(path);
    }

    Ok(files)
}
