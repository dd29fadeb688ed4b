use std::fs;
use std::path::{Path, PathBuf};

use anyonrng_core::bound::fcurve::FCURVE_FORMAT;
use anyonrng_core::bound::{build_fcurve, FCurveTable, HierarchyLevel, NpaOptions, SdpOptions};
use anyonrng_core::certify::{
    certify as certify_records, default_thresholds, log_k_grid, net_randomness_curve, CertificationParams,
    EntropyCertificate, InputFamily, DEFAULT_DELTA, DEFAULT_EPSILON_PRIME,
};
use anyonrng_core::extract::{bits_to_bytes, bits_to_hex, extract as toeplitz, hex_to_bits, output_length, raw_bits, seed_from_u64, seed_length, ToeplitzSeed};
use anyonrng_core::mabk::estimate;
use anyonrng_core::trials::{read_records_csv, run_trials, write_records_csv, NoiseSpec, SettingsDistribution, TrialRecord};
use anyonrng_core::validate::physics_checks;
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::CliError;

/// Version of every JSON document the CLI writes.
pub const OUTPUT_FORMAT: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    format_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    result: T,
}

fn json<T: Serialize>(command: &str, config: &RunConfig, result: T) -> String {
    let env = Envelope { format_version: OUTPUT_FORMAT, command, config, result };
    let mut s = serde_json::to_string_pretty(&env).expect("output serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes `text` to `--out` or stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// CSV files carry no metadata, so the config goes next to them.
fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn noise(cfg: &mut RunConfig) -> Result<NoiseSpec, CliError> {
    let p = *cfg.noise_p.get_or_insert(0.0);
    Ok(if p == 0.0 { NoiseSpec::none() } else { NoiseSpec::depolarizing(p)? })
}

fn distribution(alpha: Option<f64>, k: u64) -> Result<SettingsDistribution, CliError> {
    Ok(match alpha {
        Some(a) => SettingsDistribution::biased(k, a)?,
        None => SettingsDistribution::uniform(),
    })
}

fn read_records(cfg: &RunConfig) -> Result<Vec<TrialRecord>, CliError> {
    let path = RunConfig::require(&cfg.records, "records")?;
    let file = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let records = read_records_csv(file)?;
    if records.is_empty() {
        return Err(CliError::Usage(format!("{} holds no trials", path.display())));
    }
    Ok(records)
}

fn read_fcurve(cfg: &RunConfig) -> Result<FCurveTable, CliError> {
    let path = RunConfig::require(&cfg.fcurve, "fcurve")?;
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let bad = |e: String| CliError::Core(anyonrng_core::Error::DataIntegrity(format!("{}: {e}", path.display())));
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        // Either a bare table or an `fcurve` command envelope.
        let table = v.get("result").cloned().unwrap_or(v);
        let t: FCurveTable = serde_json::from_value(table).map_err(|e| bad(e.to_string()))?;
        if t.format_version != FCURVE_FORMAT {
            return Err(bad(format!("unsupported f-curve format {}", t.format_version)));
        }
        Ok(t)
    } else {
        Ok(FCurveTable::from_csv(&text, cfg.level.unwrap_or_default())?)
    }
}

pub fn simulate(mut cfg: RunConfig) -> Result<(), CliError> {
    let k = RunConfig::require(&cfg.trials, "trials")?;
    if k == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let seed = *cfg.seed.get_or_insert(0);
    let noise = noise(&mut cfg)?;
    let dist = distribution(cfg.alpha, k)?;
    let records = run_trials(k, &dist, &noise, seed)?;
    let est = estimate(&records, &dist)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        estimate: &'a anyonrng_core::mabk::ViolationEstimate,
        setting_probabilities: [f64; 4],
        device_violation: f64,
    }
    let summary = Summary { estimate: &est, setting_probabilities: *dist.probabilities(), device_violation: noise.expected_violation() };
    let text = json("simulate", &cfg, &summary);
    if let Some(out) = &cfg.out {
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf)?;
        write_file(out, &buf)?;
        write_file(&sidecar(out), text.as_bytes())?;
    }
    eprintln!("L̂ = {}", est.l_hat);
    print!("{text}");
    Ok(())
}

pub fn fcurve(mut cfg: RunConfig) -> Result<(), CliError> {
    let level = *cfg.level.get_or_insert(HierarchyLevel::default());
    let grid = *cfg.grid.get_or_insert(21);
    let tolerance = *cfg.tolerance.get_or_insert(SdpOptions::default().tolerance);
    let dedup = *cfg.dedup.get_or_insert(false);
    let format = *cfg.format.get_or_insert(Format::Json);
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(CliError::Usage("--tolerance must lie in (0, 1)".into()));
    }
    let opts = NpaOptions {
        level,
        sdp: SdpOptions { tolerance, ..SdpOptions::default() },
        deduplicate: dedup,
        ..NpaOptions::default()
    };
    let table = build_fcurve(grid, &opts)?;
    let text = match format {
        Format::Json => json("fcurve", &cfg, &table),
        Format::Csv => table.to_csv(),
    };
    emit(cfg.out.as_deref(), &text)?;
    if let (Format::Csv, Some(out)) = (format, &cfg.out) {
        write_file(&sidecar(out), json("fcurve", &cfg, &table).as_bytes())?;
    }
    Ok(())
}

fn certificate(cfg: &mut RunConfig, records: &[TrialRecord]) -> Result<EntropyCertificate, CliError> {
    let fcurve = read_fcurve(cfg)?;
    let k = records.len() as u64;
    if let Some(t) = cfg.trials {
        if t != k {
            return Err(CliError::Usage(format!("--trials {t} does not match the {k} recorded trials")));
        }
    }
    cfg.trials = Some(k);
    let dist = distribution(cfg.alpha, k)?;
    let delta = *cfg.delta.get_or_insert(DEFAULT_DELTA);
    let eps = *cfg.epsilon_prime.get_or_insert(DEFAULT_EPSILON_PRIME);
    let params = CertificationParams::new(k, dist.r(), delta, eps, default_thresholds())?;
    let est = estimate(records, &dist)?;
    Ok(certify_records(&est, &params, &fcurve, &dist)?)
}

pub fn certify(mut cfg: RunConfig) -> Result<(), CliError> {
    let records = read_records(&cfg)?;
    let cert = certificate(&mut cfg, &records)?;
    eprintln!("L̂ = {}, certified min-entropy {:.3} bits", cert.estimate.l_hat, cert.bound_bits);
    emit(cfg.out.as_deref(), &json("certify", &cfg, &cert))
}

pub fn expand(mut cfg: RunConfig) -> Result<(), CliError> {
    let fcurve = read_fcurve(&cfg)?;
    let family = if *cfg.uniform.get_or_insert(false) {
        InputFamily::Uniform
    } else {
        let alpha = *cfg.alpha.get_or_insert(10.0);
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(CliError::Usage(format!("--alpha must be positive, got {alpha}")));
        }
        InputFamily::Biased(alpha)
    };
    let l_m = *cfg.l_m.get_or_insert(3.9);
    let k_min = *cfg.k_min.get_or_insert(1_000);
    let k_max = *cfg.k_max.get_or_insert(10_000_000);
    let points = *cfg.k_points.get_or_insert(41);
    let delta = *cfg.delta.get_or_insert(DEFAULT_DELTA);
    let eps = *cfg.epsilon_prime.get_or_insert(DEFAULT_EPSILON_PRIME);
    let format = *cfg.format.get_or_insert(Format::Csv);
    let grid = log_k_grid(k_min, k_max, points)?;
    let params = CertificationParams::new(grid[0], 0.25, delta, eps, default_thresholds())?;
    let curve = net_randomness_curve(&grid, family, l_m, &params, &fcurve)?;
    match curve.crossing {
        Some(k) => eprintln!("net randomness becomes positive at k = {k}"),
        None => eprintln!("net randomness stays non-positive on this grid"),
    }
    let text = match format {
        Format::Json => json("expand", &cfg, &curve),
        Format::Csv => curve.to_csv(),
    };
    emit(cfg.out.as_deref(), &text)?;
    if let (Format::Csv, Some(out)) = (format, &cfg.out) {
        write_file(&sidecar(out), json("expand", &cfg, &curve).as_bytes())?;
    }
    Ok(())
}

pub fn extract(mut cfg: RunConfig) -> Result<(), CliError> {
    let records = read_records(&cfg)?;
    let cert = certificate(&mut cfg, &records)?;
    let security_bits = *cfg.security_bits.get_or_insert(64.0);
    if !(security_bits >= 0.0 && security_bits.is_finite()) {
        return Err(CliError::Usage("--security-bits must be non-negative".into()));
    }
    let raw = raw_bits(&records);
    let n = raw.len();
    let m = output_length(cert.bound_bits, (-security_bits).exp2())?.min(n);
    let seed = match &cfg.seed_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let want = seed_length(n, m);
            let bytes = text.trim().len() / 2;
            if bytes != want.div_ceil(8) {
                return Err(CliError::Usage(format!(
                    "seed file {} holds {bytes} bytes, need {} for {want} seed bits",
                    path.display(),
                    want.div_ceil(8)
                )));
            }
            ToeplitzSeed::for_shape(hex_to_bits(&text, want)?, n, m)?
        }
        None => {
            let s = *cfg.seed.get_or_insert(0);
            eprintln!("warning: no --seed-file; expanding the extractor seed from --seed {s}");
            seed_from_u64(s, n, m)
        }
    };
    if m == 0 {
        eprintln!("warning: certified min-entropy too small; no bits extracted");
    }
    let out = toeplitz(&raw, &seed, m)?;

    #[derive(Serialize)]
    struct Extraction<'a> {
        certificate: &'a EntropyCertificate,
        input_bits: usize,
        seed_bits: usize,
        output_bits: usize,
        output_hex: String,
    }
    let result = Extraction {
        certificate: &cert,
        input_bits: n,
        seed_bits: seed.len(),
        output_bits: m,
        output_hex: bits_to_hex(&out),
    };
    if let Some(path) = &cfg.binary_out {
        write_file(path, &bits_to_bytes(&out))?;
    }
    eprintln!("extracted {m} bits from {n} raw bits");
    emit(cfg.out.as_deref(), &json("extract", &cfg, &result))
}

pub fn validate(mut cfg: RunConfig) -> Result<(), CliError> {
    let seed = *cfg.seed.get_or_insert(0);
    let runs = *cfg.trials.get_or_insert(10_000);
    let checks = physics_checks(runs, seed)?;
    for c in &checks {
        eprintln!("{} {} (deviation {:.3e}, tolerance {:.0e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    emit(cfg.out.as_deref(), &json("validate", &cfg, &checks))?;
    if failed > 0 {
        return Err(CliError::Validation(format!("{failed} physics checks failed")));
    }
    Ok(())
}
