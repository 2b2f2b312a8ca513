//! Timing of set-up and authentication over a grid of set sizes.

use std::fmt::Write as _;
use std::io;
use std::sync::Arc;
use std::time::Instant;

use num_bigint::RandBigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::auth;
use crate::error::{Error, Result};
use crate::profile::{build_encrypted_profile, FeatureSet, FeatureValue, Mode, SetupParams, SolverVariant};

/// The size grid of the reference measurements.
pub const REFERENCE_SIZES: [usize; 11] = [1, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub set_size: usize,
    pub setup_seconds: f64,
    pub auth_seconds: f64,
    pub key_bits: u64,
    pub solver: SolverVariant,
    pub parallelism: usize,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub key_bits: u64,
    pub solver: SolverVariant,
    pub repetitions: usize,
    pub seed: u64,
    /// Worker threads for the parallel parts; `None` uses every core.
    pub threads: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: REFERENCE_SIZES.to_vec(),
            key_bits: 1024,
            solver: SolverVariant::ClosedForm,
            repetitions: 3,
            seed: 1,
            threads: None,
        }
    }
}

/// For each size `s`, profile and sample both of size `s` (half shared),
/// times set-up and one full authentication and reports the median over
/// the repetitions.
///
/// Repetition `k` seeds set-up identically for every size, so key
/// generation costs the same across the grid and the series reflect the
/// size-dependent work.
pub fn bench_run(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    if config.sizes.is_empty() || config.sizes.contains(&0) {
        return Err(Error::InvalidInput("sizes must be nonempty and positive".into()));
    }
    if config.repetitions == 0 {
        return Err(Error::InvalidInput("at least one repetition is needed".into()));
    }
    let threads = config.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    pool.install(|| {
        config
            .sizes
            .iter()
            .map(|&size| {
                let mut setup = Vec::with_capacity(config.repetitions);
                let mut auth = Vec::with_capacity(config.repetitions);
                for rep in 0..config.repetitions {
                    let (s, a) = time_once(config, size, rep as u64)?;
                    setup.push(s);
                    auth.push(a);
                }
                log::info!("size {size}: set-up {:.3}s, auth {:.3}s", median(&mut setup), median(&mut auth));
                Ok(BenchRecord {
                    set_size: size,
                    setup_seconds: median(&mut setup),
                    auth_seconds: median(&mut auth),
                    key_bits: config.key_bits,
                    solver: config.solver,
                    parallelism: threads,
                })
            })
            .collect()
    })
}

fn time_once(config: &BenchConfig, size: usize, rep: u64) -> Result<(f64, f64)> {
    let (profile_set, sample_set) = instance(config.seed, size, rep)?;
    let params = SetupParams { key_bits: config.key_bits, solver: config.solver, threshold: None };
    let mut setup_rng = ChaCha20Rng::seed_from_u64(config.seed ^ rep.wrapping_mul(0x9e37_79b9_7f4a_7c15));

    let start = Instant::now();
    let (profile, secret) = build_encrypted_profile("bench", &profile_set, &params, &mut setup_rng)?;
    let setup = start.elapsed().as_secs_f64();

    let mut carrier_rng = ChaCha20Rng::seed_from_u64(config.seed.wrapping_add(rep) ^ 0xc0ffee);
    let mut device_rng = ChaCha20Rng::seed_from_u64(config.seed.wrapping_add(rep) ^ 0xdecaf);
    let start = Instant::now();
    let (challenge, session) = auth::carrier_challenge(Arc::new(profile), &mut carrier_rng);
    let entries = auth::device_respond(&secret, &challenge, &sample_set, &mut device_rng)?;
    let decision = auth::carrier_finish(&session, &entries)?;
    let elapsed = start.elapsed().as_secs_f64();
    let shared = size.div_ceil(2) as u64;
    if decision.match_count != shared {
        return Err(Error::InvalidInput(format!(
            "benchmark instance scored {} matches, expected {shared}",
            decision.match_count
        )));
    }
    Ok((setup, elapsed))
}

/// Random 128-bit profile of `size` values and a sample sharing its first
/// `ceil(size / 2)` values.
fn instance(seed: u64, size: usize, rep: u64) -> Result<(FeatureSet, FeatureSet)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(size as u64 * 1000 + rep));
    let mut draw = |n: usize| -> Result<Vec<FeatureValue>> {
        (0..n).map(|_| FeatureValue::new(rng.gen_biguint(128) + 1u8)).collect()
    };
    let profile = draw(size)?;
    let mut sample: Vec<FeatureValue> = profile[..size.div_ceil(2)].to_vec();
    sample.extend(draw(size / 2)?);
    Ok((FeatureSet::new(Mode::CaseA, profile)?, FeatureSet::new(Mode::CaseA, sample)?))
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

/// True if every value is at least `1 - jitter` times the largest value
/// before it.
pub fn is_monotone_within(series: &[f64], jitter: f64) -> bool {
    let mut max = f64::NEG_INFINITY;
    series.iter().all(|&x| {
        let ok = x >= max * (1.0 - jitter);
        max = max.max(x);
        ok
    })
}

pub fn render_table(records: &[BenchRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>6}  {:>12}  {:>12}  {:>8}  {:>11}  {:>11}", "size", "setup (s)", "auth (s)", "key bits", "solver", "parallelism");
    for r in records {
        let _ = writeln!(
            out,
            "{:>6}  {:>12.3}  {:>12.3}  {:>8}  {:>11}  {:>11}",
            r.set_size, r.setup_seconds, r.auth_seconds, r.key_bits, r.solver, r.parallelism
        );
    }
    out
}

pub fn write_csv<W: io::Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| Error::Io(io::Error::other(e));
    w.write_record(["size", "setup_s", "auth_s", "key_bits", "solver", "parallelism"]).map_err(to_io)?;
    for r in records {
        w.write_record([
            r.set_size.to_string(),
            format!("{:.6}", r.setup_seconds),
            format!("{:.6}", r.auth_seconds),
            r.key_bits.to_string(),
            r.solver.to_string(),
            r.parallelism.to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}
