//! Measurement workloads for the prefix filter: false-positive rate, load
//! sweeps, build time, analytic tables and pocket-dictionary search-path
//! statistics.
//!
//! Every random choice flows from a single 64-bit seed. Inserted keys are
//! even and negative queries odd, so negatives never hit the set by accident.

use std::io::Write;
use std::time::Instant;

use prefix_filter::analysis;
use prefix_filter::{
    AnalysisError, FilterConfig, HashSeed, InsertError, LoadFactor, ParamError, PdEntry, PocketDictionary,
    PrefixFilter, QueryPath, SpareFilter, SpareKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Bumped whenever a CSV column or JSON field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("filter failed on insert {index} of {n}: {source}")]
    Filter {
        index: u64,
        n: u64,
        source: InsertError,
    },
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit code: 1 for usage problems, 2 for filter failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Filter { .. } => 2,
            BenchError::Io(_) | BenchError::Csv(_) | BenchError::Json(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// One workload configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorkloadSpec {
    pub n: u64,
    pub alpha: f64,
    #[serde(serialize_with = "kind_name")]
    pub spare_kind: SpareKind,
    pub seed: u64,
    pub rounds: u32,
    pub queries_per_round: u64,
    /// Overrides the spare's default capacity multiplier.
    pub spare_headroom: Option<f64>,
}

fn kind_name<S: serde::Serializer>(k: &SpareKind, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&k.to_string())
}

pub const DEFAULT_N: u64 = 1 << 22;
pub const DEFAULT_ROUNDS: u32 = 20;

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            n: DEFAULT_N,
            alpha: 0.95,
            spare_kind: SpareKind::BlockedBloom,
            seed: 1,
            rounds: DEFAULT_ROUNDS,
            queries_per_round: DEFAULT_N / DEFAULT_ROUNDS as u64,
            spare_headroom: None,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(BenchError::Usage("--n must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(BenchError::Usage(format!("--alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.rounds == 0 || self.rounds as u64 > self.n {
            return Err(BenchError::Usage("--rounds must lie in [1, n]".into()));
        }
        Ok(())
    }

    pub fn filter_seed(&self) -> HashSeed {
        HashSeed::from_u64(self.seed)
    }

    pub fn new_filter(&self) -> Result<PrefixFilter> {
        let mut cfg = FilterConfig::new(self.n, LoadFactor::from_f64(self.alpha)?)
            .spare_kind(self.spare_kind)
            .seed(self.filter_seed());
        if let Some(h) = self.spare_headroom {
            cfg = cfg.spare_headroom(h);
        }
        Ok(PrefixFilter::with_config(cfg)?)
    }

    /// Keys inserted in round `round` of `rounds`: the slice
    /// `[floor(i n / R), floor((i+1) n / R))` of the key stream.
    pub fn round_bounds(&self, round: u32) -> (u64, u64) {
        let r = self.rounds as u128;
        let lo = (round as u128 * self.n as u128 / r) as u64;
        let hi = ((round as u128 + 1) * self.n as u128 / r) as u64;
        (lo, hi)
    }
}

/// `count` distinct-with-overwhelming-probability even keys.
pub fn insert_keys(seed: u64, count: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random::<u64>() & !1).collect()
}

/// Odd keys, never equal to an inserted key.
pub fn negative_keys(seed: u64, count: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A_F00D_CAFE);
    (0..count).map(|_| rng.random::<u64>() | 1).collect()
}

fn build(filter: &mut PrefixFilter, keys: &[u64]) -> Result<()> {
    let n = filter.params().n();
    for (i, &k) in keys.iter().enumerate() {
        filter.insert(k).map_err(|source| BenchError::Filter {
            index: i as u64,
            n,
            source,
        })?;
    }
    Ok(())
}

fn gamma(k: u32) -> f64 {
    1.0 / (2.0 * std::f64::consts::PI * k as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FprReport {
    pub n: u64,
    pub alpha: f64,
    pub spare: String,
    pub seed: u64,
    pub bins: u64,
    pub queries: u64,
    pub false_positives: u64,
    pub fpr: f64,
    pub fpr_std_error: f64,
    /// `alpha k / s`, the bin-table term of the FPR bound.
    pub fpr_bound_bin_table: f64,
    pub false_negatives: u64,
    pub spare_forward_fraction: f64,
    pub negative_spare_access_fraction: f64,
    pub positive_spare_access_fraction: f64,
    pub touches_per_negative_query: f64,
    pub gamma: f64,
    pub bin_bits_per_key: f64,
    pub bits_per_key: f64,
    pub spare_len: u64,
    pub spare_capacity: u64,
}

/// Builds to full load, checks every inserted key, then issues `queries`
/// negative queries.
pub fn cmd_fpr(spec: &WorkloadSpec, queries: u64) -> Result<FprReport> {
    spec.validate()?;
    if queries == 0 {
        return Err(BenchError::Usage("--queries must be positive".into()));
    }
    let mut f = spec.new_filter()?;
    let keys = insert_keys(spec.seed, spec.n);
    build(&mut f, &keys)?;
    let forwards = f.counters().insert_spare_forwards;

    f.reset_counters();
    let false_negatives = keys.iter().filter(|&&k| !f.query(k)).count() as u64;
    let positive_spare = f.counters().query_spare_accesses;

    f.reset_counters();
    let negatives = negative_keys(spec.seed, queries);
    let false_positives = negatives.iter().filter(|&&k| f.query(k)).count() as u64;
    let c = f.counters();
    let stats = f.stats();
    let p = &f.params();
    let fpr = false_positives as f64 / queries as f64;
    Ok(FprReport {
        n: spec.n,
        alpha: spec.alpha,
        spare: spec.spare_kind.to_string(),
        seed: spec.seed,
        bins: p.bins(),
        queries,
        false_positives,
        fpr,
        fpr_std_error: (fpr * (1.0 - fpr) / queries as f64).sqrt(),
        fpr_bound_bin_table: analysis::fpr_bound(
            p.alpha().as_f64(),
            p.bin_capacity() as u64,
            p.mini_range(),
            0.0,
        ),
        false_negatives,
        spare_forward_fraction: forwards as f64 / spec.n as f64,
        negative_spare_access_fraction: c.query_spare_accesses as f64 / queries as f64,
        positive_spare_access_fraction: positive_spare as f64 / spec.n as f64,
        touches_per_negative_query: (c.bins_touched + c.spare_blocks_touched) as f64 / queries as f64,
        gamma: gamma(p.bin_capacity()),
        bin_bits_per_key: stats.bin_bits_per_key.unwrap_or(0.0),
        bits_per_key: stats.bits_per_key.unwrap_or(0.0),
        spare_len: stats.spare_len,
        spare_capacity: stats.spare_capacity,
    })
}

/// One round of a load sweep. Throughput fields are wall-clock and
/// informative only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementRow {
    pub schema_version: u32,
    pub round: u32,
    pub load: f64,
    pub inserted: u64,
    pub insert_ops_per_sec: f64,
    pub negative_query_ops_per_sec: f64,
    pub positive_query_ops_per_sec: f64,
    pub negative_spare_access_fraction: f64,
    pub positive_spare_access_fraction: f64,
    pub spare_forward_fraction: f64,
    pub bits_per_key: f64,
    pub empirical_fpr: f64,
    pub false_negatives: u64,
}

fn rate(ops: u64, secs: f64) -> f64 {
    if secs > 0.0 {
        ops as f64 / secs
    } else {
        f64::INFINITY
    }
}

/// Inserts `n` keys in `rounds` equal slices; after each slice times a batch
/// of negative queries and a batch of positive queries drawn from the keys
/// inserted so far. Keys and probes are generated before timing starts.
pub fn cmd_load_sweep(spec: &WorkloadSpec) -> Result<Vec<MeasurementRow>> {
    spec.validate()?;
    if spec.queries_per_round == 0 {
        return Err(BenchError::Usage("--queries must be positive".into()));
    }
    let mut f = spec.new_filter()?;
    let keys = insert_keys(spec.seed, spec.n);
    let q = spec.queries_per_round;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x5EED));
    let mut rows = Vec::with_capacity(spec.rounds as usize);
    let mut forwards = 0;
    for round in 0..spec.rounds {
        let (lo, hi) = spec.round_bounds(round);
        let negatives = negative_keys(spec.seed.wrapping_add(round as u64 + 1), q);
        let positives: Vec<u64> = (0..q).map(|_| keys[rng.random_range(0..hi) as usize]).collect();

        f.reset_counters();
        let t = Instant::now();
        build(&mut f, &keys[lo as usize..hi as usize]).map_err(|e| match e {
            BenchError::Filter { index, n, source } => BenchError::Filter {
                index: index + lo,
                n,
                source,
            },
            other => other,
        })?;
        let insert_secs = t.elapsed().as_secs_f64();
        forwards += f.counters().insert_spare_forwards;

        f.reset_counters();
        let t = Instant::now();
        let fp = negatives.iter().filter(|&&k| f.query(k)).count() as u64;
        let neg_secs = t.elapsed().as_secs_f64();
        let neg_spare = f.counters().query_spare_accesses;

        f.reset_counters();
        let t = Instant::now();
        let hits = positives.iter().filter(|&&k| f.query(k)).count() as u64;
        let pos_secs = t.elapsed().as_secs_f64();
        let pos_spare = f.counters().query_spare_accesses;

        rows.push(MeasurementRow {
            schema_version: SCHEMA_VERSION,
            round: round + 1,
            load: hi as f64 / spec.n as f64,
            inserted: hi,
            insert_ops_per_sec: rate(hi - lo, insert_secs),
            negative_query_ops_per_sec: rate(q, neg_secs),
            positive_query_ops_per_sec: rate(q, pos_secs),
            negative_spare_access_fraction: neg_spare as f64 / q as f64,
            positive_spare_access_fraction: pos_spare as f64 / q as f64,
            spare_forward_fraction: forwards as f64 / hi as f64,
            bits_per_key: f.stats().bits_per_key.unwrap_or(0.0),
            empirical_fpr: fp as f64 / q as f64,
            false_negatives: q - hits,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuildTrial {
    pub seed: u64,
    /// Informative only.
    pub seconds: f64,
    pub completed: bool,
    pub inserted: u64,
    pub spare_forwards: u64,
    pub spare_len: u64,
    pub bits_per_key: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuildTimeReport {
    pub n: u64,
    pub alpha: f64,
    pub spare: String,
    pub trials: u32,
    pub failures: u32,
    /// Median over completed trials; informative only.
    pub median_seconds: Option<f64>,
    pub runs: Vec<BuildTrial>,
}

/// Times `trials` builds from empty to `n` keys. With `vary_seed`, trial `t`
/// uses seed `seed + t` and spare overflows are counted instead of aborting.
pub fn cmd_build_time(spec: &WorkloadSpec, trials: u32, vary_seed: bool) -> Result<BuildTimeReport> {
    spec.validate()?;
    if trials == 0 {
        return Err(BenchError::Usage("--trials must be positive".into()));
    }
    let mut runs = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let trial_spec = WorkloadSpec {
            seed: if vary_seed { spec.seed.wrapping_add(t as u64) } else { spec.seed },
            ..*spec
        };
        let keys = insert_keys(trial_spec.seed, spec.n);
        let mut f = trial_spec.new_filter()?;
        let start = Instant::now();
        let outcome = build(&mut f, &keys);
        let seconds = start.elapsed().as_secs_f64();
        let completed = match outcome {
            Ok(()) => true,
            Err(BenchError::Filter { .. }) if vary_seed => false,
            Err(e) => return Err(e),
        };
        let stats = f.stats();
        runs.push(BuildTrial {
            seed: trial_spec.seed,
            seconds,
            completed,
            inserted: stats.inserted,
            spare_forwards: stats.counters.insert_spare_forwards,
            spare_len: f.spare().len(),
            bits_per_key: stats.bits_per_key.unwrap_or(0.0),
        });
    }
    let mut times: Vec<f64> = runs.iter().filter(|r| r.completed).map(|r| r.seconds).collect();
    times.sort_by(f64::total_cmp);
    let median_seconds = (!times.is_empty()).then(|| {
        let mid = times.len() / 2;
        if times.len() % 2 == 1 {
            times[mid]
        } else {
            (times[mid - 1] + times[mid]) / 2.0
        }
    });
    Ok(BuildTimeReport {
        n: spec.n,
        alpha: spec.alpha,
        spare: spec.spare_kind.to_string(),
        trials,
        failures: runs.iter().filter(|r| !r.completed).count() as u32,
        median_seconds,
        runs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisRow {
    pub schema_version: u32,
    pub k: u64,
    pub alpha: f64,
    pub n: u64,
    pub bins: u64,
    /// `E[X] / n` at this load factor.
    pub expected_fraction: f64,
    /// `E[X] / n` for a fully loaded table of the same `n` and `k`.
    pub full_load_fraction: f64,
    /// `1 / sqrt(2 pi k)`.
    pub cap_fraction: f64,
    pub spare_capacity: u64,
}

/// Tabulates the expected fraction of fingerprints forwarded to the spare
/// over `k` in `[k_min, k_max]` and each load factor in `alphas`.
pub fn cmd_analysis(n: u64, k_min: u64, k_max: u64, alphas: &[f64]) -> Result<Vec<AnalysisRow>> {
    if k_min == 0 || k_min > k_max {
        return Err(BenchError::Usage("need 1 <= --k-min <= --k-max".into()));
    }
    if k_max > n {
        return Err(BenchError::Usage("--k-max must not exceed --n".into()));
    }
    if alphas.is_empty() {
        return Err(BenchError::Usage("--alphas must list at least one value".into()));
    }
    let mut rows = Vec::new();
    for k in k_min..=k_max {
        let full = analysis::expected_spare_closed(n, k)?.expected / n as f64;
        for &alpha in alphas {
            let lf = LoadFactor::from_f64(alpha)?;
            let m = (n as u128 * lf.denominator() as u128).div_ceil(lf.numerator() as u128 * k as u128) as u64;
            let e = analysis::expected_spare_exact(n, m, k)?;
            rows.push(AnalysisRow {
                schema_version: SCHEMA_VERSION,
                k,
                alpha,
                n,
                bins: m,
                expected_fraction: e / n as f64,
                full_load_fraction: full,
                cap_fraction: gamma(k as u32),
                spare_capacity: analysis::spare_capacity(n, m, k)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PdStatsReport {
    pub trials: u64,
    pub dictionaries: u64,
    /// Fraction of queries whose remainder matches no body slot.
    pub cutoff_fraction: f64,
    /// Among queries with at least one matching slot, the fraction with
    /// exactly one.
    pub single_match_fraction: f64,
    /// `1 - k / 2^R`: the cutoff fraction when all remainders are distinct.
    pub cutoff_lower_bound: f64,
    /// `(1 - 2^-R)^k`: the expected cutoff fraction.
    pub cutoff_expected: f64,
    pub disagreements: u64,
}

/// Fills random dictionaries to capacity and queries them. Each dictionary
/// is probed once with every remainder, each paired with a uniform quotient,
/// so `trials` is rounded up to a multiple of 256. Every answer is also
/// checked against the select-based search.
pub fn cmd_pd_stats(trials: u64, seed: u64) -> Result<PdStatsReport> {
    if trials == 0 {
        return Err(BenchError::Usage("--trials must be positive".into()));
    }
    let dictionaries = trials.div_ceil(256);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut cutoff, mut single, mut multi, mut disagreements) = (0u64, 0u64, 0u64, 0u64);
    for _ in 0..dictionaries {
        let mut pd = PocketDictionary::new();
        while !pd.is_full() {
            pd.insert(PdEntry::new(rng.random_range(0..25), rng.random())).unwrap();
        }
        for r in 0..=255u8 {
            let e = PdEntry::new(rng.random_range(0..25), r);
            let (hit, path) = pd.query_traced(e);
            disagreements += (hit != pd.contains_by_select(e)) as u64;
            match path {
                QueryPath::Cutoff => cutoff += 1,
                QueryPath::SingleMatch => single += 1,
                QueryPath::SelectFallback => multi += 1,
            }
        }
    }
    let total = dictionaries * 256;
    Ok(PdStatsReport {
        trials: total,
        dictionaries,
        cutoff_fraction: cutoff as f64 / total as f64,
        single_match_fraction: single as f64 / (single + multi).max(1) as f64,
        cutoff_lower_bound: 1.0 - 25.0 / 256.0,
        cutoff_expected: (255.0f64 / 256.0).powi(25),
        disagreements,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    report: &'a T,
}

/// Writes a list of records as CSV (header row first) or as a JSON envelope.
pub fn write_rows<T: Serialize, W: Write>(out: W, command: &str, rows: &[T], format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => write_json(out, command, &rows)?,
    }
    Ok(())
}

/// Writes a single report. CSV flattens it into one header and one row, so
/// nested lists are only available as JSON.
pub fn write_report<T: Serialize, W: Write>(out: W, command: &str, report: &T, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let value = serde_json::to_value(report)?;
            let obj = value.as_object().expect("reports serialize as objects");
            let mut w = csv::Writer::from_writer(out);
            let fields: Vec<(&String, &serde_json::Value)> =
                obj.iter().filter(|(_, v)| !v.is_array() && !v.is_object()).collect();
            let mut header = vec!["schema_version".to_string()];
            header.extend(fields.iter().map(|(k, _)| k.to_string()));
            w.write_record(&header)?;
            let mut row = vec![SCHEMA_VERSION.to_string()];
            row.extend(fields.iter().map(|(_, v)| match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Null => String::new(),
                other => other.to_string(),
            }));
            w.write_record(&row)?;
            w.flush()?;
        }
        Format::Json => write_json(out, command, report)?,
    }
    Ok(())
}

fn write_json<T: Serialize, W: Write>(mut out: W, command: &str, report: &T) -> Result<()> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        report,
    };
    serde_json::to_writer_pretty(&mut out, &env)?;
    writeln!(out)?;
    Ok(())
}
