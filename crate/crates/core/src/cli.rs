//! Command-line front end.
//!
//! Every subcommand is first turned into an [`ExperimentConfig`], which is
//! echoed into each output file and can be replayed with `hswitch run`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SwitchConfig, Trace};
use crate::oracle::{offline_opt, OracleLimits};
use crate::policy::PolicySpec;
use crate::proof::{check_proof_with, CandidatePool, MappingStrategy, ProofOptions};
use crate::sim::{differential, simulate, SimOptions};
use crate::suite::{
    flood_family_trace, opt_upper_bound, opt_vector, ratio_rows, write_ratio_csv, ExhaustiveBox, OptChoice,
    OptSource, RandomSuite, RatioRow,
};
use crate::tracegen::{generate, GenKind, GenSpec};
use crate::TOOL_VERSION;

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "HSWITCH_OUT_DIR";

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Where a command's trace comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceSource {
    File { path: PathBuf, config: SwitchConfig },
    Gen(GenSpec),
}

impl TraceSource {
    pub fn load(&self) -> Result<Trace> {
        match self {
            TraceSource::File { path, config } => Trace::read_csv_file(*config, path),
            TraceSource::Gen(spec) => {
                let mut traces = generate(spec)?;
                if traces.len() != 1 {
                    return Err(Error::InvalidSpec("expected a single trace".into()));
                }
                Ok(traces.pop().expect("one trace"))
            }
        }
    }
}

/// Trace set of a ratio sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepSource {
    Traces { paths: Vec<PathBuf>, config: SwitchConfig },
    Exhaustive(ExhaustiveBox),
    /// Flood family over `ns` at buffer size `B`; OPT is replaced by an upper
    /// bound when the oracle cannot handle the trace.
    Flood {
        ns: Vec<usize>,
        #[serde(rename = "B")]
        capacity: usize,
    },
    Random(RandomSuite),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Experiment {
    Simulate {
        input: TraceSource,
        policy: PolicySpec,
        #[serde(default)]
        timeline: Option<PathBuf>,
        #[serde(default)]
        verify_bookkeeping: bool,
    },
    Gen {
        spec: GenSpec,
    },
    Opt {
        input: TraceSource,
        limits: OracleLimits,
    },
    CheckProof {
        input: TraceSource,
        /// Feasible acceptance vector (CSV column of 0/1); the oracle's if absent.
        #[serde(default)]
        accept: Option<PathBuf>,
        limits: OracleLimits,
        options: ProofOptions,
        /// Event dump written when the check finds a violation.
        #[serde(default)]
        dump: Option<PathBuf>,
    },
    Differential {
        input: TraceSource,
    },
    RatioSweep {
        source: SweepSource,
        policies: Vec<PolicySpec>,
        limits: OracleLimits,
    },
}

impl Experiment {
    fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate { .. } => "simulate",
            Experiment::Gen { .. } => "gen",
            Experiment::Opt { .. } => "opt",
            Experiment::CheckProof { .. } => "check-proof",
            Experiment::Differential { .. } => "differential",
            Experiment::RatioSweep { .. } => "ratio-sweep",
        }
    }

    fn default_extension(&self) -> &'static str {
        match self {
            Experiment::Gen { .. } | Experiment::RatioSweep { .. } => "csv",
            _ => "json",
        }
    }
}

/// A complete, replayable run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    /// Primary output; stdout when absent.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// JSON envelope of every structured output.
#[derive(Serialize)]
struct Envelope<'a, T> {
    tool_version: &'static str,
    config: &'a ExperimentConfig,
    result: T,
}

#[derive(Debug, Parser)]
#[command(name = "hswitch", version, about = "Shared-buffer switch admission experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one policy over a trace.
    Simulate {
        #[command(flatten)]
        input: TraceArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Per-event timeline CSV.
        #[arg(long)]
        timeline: Option<PathBuf>,
        /// Recount Modified Harmonic bookkeeping after every event.
        #[arg(long)]
        verify_bookkeeping: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a trace CSV (a directory of them for `enumerate`).
    Gen {
        #[arg(long)]
        kind: GenKind,
        #[arg(long)]
        n: usize,
        #[arg(long = "B")]
        capacity: usize,
        /// Packet count.
        #[arg(long, default_value_t = 0)]
        length: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        target: usize,
        #[arg(long, default_value_t = 8)]
        burst_len: usize,
        #[arg(long, default_value_t = 1.0)]
        load: f64,
        /// Slot count for `enumerate`.
        #[arg(long, default_value_t = 1)]
        slots: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact offline optimum.
    Opt {
        #[command(flatten)]
        input: TraceArgs,
        #[command(flatten)]
        limits: LimitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay the competitiveness argument on a trace.
    CheckProof {
        #[command(flatten)]
        input: TraceArgs,
        /// OPT acceptance vector, one 0/1 per line with header `accept`.
        #[arg(long)]
        accept: Option<PathBuf>,
        #[command(flatten)]
        limits: LimitArgs,
        #[arg(long, value_parser = parse_strategy, default_value = "most-recent")]
        strategy: MappingStrategy,
        #[arg(long, value_parser = parse_pool, default_value = "buffered")]
        pool: CandidatePool,
        /// Event dump CSV, written when a violation is found.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the sorted-queue and single-threshold Harmonic rules.
    Differential {
        #[command(flatten)]
        input: TraceArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// OPT/ALG table across policies.
    RatioSweep {
        /// Trace CSVs (need --n and --B).
        #[arg(long = "trace", num_args = 1..)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "B")]
        capacity: Option<usize>,
        /// Exhaustive box: port counts.
        #[arg(long, value_delimiter = ',')]
        box_n: Vec<usize>,
        /// Exhaustive box: buffer sizes.
        #[arg(long = "box-B", value_delimiter = ',')]
        box_capacity: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        max_slots: u64,
        /// Exhaustive box: packet bound.
        #[arg(long, default_value_t = 4)]
        box_packets: usize,
        /// Flood family over these port counts, with --B as buffer size.
        #[arg(long, value_delimiter = ',')]
        flood: Vec<usize>,
        /// Randomized suite of this many traces.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "modified-harmonic,harmonic,dt,smxq,sharing,partitioning"
        )]
        policies: Vec<String>,
        #[command(flatten)]
        limits: LimitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay an experiment config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Trace CSV with header `slot,port`.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "B")]
    pub capacity: Option<usize>,
    /// Switch config JSON `{"n": .., "B": ..}`, instead of --n/--B.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long, default_value = "modified-harmonic")]
    pub policy: String,
    /// Dynamic Thresholds factor.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// SMXQ per-queue cap.
    #[arg(long)]
    pub theta: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long, default_value_t = OracleLimits::default().max_packets)]
    pub max_packets: usize,
    #[arg(long, default_value_t = OracleLimits::default().node_budget)]
    pub node_budget: u64,
}

impl From<&LimitArgs> for OracleLimits {
    fn from(a: &LimitArgs) -> Self {
        OracleLimits {
            max_packets: a.max_packets,
            node_budget: a.node_budget,
        }
    }
}

fn parse_strategy(s: &str) -> std::result::Result<MappingStrategy, String> {
    match s {
        "most-recent" => Ok(MappingStrategy::MostRecent),
        "earliest" => Ok(MappingStrategy::Earliest),
        _ => Err(format!("unknown strategy `{s}`, expected most-recent|earliest")),
    }
}

fn parse_pool(s: &str) -> std::result::Result<CandidatePool, String> {
    match s {
        "buffered" => Ok(CandidatePool::Buffered),
        "arrived" => Ok(CandidatePool::Arrived),
        _ => Err(format!("unknown pool `{s}`, expected buffered|arrived")),
    }
}

fn switch_config(n: Option<usize>, capacity: Option<usize>, file: Option<&Path>) -> Result<SwitchConfig> {
    match (file, n, capacity) {
        (Some(path), None, None) => SwitchConfig::from_json_file(path),
        (Some(_), _, _) => Err(Error::InvalidConfig("give either --config or --n/--B, not both".into())),
        (None, Some(n), Some(b)) => SwitchConfig::new(n, b),
        (None, _, _) => Err(Error::InvalidConfig("--n and --B are required".into())),
    }
}

impl TraceArgs {
    fn source(&self) -> Result<TraceSource> {
        Ok(TraceSource::File {
            path: self.trace.clone(),
            config: switch_config(self.n, self.capacity, self.config.as_deref())?,
        })
    }
}

impl Command {
    /// Turns parsed flags into a replayable config.
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let (experiment, out) = match self {
            Command::Simulate {
                input,
                policy,
                timeline,
                verify_bookkeeping,
                out,
            } => {
                let spec = PolicySpec::parse(&policy.policy, policy.alpha, policy.theta).map_err(Error::InvalidSpec)?;
                (
                    Experiment::Simulate {
                        input: input.source()?,
                        policy: spec,
                        timeline,
                        verify_bookkeeping,
                    },
                    out,
                )
            }
            Command::Gen {
                kind,
                n,
                capacity,
                length,
                seed,
                target,
                burst_len,
                load,
                slots,
                out,
            } => {
                let spec = GenSpec {
                    kind,
                    n,
                    capacity,
                    length,
                    seed,
                    target,
                    burst_len,
                    load,
                    slots,
                };
                (Experiment::Gen { spec }, out)
            }
            Command::Opt { input, limits, out } => (
                Experiment::Opt {
                    input: input.source()?,
                    limits: (&limits).into(),
                },
                out,
            ),
            Command::CheckProof {
                input,
                accept,
                limits,
                strategy,
                pool,
                dump,
                out,
            } => (
                Experiment::CheckProof {
                    input: input.source()?,
                    accept,
                    limits: (&limits).into(),
                    options: ProofOptions { strategy, pool },
                    dump,
                },
                out,
            ),
            Command::Differential { input, out } => (Experiment::Differential { input: input.source()? }, out),
            Command::RatioSweep {
                traces,
                n,
                capacity,
                box_n,
                box_capacity,
                max_slots,
                box_packets,
                flood,
                random,
                seed,
                policies,
                limits,
                out,
            } => {
                let chosen = usize::from(!traces.is_empty())
                    + usize::from(!box_n.is_empty() || !box_capacity.is_empty())
                    + usize::from(!flood.is_empty())
                    + usize::from(random.is_some());
                if chosen > 1 {
                    return Err(Error::InvalidSpec(
                        "choose one of --trace, --box-n/--box-B, --flood, --random".into(),
                    ));
                }
                let source = if !box_n.is_empty() || !box_capacity.is_empty() {
                    SweepSource::Exhaustive(ExhaustiveBox {
                        ns: box_n,
                        capacities: box_capacity,
                        max_slots,
                        max_packets: box_packets,
                    })
                } else if !flood.is_empty() {
                    let capacity =
                        capacity.ok_or_else(|| Error::InvalidConfig("--flood needs --B".into()))?;
                    SweepSource::Flood { ns: flood, capacity }
                } else if let Some(count) = random {
                    SweepSource::Random(RandomSuite {
                        seed,
                        ..RandomSuite::default().with_count(count)
                    })
                } else {
                    let config = if traces.is_empty() {
                        SwitchConfig { n: n.unwrap_or(1), capacity: capacity.unwrap_or(1) }
                    } else {
                        switch_config(n, capacity, None)?
                    };
                    SweepSource::Traces { paths: traces, config }
                };
                let policies = policies
                    .iter()
                    .map(|p| PolicySpec::parse(p, None, None).map_err(Error::InvalidSpec))
                    .collect::<Result<Vec<_>>>()?;
                (
                    Experiment::RatioSweep {
                        source,
                        policies,
                        limits: (&limits).into(),
                    },
                    out,
                )
            }
            Command::Run { config } => {
                let text = std::fs::read_to_string(&config).map_err(|source| Error::Io { path: config, source })?;
                // a whole result file replays its echoed config
                let mut value: serde_json::Value = serde_json::from_str(&text)?;
                if value.get("tool_version").is_some() {
                    if let Some(inner) = value.get_mut("config") {
                        value = inner.take();
                    }
                }
                return Ok(serde_json::from_value(value)?);
            }
        };
        Ok(ExperimentConfig { experiment, out })
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|source| Error::Io {
        path: tmp.clone(),
        source,
    })?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Resolved primary output: explicit path, the env directory, or stdout.
fn output_path(config: &ExperimentConfig) -> Option<PathBuf> {
    if let Some(p) = &config.out {
        return Some(p.clone());
    }
    let dir = std::env::var_os(OUT_DIR_ENV)?;
    let e = &config.experiment;
    Some(Path::new(&dir).join(format!("{}.{}", e.name(), e.default_extension())))
}

fn emit(config: &ExperimentConfig, bytes: &[u8]) -> Result<()> {
    match output_path(config) {
        Some(path) => write_atomic(&path, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|source| Error::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn envelope<T: Serialize>(config: &ExperimentConfig, result: T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(&Envelope {
        tool_version: TOOL_VERSION,
        config,
        result,
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn read_accept_vector(path: &Path) -> Result<Vec<bool>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        match record.get(0) {
            Some("1") | Some("true") => out.push(true),
            Some("0") | Some("false") => out.push(false),
            other => {
                return Err(Error::InvalidSpec(format!(
                    "{}: expected 0/1 entries, found `{}`",
                    path.display(),
                    other.unwrap_or("")
                )))
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    rows: usize,
    flagged: usize,
    table: &'a Path,
}

fn sweep_rows(source: &SweepSource, policies: &[PolicySpec], limits: OracleLimits) -> Result<Vec<RatioRow>> {
    use rayon::prelude::*;

    let exact_or_heuristic = |id: String, t: &Trace| -> Result<Vec<RatioRow>> {
        let opt = opt_vector(t, limits)?;
        ratio_rows(&id, t, policies, &opt)
    };
    let nested: Vec<Vec<RatioRow>> = match source {
        SweepSource::Traces { paths, config } => paths
            .iter()
            .map(|p| {
                let t = Trace::read_csv_file(*config, p)?;
                exact_or_heuristic(p.display().to_string(), &t)
            })
            .collect::<Result<_>>()?,
        SweepSource::Exhaustive(bx) => {
            let mut all = Vec::new();
            for config in bx.configs()? {
                let traces: Vec<Trace> =
                    crate::tracegen::enumerate_all(config, bx.max_slots, bx.max_packets).collect();
                let rows: Vec<Vec<RatioRow>> = traces
                    .par_iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let opt = offline_opt(t, limits)?;
                        let choice = OptChoice {
                            source: OptSource::Oracle,
                            count: opt.opt_count,
                            vector: opt.opt_vector,
                        };
                        ratio_rows(&format!("n{}-B{}-{i}", config.n, config.capacity), t, policies, &choice)
                    })
                    .collect::<Result<_>>()?;
                all.extend(rows);
            }
            all
        }
        SweepSource::Flood { ns, capacity } => ns
            .iter()
            .map(|&n| {
                let t = flood_family_trace(n, *capacity)?;
                let id = format!("flood-n{n}-B{capacity}");
                if t.len() <= limits.max_packets {
                    exact_or_heuristic(id, &t)
                } else {
                    let opt = OptChoice {
                        source: OptSource::UpperBound,
                        count: opt_upper_bound(&t),
                        vector: Vec::new(),
                    };
                    ratio_rows(&id, &t, policies, &opt)
                }
            })
            .collect::<Result<_>>()?,
        SweepSource::Random(suite) => (0..suite.count)
            .into_par_iter()
            .map(|i| exact_or_heuristic(format!("random-{}-{i}", suite.seed), &suite.trace(i)?))
            .collect::<Result<_>>()?,
    };
    Ok(nested.into_iter().flatten().collect())
}

/// Runs `config`; returns the process exit code.
pub fn execute(config: &ExperimentConfig) -> Result<u8> {
    match &config.experiment {
        Experiment::Simulate {
            input,
            policy,
            timeline,
            verify_bookkeeping,
        } => {
            let trace = input.load()?;
            let options = SimOptions {
                timeline: timeline.is_some(),
                verify_bookkeeping: *verify_bookkeeping,
            };
            let result = simulate(&trace, policy, options)?;
            if let Some(path) = timeline {
                let mut buf = Vec::new();
                result.write_timeline_csv(&mut buf)?;
                write_atomic(path, &buf)?;
            }
            emit(config, &envelope(config, &result)?)?;
            Ok(EXIT_OK)
        }
        Experiment::Gen { spec } => {
            let traces = generate(spec)?;
            if spec.kind == GenKind::Enumerate {
                let dir = output_path(config)
                    .ok_or_else(|| Error::InvalidSpec("enumerate needs --out DIR".into()))?;
                for (i, t) in traces.iter().enumerate() {
                    write_atomic(&dir.join(format!("trace-{i:06}.csv")), t.to_csv_string().as_bytes())?;
                }
                write_atomic(&dir.join("gen.json"), &envelope(config, traces.len())?)?;
            } else {
                let csv = traces[0].to_csv_string();
                match output_path(config) {
                    Some(path) => {
                        let mut meta = path.as_os_str().to_owned();
                        meta.push(".json");
                        write_atomic(&path, csv.as_bytes())?;
                        write_atomic(Path::new(&meta), &envelope(config, traces[0].len())?)?;
                    }
                    None => emit(config, csv.as_bytes())?,
                }
            }
            Ok(EXIT_OK)
        }
        Experiment::Opt { input, limits } => {
            let trace = input.load()?;
            let result = offline_opt(&trace, *limits)?;
            emit(config, &envelope(config, &result)?)?;
            Ok(EXIT_OK)
        }
        Experiment::CheckProof {
            input,
            accept,
            limits,
            options,
            dump,
        } => {
            let trace = input.load()?;
            let vector = match accept {
                Some(path) => read_accept_vector(path)?,
                None => offline_opt(&trace, *limits)?.opt_vector,
            };
            let ledger = check_proof_with(&trace, &vector, *options)?;
            let violation = ledger.has_violation();
            if let (true, Some(path)) = (violation, dump) {
                let mut buf = Vec::new();
                ledger.write_event_dump(&mut buf)?;
                write_atomic(path, &buf)?;
            }
            emit(config, &envelope(config, &ledger)?)?;
            Ok(if violation { EXIT_VIOLATION } else { EXIT_OK })
        }
        Experiment::Differential { input } => {
            let trace = input.load()?;
            let report = differential(&trace)?;
            emit(config, &envelope(config, &report)?)?;
            Ok(EXIT_OK)
        }
        Experiment::RatioSweep {
            source,
            policies,
            limits,
        } => {
            let rows = sweep_rows(source, policies, *limits)?;
            let mut table = Vec::new();
            write_ratio_csv(&rows, &mut table)?;
            let flagged = rows.iter().filter(|r| r.flagged).count();
            match output_path(config) {
                Some(path) => {
                    write_atomic(&path, &table)?;
                    let mut meta = path.as_os_str().to_owned();
                    meta.push(".json");
                    let summary = SweepSummary {
                        rows: rows.len(),
                        flagged,
                        table: &path,
                    };
                    write_atomic(Path::new(&meta), &envelope(config, summary)?)?;
                }
                None => emit(config, &table)?,
            }
            Ok(if flagged > 0 { EXIT_VIOLATION } else { EXIT_OK })
        }
    }
}

/// Parses `args`, runs the command and maps errors to exit code 2.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command.into_config().and_then(|c| execute(&c)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hswitch: {e}");
            EXIT_USAGE
        }
    }
}
