//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::analysis::{
    build_markov_k3, feedback_worthwhile, k2_expected, k3_fdel, k3_ndel, k3_nlt, optimize_costs,
    CostModel, DegreeProbs3,
};
use crate::bounds::{
    ml_failure_bound_feedback, ml_failure_bound_nofeedback, schedule_distributions, AckedColumns,
    FeedbackSchedule, ScheduleEvent, TargetStratum,
};
use crate::degree::{DegreeSource, RobustSolitonParams};
use crate::encoders::Shortfall;
use crate::feedback::{AckRule, DistanceTiming};
use crate::simulator::{export_csv, run_trials, Scheme, SessionConfig};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "nonuniform-fountain",
    about = "Fountain codes with feedback: simulation, analysis and bounds"
)]
#[command(disable_version_flag = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Lt,
    AllDistance,
    Quantized,
    Dnc,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Lt => Scheme::Lt,
            SchemeArg::AllDistance => Scheme::AllDistance,
            SchemeArg::Quantized => Scheme::Quantized,
            SchemeArg::Dnc => Scheme::Dnc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AckRuleArg {
    ZeroOrOne,
    OneOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShortfallArg {
    Truncate,
    FillFromU,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TimingArg {
    Arrival,
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AckedColumnsArg {
    Unknown,
    Known,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run Monte-Carlo sessions.
    Simulate(SimulateArgs),
    /// Exact expectations for k=2.
    AnalyzeK2 {
        /// Half the degree-one probability, in (0, 0.5].
        #[arg(long)]
        p: f64,
    },
    /// Exact expectations for k=3.
    AnalyzeK3 {
        #[arg(long)]
        p1: f64,
        #[arg(long)]
        p2: f64,
    },
    /// Cost-weighted choice of the k=3 degree distribution.
    Optimize {
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long, default_value_t = 0.002)]
        grid_step: f64,
    },
    /// ML decoding failure bounds.
    Bound(BoundArgs),
    /// Print the version.
    Version,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "lt")]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 512)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub s: usize,
    #[arg(long, default_value_t = 1.0)]
    pub p_fb: f64,
    #[arg(long, default_value_t = 0.0)]
    pub erasure_p: f64,
    #[arg(long, default_value_t = 1)]
    pub receivers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = RobustSolitonParams::DEFAULT_C)]
    pub c: f64,
    #[arg(long, default_value_t = RobustSolitonParams::DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub symbol_size: usize,
    #[arg(long, value_enum, default_value = "zero-or-one")]
    pub ack_rule: AckRuleArg,
    /// When report distances are measured: on arrival or after peeling.
    #[arg(long, value_enum, default_value = "residual")]
    pub timing: TimingArg,
    /// Label schemes: what to do when too few inputs look decoded.
    #[arg(long, value_enum, default_value = "truncate")]
    pub shortfall: ShortfallArg,
    /// Transmission limit per session (default 50 k).
    #[arg(long)]
    pub cap: Option<usize>,
    /// CSV trace destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = RobustSolitonParams::DEFAULT_C)]
    pub c: f64,
    #[arg(long, default_value_t = RobustSolitonParams::DEFAULT_DELTA)]
    pub delta: f64,
    /// CSV file of `t,m` acknowledgment events.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Acknowledgment event whose stratum holds the target; omit for a
    /// never-acknowledged target.
    #[arg(long)]
    pub target_event: Option<usize>,
    #[arg(long, value_enum, default_value = "unknown")]
    pub acked_columns: AckedColumnsArg,
}

/// Parses `t,m` lines under a `t,m` header.
pub fn load_schedule(path: &Path) -> Result<FeedbackSchedule> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "m"] {
        return Err(parse_err(
            1,
            format!(
                "expected header `t,m`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut events: Vec<ScheduleEvent> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<usize> {
            record
                .get(i)
                .ok_or_else(|| parse_err(line, format!("missing {name}")))?
                .parse()
                .map_err(|e| parse_err(line, format!("bad {name}: {e}")))
        };
        let event = ScheduleEvent {
            t: field(0, "t")?,
            m: field(1, "m")?,
        };
        if let Some(prev) = events.last() {
            if event.t <= prev.t {
                return Err(parse_err(
                    line,
                    format!("t = {} does not increase past {}", event.t, prev.t),
                ));
            }
            if event.m < prev.m {
                return Err(parse_err(
                    line,
                    format!("m = {} decreases from {}", event.m, prev.m),
                ));
            }
        }
        if event.t == 0 {
            return Err(parse_err(line, "t must be >= 1".into()));
        }
        events.push(event);
    }
    FeedbackSchedule::new(events)
}

/// Runs the CLI and returns the process exit code: 0 on success, 2 on usage
/// errors, 1 on runtime failures.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e @ (Error::InvalidParameter(_) | Error::InvalidArgument(_))) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Simulate(args) => simulate(args, out),
        Command::AnalyzeK2 { p } => {
            let e = k2_expected(p)?;
            writeln!(
                out,
                "n_del={}\nf_del={}\nn_lt={}\nsavings={}",
                e.n_del, e.f_del, e.n_lt, e.savings
            )
            .map_err(io_out)
        }
        Command::AnalyzeK3 { p1, p2 } => {
            let p = DegreeProbs3::from_p1_p2(p1, p2)?;
            let chain = build_markov_k3(&p)?;
            writeln!(
                out,
                "p1={}\np2={}\np3={}\nn_del={}\nn_lt={}\nf_del={}\nmarkov_steps={}\nmarkov_feedback={}",
                p.p1,
                p.p2,
                p.p3,
                k3_ndel(&p)?,
                k3_nlt(&p)?,
                k3_fdel(&p)?,
                chain.expected_steps(),
                chain.feedback_from_visits()
            )
            .map_err(io_out)
        }
        Command::Optimize { c1, c2, grid_step } => {
            let cost = CostModel::new(c1, c2)?;
            let best = optimize_costs(&cost, grid_step)?;
            let p = best.probs();
            writeln!(
                out,
                "p1*={:.4}\np2*={:.4}\nobjective={:.6}\nn_del={:.6}\nf_del={:.6}\nn_lt={:.6}\nfeedback_worthwhile={}",
                best.p1,
                best.p2,
                best.objective,
                k3_ndel(&p)?,
                k3_fdel(&p)?,
                k3_nlt(&p)?,
                feedback_worthwhile(&cost, &p)?
            )
            .map_err(io_out)
        }
        Command::Bound(args) => bound(args, out),
        Command::Version => writeln!(
            out,
            "{} {}",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION")
        )
        .map_err(io_out),
    }
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let config = SessionConfig {
        s: args.s,
        p_fb: args.p_fb,
        ack_rule: match args.ack_rule {
            AckRuleArg::ZeroOrOne => AckRule::ZeroOrOne,
            AckRuleArg::OneOnly => AckRule::OneOnly,
        },
        timing: match args.timing {
            TimingArg::Arrival => DistanceTiming::Arrival,
            TimingArg::Residual => DistanceTiming::Residual,
        },
        shortfall: match args.shortfall {
            ShortfallArg::Truncate => Shortfall::Truncate,
            ShortfallArg::FillFromU => Shortfall::FillFromU,
        },
        erasure_p: args.erasure_p,
        receivers: args.receivers,
        seed: args.seed,
        trials: args.trials,
        symbol_size: args.symbol_size,
        degrees: DegreeSource::RobustSoliton {
            c: args.c,
            delta: args.delta,
        },
        cap: args.cap,
        ..SessionConfig::new(args.scheme.into(), args.k)
    };
    let traces = run_trials(&config)?;
    for t in &traces {
        let s = &t.summary;
        writeln!(
            out,
            "trial={} forward_total={} received_total={} feedback_total={} feedback_bits={}",
            t.trial, s.forward_total, s.received_total, s.feedback_total, s.feedback_bits
        )
        .map_err(io_out)?;
    }
    let n = traces.len() as f64;
    let mean = |f: &dyn Fn(&crate::simulator::SessionSummary) -> f64| {
        traces.iter().map(|t| f(&t.summary)).sum::<f64>() / n
    };
    writeln!(
        out,
        "trials={}\nmean_forward_total={:.4}\nmean_feedback_total={:.4}\nmean_feedback_bits={:.4}\nmean_overhead={:.6}\nmean_input_degree={:.6}",
        traces.len(),
        mean(&|s| s.forward_total as f64),
        mean(&|s| s.feedback_total as f64),
        mean(&|s| s.feedback_bits as f64),
        mean(&|s| s.overhead),
        mean(&|s| s.average_input_degree),
    )
    .map_err(io_out)?;
    if let Some(path) = args.out {
        export_csv(&traces, &path)?;
        writeln!(out, "csv={}", path.display()).map_err(io_out)?;
    }
    Ok(())
}

fn bound(args: BoundArgs, out: &mut dyn Write) -> Result<()> {
    let params = RobustSolitonParams::new(args.k, args.c, args.delta)?;
    let source = DegreeSource::RobustSoliton {
        c: params.c,
        delta: params.delta,
    };
    let full = source.for_block(args.k)?;
    let plain = ml_failure_bound_nofeedback(args.k, args.n, &full)?;
    writeln!(
        out,
        "k={}\nn={}\nbound_nofeedback={:e}",
        args.k, args.n, plain
    )
    .map_err(io_out)?;
    if let Some(path) = &args.schedule {
        let schedule = load_schedule(path)?;
        let dists = schedule_distributions(args.k, args.n, &schedule, &source)?;
        let target = args
            .target_event
            .map_or(TargetStratum::NeverAcked, TargetStratum::AckedAt);
        let acked = match args.acked_columns {
            AckedColumnsArg::Unknown => AckedColumns::Unknown,
            AckedColumnsArg::Known => AckedColumns::Known,
        };
        let b = ml_failure_bound_feedback(args.k, args.n, &schedule, &dists, target, acked)?;
        writeln!(
            out,
            "feedback_events={}\nbound_feedback={:e}",
            schedule.len(),
            b
        )
        .map_err(io_out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_only_schedule_is_empty() {
        let f = schedule_file("t,m\n");
        assert!(load_schedule(f.path()).unwrap().is_empty());
    }

    #[test]
    fn two_event_schedule() {
        let f = schedule_file("t,m\n50,20\n100,20\n");
        let s = load_schedule(f.path()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.intervals(100).unwrap(), vec![(50, 0), (50, 20), (0, 20)]);
    }

    #[test]
    fn schedule_errors_carry_line_numbers() {
        let f = schedule_file("t,m\n50,20\n40,25\n");
        match load_schedule(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let f = schedule_file("t,m\n50,x\n");
        assert!(matches!(
            load_schedule(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
        let f = schedule_file("a,b\n");
        assert!(matches!(
            load_schedule(f.path()),
            Err(Error::Parse { line: 1, .. })
        ));
        let f = schedule_file("t,m\n10,5\n20,4\n");
        assert!(matches!(
            load_schedule(f.path()),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            load_schedule(Path::new("/nonexistent/s.csv")),
            Err(Error::Io { .. })
        ));
    }

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("nonuniform-fountain").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_str(&["version"]).0, 0);
        assert_eq!(run_str(&["--help"]).0, 0);
        assert_eq!(run_str(&["bogus"]).0, 2);
        assert_eq!(run_str(&["analyze-k3", "--p1", "abc", "--p2", "0"]).0, 2);
        assert_eq!(run_str(&["analyze-k2", "--p", "0.9"]).0, 2);
        let (code, _, err) = run_str(&[
            "bound",
            "--k",
            "10",
            "--n",
            "12",
            "--schedule",
            "/nonexistent",
        ]);
        assert_eq!(code, 1, "{err}");
    }

    #[test]
    fn analyze_k3_at_degree_one() {
        let (code, out, _) = run_str(&["analyze-k3", "--p1", "1", "--p2", "0"]);
        assert_eq!(code, 0);
        assert!(
            out.contains("n_del=3\n") && out.contains("n_lt=5.5\n") && out.contains("f_del=2\n"),
            "{out}"
        );
    }
}
