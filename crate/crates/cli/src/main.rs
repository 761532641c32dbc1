use std::collections::HashSet;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use stackmatch::graph::{load_app_model, to_json_pretty, AppModel};
use stackmatch::log::{parse_log, write_log, LogSequence};
use stackmatch::matcher::{match_all, to_dot, MatchConfig, MatchReport, SegmentStatus, Strategy};
use stackmatch::signature::ApiSignature;
use stackmatch::sim::depth::{depth_cdf, extend_cdf, interpolate_overhead, read_overhead_csv, select_k, write_cdf_csv, OverheadPoint};
use stackmatch::sim::gen::{generate_app, GenParams};
use stackmatch::sim::{compare_strategies, simulate_with, write_rows_csv, GroundTruth, Scenario};

#[derive(Parser)]
#[command(name = "stackmatch", version, about = "Reconstruct app execution paths from API logs with call-stack info")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Guided,
    Backtracking,
}

#[derive(Subcommand)]
enum Command {
    /// Match a log against an app model and write the report.
    Match {
        /// App model JSON
        #[arg(short = 'g', long = "graph")]
        graph: PathBuf,
        /// JSON-lines log; `-` reads standard input.
        #[arg(short = 'l', long = "log")]
        log: String,
        /// Report file; standard output when omitted.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "guided")]
        strategy: StrategyArg,
        /// Keep searching until this many paths per segment are found.
        #[arg(long = "all-paths", value_name = "N")]
        all_paths: Option<usize>,
        /// Treat an ambiguous segment as a failure.
        #[arg(long)]
        strict: bool,
        /// File with one library prefix per line, replacing the model's list.
        #[arg(long, value_name = "FILE")]
        prefixes: Option<PathBuf>,
        /// Process to keep; defaults to the pid of the first callback record
        #[arg(long)]
        pid: Option<u32>,
        /// Also write a DOT rendering next to the report, with a .dot extension.
        #[arg(long = "emit-dot", requires = "output")]
        emit_dot: bool,
        /// Worker threads; 0 uses the hardware parallelism.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Window size the log was recorded with; defaults to its widest window.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Generate a model (unless one is given) and simulate a labelled log over it.
    Simulate {
        /// JSON file {"gen": {...}, "scenario": {...}}; both parts optional.
        #[arg(short = 'p', long = "params")]
        params: Option<PathBuf>,
        /// Simulate over this model instead of generating one.
        #[arg(short = 'g', long = "graph")]
        graph: Option<PathBuf>,
        /// Output directory for app.json, trace.jsonl and truth.json.
        #[arg(short = 'o', long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Generate a model only.
    Generate {
        #[arg(short = 'p', long = "params")]
        params: Option<PathBuf>,
        #[arg(short = 'o', long = "output", default_value = "-")]
        output: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Coverage of logged call sites by call depth, and the window size it suggests.
    AnalyzeDepth {
        /// App model JSON
        #[arg(short = 'g', long = "graph")]
        graph: PathBuf,
        /// CSV (k,overhead) anchor points, interpolated linearly.
        #[arg(long, value_name = "FILE")]
        overhead: Option<PathBuf>,
        /// CDF as CSV; `-` for standard output.
        #[arg(short = 'o', long = "output", default_value = "-")]
        output: String,
    },
    /// Run both strategies on a simulated log and score them against its truth.
    Compare {
        /// App model JSON
        #[arg(short = 'g', long = "graph")]
        graph: PathBuf,
        #[arg(short = 'l', long = "log")]
        log: String,
        #[arg(short = 't', long = "truth")]
        truth: PathBuf,
        #[arg(short = 'o', long = "output", default_value = "-")]
        output: String,
    },
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct SimParams {
    gen: GenParams,
    scenario: Scenario,
}

/// Anchor points used when no overhead table is given.
const DEFAULT_OVERHEAD: [(usize, f64); 2] = [(1, 0.0099), (16, 0.0259)];

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Match {
            graph,
            log,
            output,
            strategy,
            all_paths,
            strict,
            prefixes,
            pid,
            emit_dot,
            jobs,
            k,
        } => {
            let model = read_model(&graph)?;
            let log = read_log(&log, k)?;
            let mut cfg = MatchConfig::with_strategy(match strategy {
                StrategyArg::Guided => Strategy::Guided,
                StrategyArg::Backtracking => Strategy::Backtracking,
            });
            if let Some(n) = all_paths {
                if n == 0 {
                    bail!("--all-paths must be at least 1");
                }
                cfg.max_paths = n;
            }
            if let Some(p) = prefixes {
                cfg.prefixes = Some(read_prefixes(&p)?);
            }
            cfg.pid = pid;
            cfg.jobs = jobs;
            let report = match_all(&model, &log, &cfg);
            let json = serde_json::to_string_pretty(&report)? + "\n";
            if let (true, Some(out)) = (emit_dot, &output) {
                write_file(&out.with_extension("dot"), to_dot(&model, &report).as_bytes())?;
            }
            let summary = summary_lines(&report);
            match &output {
                Some(p) => {
                    write_file(p, json.as_bytes())?;
                    print!("{summary}");
                }
                None => {
                    io::stdout().write_all(json.as_bytes())?;
                    eprint!("{summary}");
                }
            }
            for d in &report.diagnostics {
                eprintln!("warning: {d}");
            }
            let failed = !report.all_matched() || (strict && report.any_ambiguous());
            Ok(u8::from(failed))
        }
        Command::Simulate {
            params,
            graph,
            out_dir,
            seed,
            k,
            threads,
        } => {
            let mut p = read_params(params.as_deref())?;
            if let Some(s) = seed {
                p.gen.seed = s;
                p.scenario.seed = s;
            }
            if let Some(k) = k {
                p.scenario.k = k;
            }
            if let Some(t) = threads {
                p.scenario.threads = t;
            }
            let model = match graph {
                Some(g) => read_model(&g)?,
                None => generate_app(&p.gen).context("generating the model")?,
            };
            let (log, truth) = simulate_with(&model, &p.scenario).context("simulating")?;
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            write_file(&out_dir.join("app.json"), (to_json_pretty(&model) + "\n").as_bytes())?;
            let mut trace = Vec::new();
            write_log(&log, &mut trace)?;
            write_file(&out_dir.join("trace.jsonl"), &trace)?;
            let truth_json = serde_json::to_string_pretty(&truth)? + "\n";
            write_file(&out_dir.join("truth.json"), truth_json.as_bytes())?;
            println!(
                "{} nodes, {} records ({} segments) written to {}",
                model.node_count(),
                log.len(),
                truth.segments().count(),
                out_dir.display()
            );
            Ok(0)
        }
        Command::Generate { params, output, seed } => {
            let mut p = read_params(params.as_deref())?;
            if let Some(s) = seed {
                p.gen.seed = s;
            }
            let model = generate_app(&p.gen).context("generating the model")?;
            write_out(&output, (to_json_pretty(&model) + "\n").as_bytes())?;
            Ok(0)
        }
        Command::AnalyzeDepth {
            graph,
            overhead,
            output,
        } => {
            let model = read_model(&graph)?;
            let anchors = match overhead {
                Some(p) => {
                    let f = fs::File::open(&p).with_context(|| format!("reading {}", p.display()))?;
                    read_overhead_csv(f).with_context(|| format!("reading {}", p.display()))?
                }
                None => DEFAULT_OVERHEAD
                    .iter()
                    .map(|&(k, overhead)| OverheadPoint { k, overhead })
                    .collect(),
            };
            let k_max = anchors.last().map_or(0, |a| a.k);
            let table = interpolate_overhead(&anchors, k_max);
            let logged: HashSet<ApiSignature> = model.logged_apis().iter().cloned().collect();
            let cdf = depth_cdf(&model, &logged);
            if cdf.is_empty() {
                bail!("{} has no statically reachable logged call site", graph.display());
            }
            let cdf = extend_cdf(&cdf, k_max);
            let k = select_k(&cdf, &table)?;
            let mut csv = Vec::new();
            write_cdf_csv(&mut csv, &cdf)?;
            write_out(&output, &csv)?;
            if output == "-" {
                eprintln!("selected K = {k}");
            } else {
                println!("selected K = {k}");
            }
            Ok(0)
        }
        Command::Compare {
            graph,
            log,
            truth,
            output,
        } => {
            let model = read_model(&graph)?;
            let truth: GroundTruth = serde_json::from_slice(&read_path(&truth)?)
                .with_context(|| format!("parsing {}", truth.display()))?;
            let log = read_log(&log, Some(truth.k))?;
            check_truth(&log, &truth)?;
            let row = compare_strategies(&model, &log, &truth);
            let mut csv = Vec::new();
            write_rows_csv(&mut csv, &[row])?;
            write_out(&output, &csv)?;
            Ok(0)
        }
    }
}

fn summary_lines(report: &MatchReport) -> String {
    let mut out = String::new();
    for t in &report.threads {
        let matched = t.segments.iter().filter(|s| s.status == SegmentStatus::Matched).count();
        let visited: u64 = t.segments.iter().map(|s| s.visited).sum();
        let ms: f64 = t.segments.iter().map(|s| s.elapsed_ms).sum();
        let ambiguous = t.segments.iter().filter(|s| s.ambiguous).count();
        out.push_str(&format!(
            "tid {}: {matched}/{} segments matched, {visited} nodes visited, {ambiguous} ambiguous, {ms:.1} ms\n",
            t.tid,
            t.segments.len()
        ));
    }
    out
}

fn check_truth(log: &LogSequence, truth: &GroundTruth) -> Result<()> {
    if truth.records.len() != log.len() {
        bail!("truth describes {} records but the log has {}", truth.records.len(), log.len());
    }
    for (r, t) in log.records.iter().zip(&truth.records) {
        if (r.seq, r.pid, r.tid) != (t.seq, t.pid, t.tid) {
            bail!("truth record seq {} does not describe log record seq {}", t.seq, r.seq);
        }
    }
    let seqs: HashSet<u64> = log.records.iter().map(|r| r.seq).collect();
    for s in truth.segments() {
        if s.record_seqs.iter().any(|q| !seqs.contains(q)) || s.match_positions.len() != s.record_seqs.len() {
            bail!("truth segment at seq {} does not fit the log", s.callback_seq);
        }
    }
    Ok(())
}

fn read_path(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_input(path: &str) -> Result<Vec<u8>> {
    if path == "-" {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf).context("reading standard input")?;
        Ok(buf)
    } else {
        read_path(Path::new(path))
    }
}

fn read_model(path: &Path) -> Result<AppModel> {
    load_app_model(&read_path(path)?).with_context(|| format!("loading {}", path.display()))
}

fn read_log(path: &str, k: Option<usize>) -> Result<LogSequence> {
    let bytes = read_input(path)?;
    let mut log = parse_log(&bytes, k.unwrap_or(usize::MAX)).with_context(|| format!("parsing {path}"))?;
    if k.is_none() {
        log.k = log.records.iter().map(|r| r.csi.p.len()).max().unwrap_or(1).max(1);
    }
    Ok(log)
}

fn read_prefixes(path: &Path) -> Result<Vec<String>> {
    let text = String::from_utf8(read_path(path)?).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn read_params(path: Option<&Path>) -> Result<SimParams> {
    match path {
        None => Ok(SimParams::default()),
        Some(p) => serde_json::from_slice(&read_path(p)?).with_context(|| format!("parsing {}", p.display())),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_out(path: &str, bytes: &[u8]) -> Result<()> {
    if path == "-" {
        io::stdout().write_all(bytes).context("writing standard output")
    } else {
        write_file(Path::new(path), bytes)
    }
}
