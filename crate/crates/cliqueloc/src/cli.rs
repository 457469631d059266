//! Command-line surface.
//!
//! Every command computes its full output before anything is written, so a
//! failure leaves no partial files or stdout behind.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use cliqueloc_core::analysis::{z_chain, LocalisationReport};
use cliqueloc_core::exact::{
    self, confinement_floor, confinement_profile, epsilon_lower_bound, epsilon_n, q_measure,
    single_vertex_bound, CertifiedBound,
};
use cliqueloc_core::{
    d_sets, enumerate_maximal_cliques, final_maximal_clique, run, validate_partition, Graph,
    OrderedClique, RateModel, RateParams, State, TieBreak,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::formats::{self, parse_counts, parse_labels, read_graph};
use crate::replicas;

#[derive(Debug, Parser)]
#[command(
    name = "cliqueloc",
    version,
    about = "Growth processes on graphs: simulation, clique detection and exact bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the maximal cliques of a graph, one per line.
    Cliques(CliquesArgs),
    /// D-sets and blocks of an ordered maximal clique.
    Dsets(DsetsArgs),
    /// Final maximal clique of a state.
    FinalClique(FinalCliqueArgs),
    /// Simulate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo localisation report over independent replicas.
    Localize(LocalizeArgs),
    /// Exact small-horizon path measures by enumeration.
    Exact(ExactArgs),
    /// Certified lower bounds on confinement probabilities.
    Bounds(BoundsArgs),
    /// Return-time statistics of the difference chain on a complete graph.
    Zchain(ZchainArgs),
    /// Exact Lyapunov drift of the difference chain over an l1 shell.
    Drift(DriftArgs),
}

#[derive(Debug, Args)]
pub struct Rates {
    #[arg(long, value_parser = positive)]
    pub alpha: f64,
    #[arg(long, value_parser = positive)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct CliquesArgs {
    pub graph: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DsetsArgs {
    pub graph: PathBuf,
    /// Ordered clique as comma-separated labels.
    #[arg(long)]
    pub clique: String,
}

#[derive(Debug, Args)]
pub struct FinalCliqueArgs {
    pub graph: PathBuf,
    #[command(flatten)]
    pub rates: Rates,
    /// State as `vertex:count` pairs; unlisted vertices are 0.
    #[arg(long, default_value = "")]
    pub counts: String,
    /// `lex` or `rand:SEED`.
    #[arg(long, default_value = "lex", value_parser = parse_tie)]
    pub tie: TieBreak,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub graph: PathBuf,
    #[command(flatten)]
    pub rates: Rates,
    #[arg(long)]
    pub steps: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "")]
    pub x0: String,
    /// Trajectory CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the final state as `vertex,count` CSV.
    #[arg(long)]
    pub state_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    pub graph: PathBuf,
    #[command(flatten)]
    pub rates: Rates,
    #[arg(long)]
    pub steps: usize,
    #[arg(long)]
    pub replicas: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "")]
    pub x0: String,
    /// Fraction of the horizon treated as the tail.
    #[arg(long, default_value_t = 0.5)]
    pub tail: f64,
    /// Worker threads; the report does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for per-replica `n,v,u,ratio` traces.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Trace sampling period in steps.
    #[arg(long, default_value_t = 100)]
    pub trace_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactMode {
    /// Measure Q on in-clique block paths.
    Q,
    /// Probability that the first n allocations stay in the set.
    Confine,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    pub graph: PathBuf,
    #[command(flatten)]
    pub rates: Rates,
    /// Comma-separated labels; ordered for `q`, any vertex set for `confine`.
    #[arg(long)]
    pub clique: String,
    #[arg(long)]
    pub horizon: usize,
    #[arg(long, value_enum, default_value_t = ExactMode::Confine)]
    pub mode: ExactMode,
    #[arg(long, default_value = "")]
    pub x0: String,
    /// Largest number of paths or DP states allowed.
    #[arg(long, default_value_t = exact::DEFAULT_BUDGET)]
    pub budget: u128,
    /// Include per-path masses in `q` mode.
    #[arg(long)]
    pub paths: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Number of vertices |V|.
    #[arg(long)]
    pub vertices: usize,
    #[arg(long, value_parser = positive)]
    pub alpha: f64,
    /// Adds the single-vertex bound; needs beta < alpha.
    #[arg(long, value_parser = positive)]
    pub beta: Option<f64>,
    /// Clique size.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1e-12, value_parser = positive)]
    pub tol: f64,
    /// Also report the finite-horizon product at this n.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ZchainArgs {
    #[arg(long)]
    pub m: usize,
    #[command(flatten)]
    pub rates: Rates,
    #[arg(long)]
    pub steps: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DriftArgs {
    #[arg(long)]
    pub m: usize,
    #[command(flatten)]
    pub rates: Rates,
    /// `C0:C1` for an explicit shell, or `auto` to search outward.
    #[arg(long, value_parser = parse_shell)]
    pub shell: Shell,
    /// Drift coefficients a_1..a_{m-1}; all 1 when absent.
    #[arg(long)]
    pub a: Option<String>,
    /// Required margin for `auto`.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Shell width for `auto`.
    #[arg(long, default_value_t = 10)]
    pub width: u64,
    /// Largest inner radius tried by `auto`.
    #[arg(long, default_value_t = 500)]
    pub limit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shell {
    Range(u64, u64),
    Auto,
}

fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{s} must be positive and finite"))
    }
}

fn parse_tie(s: &str) -> Result<TieBreak, String> {
    if s == "lex" {
        return Ok(TieBreak::Lexicographic);
    }
    s.strip_prefix("rand:")
        .and_then(|seed| seed.parse().ok())
        .map(TieBreak::Seeded)
        .ok_or_else(|| format!("{s:?} is neither lex nor rand:SEED"))
}

fn parse_shell(s: &str) -> Result<Shell, String> {
    if s == "auto" {
        return Ok(Shell::Auto);
    }
    let bad = || format!("{s:?} is neither C0:C1 nor auto");
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    if a > b {
        return Err(format!("shell {a}:{b} has inner radius above outer radius"));
    }
    Ok(Shell::Range(a, b))
}

fn tie_name(t: TieBreak) -> String {
    match t {
        TieBreak::Lexicographic => "lex".into(),
        TieBreak::Seeded(s) => format!("rand:{s}"),
    }
}

/// Everything a command emits, held until it has fully succeeded.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub files: Vec<(PathBuf, String)>,
}

impl Output {
    fn stdout(text: String) -> Self {
        Output {
            stdout: text,
            files: Vec::new(),
        }
    }

    fn json<T: Serialize>(doc: &T) -> anyhow::Result<Self> {
        Ok(Self::stdout(to_json(doc)?))
    }
}

fn to_json<T: Serialize>(doc: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Serialize)]
struct GraphEcho {
    vertices: Vec<u64>,
    edges: Vec<[u64; 2]>,
}

fn echo(g: &Graph) -> GraphEcho {
    GraphEcho {
        vertices: g.labels().to_vec(),
        edges: g.edges().map(|(a, b)| [g.label(a), g.label(b)]).collect(),
    }
}

/// State as `[label, count]` pairs over every vertex.
fn echo_state(g: &Graph, s: &State) -> Vec<[u64; 2]> {
    s.counts()
        .iter()
        .enumerate()
        .map(|(v, &c)| [g.label(v), c])
        .collect()
}

fn model<'g>(g: &'g Graph, r: &Rates) -> anyhow::Result<RateModel<'g>> {
    Ok(RateModel::new(g, &RateParams::uniform(r.alpha, r.beta))?)
}

fn indices(g: &Graph, spec: &str) -> anyhow::Result<Vec<usize>> {
    let labels = parse_labels(spec)?;
    Ok(g.indices_of(&labels)?)
}

fn cliques(a: &CliquesArgs) -> anyhow::Result<Output> {
    let g = read_graph(&a.graph)?;
    let cs = enumerate_maximal_cliques(&g);
    if a.json {
        return Output::json(&json!({
            "command": "cliques",
            "graph": echo(&g),
            "count": cs.len(),
            "cliques": cs.iter().map(|c| g.labels_of(c)).collect::<Vec<_>>(),
        }));
    }
    let mut out = String::new();
    for c in &cs {
        let labels: Vec<String> = g.labels_of(c).iter().map(u64::to_string).collect();
        out.push_str(&labels.join(" "));
        out.push('\n');
    }
    Ok(Output::stdout(out))
}

fn dsets(a: &DsetsArgs) -> anyhow::Result<Output> {
    let g = read_graph(&a.graph)?;
    let c = OrderedClique::new(&g, indices(&g, &a.clique)?)?;
    let p = d_sets(&g, &c)?;
    let labels = |sets: &[Vec<usize>]| sets.iter().map(|s| g.labels_of(s)).collect::<Vec<_>>();
    Output::json(&json!({
        "command": "dsets",
        "graph": echo(&g),
        "clique": g.labels_of(c.vertices()),
        "d_sets": labels(&p.d_sets),
        "blocks": labels(&p.blocks),
        "partition_valid": validate_partition(&p, &g),
    }))
}

fn final_clique(a: &FinalCliqueArgs) -> anyhow::Result<Output> {
    let g = read_graph(&a.graph)?;
    let m = model(&g, &a.rates)?;
    let s = parse_counts(&g, &a.counts)?;
    let c = final_maximal_clique(&m, &s, a.tie);
    let id = enumerate_maximal_cliques(&g)
        .iter()
        .position(|k| *k == c.sorted())
        .expect("final clique is maximal");
    let exps = m.exponents(&s);
    Output::json(&json!({
        "command": "final-clique",
        "graph": echo(&g),
        "alpha": a.rates.alpha,
        "beta": a.rates.beta,
        "counts": echo_state(&g, &s),
        "tie": tie_name(a.tie),
        "clique": g.labels_of(c.vertices()),
        "clique_id": id,
        "exponents": g.labels().iter().zip(&exps).map(|(l, e)| json!([l, e])).collect::<Vec<_>>(),
    }))
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<Output> {
    let g = read_graph(&a.graph)?;
    let m = model(&g, &a.rates)?;
    let x0 = parse_counts(&g, &a.x0)?;
    let t = run(&m, &x0, a.steps, a.seed)?;
    let csv = formats::trajectory_csv(&g, &t);
    let mut out = Output::default();
    let last = t.final_state();
    if let Some(path) = &a.state_out {
        out.files
            .push((path.clone(), formats::state_csv(&g, &last)));
    }
    match &a.out {
        Some(path) => {
            out.files.push((path.clone(), csv));
            out.stdout = to_json(&json!({
                "command": "simulate",
                "graph": echo(&g),
                "alpha": a.rates.alpha,
                "beta": a.rates.beta,
                "steps": a.steps,
                "seed": a.seed,
                "x0": echo_state(&g, &x0),
                "final_counts": echo_state(&g, &last),
            }))?;
        }
        None => out.stdout = csv,
    }
    Ok(out)
}

#[derive(Serialize)]
struct LocalizeDoc<'a> {
    command: &'static str,
    graph: GraphEcho,
    alpha: f64,
    beta: f64,
    x0: Vec<[u64; 2]>,
    #[serde(flatten)]
    report: &'a LocalisationReport,
}

fn localize(a: &LocalizeArgs) -> anyhow::Result<Output> {
    let g = read_graph(&a.graph)?;
    let m = model(&g, &a.rates)?;
    let x0 = parse_counts(&g, &a.x0)?;
    let mut out = Output::default();
    let report = match &a.traces {
        None => {
            replicas::localisation_report(&m, &x0, a.steps, a.replicas, a.seed, a.tail, a.jobs)?
        }
        Some(dir) => {
            let every = a.trace_every;
            let runs = replicas::map_replicas(
                &m,
                &x0,
                a.steps,
                a.replicas,
                a.seed,
                a.tail,
                a.jobs,
                |t, o| {
                    let set = g
                        .indices_of(&o.localisation_set)
                        .expect("labels come from the graph");
                    formats::ratio_trace_csv(&g, t, &set, every)
                },
            )?;
            let mut outcomes = Vec::with_capacity(runs.len());
            for (o, csv) in runs {
                out.files
                    .push((dir.join(format!("replica_{}.csv", o.replica)), csv));
                outcomes.push(o);
            }
            let cliques = enumerate_maximal_cliques(&g);
            LocalisationReport::assemble(&g, &cliques, outcomes, a.steps, a.seed, a.tail)?
        }
    };
    let doc = to_json(&LocalizeDoc {
        command: "localize",
        graph: echo(&g),
        alpha: a.rates.alpha,
        beta: a.rates.beta,
        x0: echo_state(&g, &x0),
        report: &report,
    })?;
    match &a.out {
        Some(path) => out.files.push((path.clone(), doc)),
        None => out.stdout = doc,
    }
    Ok(out)
}

/// Shape shared by every numeric oracle result.
#[derive(Debug, Serialize)]
struct ExactDoc {
    operation: &'static str,
    inputs: Value,
    value: f64,
    certified_bound: bool,
    tail_tol: Option<f64>,
    #[serde(flatten)]
    extra: serde_json::Map<String, Value>,
}

impl ExactDoc {
    fn exact(operation: &'static str, inputs: Value, value: f64) -> Self {
        ExactDoc {
            operation,
            inputs,
            value,
            certified_bound: false,
            tail_tol: None,
            extra: Default::default(),
        }
    }

    fn certified(operation: &'static str, inputs: Value, b: &CertifiedBound) -> Self {
        let mut extra = serde_json::Map::new();
        extra.insert("terms".into(), json!(b.terms));
        extra.insert("tail_bound".into(), json!(b.tail_bound));
        ExactDoc {
            operation,
            inputs,
            value: b.value,
            certified_bound: true,
            tail_tol: Some(b.tail_tol),
            extra,
        }
    }
}

fn exact_cmd(a: &ExactArgs) -> anyhow::Result<Output> {
    let g = read_graph(&a.graph)?;
    let m = model(&g, &a.rates)?;
    let x0 = parse_counts(&g, &a.x0)?;
    let set = indices(&g, &a.clique)?;
    let inputs = json!({
        "graph": echo(&g),
        "alpha": a.rates.alpha,
        "beta": a.rates.beta,
        "clique": g.labels_of(&set),
        "horizon": a.horizon,
        "x0": echo_state(&g, &x0),
        "budget": a.budget,
        "mode": a.mode,
    });
    let doc = match a.mode {
        ExactMode::Q => {
            let c = OrderedClique::new(&g, set)?;
            let q = q_measure(&m, &x0, &c, a.horizon, a.budget)?;
            let mut doc = ExactDoc::exact("q_measure_total", inputs, q.total());
            doc.extra.insert("paths".into(), json!(q.masses.len()));
            if a.paths {
                let per_path: Vec<Value> = (0..q.masses.len())
                    .map(|i| {
                        let labels: Vec<u64> = q
                            .path(i)
                            .iter()
                            .map(|&k| g.label(c.vertices()[k]))
                            .collect();
                        json!({"path": labels, "mass": q.masses[i]})
                    })
                    .collect();
                doc.extra.insert("masses".into(), Value::Array(per_path));
            }
            doc
        }
        ExactMode::Confine => {
            let profile = confinement_profile(&m, &x0, &set, a.horizon, a.budget)?;
            let mut doc = ExactDoc::exact("confinement_prob", inputs, profile[a.horizon]);
            doc.extra.insert("profile".into(), json!(profile));
            doc
        }
    };
    Output::json(&doc)
}

fn bounds(a: &BoundsArgs) -> anyhow::Result<Output> {
    if a.m == 0 || a.vertices < a.m {
        bail!("need 1 <= m <= vertices");
    }
    let mut results = Vec::new();
    let eps = epsilon_lower_bound(a.vertices, a.alpha, a.m, a.tol)?;
    results.push(ExactDoc::certified(
        "epsilon",
        json!({"vertices": a.vertices, "alpha": a.alpha, "m": a.m}),
        &eps,
    ));
    results.push(ExactDoc::certified(
        "confinement_floor",
        json!({"vertices": a.vertices, "alpha": a.alpha, "m": a.m}),
        &confinement_floor(a.vertices, a.alpha, a.m, a.tol)?,
    ));
    if let Some(n) = a.horizon {
        results.push(ExactDoc::exact(
            "epsilon_n",
            json!({"vertices": a.vertices, "alpha": a.alpha, "m": a.m, "n": n}),
            epsilon_n(a.vertices, a.alpha, a.m, n),
        ));
    }
    if let Some(beta) = a.beta {
        let b = single_vertex_bound(a.vertices, a.alpha, beta, a.tol)?;
        results.push(ExactDoc::certified(
            "single_vertex_bound",
            json!({"vertices": a.vertices, "alpha": a.alpha, "beta": beta}),
            &b,
        ));
    }
    Output::json(&json!({ "command": "bounds", "results": results }))
}

fn zchain(a: &ZchainArgs) -> anyhow::Result<Output> {
    if a.m < 2 {
        bail!("m must be at least 2");
    }
    let g = Graph::complete(a.m);
    let m = model(&g, &a.rates)?;
    let t = run(&m, &State::zeros(a.m), a.steps, a.seed)?;
    let z = z_chain(&g, &t)?;
    let last = z.z(z.len() - 1).to_vec();
    Output::json(&json!({
        "command": "zchain",
        "m": a.m,
        "alpha": a.rates.alpha,
        "beta": a.rates.beta,
        "lambda": a.rates.beta - a.rates.alpha,
        "steps": a.steps,
        "seed": a.seed,
        "final_z": last,
        "return_times": z.return_times.len() - 1,
        "return_stats": z.return_stats(),
    }))
}

fn drift(a: &DriftArgs) -> anyhow::Result<Output> {
    if a.m < 2 {
        bail!("m must be at least 2");
    }
    let coeffs: Vec<f64> = match &a.a {
        Some(spec) => spec
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("bad coefficient list {spec:?}"))?,
        None => vec![1.0; a.m - 1],
    };
    if coeffs.len() != a.m - 1 {
        bail!("expected {} coefficients, got {}", a.m - 1, coeffs.len());
    }
    let lambda = a.rates.beta - a.rates.alpha;
    let origin = exact::z_drift(&coeffs, lambda, &vec![0; a.m - 1])?;
    let scan = match a.shell {
        Shell::Range(c0, c1) => exact::drift_shell_scan(&coeffs, lambda, c0, c1)?,
        Shell::Auto => match exact::find_drift_radius(&coeffs, lambda, a.eps, a.width, a.limit)? {
            Some(s) => s,
            None => bail!(
                "no shell of width {} with drift <= -{} up to radius {}",
                a.width,
                a.eps,
                a.limit
            ),
        },
    };
    let mut inputs = json!({
        "m": a.m,
        "alpha": a.rates.alpha,
        "beta": a.rates.beta,
        "lambda": lambda,
        "a": coeffs,
    });
    if a.shell == Shell::Auto {
        inputs["search"] = json!({"eps": a.eps, "width": a.width, "limit": a.limit});
    }
    Output::json(&json!({
        "command": "drift",
        "inputs": inputs,
        "shell": [scan.inner, scan.outer],
        "points": scan.points,
        "max_drift": scan.max_drift,
        "argmax": scan.argmax,
        "drift_at_origin": origin,
    }))
}

pub fn execute(cli: &Cli) -> anyhow::Result<Output> {
    match &cli.command {
        Command::Cliques(a) => cliques(a),
        Command::Dsets(a) => dsets(a),
        Command::FinalClique(a) => final_clique(a),
        Command::Simulate(a) => simulate(a),
        Command::Localize(a) => localize(a),
        Command::Exact(a) => exact_cmd(a),
        Command::Bounds(a) => bounds(a),
        Command::Zchain(a) => zchain(a),
        Command::Drift(a) => drift(a),
    }
}

/// Writes through a sibling temporary file so readers never see a
/// truncated document.
fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn emit(out: &Output) -> anyhow::Result<()> {
    for (path, contents) in &out.files {
        write_file(path, contents)?;
    }
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(out.stdout.as_bytes())?;
    stdout.flush()?;
    Ok(())
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args`, runs the command and reports failures on one stderr line.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            _ => {
                let rendered = e.render().to_string();
                let first = rendered.lines().next().unwrap_or("invalid arguments");
                let first = first.strip_prefix("error: ").unwrap_or(first);
                eprintln!("error: {}", one_line(first));
                return ExitCode::from(2);
            }
        },
    };
    match execute(&cli).and_then(|out| emit(&out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
