//! Command-line front end: instance generation, online runs, batch
//! experiments, the exact oracle, schedule verification, and report tables.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use flowsim::adversary::{
    base_instance, capacity_adversary, certify_base_tour, gen_lower_bound, Lean, LowerBoundKind,
};
use flowsim::bundling::{stream_bundles, SplitRule};
use flowsim::dispatch::run_tree_algorithm;
use flowsim::grouping::binarize;
use flowsim::instance::{validate, GenParams};
use flowsim::oracle::optimal_max_flow;
use flowsim::rat::{fmt_rat, parse_rat, rat, Rat};
use flowsim::sim::{
    run_online, trace_digest, DoublingWrapper, FifoBatchOnline, OnlineAlgorithm, RunOutcome,
    TreeOnline,
};
use flowsim::speeding::{run_speeding, SpeedConfig, TourMode};
use flowsim::{Capacity, Instance, Schedule};

#[derive(Parser)]
#[command(name = "flowsim", version, about = "Online depot-dispatch simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance document (adversarial families or seeded
    /// feasible instances with a witness).
    Gen(GenArgs),
    /// Run an online algorithm over an instance and report flow times.
    Run(RunArgs),
    /// Generate-and-run many seeded instances, emitting a CSV table.
    Batch(BatchArgs),
    /// Exact offline optimum for a tiny instance.
    Oracle(OracleArgs),
    /// Re-validate a schedule against an instance; exit 1 on violation.
    Verify(VerifyArgs),
    /// Dump bundle membership for an instance and interval length.
    Bundle(BundleArgs),
    /// Render batch/run result lines as a table or CSV.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Base,
    Legs,
    Speeding,
    Hamiltonian,
    Copies,
    Capacity,
    Feasible,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Gadget / phase parameter for base, legs, capacity.
    #[arg(long)]
    p: Option<i64>,
    /// Lean letter or per-phase vector, e.g. `L` or `LRLR`.
    #[arg(long)]
    lean: Option<String>,
    /// Speeding parameter; phases must come out integral.
    #[arg(long)]
    eps: Option<String>,
    /// Cycle size for hamiltonian / copies.
    #[arg(long)]
    n: Option<i64>,
    /// Seed for feasible generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    tree_size: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Vehicle capacity: integer or `inf`.
    #[arg(long, default_value = "inf")]
    capacity: String,
    #[arg(long, default_value_t = 60)]
    horizon: i64,
    #[arg(long = "f-target", default_value_t = 12)]
    f_target: i64,
    #[arg(long, default_value_t = 3)]
    max_edge_len: i64,
    #[arg(long, default_value_t = 12)]
    max_idle: i64,
    /// Write the witness schedule of a feasible instance here.
    #[arg(long)]
    witness: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoKind {
    Tree,
    Speeding,
    FifoBatch,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeKind {
    Exact,
    Tsp2,
    Cvrp,
}

impl From<ModeKind> for TourMode {
    fn from(m: ModeKind) -> TourMode {
        match m {
            ModeKind::Exact => TourMode::Exact,
            ModeKind::Tsp2 => TourMode::Tsp2,
            ModeKind::Cvrp => TourMode::Cvrp,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Instance document path (`-` for stdin).
    #[arg(long, required_unless_present = "adaptive")]
    instance: Option<PathBuf>,
    /// Adversary descriptor path: the run plays against the adaptive stream.
    #[arg(long)]
    adaptive: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: AlgoKind,
    /// Flow-time bound guess, required unless `--doubling`.
    #[arg(long = "F")]
    f: Option<i64>,
    /// Wrap the tree algorithm in the guess-doubling scheme.
    #[arg(long, default_value_t = false)]
    doubling: bool,
    /// Per-F competitiveness of the wrapped algorithm (doubling only).
    #[arg(long, default_value_t = 8)]
    beta: i64,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeKind>,
    /// Write the schedule document here.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Append a result line (JSON) here.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Print the event trace.
    #[arg(long, default_value_t = false)]
    trace: bool,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long, default_value_t = 20)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum)]
    algo: AlgoKind,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeKind>,
    #[arg(long, default_value = "inf")]
    capacity: String,
    #[arg(long, default_value_t = 16)]
    tree_size: usize,
    #[arg(long, default_value_t = 48)]
    horizon: i64,
    #[arg(long = "f-target", default_value_t = 12)]
    f_target: i64,
    #[arg(long, default_value_t = 3)]
    max_edge_len: i64,
    #[arg(long, default_value_t = 12)]
    max_idle: i64,
    #[arg(long, default_value_t = 4)]
    threads: usize,
    /// Also append JSON result lines here (for `report`).
    #[arg(long)]
    results: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 6)]
    limit: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    /// Speed factor the schedule was produced at.
    #[arg(long, default_value = "1")]
    speed: String,
    /// Fail (exit 1) if the maximum flow exceeds this bound.
    #[arg(long)]
    bound: Option<String>,
}

#[derive(Args)]
struct BundleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long = "F")]
    f: i64,
    /// single (one vehicle) or multi (several vehicles) split rule.
    #[arg(long, default_value = "single")]
    mode: String,
    #[arg(long, default_value_t = true)]
    dump: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON result lines, one object per line (from `run`/`batch`).
    #[arg(long = "in")]
    input: PathBuf,
    /// Emit CSV instead of an aligned table.
    #[arg(long, default_value_t = false)]
    csv: bool,
}

/// One result row; written by `run`/`batch`, consumed by `report`.
#[derive(Debug, Serialize, Deserialize)]
struct ResultRow {
    instance: String,
    algo: String,
    k: usize,
    c: String,
    f: i64,
    max_flow: String,
    bound: String,
    pass: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct AdversaryDoc {
    adversary: String,
    p: i64,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    instance: Option<String>,
    algo: String,
    config: BTreeMap<String, String>,
    seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bundle(args) => cmd_bundle(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn read_input(path: &PathBuf) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        Ok(buf)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn write_output(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_capacity(s: &str) -> Result<Capacity> {
    if s == "inf" {
        Ok(Capacity::Unbounded)
    } else {
        let c: u32 = s.parse().context("capacity must be an integer or `inf`")?;
        if c == 0 {
            bail!("capacity must be at least 1");
        }
        Ok(Capacity::Finite(c))
    }
}

fn parse_leans(s: &str, want: usize) -> Result<Vec<Lean>> {
    let entries: Vec<Lean> = s
        .chars()
        .map(|c| Lean::parse(c).ok_or_else(|| anyhow!("bad lean letter {c:?}")))
        .collect::<Result<_>>()?;
    match entries.len() {
        1 => Ok(vec![entries[0]; want]),
        n if n == want => Ok(entries),
        n => bail!("lean vector has {n} letters, expected 1 or {want}"),
    }
}

fn cmd_gen(args: GenArgs) -> Result<i32> {
    let text = match args.kind {
        GenKind::Base => {
            let p = args.p.context("--p is required for base")?;
            let lean = parse_leans(args.lean.as_deref().unwrap_or("L"), 1)?[0];
            let cert = certify_base_tour(p, lean)?;
            eprintln!(
                "certified optimal tour: {} length units ({} half-units), counting bound {}",
                cert.length, cert.half_units, cert.counting_bound
            );
            base_instance(p, lean)?.to_json()
        }
        GenKind::Legs => {
            let p = args.p.context("--p is required for legs")?;
            let leans = parse_leans(args.lean.as_deref().unwrap_or("L"), p as usize)?;
            gen_lower_bound(&LowerBoundKind::Legs { p, leans })?.to_json()
        }
        GenKind::Speeding => {
            let eps = parse_rat(args.eps.as_deref().context("--eps is required for speeding")?)
                .map_err(|e| anyhow!(e))?;
            let p = flowsim::adversary::speeding_phase_count(eps)?;
            let leans = parse_leans(args.lean.as_deref().unwrap_or("L"), p as usize)?;
            gen_lower_bound(&LowerBoundKind::SpeedingEps { eps, leans })?.to_json()
        }
        GenKind::Hamiltonian => {
            let n_bar = args.n.context("--n is required for hamiltonian")?;
            gen_lower_bound(&LowerBoundKind::Hamiltonian { n_bar })?.to_json()
        }
        GenKind::Copies => {
            let n_bar = args.n.context("--n is required for copies")?;
            gen_lower_bound(&LowerBoundKind::Copies { n_bar })?.to_json()
        }
        GenKind::Capacity => {
            let p = args.p.context("--p is required for capacity")?;
            capacity_adversary(p)?; // validates the parameter
            serde_json::to_string_pretty(&AdversaryDoc {
                adversary: "capacity".into(),
                p,
            })?
        }
        GenKind::Feasible => {
            let params = GenParams {
                tree_size: args.tree_size,
                vehicles: args.k,
                capacity: parse_capacity(&args.capacity)?,
                horizon: args.horizon,
                f_target: args.f_target,
                max_edge_len: args.max_edge_len,
                max_idle: args.max_idle,
            };
            let (inst, witness) = flowsim::instance::generate_feasible(args.seed, &params)?;
            if let Some(path) = &args.witness {
                std::fs::write(path, witness.to_json())?;
            }
            inst.to_json()
        }
    };
    write_output(&args.out, &text)?;
    Ok(0)
}

fn algo_name(algo: AlgoKind) -> &'static str {
    match algo {
        AlgoKind::Tree => "tree",
        AlgoKind::Speeding => "speeding",
        AlgoKind::FifoBatch => "fifo-batch",
    }
}

#[allow(clippy::too_many_arguments)]
fn run_algorithm(
    inst: &Instance,
    algo: AlgoKind,
    f: Option<i64>,
    doubling: bool,
    beta: i64,
    eps: Option<&str>,
    mode: Option<ModeKind>,
    adversary_p: Option<i64>,
) -> Result<(RunOutcome, Rat, BTreeMap<String, String>)> {
    let mut config = BTreeMap::new();
    let (out, speed) = match algo {
        AlgoKind::Tree if doubling => {
            config.insert("doubling".into(), "true".into());
            config.insert("beta".into(), beta.to_string());
            let factory_inst = inst.clone();
            let mut wrapper = DoublingWrapper::new(inst.graph.clone(), beta, move |f| {
                Box::new(TreeOnline::new(&factory_inst, f).expect("wrapped tree"))
                    as Box<dyn OnlineAlgorithm>
            });
            let out = run_online(inst, &mut wrapper, rat(1), None)?;
            let st = wrapper.state();
            config.insert("final_f".into(), st.f.to_string());
            config.insert("delay".into(), st.d.to_string());
            (out, rat(1))
        }
        AlgoKind::Tree => {
            let f = f.context("--F is required for the tree algorithm")?;
            config.insert("F".into(), f.to_string());
            (run_tree_algorithm(inst, f)?, rat(1))
        }
        AlgoKind::Speeding => {
            let f = f.context("--F is required for the speeding algorithm")?;
            let eps =
                parse_rat(eps.context("--eps is required for speeding")?).map_err(|e| anyhow!(e))?;
            let mode: TourMode = mode.context("--mode is required for speeding")?.into();
            let cfg = SpeedConfig::new(mode, eps)?;
            config.insert("F".into(), f.to_string());
            config.insert("eps".into(), fmt_rat(cfg.eps));
            config.insert("gamma".into(), fmt_rat(cfg.gamma));
            config.insert("speed".into(), fmt_rat(cfg.speed));
            (run_speeding(inst, f, cfg)?, cfg.speed)
        }
        AlgoKind::FifoBatch => {
            let mut algo = FifoBatchOnline::new(inst);
            let out = match adversary_p {
                Some(p) => {
                    let (_, mut adv) = capacity_adversary(p)?;
                    run_online(inst, &mut algo, rat(1), Some(&mut adv))?
                }
                None => run_online(inst, &mut algo, rat(1), None)?,
            };
            (out, rat(1))
        }
    };
    Ok((out, speed, config))
}

fn cmd_run(args: RunArgs) -> Result<i32> {
    let (inst, adversary_p, source) = match (&args.instance, &args.adaptive) {
        (Some(path), None) => {
            let inst = Instance::from_json(&read_input(path)?)?;
            (inst, None, path.display().to_string())
        }
        (None, Some(path)) | (Some(_), Some(path)) => {
            let doc: AdversaryDoc = serde_json::from_str(&read_input(path)?)?;
            if doc.adversary != "capacity" {
                bail!("unknown adversary kind {:?}", doc.adversary);
            }
            let (skeleton, _) = capacity_adversary(doc.p)?;
            (skeleton, Some(doc.p), path.display().to_string())
        }
        (None, None) => bail!("either --instance or --adaptive is required"),
    };
    let (out, speed, config) = run_algorithm(
        &inst,
        args.algo,
        args.f,
        args.doubling,
        args.beta,
        args.eps.as_deref(),
        args.mode,
        adversary_p,
    )?;
    let manifest = RunManifest {
        command: "run".into(),
        instance: Some(source.clone()),
        algo: algo_name(args.algo).into(),
        config,
        seed: None,
    };
    let recheck = validate(&out.instance, &out.schedule, speed)?;
    let payload = serde_json::json!({
        "manifest": manifest,
        "max_flow": fmt_rat(recheck.max_flow),
        "per_request_flow": recheck.per_request.iter().map(|&r| fmt_rat(r)).collect::<Vec<_>>(),
        "trips": out.schedule.trips().count(),
        "trace_digest": trace_digest(&out.trace),
    });
    if args.trace {
        for ev in &out.trace {
            eprintln!("{ev}");
        }
    }
    if let Some(path) = &args.out {
        std::fs::write(path, out.schedule.to_json())?;
    }
    if let Some(path) = &args.results {
        let row = ResultRow {
            instance: source,
            algo: algo_name(args.algo).into(),
            k: inst.vehicles,
            c: inst.capacity.to_string(),
            f: args.f.unwrap_or(0),
            max_flow: fmt_rat(recheck.max_flow),
            bound: String::new(),
            pass: true,
        };
        append_line(path, &serde_json::to_string(&row)?)?;
    }
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(0)
}

fn append_line(path: &PathBuf, line: &str) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}

fn cmd_batch(args: BatchArgs) -> Result<i32> {
    let capacity = parse_capacity(&args.capacity)?;
    let seeds: Vec<u64> = (args.seed..args.seed + args.count).collect();
    let threads = args.threads.max(1);
    let chunks: Vec<Vec<u64>> = seeds
        .chunks(seeds.len().div_ceil(threads).max(1))
        .map(|c| c.to_vec())
        .collect();
    let rows: Vec<ResultRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| {
                let args = &args;
                scope.spawn(move || -> Result<Vec<ResultRow>> {
                    let mut rows = Vec::new();
                    for &seed in chunk {
                        let params = GenParams {
                            tree_size: args.tree_size,
                            vehicles: args.k,
                            capacity,
                            horizon: args.horizon,
                            f_target: args.f_target,
                            max_edge_len: args.max_edge_len,
                            max_idle: args.max_idle,
                        };
                        let (inst, _) = flowsim::instance::generate_feasible(seed, &params)?;
                        let f = params.f_target;
                        let (out, speed, _) = run_algorithm(
                            &inst,
                            args.algo,
                            Some(f),
                            false,
                            8,
                            args.eps.as_deref(),
                            args.mode,
                            None,
                        )?;
                        let recheck = validate(&out.instance, &out.schedule, speed)?;
                        let bound: Option<Rat> = match args.algo {
                            AlgoKind::Tree if args.k == 1 => Some(rat(8 * f)),
                            AlgoKind::Tree => Some(rat(24 * f)),
                            AlgoKind::Speeding => {
                                let eps = parse_rat(args.eps.as_deref().unwrap_or("1/2"))
                                    .map_err(|e| anyhow!(e))?;
                                let mode: TourMode =
                                    args.mode.context("--mode required")?.into();
                                let cfg = SpeedConfig::new(mode, eps)?;
                                Some(cfg.gamma * rat(2 * f))
                            }
                            AlgoKind::FifoBatch => None,
                        };
                        rows.push(ResultRow {
                            instance: format!("feasible:{seed}"),
                            algo: algo_name(args.algo).into(),
                            k: args.k,
                            c: capacity.to_string(),
                            f,
                            max_flow: fmt_rat(recheck.max_flow),
                            bound: bound.map(fmt_rat).unwrap_or_default(),
                            pass: bound.is_none_or(|b| recheck.max_flow <= b),
                        });
                    }
                    Ok(rows)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread"))
            .collect::<Result<Vec<_>>>()
            .map(|vs| vs.into_iter().flatten().collect())
    })?;
    println!("instance,algo,k,c,F,max_flow,bound,pass");
    let mut all_pass = true;
    for row in &rows {
        all_pass &= row.pass;
        println!(
            "{},{},{},{},{},{},{},{}",
            row.instance, row.algo, row.k, row.c, row.f, row.max_flow, row.bound, row.pass
        );
        if let Some(path) = &args.results {
            append_line(path, &serde_json::to_string(row)?)?;
        }
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_oracle(args: OracleArgs) -> Result<i32> {
    let inst = Instance::from_json(&read_input(&args.instance)?)?;
    let opt = optimal_max_flow(&inst, args.limit)?;
    let payload = serde_json::json!({
        "max_flow": opt.max_flow,
        "schedule": serde_json::from_str::<serde_json::Value>(&opt.witness.to_json())?,
    });
    write_output(&args.out, &serde_json::to_string_pretty(&payload)?)?;
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    let inst = Instance::from_json(&read_input(&args.instance)?)?;
    let sch = Schedule::from_json(&read_input(&args.schedule)?)?;
    let speed = parse_rat(&args.speed).map_err(|e| anyhow!(e))?;
    let report = match validate(&inst, &sch, speed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("invalid schedule: {e}");
            return Ok(1);
        }
    };
    println!("max_flow {}", fmt_rat(report.max_flow));
    if let Some(bound) = &args.bound {
        let bound = parse_rat(bound).map_err(|e| anyhow!(e))?;
        if report.max_flow > bound {
            eprintln!(
                "bound violated: {} > {}",
                fmt_rat(report.max_flow),
                fmt_rat(bound)
            );
            return Ok(1);
        }
    }
    Ok(0)
}

fn cmd_bundle(args: BundleArgs) -> Result<i32> {
    let inst = Instance::from_json(&read_input(&args.instance)?)?;
    let tree = inst.tree()?;
    let bin;
    let rule = match args.mode.as_str() {
        "single" => SplitRule::Single,
        "multi" => {
            bin = binarize(&tree);
            SplitRule::Multi {
                bin: &bin,
                eps: (1, 1),
            }
        }
        other => bail!("unknown split mode {other:?} (expected single or multi)"),
    };
    let bundles = stream_bundles(&tree, &inst, args.f, rule)?;
    if args.dump {
        for b in &bundles {
            let positions = inst.positions(&b.requests);
            println!(
                "bundle {} release {} size {} mst {} requests {:?}",
                b.index,
                b.release,
                b.requests.len(),
                tree.mst(&positions)?,
                b.requests
            );
        }
    }
    Ok(0)
}

fn cmd_report(args: ReportArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let rows: Vec<ResultRow> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<std::result::Result<_, _>>()
        .context("parsing result lines")?;
    if args.csv {
        println!("instance,algo,k,c,F,max_flow,bound,pass");
        for r in &rows {
            println!(
                "{},{},{},{},{},{},{},{}",
                r.instance, r.algo, r.k, r.c, r.f, r.max_flow, r.bound, r.pass
            );
        }
    } else {
        println!(
            "{:<24} {:<10} {:>3} {:>4} {:>5} {:>9} {:>9} {:>5}",
            "instance", "algo", "k", "c", "F", "max_flow", "bound", "pass"
        );
        for r in &rows {
            println!(
                "{:<24} {:<10} {:>3} {:>4} {:>5} {:>9} {:>9} {:>5}",
                r.instance, r.algo, r.k, r.c, r.f, r.max_flow, r.bound, r.pass
            );
        }
    }
    let all = rows.iter().all(|r| r.pass);
    Ok(if all { 0 } else { 1 })
}
