//! `sinr-sketch` command-line driver.
//!
//! Every subcommand reads instances as JSON and writes JSON (or CSV where a
//! table makes sense) to `--out` or standard output. Exit codes: 0 success,
//! 2 usage, 3 invalid input or unmet precondition, 4 internal error.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sinr_sketch::conflict::{build_graph, SublinearF};
use sinr_sketch::generators::{Family, GenSpec, HardParams, RandomParams};
use sinr_sketch::graphalg::greedy_color;
use sinr_sketch::harness::{self, calibrate_gamma, default_tau, lowerbound_curve, random_order, run_tightness_experiment, CalibrationTarget, TightnessConfig};
use sinr_sketch::model::{Instance, LinkId};
use sinr_sketch::par::Execution;
use sinr_sketch::scheduling::{certify, mcma_expand, mwisl_solve, online_schedule, rate_control_replicas, tdma_schedule, PowerMode, Schedule, Utility};
use sinr_sketch::sinr::{self, default_delta, kesselheim_i, kesselheim_threshold, t_strong_partition, PowerAssignment};
use sinr_sketch::{Error, Result};

#[derive(Parser)]
#[command(name = "sinr-sketch", version, about = "Conflict graphs and SINR scheduling experiments")]
struct Cli {
    /// Master seed for generators and randomized orders.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Record wall-clock times in experiment reports.
    #[arg(long, global = true)]
    timing: bool,
    /// Run trials on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance.
    Gen(GenArgs),
    /// Build the conflict graph `G_f`.
    Graph {
        #[command(flatten)]
        input: InstanceArg,
        #[command(flatten)]
        f: FArgs,
        /// Use the uniform-threshold rule `d(i, j) / l_min < f`.
        #[arg(long)]
        uniform: bool,
    },
    /// Greedy coloring of `G_f` in sensitivity order.
    Color {
        #[command(flatten)]
        input: InstanceArg,
        #[command(flatten)]
        f: FArgs,
    },
    /// Weighted capacity via local ratio on `G_f`, then certification.
    Mwisl {
        #[command(flatten)]
        input: InstanceArg,
        #[command(flatten)]
        f: FArgs,
        #[command(flatten)]
        power: PowerArgs,
    },
    /// TDMA schedule from a coloring of `G_f`.
    Schedule {
        #[command(flatten)]
        input: InstanceArg,
        #[command(flatten)]
        f: FArgs,
        #[command(flatten)]
        power: PowerArgs,
    },
    /// Online first-fit schedule for an arrival order.
    Online {
        #[command(flatten)]
        input: InstanceArg,
        #[command(flatten)]
        f: FArgs,
        #[command(flatten)]
        power: PowerArgs,
        /// Comma-separated arrival order (random permutation from `--seed` when absent).
        #[arg(long)]
        arrivals: Option<String>,
    },
    /// Feasibility check of a link set.
    Check {
        #[command(flatten)]
        input: InstanceArg,
        #[command(flatten)]
        links: LinksArg,
        #[arg(long, value_enum, default_value_t = CheckPower::Global)]
        power: CheckPower,
        /// Oblivious exponent, or `auto` for the default interval midpoint.
        #[arg(long, default_value = "auto")]
        tau: String,
        /// Uniform power level.
        #[arg(long, default_value_t = 1.0)]
        p0: f64,
        #[arg(long, value_enum, default_value_t = CheckMethod::Direct)]
        method: CheckMethod,
    },
    /// Split a 1-strong set into t-strong parts.
    Tstrong {
        #[command(flatten)]
        input: InstanceArg,
        #[command(flatten)]
        links: LinksArg,
        #[arg(long, default_value_t = 2.0)]
        t: f64,
        #[arg(long, default_value = "auto")]
        tau: String,
    },
    /// Multi-channel multi-antenna expansion.
    Mcma {
        #[command(flatten)]
        input: InstanceArg,
        #[command(flatten)]
        f: FArgs,
        /// JSON file `{"antennas": [...], "channels": [[...], ...]}` with one entry per node.
        #[arg(long, conflicts_with_all = ["antennas", "channels"])]
        config: Option<PathBuf>,
        /// Antennas on every node.
        #[arg(long, default_value_t = 1)]
        antennas: usize,
        /// Comma-separated channels available on every node.
        #[arg(long, default_value = "0")]
        channels: String,
    },
    /// Rate-control replica reduction.
    Rates {
        #[command(flatten)]
        input: InstanceArg,
        /// JSON file with one utility per link.
        #[arg(long)]
        utilities: PathBuf,
        /// Keep at most this many top levels per link.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Calibrate the constant of `f` on a generator family.
    Calibrate {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        f: FArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = Target::PTau)]
        target: Target,
    },
    /// Tightness experiment: colors of `G_hi` on independent sets of `G_lo`.
    Tightness {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        f: FArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[command(flatten)]
        power: PowerArgs,
    },
    /// Lower-bound chain: completeness of `G_f` and the feasible witness.
    Lowerbound {
        /// Constant of the power-law threshold `gamma x^delta`.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// Comma-separated chain sizes.
        #[arg(long, default_value = "1,2,3,4,5,6,7,8")]
        sizes: String,
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
    },
}

#[derive(Args)]
struct InstanceArg {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Args)]
struct LinksArg {
    /// Comma-separated link ids (all links when absent).
    #[arg(long, conflicts_with = "schedule")]
    links: Option<String>,
    /// Schedule JSON file; with `--slot`, checks that slot.
    #[arg(long, requires = "slot")]
    schedule: Option<PathBuf>,
    #[arg(long)]
    slot: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FKind {
    One,
    Power,
    Polylog,
    Hatlog,
}

#[derive(Args)]
struct FArgs {
    #[arg(id = "f_kind", long = "f", value_enum, default_value_t = FKind::Power)]
    kind: FKind,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Power-law exponent, or `auto` for the default `(delta0 + 1) / 2`.
    #[arg(long, default_value = "auto")]
    delta: String,
    /// Polylog exponent.
    #[arg(long = "log-exp", default_value_t = 1.0)]
    log_exp: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PowerKind {
    Oblivious,
    Global,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long, value_enum, default_value_t = PowerKind::Global)]
    power: PowerKind,
    /// Oblivious exponent, or `auto`.
    #[arg(long, default_value = "auto")]
    tau: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckPower {
    Uniform,
    Oblivious,
    Global,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckMethod {
    Direct,
    Bidirectional,
    Kesselheim,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    PTau,
    Kesselheim,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    RandomEuclidean,
    NdependenceChain,
    HardinstanceRecursive,
    UniformPowerClique,
    GeneralMetricStar,
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec JSON file; overrides the flags below except `--seed`.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Kind::RandomEuclidean)]
    kind: Kind,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1000.0)]
    side: f64,
    #[arg(long, default_value_t = 1.0)]
    len_min: f64,
    #[arg(long, default_value_t = 50.0)]
    len_max: f64,
    #[arg(long, default_value_t = 1.0)]
    beta_min: f64,
    #[arg(long, default_value_t = 1.0)]
    beta_max: f64,
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    /// Chain growth constant; level exponent of the recursive construction.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 2)]
    t_max: usize,
    #[arg(long)]
    scale_cap: Option<usize>,
    /// Constant of the recursive construction's separation function.
    #[arg(long, default_value_t = 1.0)]
    big_c: f64,
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    #[arg(long, default_value_t = 1.0)]
    f_at_1: f64,
}

impl GenArgs {
    fn spec(&self, seed: u64) -> Result<GenSpec> {
        if let Some(path) = &self.spec {
            let spec: GenSpec = serde_json::from_str(&read(path)?)?;
            return Ok(spec.with_seed(seed));
        }
        let family = match self.kind {
            Kind::RandomEuclidean => Family::RandomEuclidean(RandomParams {
                n: self.n,
                dim: self.dim,
                side: self.side,
                length: (self.len_min, self.len_max),
                beta: (self.beta_min, self.beta_max),
                weight: (1.0, 1.0),
                alpha: self.alpha,
            }),
            Kind::NdependenceChain => Family::NdependenceChain {
                n: self.n,
                f: SublinearF::power(1.0, 0.5),
                c: self.c.unwrap_or(2.0),
                beta: self.beta_min,
                alpha: self.alpha,
            },
            Kind::HardinstanceRecursive => Family::HardinstanceRecursive(HardParams {
                t_max: self.t_max,
                c: self.c.unwrap_or(4.0),
                big_c: self.big_c,
                alpha: self.alpha,
                scale_cap: self.scale_cap,
            }),
            Kind::UniformPowerClique => Family::UniformPowerClique { n: self.n, h: self.h, alpha: self.alpha },
            Kind::GeneralMetricStar => Family::GeneralMetricStar { n: self.n, f_at_1: self.f_at_1, beta: self.beta_min, alpha: self.alpha, m: 1.0 },
        };
        Ok(GenSpec::new(family, seed))
    }
}

impl FArgs {
    fn resolve(&self, alpha: f64, m: f64) -> Result<SublinearF> {
        let f = match self.kind {
            FKind::One => SublinearF::One,
            FKind::Power => {
                let delta = if self.delta == "auto" { default_delta(alpha, m) } else { parse_num(&self.delta, "delta")? };
                SublinearF::power(self.gamma, delta)
            }
            FKind::Polylog => SublinearF::polylog(self.gamma, self.log_exp),
            FKind::Hatlog => SublinearF::hatlog(self.gamma),
        };
        f.validate()?;
        Ok(f)
    }
}

impl PowerArgs {
    fn resolve(&self, f: &SublinearF, alpha: f64, m: f64) -> Result<PowerMode> {
        Ok(match self.power {
            PowerKind::Global => PowerMode::Global,
            PowerKind::Oblivious => PowerMode::Oblivious { tau: resolve_tau(&self.tau, f, alpha, m)? },
        })
    }
}

fn resolve_tau(text: &str, f: &SublinearF, alpha: f64, m: f64) -> Result<f64> {
    if text == "auto" {
        default_tau(f, alpha, m)
    } else {
        parse_num(text, "tau")
    }
}

fn parse_num(text: &str, what: &str) -> Result<f64> {
    text.trim().parse().map_err(|_| Error::Invalid(format!("{what}: cannot parse {text:?}")))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| Error::Invalid(format!("{what}: cannot parse {s:?}"))))
        .collect()
}

fn read(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn load(arg: &InstanceArg) -> Result<Instance> {
    Instance::from_json(&read(&arg.instance)?)
}

impl LinksArg {
    fn resolve(&self, inst: &Instance) -> Result<Vec<LinkId>> {
        if let (Some(path), Some(k)) = (&self.schedule, self.slot) {
            let sched: Schedule = serde_json::from_str(&read(path)?)?;
            let slot = sched.slots.get(k).ok_or_else(|| Error::Invalid(format!("schedule has no slot {k}")))?;
            return Ok(slot.links.clone());
        }
        match &self.links {
            Some(text) => parse_list(text, "links"),
            None => Ok(inst.ids()),
        }
    }
}

/// Serialized command output.
enum Output {
    Json(Value),
    Table(Vec<Vec<String>>),
}

fn table_or_json(format: Format, value: Value, rows: impl FnOnce() -> Vec<Vec<String>>) -> Output {
    match format {
        Format::Json => Output::Json(value),
        Format::Csv => Output::Table(rows()),
    }
}

fn json_only(format: Format, value: Value) -> Result<Output> {
    match format {
        Format::Json => Ok(Output::Json(value)),
        Format::Csv => Err(Error::Invalid("this command has no CSV form".into())),
    }
}

fn run(cli: &Cli) -> Result<Output> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let fmt = cli.format;
    match &cli.cmd {
        Cmd::Gen(gen) => {
            let out = gen.spec(cli.seed)?.generate()?;
            json_only(fmt, serde_json::to_value(&out.instance)?)
        }
        Cmd::Graph { input, f, uniform } => {
            let inst = load(input)?;
            let f = f.resolve(inst.alpha(), inst.m())?;
            let g = build_graph(&inst, f, *uniform)?;
            let edges = g.graph.edges();
            let value = json!({ "n": g.n(), "f": g.f, "uniform_mode": g.uniform_mode, "order": g.order, "edges": edges });
            Ok(table_or_json(fmt, value, || {
                let mut rows = vec![vec!["u".to_string(), "v".to_string()]];
                rows.extend(edges.iter().map(|(u, v)| vec![u.to_string(), v.to_string()]));
                rows
            }))
        }
        Cmd::Color { input, f } => {
            let inst = load(input)?;
            let f = f.resolve(inst.alpha(), inst.m())?;
            let g = build_graph(&inst, f, false)?;
            let coloring = greedy_color(&g.graph, &inst.ids(), &g.order);
            let value = serde_json::to_value(&coloring)?;
            Ok(table_or_json(fmt, value, || {
                let mut rows = vec![vec!["link".to_string(), "color".to_string()]];
                rows.extend(coloring.colors.iter().map(|(v, c)| vec![v.to_string(), c.to_string()]));
                rows
            }))
        }
        Cmd::Mwisl { input, f, power } => {
            let inst = load(input)?;
            let f = f.resolve(inst.alpha(), inst.m())?;
            let mode = power.resolve(&f, inst.alpha(), inst.m())?;
            json_only(fmt, serde_json::to_value(mwisl_solve(&inst, f, None, mode)?)?)
        }
        Cmd::Schedule { input, f, power } => {
            let inst = load(input)?;
            let f = f.resolve(inst.alpha(), inst.m())?;
            let mode = power.resolve(&f, inst.alpha(), inst.m())?;
            schedule_output(fmt, &tdma_schedule(&inst, f, mode)?)
        }
        Cmd::Online { input, f, power, arrivals } => {
            let inst = load(input)?;
            let f = f.resolve(inst.alpha(), inst.m())?;
            let mode = power.resolve(&f, inst.alpha(), inst.m())?;
            let arrivals = match arrivals {
                Some(text) => parse_list(text, "arrivals")?,
                None => random_order(inst.n_links(), harness::order_seed(cli.seed)),
            };
            schedule_output(fmt, &online_schedule(&inst, &arrivals, f, mode)?)
        }
        Cmd::Check { input, links, power, tau, p0, method } => {
            let inst = load(input)?;
            let s = links.resolve(&inst)?;
            let (a, m) = (inst.alpha(), inst.m());
            let tau = || resolve_tau(tau, &SublinearF::power(1.0, default_delta(a, m)), a, m);
            let value = match (method, power) {
                (CheckMethod::Kesselheim, _) => {
                    let il = kesselheim_i(&inst, &s)?;
                    json!({ "method": "kesselheim-sufficient", "links": s, "interference": il, "threshold": kesselheim_threshold(a), "feasible": il < kesselheim_threshold(a) })
                }
                (CheckMethod::Bidirectional, _) => serde_json::to_value(sinr::bidirectional_report(&inst, &s, tau()?)?)?,
                (CheckMethod::Direct, CheckPower::Global) => serde_json::to_value(certify(&inst, &s, PowerMode::Global)?)?,
                (CheckMethod::Direct, CheckPower::Oblivious) => serde_json::to_value(sinr::is_p_feasible(&inst, &s, &PowerAssignment::Oblivious { tau: tau()? })?)?,
                (CheckMethod::Direct, CheckPower::Uniform) => serde_json::to_value(sinr::is_p_feasible(&inst, &s, &PowerAssignment::Uniform { p0: *p0 })?)?,
            };
            json_only(fmt, value)
        }
        Cmd::Tstrong { input, links, t, tau } => {
            let inst = load(input)?;
            let s = links.resolve(&inst)?;
            let (a, m) = (inst.alpha(), inst.m());
            let tau = resolve_tau(tau, &SublinearF::power(1.0, default_delta(a, m)), a, m)?;
            json_only(fmt, serde_json::to_value(t_strong_partition(&inst, &s, &PowerAssignment::Oblivious { tau }, *t)?)?)
        }
        Cmd::Mcma { input, f, config, antennas, channels } => {
            let inst = load(input)?;
            let f = f.resolve(inst.alpha(), inst.m())?;
            let nodes = inst.space().n_nodes();
            let (ants, chans): (Vec<usize>, Vec<BTreeSet<u32>>) = match config {
                Some(path) => {
                    let v: Value = serde_json::from_str(&read(path)?)?;
                    (serde_json::from_value(v["antennas"].clone())?, serde_json::from_value(v["channels"].clone())?)
                }
                None => {
                    let set: BTreeSet<u32> = parse_list(channels, "channels")?.into_iter().collect();
                    (vec![*antennas; nodes], vec![set; nodes])
                }
            };
            json_only(fmt, serde_json::to_value(mcma_expand(&inst, f, &ants, &chans)?)?)
        }
        Cmd::Rates { input, utilities, levels } => {
            let inst = load(input)?;
            let utilities: Vec<Utility> = serde_json::from_str(&read(utilities)?)?;
            json_only(fmt, serde_json::to_value(rate_control_replicas(&inst, &utilities, *levels)?)?)
        }
        Cmd::Calibrate { gen, f, trials, target } => {
            let spec = gen.spec(0)?;
            let probe = spec.generate()?.instance;
            let f = f.resolve(probe.alpha(), probe.m())?;
            let target = match target {
                Target::PTau => CalibrationTarget::PTauFeasible,
                Target::Kesselheim => CalibrationTarget::Kesselheim,
            };
            let cal = calibrate_gamma(&spec, f, *trials, target, cli.seed, exec)?;
            let value = json!({ "spec": spec, "spec_hash": spec.hash(), "master_seed": cli.seed, "trials": trials, "calibration": cal });
            Ok(table_or_json(fmt, value, || {
                let mut rows = vec![vec!["trial".to_string(), "gamma".to_string()]];
                rows.extend(cal.per_trial.iter().enumerate().map(|(t, g)| vec![t.to_string(), g.to_string()]));
                rows
            }))
        }
        Cmd::Tightness { gen, f, trials, power } => {
            let spec = gen.spec(0)?;
            let probe = spec.generate()?.instance;
            let f_hi = f.resolve(probe.alpha(), probe.m())?;
            let mode = power.resolve(&f_hi, probe.alpha(), probe.m())?;
            let cfg = TightnessConfig { spec, f_lo: SublinearF::One, f_hi, trials: *trials, master_seed: cli.seed, mode, timing: cli.timing };
            let report = run_tightness_experiment(&cfg, exec)?;
            Ok(table_or_json(fmt, serde_json::to_value(&report)?, || report.to_csv_rows()))
        }
        Cmd::Lowerbound { gamma, delta, sizes, c, beta, alpha } => {
            let f = SublinearF::power(*gamma, *delta);
            let ns: Vec<usize> = parse_list(sizes, "sizes")?;
            let points = lowerbound_curve(f, &ns, *c, *beta, *alpha)?;
            let value = json!({ "f": f, "points": points });
            Ok(table_or_json(fmt, value, || {
                let mut rows = vec!["n,log2_delta,loglog_delta,edges,complete,witness_feasible".split(',').map(String::from).collect::<Vec<_>>()];
                rows.extend(points.iter().map(|p| {
                    vec![p.n.to_string(), p.log2_delta.to_string(), p.loglog_delta.to_string(), p.edges.to_string(), p.complete.to_string(), p.witness_feasible.to_string()]
                }));
                rows
            }))
        }
    }
}

fn schedule_output(fmt: Format, sched: &Schedule) -> Result<Output> {
    let value = serde_json::to_value(sched)?;
    Ok(table_or_json(fmt, value, || {
        let mut rows = vec![vec!["slot".to_string(), "link".to_string(), "method".to_string()]];
        for (k, slot) in sched.slots.iter().enumerate() {
            for &i in &slot.links {
                rows.push(vec![k.to_string(), i.to_string(), format!("{:?}", slot.report.method)]);
            }
        }
        rows
    }))
}

fn emit(out: &Output, path: Option<&Path>) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    match out {
        Output::Json(v) => {
            serde_json::to_writer_pretty(&mut buf, v)?;
            buf.push(b'\n');
        }
        Output::Table(rows) => {
            let mut w = csv::Writer::from_writer(&mut buf);
            for row in rows {
                w.write_record(row).map_err(|e| Error::Internal(format!("csv: {e}")))?;
            }
            w.flush()?;
        }
    }
    match path {
        Some(p) => fs::write(p, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Internal(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli).and_then(|out| emit(&out, cli.out.as_deref())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn internal_errors_map_to_4() {
        assert_eq!(exit_code(&Error::Internal("x".into())), 4);
        assert_eq!(exit_code(&Error::Precondition("x".into())), 3);
    }
}
