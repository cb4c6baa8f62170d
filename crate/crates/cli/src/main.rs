mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use srt_core::filtration::{self, Direction, Filtration, TowerShape};
use srt_core::graph::{self, GraphError, Monotonicity, ReductionTree};
use srt_core::group::{self, GenMode, Generation, Sl2};
use srt_core::local_field::{LocalFieldContext, LocalFieldElement};
use srt_core::pipeline;
use srt_core::series::{g_at, maclaurin_g, Coeff, CoverParams};
use srt_core::torsor::{self, InsepCentre, TailCase};
use srt_core::valuation::{fmt_rational, parse_rational, Rational};

use config::{Config, Format};

#[derive(Parser)]
#[command(name = "srt", version, about = "Exact computations for semistable reduction of cyclic covers")]
struct Cli {
    /// Ramification denominator N of the working field (overrides SRT_CONFIG)
    #[arg(long = "prec-n", global = true)]
    n: Option<u32>,
    /// Unit precision M (overrides SRT_CONFIG)
    #[arg(long = "prec-m", global = true)]
    m: Option<u32>,
    /// Series truncation T; default 3p+2 (overrides SRT_CONFIG)
    #[arg(long = "order", global = true)]
    t: Option<usize>,
    /// Output format (overrides SRT_CONFIG)
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maclaurin coefficients of g(z), optionally rescaled at z = p^vd + p^ve t
    Expand {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        nu: u32,
        #[arg(long)]
        r: i64,
        #[arg(long)]
        s: i64,
        /// Valuation of the centre d (needs --ve)
        #[arg(long, requires = "ve")]
        vd: Option<String>,
        /// Valuation of the radius e
        #[arg(long)]
        ve: Option<String>,
    },
    /// Conductor criterion on the new-tail disk, or on explicit valuations
    SplitCheck {
        #[arg(long)]
        p: u64,
        /// Torsor level n (explicit mode) or nu (disk mode)
        #[arg(long)]
        nu: u32,
        #[arg(long, requires = "s")]
        r: Option<i64>,
        #[arg(long, requires = "r")]
        s: Option<i64>,
        #[arg(long, default_value = "generic")]
        case: String,
        /// Drop the fifth-root term from the exceptional centres
        #[arg(long)]
        no_root: bool,
        /// Comma-separated v(c_1),...,v(c_T); entries may be ">=x" or "inf"
        #[arg(long, conflicts_with_all = ["r", "s"])]
        vals: Option<String>,
    },
    /// Centre of the new etale tail
    TailCenter {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        nu: u32,
        #[arg(long)]
        r: i64,
        #[arg(long)]
        s: i64,
        #[arg(long)]
        case: String,
    },
    /// Radius of the new etale tail; --extra is v(a) for a0 and v(1-a) for a1
    TailRadius {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        nu: u32,
        #[arg(long)]
        case: String,
        #[arg(long)]
        extra: Option<String>,
    },
    /// Catalog of new inseparable tails; with --r/--s also runs the conductor-2 checks
    InsepTails {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        nu: u32,
        #[arg(long)]
        case: String,
        /// v(a) for a0, v(sqrt(1-a)) for a1
        #[arg(long)]
        extra: Option<String>,
        #[arg(long, requires = "s")]
        r: Option<i64>,
        #[arg(long, requires = "r")]
        s: Option<i64>,
        /// z-centre for items 2 and 3: solved or displayed
        #[arg(long, default_value = "solved")]
        centre: String,
    },
    /// Structural and global checks on a reduction tree
    TreeCheck {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        m_g: Option<u32>,
    },
    /// Solve the effective-different propagation on a reduction tree
    TreeSolve {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        root_delta: Option<String>,
    },
    /// Admissible tail-invariant configurations
    EnumTails {
        #[arg(long)]
        tau: u32,
        #[arg(long, default_value_t = 2)]
        m_g: u32,
        #[arg(long)]
        p: Option<u64>,
    },
    /// Upper conductor: closed form for a tower shape, a filtration file, or a compositum
    Conductor {
        #[arg(long, requires_all = ["nu", "shape"])]
        p: Option<u64>,
        #[arg(long)]
        nu: Option<u32>,
        /// tame-over-cyclotomic (i) or kummer-tower (ii)
        #[arg(long)]
        shape: Option<String>,
        #[arg(long, conflicts_with_all = ["p", "compositum"])]
        filtration: Option<PathBuf>,
        /// Comma-separated conductors of the factors
        #[arg(long, conflicts_with = "p")]
        compositum: Option<String>,
    },
    /// Herbrand phi or psi of a filtration
    Herbrand {
        #[arg(long)]
        filtration: PathBuf,
        #[arg(long)]
        dir: String,
        #[arg(long)]
        x: String,
    },
    /// SL2(F_q): traces, generator orders, generation and Sylow data
    Group {
        #[arg(long)]
        q: u64,
        #[arg(long)]
        p: Option<u64>,
        #[arg(long, requires = "rho")]
        tau: Option<u32>,
        #[arg(long, requires = "tau")]
        rho: Option<u32>,
        #[arg(long, default_value_t = 250)]
        beta_order: u64,
        #[arg(long, default_value_t = 50)]
        product_order: u64,
        /// criterion or bfs
        #[arg(long, default_value = "criterion")]
        mode: String,
        #[arg(long, default_value_t = group::DEFAULT_BFS_BUDGET)]
        budget: u64,
    },
    /// Wild-monodromy pipeline for the cover with s = p
    WildMonodromy {
        #[arg(long)]
        q: u64,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        r: i64,
    },
}

/// A failed run: message plus a one-line remedy.
struct Failure {
    message: String,
    hint: &'static str,
}

fn fail(message: impl ToString, hint: &'static str) -> Failure {
    Failure { message: message.to_string(), hint }
}

/// Result of a successful run; `contradiction` selects exit code 2.
struct Outcome {
    report: Value,
    text: Option<String>,
    contradiction: bool,
}

fn ok<T: Serialize>(v: &T) -> Result<Outcome, Failure> {
    Ok(Outcome { report: to_value(v)?, text: None, contradiction: false })
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| fail(e, "report serialization failed"))
}

fn rational(s: &str, what: &str) -> Result<Rational, Failure> {
    parse_rational(s).map_err(|e| fail(format!("{what}: {e}"), "write rationals as integers or a/b"))
}

fn case(s: &str) -> Result<TailCase, Failure> {
    s.parse().map_err(|e: String| fail(e, "use --case generic, a0 or a1"))
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display()), "check the file path"))
}

const PARAM_HINT: &str = "check p, nu, r, s against the case constraints";

#[derive(Serialize)]
struct Radius {
    v_rho: String,
    v_e: String,
}

#[derive(Serialize)]
struct Expansion {
    coefficients: Vec<String>,
    valuations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rescaled: Option<Rescaled>,
}

#[derive(Serialize)]
struct Rescaled {
    n: u32,
    m: u32,
    coefficients: Vec<String>,
    valuations: Vec<String>,
}

#[derive(Serialize)]
struct CenterReport {
    case: TailCase,
    exceptional: bool,
    a0: String,
    sqrt1ma: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    root: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    root_agreement: Option<String>,
    v_e: String,
}

#[derive(Serialize)]
struct InsepReport {
    catalog: Vec<torsor::TailDescriptor>,
    checks: Vec<torsor::InsepCheck>,
}

#[derive(Serialize)]
struct TreeCheckReport {
    vertices: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    specialization_error: Option<String>,
    monotonicity: Monotonicity,
    vanishing_cycles: Option<graph::CycleVerdict>,
    augmented: Vec<graph::AugmentedVertex>,
    lints: Vec<graph::Lint>,
}

#[derive(Serialize)]
struct Contradiction {
    verdict: &'static str,
    edges: Vec<String>,
    detail: String,
}

#[derive(Serialize)]
struct ConductorReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    shape: Option<TowerShape>,
    conductor: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    below_nu: Option<bool>,
}

#[derive(Serialize)]
struct HerbrandReport {
    dir: String,
    x: String,
    value: String,
}

#[derive(Serialize)]
struct GroupReport {
    q: u64,
    order: u64,
    traces: (u32, u32),
    solution: group::TraceSolution,
    beta_half_power_is_minus_identity: bool,
    generation: Generation,
    #[serde(skip_serializing_if = "Option::is_none")]
    sylow: Option<group::SylowData>,
}

fn run(cmd: Command, cfg: &Config) -> Result<Outcome, Failure> {
    match cmd {
        Command::Expand { p, nu, r, s, vd, ve } => {
            let params = CoverParams::forced_branch(p, nu, r, s).map_err(|e| fail(e, PARAM_HINT))?;
            let t = cfg.truncation(p);
            let g = maclaurin_g(&params, t).map_err(|e| fail(e, PARAM_HINT))?;
            let mut out = Expansion {
                coefficients: g.coeffs().iter().map(fmt_rational).collect(),
                valuations: g.coeffs().iter().map(|c| c.c_val(p).to_string()).collect(),
                rescaled: None,
            };
            if let Some(ve) = ve {
                let ve = rational(&ve, "--ve")?;
                let vd = vd.map(|x| rational(&x, "--vd")).transpose()?;
                let n = Rational::from_integer(cfg.n.into());
                for v in std::iter::once(&ve).chain(vd.as_ref()) {
                    if !(v * &n).is_integer() {
                        return Err(fail(format!("valuation {} is not in (1/{})Z", fmt_rational(v), cfg.n), "raise N in SRT_CONFIG or --prec-n to a multiple of the denominator"));
                    }
                }
                let ctx = LocalFieldContext::new(p, cfg.n, cfg.m).map_err(|e| fail(e, "choose positive N and M"))?;
                let pi = |v: &Rational| LocalFieldElement::pi_pow(&ctx, (v * &n).to_integer().try_into().unwrap_or(i64::MAX));
                let d = match &vd {
                    Some(v) => pi(v),
                    None => LocalFieldElement::zero(&ctx, ctx.n() * ctx.m() * 2),
                };
                let b = LocalFieldElement::from_rational(&ctx, &params.sqrt1ma);
                let series = g_at(&b, r, s, &d, &pi(&ve), t, p).map_err(|e| fail(e, "raise M or shrink the disk"))?;
                out.rescaled = Some(Rescaled {
                    n: cfg.n,
                    m: cfg.m,
                    coefficients: series.coeffs().iter().map(|c| c.pretty()).collect(),
                    valuations: series.coeffs().iter().map(|c| c.c_val(p).to_string()).collect(),
                });
            }
            ok(&out)
        }
        Command::SplitCheck { p, nu, r, s, case: c, no_root, vals } => {
            let verdict = if let Some(vals) = vals {
                let vals = vals
                    .split(',')
                    .map(|x| x.parse())
                    .collect::<Result<Vec<_>, String>>()
                    .map_err(|e| fail(e, "write valuations as a/b, >=a/b or inf"))?;
                torsor::splitting_obstruction(&vals, p, nu)
            } else {
                let (Some(r), Some(s)) = (r, s) else {
                    return Err(fail("need --r and --s, or --vals", "pass the cover parameters or explicit valuations"));
                };
                torsor::center_split_check(p, nu, r, s, case(&c)?, cfg.truncation(p), !no_root, cfg.m)
            }
            .map_err(|e| fail(e, PARAM_HINT))?;
            ok(&verdict)
        }
        Command::TailCenter { p, nu, r, s, case: c } => {
            let t = torsor::tail_center(p, nu, r, s, case(&c)?, cfg.m).map_err(|e| fail(e, PARAM_HINT))?;
            ok(&CenterReport {
                case: t.case,
                exceptional: t.exceptional,
                a0: t.a0.describe(),
                sqrt1ma: t.sqrt1ma.describe(),
                root: t.root.as_ref().map(|x| x.pretty()),
                root_agreement: t.root_agreement.as_ref().map(fmt_rational),
                v_e: fmt_rational(&t.v_e),
            })
        }
        Command::TailRadius { p, nu, case: c, extra } => {
            let extra = extra.map(|x| rational(&x, "--extra")).transpose()?;
            let (rho, e) = torsor::tail_radius(p, nu, case(&c)?, extra.as_ref()).map_err(|e| fail(e, "a0 and a1 need --extra"))?;
            ok(&Radius { v_rho: fmt_rational(&rho), v_e: fmt_rational(&e) })
        }
        Command::InsepTails { p, nu, case: c, extra, r, s, centre } => {
            let extra = extra.map(|x| rational(&x, "--extra")).transpose()?;
            let catalog = torsor::insep_tail_catalog(p, nu, case(&c)?, extra.as_ref()).map_err(|e| fail(e, "a0 and a1 need --extra in 1..nu-1"))?;
            let centre = match centre.as_str() {
                "solved" => InsepCentre::Solved,
                "displayed" => InsepCentre::Displayed,
                other => return Err(fail(format!("unknown centre {other:?}"), "use --centre solved or displayed")),
            };
            let mut checks = Vec::new();
            if let (Some(r), Some(s)) = (r, s) {
                for d in &catalog {
                    for sign in [1i8, -1] {
                        checks.push(torsor::insep_split_check(p, nu, r, s, d.item, sign, centre, cfg.truncation(p), cfg.m).map_err(|e| fail(e, PARAM_HINT))?);
                    }
                }
            }
            ok(&InsepReport { catalog, checks })
        }
        Command::TreeCheck { tree, p, m_g } => {
            let t = ReductionTree::from_json(&read(&tree)?).map_err(|e| fail(e, "fix the tree JSON (see README for the schema)"))?;
            let graph_fail = |e: GraphError| fail(e, "fix the tree JSON (see README for the schema)");
            let specialization_error = t.check_specializations(p).err().map(|e| e.to_string());
            let monotonicity = graph::check_monotonic(&t).map_err(graph_fail)?;
            let vanishing_cycles = match graph::check_vanishing_cycles_tree(&t) {
                Ok(v) => Some(v),
                Err(GraphError::MissingLabel(_)) => None,
                Err(e) => return Err(graph_fail(e)),
            };
            let lints = graph::lints(&t, p, m_g).map_err(graph_fail)?;
            let contradiction = specialization_error.is_some()
                || matches!(monotonicity, Monotonicity::Violation(_))
                || vanishing_cycles.as_ref().is_some_and(|v| !v.holds());
            let report = TreeCheckReport { vertices: t.vertices.len(), specialization_error, monotonicity, vanishing_cycles, augmented: t.augmented(p), lints };
            Ok(Outcome { report: to_value(&report)?, text: None, contradiction })
        }
        Command::TreeSolve { tree, p, root_delta } => {
            let t = ReductionTree::from_json(&read(&tree)?).map_err(|e| fail(e, "fix the tree JSON (see README for the schema)"))?;
            let root_delta = root_delta.map(|x| rational(&x, "--root-delta")).transpose()?;
            match graph::propagate_differents(&t, p, root_delta.as_ref()) {
                Ok(sol) => ok(&sol),
                Err(GraphError::Contradiction { edges, detail }) => {
                    Ok(Outcome { report: to_value(&Contradiction { verdict: "contradiction", edges, detail })?, text: None, contradiction: true })
                }
                Err(e @ GraphError::Unsolved(_)) => Err(fail(e, "label more epaisseurs or differents")),
                Err(e) => Err(fail(e, "fix the tree labels")),
            }
        }
        Command::EnumTails { tau, m_g, p } => {
            let configs = graph::enumerate_tail_configs(tau, m_g, p).map_err(|e| fail(e, "use --m-g 2 and --tau at most 3"))?;
            ok(&configs)
        }
        Command::Conductor { p, nu, shape, filtration: file, compositum } => {
            if let Some(file) = file {
                let f = Filtration::from_json(&read(&file)?).map_err(|e| fail(e, "fix the filtration JSON (see README for the schema)"))?;
                return ok(&ConductorReport { shape: None, conductor: fmt_rational(&f.conductor()), below_nu: None });
            }
            if let Some(list) = compositum {
                let cs = list.split(',').map(|x| rational(x, "--compositum")).collect::<Result<Vec<_>, _>>()?;
                let c = filtration::compositum_conductor(&cs).map_err(|e| fail(e, "pass at least one conductor"))?;
                return ok(&ConductorReport { shape: None, conductor: fmt_rational(&c), below_nu: None });
            }
            let (Some(p), Some(nu), Some(shape)) = (p, nu, shape) else {
                return Err(fail("need --p, --nu and --shape, or --filtration, or --compositum", "pick one of the three input modes"));
            };
            let shape: TowerShape = shape.parse().map_err(|e: String| fail(e, "use --shape tame-over-cyclotomic or kummer-tower"))?;
            let c = filtration::conductor_case(p, nu, shape).map_err(|e| fail(e, "p must be an odd prime; kummer-tower needs nu >= 2"))?;
            let below = c < Rational::from_integer(nu.into());
            ok(&ConductorReport { shape: Some(shape), conductor: fmt_rational(&c), below_nu: Some(below) })
        }
        Command::Herbrand { filtration: file, dir, x } => {
            let f = Filtration::from_json(&read(&file)?).map_err(|e| fail(e, "fix the filtration JSON (see README for the schema)"))?;
            let d: Direction = dir.parse().map_err(|e: String| fail(e, "use --dir phi or psi"))?;
            let xv = rational(&x, "--x")?;
            let v = filtration::herbrand(&f, d, &xv).map_err(|e| fail(e, "the argument must be nonnegative"))?;
            ok(&HerbrandReport { dir, x: fmt_rational(&xv), value: fmt_rational(&v) })
        }
        Command::Group { q, p, tau, rho, beta_order, product_order, mode, budget } => {
            let g = Sl2::new(q).map_err(|e| fail(e, "q must be an odd prime below 65536"))?;
            let mode: GenMode = mode.parse().map_err(|e: String| fail(e, "use --mode criterion or bfs"))?;
            let traces = match (tau, rho) {
                (Some(t), Some(r)) => (t, r),
                _ => group::find_traces(&g, beta_order, product_order).map_err(|e| fail(e, "choose element orders dividing q - 1, q or q + 1"))?,
            };
            let sol = group::solve_trace_system(&g, traces.0, traces.1).map_err(|e| fail(e, "tau, rho, 2 and -2 must be distinct mod q"))?;
            let half = sol.orders[1] / 2;
            let minus = sol.orders[1] % 2 == 0 && g.pow(&sol.beta, half) == g.minus_identity();
            let generation = group::generation_check(&g, &[sol.alpha, sol.beta], mode, budget).map_err(|e| fail(e, "raise --budget or use --mode bfs"))?;
            let sylow = p.map(|p| group::sylow_data(q, p)).transpose().map_err(|e| fail(e, "p must be an odd prime"))?;
            ok(&GroupReport { q, order: g.order(), traces, solution: sol, beta_half_power_is_minus_identity: minus, generation, sylow })
        }
        Command::WildMonodromy { q, p, r } => {
            let report = pipeline::run_wild_monodromy(q, p, r).map_err(|e| fail(e, "the pipeline needs p = 5, r prime to 5 and 25 | q^2 - 1"))?;
            Ok(Outcome { report: to_value(&report)?, text: Some(report.trace()), contradiction: false })
        }
    }
}

/// `path = value` lines for the text format.
fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(xs) if !xs.is_empty() => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::String(s) => out.push_str(&format!("{prefix} = {s}\n")),
        other => out.push_str(&format!("{prefix} = {other}\n")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let path = std::env::var_os("SRT_CONFIG").map(PathBuf::from);
    let mut cfg = match Config::load(path.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}\nhint: SRT_CONFIG must name a JSON file with optional keys n, m, t, format");
            return ExitCode::from(1);
        }
    };
    cfg.apply(config::ConfigFile { n: cli.n, m: cli.m, t: cli.t, format: cli.format });
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}\nhint: pass positive values");
        return ExitCode::from(1);
    }
    match run(cli.command, &cfg) {
        Ok(out) => {
            match cfg.format {
                Format::Json => println!("{}", out.report),
                Format::Text => match out.text {
                    Some(t) => print!("{t}"),
                    None => {
                        let mut s = String::new();
                        flatten("", &out.report, &mut s);
                        print!("{s}");
                    }
                },
            }
            ExitCode::from(if out.contradiction { 2 } else { 0 })
        }
        Err(f) => {
            eprintln!("error: {}\nhint: {}", f.message, f.hint);
            ExitCode::from(1)
        }
    }
}
