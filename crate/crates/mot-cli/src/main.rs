//! Command-line interface: constructs optimal martingale couplings, prices
//! payoffs under them, solves discrete bound problems and runs the
//! verification suites.
//!
//! Exit codes: 0 success, 1 verification failures, 2 assumption violations,
//! 3 numerics failures, 4 configuration errors.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mot::couplings::{
    build_hk, build_left_monotone, build_right_monotone, CouplingKernel, RightMethod,
};
use mot::error::Error as MotError;
use mot::lp::{
    check_hedge, solve_bounds, Direction, DiscreteMotInstance, LpConfig, QuantScheme,
};
use mot::measures::{lognormal_extremizers, DeltaProfile, Marginal};
use mot::numerics::log_grid;
use mot::pricing::{price, Payoff};
use mot::verify::{self, Suite, VerifyConfig};

use output::{csv, fmt_g};

#[derive(Parser)]
#[command(name = "mot", version, about = "Optimal martingale couplings and model-free bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Configuration file with [mu], [nu], [payoff], [run] sections.
    #[arg(long, global = true)]
    config: Option<String>,
    /// First-date marginal spec, e.g. lognormal:sigma=0.2
    #[arg(long, global = true)]
    mu: Option<String>,
    /// Second-date marginal spec, e.g. lognormal:sigma=0.3
    #[arg(long, global = true)]
    nu: Option<String>,
    /// Payoff spec, e.g. straddle2:alpha=1
    #[arg(long, global = true)]
    payoff: Option<String>,
    /// Transference plan: hk, left or right.
    #[arg(long, global = true)]
    plan: Option<String>,
    /// Grid points per kernel regime.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Atom count for the discrete oracle.
    #[arg(long, global = true)]
    atoms: Option<usize>,
    /// Output directory for emitted files.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Emit a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Right-monotone construction method: reflection or direct.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Quantization scheme: quantile or symmetric.
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Absolute quadrature tolerance for pricing.
    #[arg(long, global = true)]
    quad_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the distribution-gap profile and its extremizers.
    Profile(CommonOpts),
    /// Construct a transference plan and emit its map tables.
    Build(CommonOpts),
    /// Price a payoff under a constructed plan.
    Price(CommonOpts),
    /// Solve the discrete bound problem in both directions.
    Bounds(BoundsOpts),
    /// Run a verification suite.
    Verify(VerifyOpts),
}

#[derive(Args)]
struct BoundsOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Also print the dual semi-static hedges.
    #[arg(long)]
    hedge: bool,
}

#[derive(Args)]
struct VerifyOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Suite name: symmetry, coupling, oracle or all.
    #[arg(long)]
    suite: Option<String>,
    /// Instance file to audit within the oracle suite.
    #[arg(long)]
    instance: Option<String>,
}

/// Flags merged over the configuration file.
struct Merged {
    mu_spec: Option<String>,
    nu_spec: Option<String>,
    payoff_spec: Option<String>,
    plan: Option<String>,
    grid: usize,
    atoms: usize,
    out: PathBuf,
    json: bool,
    method: String,
    scheme: String,
    quad_tol: f64,
    suite: String,
}

fn merge(common: &CommonOpts, extra_suite: Option<&str>) -> Result<Merged, CliError> {
    let file = match &common.config {
        Some(path) => config::load(path).map_err(CliError::Config)?,
        None => config::FileConfig::default(),
    };
    let run = &file.run;
    let get_usize = |key: &str, flag: Option<usize>, default: usize| -> Result<usize, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match run.get(key) {
            Some(s) => s
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("run key '{key}': '{s}' is not a count"))),
            None => Ok(default),
        }
    };
    let get_f64 = |key: &str, flag: Option<f64>, default: f64| -> Result<f64, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match run.get(key) {
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("run key '{key}': '{s}' is not a number"))),
            None => Ok(default),
        }
    };
    let json = common.json
        || run
            .get("json")
            .map(|s| s == "true" || s == "1")
            .unwrap_or(false);
    Ok(Merged {
        mu_spec: common.mu.clone().or(file.mu_spec),
        nu_spec: common.nu.clone().or(file.nu_spec),
        payoff_spec: common.payoff.clone().or(file.payoff_spec),
        plan: common.plan.clone().or_else(|| run.get("plan").cloned()),
        grid: get_usize("grid", common.grid, mot::config::DEFAULT_GRID)?,
        atoms: get_usize("atoms", common.atoms, 100)?,
        out: PathBuf::from(
            common
                .out
                .clone()
                .or_else(|| run.get("out").cloned())
                .unwrap_or_else(|| ".".into()),
        ),
        json,
        method: common
            .method
            .clone()
            .or_else(|| run.get("method").cloned())
            .unwrap_or_else(|| "direct".into()),
        scheme: common
            .scheme
            .clone()
            .or_else(|| run.get("scheme").cloned())
            .unwrap_or_else(|| "quantile".into()),
        quad_tol: get_f64("quad_tol", common.quad_tol, mot::config::QUAD_TOL)?,
        suite: extra_suite
            .map(str::to_string)
            .or_else(|| run.get("suite").cloned())
            .unwrap_or_else(|| "all".into()),
    })
}

impl Merged {
    fn marginals(&self) -> Result<(Marginal, Marginal), CliError> {
        let mu_spec = self
            .mu_spec
            .as_deref()
            .ok_or_else(|| CliError::Config("missing mu spec (--mu or [mu] section)".into()))?;
        let nu_spec = self
            .nu_spec
            .as_deref()
            .ok_or_else(|| CliError::Config("missing nu spec (--nu or [nu] section)".into()))?;
        let mu = Marginal::parse_spec(mu_spec).map_err(CliError::Mot)?;
        let nu = Marginal::parse_spec(nu_spec).map_err(CliError::Mot)?;
        Ok((mu, nu))
    }

    fn payoff(&self) -> Result<Payoff, CliError> {
        let spec = self.payoff_spec.as_deref().ok_or_else(|| {
            CliError::Config("missing payoff spec (--payoff or [payoff] section)".into())
        })?;
        Payoff::parse_spec(spec).map_err(CliError::Mot)
    }

    fn kernel(&self) -> Result<(String, CouplingKernel), CliError> {
        let (mu, nu) = self.marginals()?;
        let plan = self
            .plan
            .as_deref()
            .ok_or_else(|| CliError::Config("missing plan (--plan hk|left|right)".into()))?;
        let kernel = match plan {
            "hk" => build_hk(&mu, &nu, self.grid).map(CouplingKernel::from),
            "left" => build_left_monotone(&mu, &nu, self.grid).map(CouplingKernel::from),
            "right" => {
                let method = match self.method.as_str() {
                    "direct" => RightMethod::Direct,
                    "reflection" => RightMethod::Reflection,
                    other => {
                        return Err(CliError::Config(format!(
                            "unknown method '{other}' (direct|reflection)"
                        )))
                    }
                };
                build_right_monotone(&mu, &nu, self.grid, method).map(CouplingKernel::from)
            }
            other => {
                return Err(CliError::Config(format!("unknown plan '{other}' (hk|left|right)")))
            }
        };
        Ok((plan.to_string(), kernel.map_err(CliError::Mot)?))
    }

    fn lp_config(&self) -> Result<LpConfig, CliError> {
        let scheme = match self.scheme.as_str() {
            "quantile" => QuantScheme::Quantile,
            "symmetric" => QuantScheme::SymmetricLog,
            other => {
                return Err(CliError::Config(format!(
                    "unknown scheme '{other}' (quantile|symmetric)"
                )))
            }
        };
        Ok(LpConfig { atoms: self.atoms, scheme })
    }
}

enum CliError {
    Config(String),
    Mot(MotError),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 4,
            CliError::Io(_) => 4,
            CliError::Mot(e) => match e {
                MotError::AssumptionViolated(_)
                | MotError::MeanMismatch { .. }
                | MotError::NoDensity
                | MotError::Infeasible(_) => 2,
                MotError::BadSpec(_) | MotError::Domain(_) => 4,
                _ => 3,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => format!("configuration error: {m}"),
            CliError::Io(m) => format!("io error: {m}"),
            CliError::Mot(e) => format!("error: {e}"),
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create '{}': {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Io(format!("cannot write '{}': {e}", path.display())))?;
    Ok(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Profile(c) => merge(c, None).and_then(cmd_profile),
        Command::Build(c) => merge(c, None).and_then(cmd_build),
        Command::Price(c) => merge(c, None).and_then(cmd_price),
        Command::Bounds(b) => merge(&b.common, None).and_then(|m| cmd_bounds(m, b.hedge)),
        Command::Verify(v) => {
            merge(&v.common, v.suite.as_deref()).and_then(|m| cmd_verify(m, v.instance.as_deref()))
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Serialize)]
struct ExtremizersJson {
    m: f64,
    m_tilde: f64,
    product: f64,
    delta_f_max: f64,
    delta_f_min: f64,
    plateau_width: f64,
    closed_form: Option<ClosedFormJson>,
}

#[derive(Serialize)]
struct ClosedFormJson {
    m: f64,
    m_tilde: f64,
}

fn cmd_profile(cfg: Merged) -> Result<ExitCode, CliError> {
    let (mu, nu) = cfg.marginals()?;
    let prof = DeltaProfile::new(&mu, &nu).map_err(CliError::Mot)?;
    let table = prof.delta_f_table();
    let dg = prof.delta_g_table();
    let rows: Vec<Vec<f64>> = table
        .xs()
        .iter()
        .enumerate()
        .map(|(i, &x)| vec![x, table.ys()[i], dg.ys()[i]])
        .collect();
    let csv_path = write_file(&cfg.out, "deltaF.csv", &csv(&["x", "deltaF", "deltaG"], &rows))?;

    let closed_form = match (&mu, &nu) {
        (Marginal::LogNormal(a), Marginal::LogNormal(b)) => {
            lognormal_extremizers(a.sigma(), b.sigma())
                .ok()
                .map(|(m, mt)| ClosedFormJson { m, m_tilde: mt })
        }
        _ => None,
    };
    let report = ExtremizersJson {
        m: prof.m,
        m_tilde: prof.m_tilde,
        product: prof.m * prof.m_tilde,
        delta_f_max: prof.df_max,
        delta_f_min: prof.df_min,
        plateau_width: prof.plateau_width,
        closed_form,
    };
    let json = serde_json::to_string_pretty(&report).expect("serializable");
    let json_path = write_file(&cfg.out, "extremizers.json", &(json.clone() + "\n"))?;
    if cfg.json {
        println!("{json}");
    } else {
        println!("m {}", fmt_g(prof.m));
        println!("m_tilde {}", fmt_g(prof.m_tilde));
        println!("wrote {} and {}", csv_path.display(), json_path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_build(cfg: Merged) -> Result<ExitCode, CliError> {
    let (plan, kernel) = cfg.kernel()?;
    let (name, contents) = match &kernel {
        CouplingKernel::ThreeBand(k) => {
            let rows: Vec<Vec<f64>> =
                k.rows().map(|(x, p, q, l, u)| vec![x, p, q, l, u]).collect();
            ("hk.csv", csv(&["x", "p", "q", "l", "u"], &rows))
        }
        CouplingKernel::TwoBand(k) => {
            let mu = k.mu();
            let mut rows: Vec<Vec<f64>> = Vec::new();
            match k.direction {
                mot::couplings::MonotoneDirection::Left => {
                    // identity rows below x_star, then the split tables
                    let lo = mu.quantile(mot::config::TAIL_QUANTILE).map_err(CliError::Mot)?;
                    for x in log_grid(lo, k.x_star, 65).iter().take(64) {
                        rows.push(vec![*x, *x, *x, 0.0]);
                    }
                    rows.extend(k.rows().map(|(x, d, u, q)| vec![x, d, u, q]));
                    ("left.csv", csv(&["x", "Ld", "Lu", "qL"], &rows))
                }
                mot::couplings::MonotoneDirection::Right => {
                    rows.extend(k.rows().map(|(x, d, u, q)| vec![x, d, u, q]));
                    let hi = mu
                        .quantile_from_sf(mot::config::TAIL_QUANTILE)
                        .map_err(CliError::Mot)?;
                    for x in log_grid(k.x_star, hi, 65).iter().skip(1) {
                        rows.push(vec![*x, *x, *x, 0.0]);
                    }
                    ("right.csv", csv(&["x", "Rd", "Ru", "qR"], &rows))
                }
            }
        }
        _ => unreachable!("builders return band kernels"),
    };
    let path = write_file(&cfg.out, name, &contents)?;
    if cfg.json {
        println!("{{\"plan\":\"{plan}\",\"file\":\"{}\"}}", path.display());
    } else {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PriceJson {
    plan: String,
    payoff: String,
    value: f64,
    quad_error: f64,
    tail_bound: f64,
}

fn cmd_price(cfg: Merged) -> Result<ExitCode, CliError> {
    let payoff = cfg.payoff()?;
    let (plan, kernel) = cfg.kernel()?;
    let breakdown = price(&kernel, &payoff, cfg.quad_tol).map_err(CliError::Mot)?;
    if cfg.json {
        let report = PriceJson {
            plan,
            payoff: payoff.label.clone(),
            value: breakdown.value,
            quad_error: breakdown.quad_error,
            tail_bound: breakdown.tail_bound,
        };
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        println!("value {}", fmt_g(breakdown.value));
        println!("quad_error {}", fmt_g(breakdown.quad_error));
        println!("tail_bound {}", fmt_g(breakdown.tail_bound));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct HedgeJson {
    phi: Vec<f64>,
    psi: Vec<f64>,
    h: Vec<f64>,
    degenerate: bool,
    max_violation: f64,
}

#[derive(Serialize)]
struct BoundsJson {
    payoff: String,
    atoms: usize,
    repaired: bool,
    min: f64,
    max: f64,
    duality_gap_min: f64,
    duality_gap_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hedge_min: Option<HedgeJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hedge_max: Option<HedgeJson>,
}

fn cmd_bounds(cfg: Merged, dump_hedge: bool) -> Result<ExitCode, CliError> {
    let (mu, nu) = cfg.marginals()?;
    let payoff = cfg.payoff()?;
    let inst = DiscreteMotInstance::from_marginals(&mu, &nu, &payoff, &cfg.lp_config()?)
        .map_err(CliError::Mot)?;
    let lo = solve_bounds(&inst, Direction::Min).map_err(CliError::Mot)?;
    let hi = solve_bounds(&inst, Direction::Max).map_err(CliError::Mot)?;
    let gap_lo = (lo.hedge.value(&inst) - lo.value).abs();
    let gap_hi = (hi.hedge.value(&inst) - hi.value).abs();
    let mk_hedge = |sol: &mot::lp::LpSolution, dir: Direction| HedgeJson {
        phi: sol.hedge.phi.clone(),
        psi: sol.hedge.psi.clone(),
        h: sol.hedge.h.clone(),
        degenerate: sol.hedge.degenerate,
        max_violation: check_hedge(&inst, &sol.hedge, dir).max_violation,
    };
    if cfg.json {
        let report = BoundsJson {
            payoff: payoff.label.clone(),
            atoms: cfg.atoms,
            repaired: inst.repaired,
            min: lo.value,
            max: hi.value,
            duality_gap_min: gap_lo,
            duality_gap_max: gap_hi,
            hedge_min: dump_hedge.then(|| mk_hedge(&lo, Direction::Min)),
            hedge_max: dump_hedge.then(|| mk_hedge(&hi, Direction::Max)),
        };
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        println!("min {}", fmt_g(lo.value));
        println!("max {}", fmt_g(hi.value));
        println!("duality_gap_min {}", fmt_g(gap_lo));
        println!("duality_gap_max {}", fmt_g(gap_hi));
        println!("repaired {}", inst.repaired);
        if dump_hedge {
            for (tag, sol) in [("min", &lo), ("max", &hi)] {
                println!("hedge_{tag}_phi {}", join_g(&sol.hedge.phi));
                println!("hedge_{tag}_psi {}", join_g(&sol.hedge.psi));
                println!("hedge_{tag}_h {}", join_g(&sol.hedge.h));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn join_g(values: &[f64]) -> String {
    values.iter().map(|v| fmt_g(*v)).collect::<Vec<_>>().join(" ")
}

#[derive(Serialize)]
struct VerifyJson {
    suite: String,
    pass: bool,
    checks: Vec<CheckJson>,
}

#[derive(Serialize)]
struct CheckJson {
    name: String,
    pass: bool,
    detail: String,
}

fn cmd_verify(cfg: Merged, instance: Option<&str>) -> Result<ExitCode, CliError> {
    let suite = Suite::parse(&cfg.suite)
        .ok_or_else(|| CliError::Config(format!("unknown suite '{}'", cfg.suite)))?;
    let (mu, nu) = match (&cfg.mu_spec, &cfg.nu_spec) {
        (Some(_), Some(_)) => cfg.marginals()?,
        _ => (
            Marginal::lognormal(0.2).expect("default"),
            Marginal::lognormal(0.3).expect("default"),
        ),
    };
    let inst = match instance {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read '{path}': {e}")))?;
            Some(DiscreteMotInstance::from_text(&text).map_err(CliError::Mot)?)
        }
        None => None,
    };
    let vcfg = VerifyConfig {
        mu,
        nu,
        grid: cfg.grid.min(256),
        atoms: cfg.atoms.min(80),
        instance: inst,
    };
    let summary = verify::run(suite, &vcfg);
    if cfg.json {
        let report = VerifyJson {
            suite: summary.suite.clone(),
            pass: summary.pass,
            checks: summary
                .checks
                .iter()
                .map(|c| CheckJson { name: c.name.clone(), pass: c.pass, detail: c.detail.clone() })
                .collect(),
        };
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        for c in &summary.checks {
            println!("{} {}  {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        println!(
            "{}: {} checks, {} failed",
            summary.suite,
            summary.checks.len(),
            summary.checks.iter().filter(|c| !c.pass).count()
        );
    }
    Ok(if summary.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
