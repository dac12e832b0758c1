//! Command-line front end: enumeration, pair-correlation curves, the
//! theoretical density, and the Monte Carlo volume check, all emitted
//! as CSV with a config-hash header so runs are reproducible.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hypangles::correlation::{empirical_r2, records_from_enumeration, restricted_r2};
use hypangles::density::{g2_theoretical, r2_theoretical};
use hypangles::hyperbolic::GroupElement;
use hypangles::lattice::{BallEnumeration, LatticeSpec};
use hypangles::volume::{f_m, mc_volume, RegionSpec};

/// Fully resolved run configuration; every field can come from the
/// JSON config file or be overridden by the flag of the same name.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    lattice: String,
    generators: Option<PathBuf>,
    #[serde(rename = "Q")]
    q: f64,
    xi_max: f64,
    xi_step: f64,
    interval: Option<String>,
    samples: u64,
    seed: u64,
    tolerance: f64,
    output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lattice: "psl2z".into(),
            generators: None,
            q: 100.0,
            xi_max: 4.0,
            xi_step: 0.05,
            interval: None,
            samples: 1_000_000,
            seed: 12345,
            tolerance: 0.1,
            output_dir: PathBuf::from("."),
        }
    }
}

#[derive(Parser)]
#[command(name = "hypangles", version, about = "Pair correlation of hyperbolic lattice angles")]
struct Cli {
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Builtin lattice name (psl2z) or "generators".
    #[arg(long, global = true)]
    lattice: Option<String>,
    /// Generator file (JSON) for a custom lattice.
    #[arg(long, global = true)]
    generators: Option<PathBuf>,
    #[arg(long = "Q", global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    xi_max: Option<f64>,
    #[arg(long, global = true)]
    xi_step: Option<f64>,
    /// Angular sub-arc "lo:hi"; accepts multiples of pi like "0:pi".
    #[arg(long, global = true)]
    interval: Option<String>,
    #[arg(long, global = true)]
    samples: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum allowed relative gap for the paircorr exit code.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Output directory for CSV files.
    #[arg(long = "out", global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the lattice ball and report the counting asymptotic.
    Enumerate,
    /// Empirical vs theoretical pair correlation curves.
    Paircorr,
    /// Theoretical density table: g2, R2 and the truncation tail bound.
    Density,
    /// Monte Carlo volume of R_M(Q, xi) vs the closed-form quadrature.
    Volcheck {
        /// Matrix M as "a,b,c,d" (row-major).
        #[arg(long = "M", default_value = "1,1,0,1")]
        m: String,
        /// Coefficient of the Q^{2/3} ||M||^2 slack term.
        #[arg(long, default_value_t = 5.0)]
        slack: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("HYPANGLES_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut cfg = match &cli.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = &o.lattice {
        cfg.lattice = v.clone();
    }
    if let Some(v) = &o.generators {
        cfg.generators = Some(v.clone());
    }
    if let Some(v) = o.q {
        cfg.q = v;
    }
    if let Some(v) = o.xi_max {
        cfg.xi_max = v;
    }
    if let Some(v) = o.xi_step {
        cfg.xi_step = v;
    }
    if let Some(v) = &o.interval {
        cfg.interval = Some(v.clone());
    }
    if let Some(v) = o.samples {
        cfg.samples = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.tolerance {
        cfg.tolerance = v;
    }
    if let Some(v) = &o.out {
        cfg.output_dir = v.clone();
    }
    if !(cfg.xi_step > 0.0) || !(cfg.q > 0.0) {
        return Err("xi_step and Q must be positive".into());
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    match cli.command {
        Command::Enumerate => cmd_enumerate(&cfg),
        Command::Paircorr => cmd_paircorr(&cfg),
        Command::Density => cmd_density(&cfg),
        Command::Volcheck { m, slack } => cmd_volcheck(&cfg, &m, slack),
    }
}

fn lattice_of(cfg: &RunConfig) -> Result<LatticeSpec, Box<dyn std::error::Error>> {
    match (cfg.lattice.as_str(), &cfg.generators) {
        (_, Some(path)) => Ok(LatticeSpec::from_json_file(path)?),
        ("psl2z", None) => Ok(LatticeSpec::psl2z()),
        (name, None) => Err(format!("unknown lattice '{name}' and no --generators file").into()),
    }
}

const ENUM_MARGIN: f64 = 4.0;

fn xi_grid(cfg: &RunConfig) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut k = 1u64;
    loop {
        let xi = cfg.xi_step * k as f64;
        if xi > cfg.xi_max + 1e-12 {
            break;
        }
        grid.push(xi);
        k += 1;
    }
    grid
}

/// 17 significant digits, enough to round-trip any f64.
fn fmt(x: f64) -> String {
    format!("{:.16e}", x)
}

fn config_hash(cfg: &RunConfig, command: &str) -> String {
    // Where the CSV lands must not change its bytes.
    let mut hashed = cfg.clone();
    hashed.output_dir = PathBuf::new();
    let mut hasher = Sha256::new();
    hasher.update(command.as_bytes());
    hasher.update(serde_json::to_string(&hashed).expect("config serializes"));
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn open_csv(
    cfg: &RunConfig,
    command: &str,
    name: &str,
) -> Result<std::io::BufWriter<std::fs::File>, Box<dyn std::error::Error>> {
    let path = cfg.output_dir.join(name);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# hypangles {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# config {}", config_hash(cfg, command))?;
    Ok(w)
}

fn parse_angle(token: &str) -> Result<f64, Box<dyn std::error::Error>> {
    let t = token.trim();
    let (sign, t) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t),
    };
    let v = match t {
        "pi" => PI,
        "2pi" => 2.0 * PI,
        _ => match t.strip_suffix("pi") {
            Some(mult) => mult.parse::<f64>()? * PI,
            None => t.parse::<f64>()?,
        },
    };
    Ok(sign * v)
}

fn parse_interval(text: &str) -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or("interval must be written lo:hi")?;
    Ok((parse_angle(lo)?, parse_angle(hi)?))
}

fn cmd_enumerate(cfg: &RunConfig) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let spec = lattice_of(cfg)?;
    let ball = spec.enumerate(cfg.q, ENUM_MARGIN)?;
    let mut w = open_csv(cfg, "enumerate", "elements.csv")?;
    writeln!(w, "a,b,c,d,norm_sq")?;
    for g in &ball.elements {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt(g.a),
            fmt(g.b),
            fmt(g.c),
            fmt(g.d),
            fmt(g.norm_sq())
        )?;
    }
    let expected = PI * cfg.q * cfg.q / spec.covolume;
    let ratio = ball.count() as f64 / expected;
    writeln!(
        w,
        "# summary count={} expected={} ratio={}",
        ball.count(),
        fmt(expected),
        fmt(ratio)
    )?;
    println!(
        "count {} expected {:.3} ratio {:.6} complete {}",
        ball.count(),
        expected,
        ratio,
        ball.complete
    );
    Ok(ExitCode::SUCCESS)
}

/// Ball radius used for the theoretical sums: large enough for the
/// truncation guard at the largest grid xi, with room for the tail
/// bound to be small.
fn theory_ball(spec: &LatticeSpec, xi_max: f64) -> Result<BallEnumeration, Box<dyn std::error::Error>> {
    let zeta = spec.covolume * xi_max;
    let needed = (2.0 * hypangles::density::breakpoints(zeta).ell2.cosh() + 2.0).sqrt();
    let t = (1.5 * needed).max(200.0);
    Ok(spec.enumerate(t, ENUM_MARGIN)?)
}

fn cmd_paircorr(cfg: &RunConfig) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let spec = lattice_of(cfg)?;
    let grid = xi_grid(cfg);
    let ball = spec.enumerate(cfg.q, ENUM_MARGIN)?;
    let records = records_from_enumeration(&ball);
    let curve = empirical_r2(&records, cfg.q, &grid, spec.covolume)?;
    let restricted = match &cfg.interval {
        Some(text) => Some(restricted_r2(
            &records,
            cfg.q,
            &grid,
            spec.covolume,
            parse_interval(text)?,
        )?),
        None => None,
    };
    let theory = theory_ball(&spec, cfg.xi_max)?;
    let r2_theory = r2_theoretical(&grid, &theory, &spec)?;
    let g2_theory: Vec<f64> = grid
        .iter()
        .map(|&xi| g2_theoretical(xi, &theory, &spec).map(|(v, _)| v))
        .collect::<Result<_, _>>()?;

    let mut w = open_csv(cfg, "paircorr", "paircorr.csv")?;
    let extra = if restricted.is_some() {
        ",R2_emp_interval"
    } else {
        ""
    };
    writeln!(
        w,
        "xi,N_Q,R2_emp,R2_theory,g2_emp,g2_theory,abs_gap{extra}"
    )?;
    let mut max_rel_gap = 0.0_f64;
    for (j, &xi) in grid.iter().enumerate() {
        let gap = (curve.r2_emp[j] - r2_theory[j]).abs();
        max_rel_gap = max_rel_gap.max(gap / r2_theory[j].max(0.1));
        let extra = match &restricted {
            Some(r) => format!(",{}", fmt(r.r2_emp[j])),
            None => String::new(),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{}{extra}",
            fmt(xi),
            fmt(curve.n_q[j]),
            fmt(curve.r2_emp[j]),
            fmt(r2_theory[j]),
            fmt(curve.g2_emp[j]),
            fmt(g2_theory[j]),
            fmt(gap)
        )?;
    }
    println!("max relative R2 gap {max_rel_gap:.6} (tolerance {})", cfg.tolerance);
    Ok(if max_rel_gap <= cfg.tolerance {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_density(cfg: &RunConfig) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let spec = lattice_of(cfg)?;
    let grid = xi_grid(cfg);
    let ball = theory_ball(&spec, cfg.xi_max)?;
    let r2 = r2_theoretical(&grid, &ball, &spec)?;
    let mut w = open_csv(cfg, "density", "density.csv")?;
    writeln!(w, "xi,g2_theory,R2_theory,tail_bound")?;
    for (j, &xi) in grid.iter().enumerate() {
        let (g2, tail) = g2_theoretical(xi, &ball, &spec)?;
        writeln!(w, "{},{},{},{}", fmt(xi), fmt(g2), fmt(r2[j]), fmt(tail))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_matrix(text: &str) -> Result<GroupElement, Box<dyn std::error::Error>> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()?;
    if parts.len() != 4 {
        return Err("matrix must be a,b,c,d".into());
    }
    Ok(GroupElement::from_floats(
        parts[0], parts[1], parts[2], parts[3],
    )?)
}

fn cmd_volcheck(
    cfg: &RunConfig,
    m_text: &str,
    slack_coeff: f64,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let m = parse_matrix(m_text)?;
    let grid = xi_grid(cfg);
    let mut w = open_csv(cfg, "volcheck", "volcheck.csv")?;
    writeln!(
        w,
        "Q,xi,ell,F_M,mc_mean,mc_stderr,closed_form,samples,seed"
    )?;
    let mut all_ok = true;
    for &xi in &grid {
        let region = RegionSpec::new(m.clone(), cfg.q, xi)?;
        let fm = f_m(&region);
        let closed = cfg.q * cfg.q * fm;
        let est = mc_volume(&region, cfg.samples, cfg.seed);
        let budget =
            3.0 * est.stderr + slack_coeff * cfg.q.powf(2.0 / 3.0) * m.norm_sq();
        if (est.mean - closed).abs() > budget {
            all_ok = false;
        }
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt(cfg.q),
            fmt(xi),
            fmt(region.ell),
            fmt(fm),
            fmt(est.mean),
            fmt(est.stderr),
            fmt(closed),
            est.samples,
            est.seed
        )?;
    }
    println!("volcheck {}", if all_ok { "ok" } else { "FAILED" });
    Ok(if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
