use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use axmhd::error::HarnessError;
use axmhd::harness::mms::{convergence_study, describe_case, DEFAULT_MMS_GRIDS, MMS_CASES};
use axmhd::harness::verify::{equilibrium_report, verify_suite, MIN_ORDER};
use axmhd::harness::{parse_config_with, run_simulation, RunObserver, SimConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "axmhd", version, about = "Axisymmetric free-boundary plasma-vacuum simulator")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full simulation and write diagnostics and snapshots.
    Run(ConfigArgs),
    /// Run the geometry, Hardy, frozen-in and operator property suite.
    Verify,
    /// Convergence study of the pressure solver on manufactured solutions.
    Mms {
        /// Case to run; all cases when omitted.
        #[arg(long)]
        case: Option<u32>,
        /// Grid sizes, each twice the previous.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_MMS_GRIDS)]
        grids: Vec<usize>,
    },
    /// Build the configured preset and print its balance residuals.
    Equilibrium(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, taking precedence over `output.directory`.
    #[arg(long, env = "AXMHD_OUT_DIR")]
    out: Option<PathBuf>,
    /// Dot-path override such as `time.T=0.1`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SimConfig, HarnessError> {
        let text = fs::read_to_string(&self.config).map_err(|e| HarnessError::io(&self.config, e))?;
        let mut cfg = parse_config_with(&text, &self.overrides)?;
        if let Some(out) = &self.out {
            cfg.output.directory = out.clone();
        }
        Ok(cfg)
    }
}

struct Console {
    quiet: bool,
}

impl RunObserver for Console {
    fn warning(&mut self, message: &str) {
        eprintln!("warning: {message}");
    }

    fn picard(&mut self, pass: usize, psi: f64) {
        if !self.quiet {
            println!("picard pass {pass:>2}: psi = {psi:.6e}");
        }
    }
}

fn run(args: &ConfigArgs, quiet: bool) -> Result<ExitCode, HarnessError> {
    let cfg = args.load()?;
    let summary = run_simulation(&cfg, &mut Console { quiet })?;
    if !quiet {
        let last = summary.records.last();
        println!("preset        {}", cfg.preset);
        println!("config hash   {}", summary.hash);
        println!("nodes         {}", summary.records.len());
        println!("converged     {}", summary.converged);
        if let (Some(first), Some(last)) = (summary.records.first(), last) {
            println!("energy        {:.6e} -> {:.6e}", first.energy, last.energy);
            println!("C(T)          {:.6e}", last.c);
        }
        println!("files         {} written to {}", summary.files.len(), cfg.output.directory.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(quiet: bool) -> Result<ExitCode, HarnessError> {
    let checks = verify_suite()?;
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        if !quiet || !c.passed {
            println!("{:<4} {:<16} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn mms(case: Option<u32>, grids: &[usize], quiet: bool) -> Result<ExitCode, HarnessError> {
    let cases: Vec<u32> = case.map_or_else(|| MMS_CASES.to_vec(), |c| vec![c]);
    let mut ok = true;
    for id in cases {
        let study = convergence_study(id, grids)?;
        let passed = study.min_order() >= MIN_ORDER;
        ok &= passed;
        if !quiet {
            println!("case {id}: {}", describe_case(id));
            for (k, p) in study.points.iter().enumerate() {
                let order = if k == 0 { String::new() } else { format!("  order {:.3}", study.orders[k - 1]) };
                println!("  n = {:>4}  error = {:.6e}  iterations = {:>5}{order}", p.n, p.error_inf, p.iterations);
            }
        }
        println!("{} case {id}: min observed order {:.3}", if passed { "PASS" } else { "FAIL" }, study.min_order());
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn equilibrium(args: &ConfigArgs) -> Result<ExitCode, HarnessError> {
    let cfg = args.load()?;
    let rep = equilibrium_report(&cfg)?;
    println!("preset               {}", rep.preset);
    println!("seed div residual    {:.3e} (tolerance {:.3e})", rep.seed.div_residual, rep.seed.tolerance);
    println!("seed boundary b0^r   {:.3e}", rep.seed.boundary_br);
    println!("min |b0^z| on wall   {:.3e} (delta_min {:.3e})", rep.seed.delta, rep.seed.delta_min);
    println!("pressure deviation   {:.3e}", rep.pressure_deviation);
    println!("acceleration         {:.3e} (dt {:.3e})", rep.acceleration, rep.dt);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args, cli.quiet),
        Command::Verify => verify(cli.quiet),
        Command::Mms { case, grids } => mms(*case, grids, cli.quiet),
        Command::Equilibrium(args) => equilibrium(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
