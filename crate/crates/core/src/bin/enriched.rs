use std::path::PathBuf;
use std::process;

use clap::{Parser, ValueEnum};

use enriched_fixpoint::cli::{self, Command, ExitCode, RunConfig};
use enriched_fixpoint::solve::{Lambda, StopRule};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    /// Estimate and verify contraction constants of a mapping.
    Certify,
    /// Run the averaged iteration on a mapping.
    Solve,
    /// Solve a split feasibility instance.
    Sfp,
    /// Solve a variational inequality instance.
    Vip,
    /// Reflection-map experiment.
    Demo,
    /// Iterations-to-tolerance sweep over lambda.
    Bench,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Rule {
    Aposteriori,
    Step,
}

#[derive(Debug, Parser)]
#[command(
    name = "enriched",
    version,
    about = "Averaged fixed-point iteration with contraction certificates"
)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON file with a mapping or an SFP/VIP instance.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Averaging parameter in (0, 1], or `auto` to derive it from a certificate.
    #[arg(long, default_value = "auto")]
    lambda: Lambda,
    /// Contraction rate of the averaged map, enables error bounds.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, value_enum)]
    stop_rule: Option<Rule>,
    /// Starting point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Enrichment constants k tried by the certifier, comma separated.
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<f64>>,
    /// Grid points per axis of the witness sample.
    #[arg(long)]
    grid: Option<usize>,
    /// Seeded random points added to the witness sample.
    #[arg(long)]
    random: Option<usize>,
    /// Sampling box for maps on all of R^n, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lower: Option<Vec<f64>>,
    /// Upper corner of the sampling box.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    upper: Option<Vec<f64>>,
    /// Lambda values swept by `bench`.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Known fixed point used by `bench`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    fixed_point: Option<Vec<f64>>,
}

fn config(args: Args) -> RunConfig {
    let command = match args.command {
        Cmd::Certify => Command::Certify,
        Cmd::Solve => Command::Solve,
        Cmd::Sfp => Command::Sfp,
        Cmd::Vip => Command::Vip,
        Cmd::Demo => Command::Demo,
        Cmd::Bench => Command::Bench,
    };
    let mut cfg = RunConfig::new(command);
    cfg.input_path = args.config;
    cfg.output_dir = args.out;
    cfg.sample.seed = args.seed;
    cfg.sample.grid = args.grid;
    cfg.sample.random = args.random;
    cfg.sample.lower = args.lower;
    cfg.sample.upper = args.upper;
    cfg.solver.tol = args.tol;
    cfg.solver.max_iter = args.max_iter;
    cfg.solver.lambda = args.lambda;
    cfg.solver.rate = args.rate;
    cfg.solver.stop_rule = args.stop_rule.map(|r| match r {
        Rule::Aposteriori => StopRule::AposterioriBound,
        Rule::Step => StopRule::StepNorm,
    });
    cfg.x0 = args.x0;
    if let Some(k) = args.k_grid {
        cfg.k_grid = k;
    }
    if let Some(l) = args.lambdas {
        cfg.bench_lambdas = l;
    }
    cfg.fixed_point = args.fixed_point;
    cfg
}

fn main() {
    let cfg = config(Args::parse());
    let code = match cfg.solver.validate().and_then(|_| cli::run(&cfg)) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::for_error(&e)
        }
    };
    process::exit(code.code());
}
