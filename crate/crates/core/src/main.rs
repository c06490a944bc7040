use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spectral_rasch::accounting::{MechanismKind, P0Preset, PrivacyBudget};
use spectral_rasch::mechanisms::{run_mechanism, MechanismConfig};
use spectral_rasch::metrics::{delta_k, l2_error, linf_error, top_k_accuracy, top_k_select};
use spectral_rasch::response::{
    generate_synthetic, load_item_params, load_responses, save_item_params, save_responses,
    write_item_params, AbilityParams, ItemParams, SamplingSpec,
};
use spectral_rasch::spectral::{compute_differentials, construct_chain};
use spectral_rasch::sweep::{run_sweep, write_results_csv, BetaSpec, SweepConfig, SweepMechanism};
use spectral_rasch::{Error, Result};

#[derive(Parser)]
#[command(name = "spectral-rasch", version, about = "Private spectral estimation for the Rasch model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic response matrix
    Generate {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        beta_lo: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        beta_hi: f64,
        /// Item parameters as item,beta CSV (overrides --beta-lo/--beta-hi)
        #[arg(long)]
        beta_file: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the generating item parameters
        #[arg(long)]
        beta_out: Option<PathBuf>,
    },
    /// Estimate item parameters from a response CSV
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Output CSV; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "nonprivate")]
        mechanism: SweepMechanism,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 1e-4)]
        delta: f64,
        /// Edge probability, or one of dense/logm/logn
        #[arg(long, default_value = "dense")]
        p0: String,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dump the non-private transition matrix to this CSV
        #[arg(long)]
        dump_chain: Option<PathBuf>,
    },
    /// Run a privacy-accuracy sweep and write the results CSV
    Sweep {
        /// TOML config; flags below are ignored when given
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        m: usize,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long)]
        beta_file: Option<PathBuf>,
        /// Sweep a fixed response file instead of synthetic data
        #[arg(long)]
        responses: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.1, 1.0, 10.0])]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 1e-4)]
        delta: f64,
        #[arg(long, value_delimiter = ',', default_value = "gaussian,laplace,rr,rr_shuffle,nonprivate")]
        mechanisms: Vec<SweepMechanism>,
        #[arg(long, default_value = "dense")]
        p0: P0Preset,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 5)]
        replicates: usize,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Record wall-clock time per row (output is then not reproducible)
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two item-parameter CSVs
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        topk: Option<usize>,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn parse_p0(s: &str, m: usize, n: usize) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) => Ok(v),
        Err(_) => Ok(s.parse::<P0Preset>()?.resolve(m, n)),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            m,
            n,
            p,
            seed,
            beta_lo,
            beta_hi,
            beta_file,
            out,
            beta_out,
        } => {
            let beta = match beta_file {
                Some(f) => BetaSpec::File(f),
                None => BetaSpec::Equispaced {
                    lo: beta_lo,
                    hi: beta_hi,
                },
            }
            .resolve(m)?;
            let x = generate_synthetic(&SamplingSpec { m, n, p, seed }, &beta, &AbilityParams::zeros(n))?;
            save_responses(&x, out)?;
            if let Some(path) = beta_out {
                save_item_params(&beta, path)?;
            }
        }
        Command::Estimate {
            input,
            out,
            mechanism,
            epsilon,
            delta,
            p0,
            lambda,
            seed,
            dump_chain,
        } => {
            let x = load_responses(input)?;
            if let Some(path) = dump_chain {
                let chain = construct_chain(&compute_differentials(&x), lambda)?;
                chain.write_csv(fs::File::create(path)?)?;
            }
            let beta: ItemParams = match mechanism {
                SweepMechanism::Nonprivate => spectral_rasch::spectral_estimate(&x, lambda)?,
                private => {
                    let eps = epsilon.ok_or_else(|| {
                        Error::InvalidParameter("--epsilon is required for private mechanisms".into())
                    })?;
                    let kind = match private {
                        SweepMechanism::Gaussian => MechanismKind::Gaussian,
                        SweepMechanism::Laplace => MechanismKind::Laplace,
                        _ => MechanismKind::RandomizedResponse,
                    };
                    let cfg = MechanismConfig::new(kind, PrivacyBudget::new(eps, delta)?, seed)
                        .with_p0(parse_p0(&p0, x.n_items(), x.n_users())?)
                        .with_lambda(lambda)
                        .with_shuffle(private == SweepMechanism::RrShuffle);
                    run_mechanism(&x, &cfg)?.beta
                }
            };
            write_item_params(&beta, output(&out)?)?;
        }
        Command::Sweep {
            config,
            m,
            n,
            p,
            beta_file,
            responses,
            epsilons,
            delta,
            mechanisms,
            p0,
            lambda,
            replicates,
            top_k,
            seed,
            timing,
            threads,
            out,
        } => {
            let cfg = match config {
                Some(path) => SweepConfig::from_toml(&fs::read_to_string(path)?)?,
                None => SweepConfig {
                    m,
                    n,
                    p,
                    beta: beta_file.map(BetaSpec::File).unwrap_or_default(),
                    responses,
                    epsilons,
                    delta,
                    mechanisms,
                    p0,
                    lambda,
                    replicates,
                    top_k,
                    seed,
                    record_timing: timing,
                },
            };
            let rows = match threads {
                Some(t) => rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?
                    .install(|| run_sweep(&cfg))?,
                None => run_sweep(&cfg)?,
            };
            write_results_csv(&rows, output(&out)?)?;
        }
        Command::Eval {
            truth,
            estimate,
            topk,
        } => {
            let truth = load_item_params(truth)?;
            let est = load_item_params(estimate)?;
            let mut w = io::stdout().lock();
            writeln!(w, "metric,value")?;
            writeln!(w, "l2_error,{}", l2_error(&est, &truth)?)?;
            writeln!(w, "linf_error,{}", linf_error(&est, &truth)?)?;
            if let Some(k) = topk {
                let set = top_k_select(&est, k)?;
                let ids: Vec<String> = set.iter().map(usize::to_string).collect();
                writeln!(w, "topk_accuracy,{}", top_k_accuracy(&est, &truth, k)?)?;
                writeln!(w, "topk_exact,{}", set == top_k_select(&truth, k)?)?;
                writeln!(w, "delta_k,{}", delta_k(&truth, k)?)?;
                writeln!(w, "topk_items,{}", ids.join(" "))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
