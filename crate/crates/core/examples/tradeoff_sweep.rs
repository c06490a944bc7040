//! A small privacy-accuracy sweep written as CSV to stdout.

use spectral_rasch::sweep::RowStatus;
use spectral_rasch::{run_sweep, write_results_csv, SweepConfig, SweepMechanism};

fn main() -> spectral_rasch::Result<()> {
    let cfg = SweepConfig {
        m: 30,
        n: 300,
        epsilons: vec![0.1, 1.0, 10.0],
        mechanisms: vec![
            SweepMechanism::Gaussian,
            SweepMechanism::Laplace,
            SweepMechanism::Rr,
            SweepMechanism::Nonprivate,
        ],
        replicates: 3,
        seed: 2024,
        ..SweepConfig::default()
    };
    let rows = run_sweep(&cfg)?;
    let failed = rows.iter().filter(|r| r.status != RowStatus::Ok).count();
    eprintln!("{} rows, {failed} failed", rows.len());
    write_results_csv(&rows, std::io::stdout().lock())
}
