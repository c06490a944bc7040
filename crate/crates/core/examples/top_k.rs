//! Top-K identification as the sample size grows.

use spectral_rasch::metrics::top_k_accuracy;
use spectral_rasch::{
    delta_k, generate_synthetic, spectral_estimate, top_k_select, AbilityParams, ItemParams,
    SamplingSpec,
};

fn main() -> spectral_rasch::Result<()> {
    let (m, k) = (20, 5);
    let beta = ItemParams::new((0..m).map(|i| if i < k { 0.5 } else { 0.0 }).collect())?;
    let truth = top_k_select(&beta, k)?;
    println!("true top-{k}: {truth:?}, Δ_K = {}", delta_k(&beta, k)?);

    let reps = 30;
    for n in [50usize, 200, 500, 2000, 8000] {
        let mut exact = 0;
        let mut overlap = 0.0;
        for r in 0..reps {
            let x = generate_synthetic(
                &SamplingSpec { m, n, p: 1.0, seed: r },
                &beta,
                &AbilityParams::zeros(n),
            )?;
            let est = spectral_estimate(&x, 1.0)?;
            exact += (top_k_select(&est, k)? == truth) as usize;
            overlap += top_k_accuracy(&est, &beta, k)?;
        }
        println!(
            "n = {n:>5}: exact recovery {:.2}, mean overlap {:.2}",
            exact as f64 / reps as f64,
            overlap / reps as f64
        );
    }
    Ok(())
}
