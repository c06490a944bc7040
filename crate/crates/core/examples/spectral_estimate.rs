//! Non-private spectral estimation, step by step.

use spectral_rasch::{
    compute_differentials, construct_chain, generate_synthetic, linf_error, stationary,
    AbilityParams, ItemParams, SamplingSpec, StationaryOptions,
};

fn main() -> spectral_rasch::Result<()> {
    let (m, n) = (8, 5000);
    let beta = ItemParams::equispaced(m, -1.5, 1.5)?;
    let x = generate_synthetic(
        &SamplingSpec { m, n, p: 0.8, seed: 7 },
        &beta,
        &AbilityParams::zeros(n),
    )?;

    let y = compute_differentials(&x);
    println!("Y[0][{}] = {}, Y[{}][0] = {}", m - 1, y.get(0, m - 1), m - 1, y.get(m - 1, 0));

    let chain = construct_chain(&y, 1.0)?;
    println!("chain scale d = {}", chain.scale());

    let pi = stationary(&chain, StationaryOptions::default())?;
    println!("power iteration: {} steps, residual {:.2e}", pi.iterations(), pi.residual());

    let est = pi.log_centered()?;
    for (j, (t, e)) in beta.as_slice().iter().zip(est.as_slice()).enumerate() {
        println!("item {j}: true {t:+.3}  estimate {e:+.3}");
    }
    println!("ℓ∞ error {:.4}", linf_error(&est, &beta)?);
    Ok(())
}
