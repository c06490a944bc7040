//! Turning an (ε*, δ) target into per-query noise.

use spectral_rasch::accounting::{
    gaussian_total_epsilon, shuffle_amplified_epsilon, shuffle_epsilon_cap,
};
use spectral_rasch::{
    cdp_to_approx_dp, gaussian_plan, laplace_plan, rr_per_response_epsilon,
    shuffle_effective_epsilon, CdpBudget, PrivacyBudget,
};

fn main() -> spectral_rasch::Result<()> {
    let delta = 1e-4;
    let k = 100 * 99;
    println!("{:>6} {:>10} {:>12} {:>12}", "ε*", "ε₀", "σ (k=9900)", "t (k=9900)");
    for eps in [0.01, 0.1, 1.0, 10.0] {
        let b = PrivacyBudget::new(eps, delta)?;
        let sigma = gaussian_plan(b, k)?.noise_scale().unwrap().value();
        let t = laplace_plan(b, k)?.noise_scale().unwrap().value();
        println!("{eps:>6} {:>10.5} {sigma:>12.2} {t:>12.1}", gaussian_total_epsilon(b));
    }

    let b = PrivacyBudget::new(1.0, delta)?;
    let e0 = gaussian_total_epsilon(b);
    let back = cdp_to_approx_dp(CdpBudget::new(0.5 * e0 * e0)?, delta)?;
    println!("\nρ = ½ε₀² converts back to ε = {back:.6} for target 1");

    println!("\nshuffled randomized response, ε* = 1");
    for n in [100usize, 1000, 10_000, 100_000] {
        let e0 = shuffle_effective_epsilon(b, n);
        let cap = shuffle_epsilon_cap(delta, n);
        if cap < 0.0 {
            println!("  n = {n:>6}: too few users to amplify, local ε₀ = {e0:.4}");
        } else {
            println!(
                "  n = {n:>6}: local ε₀ = {e0:.4} (cap {cap:.3}), amplified back to {:.6}",
                shuffle_amplified_epsilon(e0, delta, n)
            );
        }
    }
    println!(
        "\nper-response ε for a user with 20 answers at ε_user = 2: {:?}",
        rr_per_response_epsilon(2.0, 20)
    );
    Ok(())
}
