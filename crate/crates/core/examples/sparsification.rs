//! Gaussian mechanism on Erdős–Rényi subsets of item pairs.

use spectral_rasch::{
    generate_synthetic, l2_error, run_mechanism, AbilityParams, ItemParams, MechanismConfig,
    MechanismKind, P0Preset, PrivacyBudget, SamplingSpec,
};

fn main() -> spectral_rasch::Result<()> {
    let (m, n) = (200, 200);
    let beta = ItemParams::equispaced(m, -1.0, 1.0)?;
    let logm = P0Preset::LogM.resolve(m, n);
    let p0s = [logm, 0.05, 0.1, 0.2, 0.5, 1.0];
    let reps = 5;

    for eps in [0.1, 10.0] {
        println!("ε* = {eps}");
        for p0 in p0s {
            let mut errors = Vec::new();
            let mut failed = 0;
            let mut k = 0;
            for r in 0..reps {
                let x = generate_synthetic(
                    &SamplingSpec { m, n, p: 1.0, seed: r },
                    &beta,
                    &AbilityParams::zeros(n),
                )?;
                let cfg = MechanismConfig::new(MechanismKind::Gaussian, PrivacyBudget::new(eps, 1e-4)?, r)
                    .with_p0(p0);
                // heavy noise can leave the chain without a usable stationary vector
                match run_mechanism(&x, &cfg) {
                    Ok(est) => {
                        errors.push(l2_error(&est.beta, &beta)?);
                        k = est.k_queries;
                    }
                    Err(_) => failed += 1,
                }
            }
            let mean = errors.iter().sum::<f64>() / errors.len().max(1) as f64;
            println!("  p0 = {p0:.4}: mean ℓ2 {mean:.3} over {} runs ({failed} failed), k ≈ {k}", errors.len());
        }
    }
    Ok(())
}
