//! The four private mechanisms on one dataset.

use spectral_rasch::{
    generate_synthetic, l2_error, run_mechanism, spectral_estimate, AbilityParams, ItemParams,
    MechanismConfig, MechanismKind, PrivacyBudget, SamplingSpec,
};

fn main() -> spectral_rasch::Result<()> {
    let (m, n) = (30, 2000);
    let beta = ItemParams::equispaced(m, -1.0, 1.0)?;
    let x = generate_synthetic(
        &SamplingSpec { m, n, p: 1.0, seed: 11 },
        &beta,
        &AbilityParams::zeros(n),
    )?;
    let baseline = spectral_estimate(&x, 1.0)?;
    println!("non-private ℓ2 error vs truth: {:.3}\n", l2_error(&baseline, &beta)?);

    let cases = [
        ("gaussian", MechanismKind::Gaussian, false),
        ("laplace", MechanismKind::Laplace, false),
        ("rr", MechanismKind::RandomizedResponse, false),
        ("rr_shuffle", MechanismKind::RandomizedResponse, true),
    ];
    for eps in [1.0, 10.0] {
        for (name, kind, shuffle) in cases {
            let cfg = MechanismConfig::new(kind, PrivacyBudget::new(eps, 1e-4)?, 5)
                .with_shuffle(shuffle);
            match run_mechanism(&x, &cfg) {
                Ok(est) => println!(
                    "ε* = {eps:>4} {name:<10} ℓ2 vs truth {:.3}, k = {}",
                    l2_error(&est.beta, &beta)?,
                    est.k_queries
                ),
                Err(e) => println!("ε* = {eps:>4} {name:<10} failed: {e}"),
            }
        }
    }
    Ok(())
}
