//! Exact integer noise: empirical frequencies against the target PMF.

use spectral_rasch::{bernoulli_exp, sample_discrete_gaussian, sample_discrete_laplace, RngStream};

fn main() -> spectral_rasch::Result<()> {
    let draws = 200_000;
    let mut rng = RngStream::new(1);

    let hits = (0..draws).filter(|_| bernoulli_exp(1.0, &mut rng).unwrap()).count();
    println!("bernoulli_exp(1): {:.4} (e^-1 = {:.4})", hits as f64 / draws as f64, (-1.0f64).exp());

    let sigma = 2.0;
    let norm: f64 = (-40i64..=40).map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp()).sum();
    let mut counts = [0usize; 5];
    for _ in 0..draws {
        let z = sample_discrete_gaussian(sigma, &mut rng)?;
        if z.abs() <= 2 {
            counts[(z + 2) as usize] += 1;
        }
    }
    println!("\ndiscrete Gaussian σ = {sigma}");
    for (i, c) in counts.iter().enumerate() {
        let x = i as i64 - 2;
        let exact = (-(x * x) as f64 / (2.0 * sigma * sigma)).exp() / norm;
        println!("  P({x:+}) empirical {:.4} exact {exact:.4}", *c as f64 / draws as f64);
    }

    let t = 1.5f64;
    let alpha = (-1.0 / t).exp();
    let mut counts = [0usize; 5];
    for _ in 0..draws {
        let z = sample_discrete_laplace(t, &mut rng)?;
        if z.abs() <= 2 {
            counts[(z + 2) as usize] += 1;
        }
    }
    println!("\ndiscrete Laplace t = {t}");
    for (i, c) in counts.iter().enumerate() {
        let x = i as i64 - 2;
        let exact = (1.0 - alpha) / (1.0 + alpha) * alpha.powi(x.abs() as i32);
        println!("  P({x:+}) empirical {:.4} exact {exact:.4}", *c as f64 / draws as f64);
    }
    Ok(())
}
