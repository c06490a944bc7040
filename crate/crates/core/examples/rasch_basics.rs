//! Response probabilities and synthetic response data.

use spectral_rasch::{
    generate_synthetic, rasch_response_probability, AbilityParams, ItemParams, SamplingSpec,
};

fn main() -> spectral_rasch::Result<()> {
    for (theta, beta) in [(0.0, 0.0), (1.0, 0.0), (0.0, 2.0)] {
        println!(
            "P(correct | θ={theta}, β={beta}) = {:.4}",
            rasch_response_probability(theta, beta)
        );
    }

    let (m, n) = (6, 1000);
    let beta = ItemParams::equispaced(m, -1.0, 1.0)?;
    let x = generate_synthetic(
        &SamplingSpec { m, n, p: 0.7, seed: 42 },
        &beta,
        &AbilityParams::zeros(n),
    )?;
    println!("\n{} users x {} items, {} observed cells", x.n_users(), x.n_items(), x.observed_count());
    for (j, b) in beta.as_slice().iter().enumerate() {
        let (mut correct, mut seen) = (0, 0);
        for l in 0..n {
            if let Some(bit) = x.get(l, j).bit() {
                seen += 1;
                correct += bit as usize;
            }
        }
        println!(
            "item {j}: β = {b:+.2}, correct rate {:.3} (model {:.3})",
            correct as f64 / seen as f64,
            rasch_response_probability(0.0, *b)
        );
    }
    Ok(())
}
