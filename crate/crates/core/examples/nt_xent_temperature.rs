//! NT-Xent on a hand-made batch: the loss and its gradient, and how the
//! temperature sharpens the contrast between positives and negatives.
//!
//! cargo run --example nt_xent_temperature

use clmia::clmia::{cosine_sim, nt_xent};

fn main() -> clmia::Result<()> {
    // Three pairs; (z[2m], z[2m+1]) are two views of sample m.
    let z = vec![
        vec![1.0, 0.1, 0.0],
        vec![0.9, 0.2, 0.1],
        vec![0.0, 1.0, 0.2],
        vec![0.1, 0.8, 0.0],
        vec![0.2, 0.0, 1.0],
        vec![0.0, 0.3, 0.9],
    ];
    println!("sim(z0, z1) = {:.4}  sim(z0, z2) = {:.4}", cosine_sim(&z[0], &z[1])?, cosine_sim(&z[0], &z[2])?);

    for tau in [0.05, 0.1, 0.5, 1.0] {
        let out = nt_xent(&z, tau, true)?;
        let grad_norm: f64 = out.grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
        println!("tau {tau:<5} loss {:.6}  |grad| {grad_norm:.4}", out.loss);
    }

    let one_sided = nt_xent(&z, 0.5, false)?;
    println!("one-sided anchors: {:?}", one_sided.per_anchor);
    Ok(())
}
