//! MMD^2 between two labelled samples before and after a label shift.

use kdrift::kernels::{median_heuristic_bandwidth, mmd_squared, witness_examples, ExamplePoint, KernelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(rng: &mut ChaCha8Rng, n: usize, threshold: f64) -> Vec<ExamplePoint> {
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = x[0] > threshold;
            ExamplePoint::new(x, y)
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let old = sample(&mut rng, 70, 0.0);
    let same = sample(&mut rng, 70, 0.0);
    let drifted = sample(&mut rng, 70, 0.6);

    let xs: Vec<_> = old.iter().map(|p| p.x.clone()).collect();
    let cfg = KernelConfig::new(median_heuristic_bandwidth(&xs)?)?;
    println!("bandwidth {:.3}", cfg.bandwidth());
    println!("no drift: MMD^2 = {:.4}", mmd_squared(&old, &same, &cfg)?);
    println!("drift:    MMD^2 = {:.4}", mmd_squared(&old, &drifted, &cfg)?);

    let (w_old, w_new) = witness_examples(&old, &drifted, &cfg, 3)?;
    for w in w_old {
        println!(
            "typical of old: x = {:.2?} y = {} (witness {:+.3})",
            w.point.x, w.point.y, w.value
        );
    }
    for w in w_new {
        println!(
            "typical of new: x = {:.2?} y = {} (witness {:+.3})",
            w.point.x, w.point.y, w.value
        );
    }
    Ok(())
}
