//! Histogram a skewed sample and find the right-tail cut-off.
//!
//! ```bash
//! cargo run -p regional-defaults --example tail_threshold
//! ```

use regional_defaults::analysis::{default_origin, tail_threshold, tukey_upper_fence, Histogram};
use regional_defaults::similarity::Measure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut ssim: Vec<f64> = (0..60).map(|i| 0.06 + 0.0015 * f64::from(i % 40)).collect();
    ssim.extend([0.26, 0.30]);

    let h = Histogram::from_values(&ssim, default_origin(Measure::Ssim), 0.01)?;
    for (edge, count) in h.bins().filter(|&(_, c)| c > 0) {
        println!("[{edge:.2}, {:.2})  {}", edge + 0.01, "#".repeat(count as usize));
    }

    println!("fence: {:.4}", tukey_upper_fence(&ssim)?);
    match tail_threshold(&ssim, Measure::Ssim)? {
        Some(t) => println!("SSIM threshold {t:.4}; above: {:?}", ssim.iter().filter(|&&v| v > t).collect::<Vec<_>>()),
        None => println!("no SSIM threshold"),
    }

    // Lower MSE is more similar, so a right tail says nothing about defaults.
    let mse: Vec<f64> = ssim.iter().map(|s| 20_000.0 * (1.0 - s)).collect();
    println!("MSE threshold: {:?}", tail_threshold(&mse, Measure::Mse)?);
    Ok(())
}
