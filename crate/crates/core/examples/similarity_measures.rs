//! MSE and SSIM on small hand-made images.
//!
//! ```bash
//! cargo run -p regional-defaults --example similarity_measures
//! ```

use regional_defaults::image::{decode_png, to_grayscale, GrayImage, RgbImage};
use regional_defaults::similarity::{compare, mse, ssim, SsimParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = SsimParams::default();

    let black = GrayImage::filled(16, 16, 0);
    let white = GrayImage::filled(16, 16, 255);
    println!("black vs white: mse {} ssim {:.6e}", mse(&black, &white)?, ssim(&black, &white, &p)?);

    let stripes = GrayImage::from_fn(32, 32, |x, _| if x % 4 < 2 { 40 } else { 200 });
    let shifted = GrayImage::from_fn(32, 32, |x, _| if (x + 1) % 4 < 2 { 40 } else { 200 });
    let brighter = GrayImage::from_fn(32, 32, |x, y| stripes.get(x, y).saturating_add(20));
    for (name, other) in [("itself", &stripes), ("shifted", &shifted), ("brighter", &brighter)] {
        let (m, s) = compare(&stripes, other, &p)?;
        println!("stripes vs {name:<8} mse {:>8.1}  ssim {:.4}", m.value, s.value);
    }

    // Colour input goes through PNG and BT.601 luma, like generated images.
    let rgb = RgbImage::from_fn(32, 32, |x, y| [(x * 8) as u8, (y * 8) as u8, 96]);
    let gray = to_grayscale(&decode_png(&rgb.encode_png()?)?);
    println!("gradient luma at (31,31): {}", gray.get(31, 31));

    let wide = SsimParams { window_size: 11, ..p };
    println!("11x11 window: {:.4}", ssim(&stripes, &shifted, &wide)?);
    Ok(())
}
