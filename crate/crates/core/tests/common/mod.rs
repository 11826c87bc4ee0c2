#![allow(dead_code)]

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use regional_defaults::image::GrayImage;
use regional_defaults::similarity::SsimParams;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn random_gray(rng: &mut StdRng, w: u32, h: u32) -> GrayImage {
    let data = (0..w * h).map(|_| rng.random::<u8>()).collect();
    GrayImage::new(w, h, data).unwrap()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// SSIM written straight from its definition: for every window position,
/// luminance × contrast × structure with c3 = c2/2, each factor computed from
/// floating-point window statistics, then averaged.
pub fn naive_ssim(a: &GrayImage, b: &GrayImage, p: &SsimParams) -> f64 {
    let win = p.window_size as u32;
    let n = f64::from(win * win);
    let c1 = (p.k1 * p.data_range).powi(2);
    let c2 = (p.k2 * p.data_range).powi(2);
    let c3 = c2 / 2.0;
    let norm = if p.sample_covariance { n - 1.0 } else { n };

    let mut total = 0.0;
    let mut windows = 0u32;
    for y0 in 0..=a.height() - win {
        for x0 in 0..=a.width() - win {
            let px = |img: &GrayImage| -> Vec<f64> {
                let mut v = Vec::with_capacity((win * win) as usize);
                for y in y0..y0 + win {
                    for x in x0..x0 + win {
                        v.push(f64::from(img.get(x, y)));
                    }
                }
                v
            };
            let xs = px(a);
            let ys = px(b);
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let vx = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / norm;
            let vy = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / norm;
            let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / norm;
            let (sx, sy) = (vx.sqrt(), vy.sqrt());

            let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            let c = (2.0 * sx * sy + c2) / (vx + vy + c2);
            let s = (cov + c3) / (sx * sy + c3);
            total += l.powf(p.alpha) * c.powf(p.beta) * s.powf(p.gamma);
            windows += 1;
        }
    }
    total / f64::from(windows)
}
