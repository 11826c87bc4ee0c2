//! Offline provider that paints a deterministic procedural "forest" per prompt.
//!
//! Pixels come from a counter-based generator keyed by SHA-256 of
//! `(seed, prompt)`: two octaves of bilinearly interpolated value noise give
//! each prompt its own low-frequency layout, and a faint per-pixel grain keeps
//! local variance non-zero.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use super::provider::{check_request, ImageProvider, ProviderError};
use crate::image::RgbImage;

#[derive(Debug, Clone, Copy)]
struct Key([u64; 2]);

impl Key {
    fn new(seed: u64, prompt: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"regional-defaults/synthetic/v1\0");
        h.update(seed.to_le_bytes());
        h.update(prompt.as_bytes());
        let d = h.finalize();
        let word = |i: usize| u64::from_le_bytes(d[i * 8..i * 8 + 8].try_into().unwrap());
        Key([word(0), word(1)])
    }

    /// splitmix64 finalizer over (key, stream, counter).
    fn draw(self, stream: u64, counter: u64) -> u64 {
        let mut z = self.0[0]
            ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ counter.wrapping_mul(0xD1B5_4A32_D192_ED03).wrapping_add(self.0[1]);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn unit(self, stream: u64, counter: u64) -> f64 {
        (self.draw(stream, counter) >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Control-point lattice sampled with bilinear interpolation.
struct Lattice {
    cells: usize,
    values: Vec<f64>,
}

impl Lattice {
    fn new(key: Key, stream: u64, cells: usize) -> Self {
        let side = cells + 1;
        let values = (0..side * side).map(|i| key.unit(stream, i as u64)).collect();
        Self { cells, values }
    }

    fn sample(&self, u: f64, v: f64) -> f64 {
        let side = self.cells + 1;
        let fx = u * self.cells as f64;
        let fy = v * self.cells as f64;
        let x0 = (fx as usize).min(self.cells - 1);
        let y0 = (fy as usize).min(self.cells - 1);
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let at = |x: usize, y: usize| self.values[y * side + x];
        let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
        let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

// Per-channel base level and swing, roughly canopy greens and bark browns.
const BASE: [f64; 3] = [40.0, 90.0, 45.0];
const SWING: [f64; 3] = [90.0, 150.0, 90.0];
const GRAIN: f64 = 6.0;

/// Renders the procedural image for `(seed, prompt)`.
pub fn synthesize(seed: u64, prompt: &str, size: u32) -> RgbImage {
    let key = Key::new(seed, prompt);
    let coarse: Vec<Lattice> = (0..3).map(|c| Lattice::new(key, c, 4)).collect();
    let fine: Vec<Lattice> = (0..3).map(|c| Lattice::new(key, 10 + c, 16)).collect();
    let denom = f64::from(size.max(2) - 1);
    RgbImage::from_fn(size, size, |x, y| {
        let (u, v) = (f64::from(x) / denom, f64::from(y) / denom);
        let pixel = u64::from(y) * u64::from(size) + u64::from(x);
        let grain = (key.draw(99, pixel) & 0xff) as f64 / 255.0 - 0.5;
        let mut out = [0u8; 3];
        for c in 0..3 {
            let n = 0.7 * coarse[c].sample(u, v) + 0.3 * fine[c].sample(u, v);
            let value = BASE[c] + SWING[c] * n + GRAIN * grain;
            out[c] = value.round().clamp(0.0, 255.0) as u8;
        }
        out
    })
}

/// Deterministic provider for offline runs and tests.
#[derive(Debug, Default)]
pub struct SyntheticProvider {
    seed: u64,
    rejected_prompts: BTreeSet<String>,
    calls: AtomicUsize,
}

impl SyntheticProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    /// Prompts that will be answered with [`ProviderError::Rejected`].
    pub fn with_rejected_prompts<I, S>(mut self, prompts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.rejected_prompts.extend(prompts.into_iter().map(Into::into));
        self
    }

    /// Number of `generate` calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl ImageProvider for SyntheticProvider {
    fn id(&self) -> String {
        "synthetic-v1".to_owned()
    }

    fn seed(&self) -> Option<u64> {
        Some(self.seed)
    }

    fn generate(&self, prompt: &str, size: u32) -> Result<Vec<u8>, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        check_request(prompt, size)?;
        if self.rejected_prompts.contains(prompt) {
            return Err(ProviderError::Rejected(format!("prompt `{prompt}` is on the rejection list")));
        }
        synthesize(self.seed, prompt, size)
            .encode_png()
            .map_err(|e| ProviderError::Fatal(e.to_string()))
    }
}
