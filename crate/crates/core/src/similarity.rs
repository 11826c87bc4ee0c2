//! Full-reference similarity between two grayscale images: mean squared error
//! and the windowed structural similarity index (SSIM).
//!
//! SSIM follows the scikit-image defaults: a 7x7 uniform window, `K1 = 0.01`,
//! `K2 = 0.03`, sample (N-1) variance normalization, and the mean taken over
//! window positions that lie entirely inside the image.
//!
//! Window sums are taken from integer summed-area tables, so every local mean,
//! variance and covariance is derived from exact integer moments with a single
//! floating-point division each.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::GrayImage;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    TooSmall { width: u32, height: u32, window: usize },
    #[error("invalid SSIM parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Mse,
    Ssim,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::Mse, Measure::Ssim];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Mse => "mse",
            Measure::Ssim => "ssim",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Measure::Mse => "MSE",
            Measure::Ssim => "SSIM",
        }
    }

    /// Whether `a` denotes strictly higher similarity than `b`.
    pub fn more_similar(self, a: f64, b: f64) -> bool {
        match self {
            Measure::Mse => a < b,
            Measure::Ssim => a > b,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Measure::Mse),
            "ssim" => Ok(Measure::Ssim),
            _ => Err(format!("unknown measure `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub measure: Measure,
    pub value: f64,
}

// Keeps `window² · Σx²` inside i64 for 8-bit data.
const MAX_WINDOW: usize = 1023;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window_size: usize,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sample_covariance: bool,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window_size: 7,
            k1: 0.01,
            k2: 0.03,
            data_range: 255.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            sample_covariance: true,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<(), SimilarityError> {
        let bad = |m: &str| Err(SimilarityError::InvalidParams(m.to_owned()));
        if self.window_size < 3 || self.window_size.is_multiple_of(2) || self.window_size > MAX_WINDOW {
            return bad("window_size must be odd and in [3, 1023]");
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return bad("k1 and k2 must be positive");
        }
        if self.data_range.is_nan() || self.data_range <= 0.0 {
            return bad("data_range must be positive");
        }
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.gamma > 0.0) {
            return bad("alpha, beta and gamma must be positive");
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.data_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.data_range).powi(2)
    }

    pub fn c3(&self) -> f64 {
        self.c2() / 2.0
    }

    fn unit_exponents(&self) -> bool {
        self.alpha == 1.0 && self.beta == 1.0 && self.gamma == 1.0
    }
}

/// First and second moments of one window pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalStats {
    pub mu_x: f64,
    pub mu_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
}

impl LocalStats {
    pub fn luminance(&self, p: &SsimParams) -> f64 {
        let c1 = p.c1();
        (2.0 * self.mu_x * self.mu_y + c1) / (self.mu_x.powi(2) + self.mu_y.powi(2) + c1)
    }

    pub fn contrast(&self, p: &SsimParams) -> f64 {
        let c2 = p.c2();
        (2.0 * self.var_x.sqrt() * self.var_y.sqrt() + c2) / (self.var_x + self.var_y + c2)
    }

    pub fn structure(&self, p: &SsimParams) -> f64 {
        let c3 = p.c3();
        (self.cov_xy + c3) / (self.var_x.sqrt() * self.var_y.sqrt() + c3)
    }

    /// Window score. With unit exponents this is the closed form
    /// `((2μxμy + c1)(2σxy + c2)) / ((μx² + μy² + c1)(σx² + σy² + c2))`.
    pub fn score(&self, p: &SsimParams) -> f64 {
        if p.unit_exponents() {
            let (c1, c2) = (p.c1(), p.c2());
            ((2.0 * self.mu_x * self.mu_y + c1) * (2.0 * self.cov_xy + c2))
                / ((self.mu_x.powi(2) + self.mu_y.powi(2) + c1) * (self.var_x + self.var_y + c2))
        } else {
            self.luminance(p).powf(p.alpha)
                * self.contrast(p).powf(p.beta)
                * self.structure(p).powf(p.gamma)
        }
    }
}

fn same_shape(a: &GrayImage, b: &GrayImage) -> Result<(), SimilarityError> {
    if a.dimensions() != b.dimensions() {
        return Err(SimilarityError::DimensionMismatch {
            a: a.dimensions(),
            b: b.dimensions(),
        });
    }
    Ok(())
}

/// Mean of squared pixel differences. The sum is exact in 64-bit integers.
pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64, SimilarityError> {
    same_shape(a, b)?;
    let sum: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / a.data().len() as f64)
}

/// Summed-area tables of x, y, x², y² and xy, each `(w+1) × (h+1)`.
struct Moments {
    stride: usize,
    sx: Vec<i64>,
    sy: Vec<i64>,
    sxx: Vec<i64>,
    syy: Vec<i64>,
    sxy: Vec<i64>,
}

impl Moments {
    fn new(a: &GrayImage, b: &GrayImage) -> Self {
        let (w, h) = (a.width() as usize, a.height() as usize);
        let stride = w + 1;
        let len = stride * (h + 1);
        let mut m = Moments {
            stride,
            sx: vec![0; len],
            sy: vec![0; len],
            sxx: vec![0; len],
            syy: vec![0; len],
            sxy: vec![0; len],
        };
        let (xa, ya) = (a.data(), b.data());
        for r in 0..h {
            let (mut rx, mut ry, mut rxx, mut ryy, mut rxy) = (0i64, 0i64, 0i64, 0i64, 0i64);
            for c in 0..w {
                let x = i64::from(xa[r * w + c]);
                let y = i64::from(ya[r * w + c]);
                rx += x;
                ry += y;
                rxx += x * x;
                ryy += y * y;
                rxy += x * y;
                let above = r * stride + c + 1;
                let here = above + stride;
                m.sx[here] = m.sx[above] + rx;
                m.sy[here] = m.sy[above] + ry;
                m.sxx[here] = m.sxx[above] + rxx;
                m.syy[here] = m.syy[above] + ryy;
                m.sxy[here] = m.sxy[above] + rxy;
            }
        }
        m
    }

    #[inline]
    fn window(t: &[i64], stride: usize, r: usize, c: usize, n: usize) -> i64 {
        let top = r * stride + c;
        let bottom = top + n * stride;
        t[bottom + n] - t[bottom] - t[top + n] + t[top]
    }

    fn stats(&self, r: usize, c: usize, p: &SsimParams) -> LocalStats {
        let n = p.window_size;
        let s = self.stride;
        let sx = Self::window(&self.sx, s, r, c, n);
        let sy = Self::window(&self.sy, s, r, c, n);
        let sxx = Self::window(&self.sxx, s, r, c, n);
        let syy = Self::window(&self.syy, s, r, c, n);
        let sxy = Self::window(&self.sxy, s, r, c, n);

        let count = (n * n) as i64;
        let denom = if p.sample_covariance { count * (count - 1) } else { count * count } as f64;
        // count·Σxy − Σx·Σy is the exact, unnormalized co-moment
        let var_x = ((count * sxx - sx * sx) as f64 / denom).max(0.0);
        let var_y = ((count * syy - sy * sy) as f64 / denom).max(0.0);
        let cov_xy = (count * sxy - sx * sy) as f64 / denom;
        LocalStats {
            mu_x: sx as f64 / count as f64,
            mu_y: sy as f64 / count as f64,
            var_x,
            var_y,
            cov_xy,
        }
    }
}

/// Mean SSIM over all window positions fully inside the image.
///
/// Rows of window positions may be scored on several threads; row sums are
/// always added in row order, so the result does not depend on the thread
/// count.
pub fn ssim(a: &GrayImage, b: &GrayImage, p: &SsimParams) -> Result<f64, SimilarityError> {
    p.validate()?;
    same_shape(a, b)?;
    let n = p.window_size;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < n || h < n {
        return Err(SimilarityError::TooSmall {
            width: a.width(),
            height: a.height(),
            window: n,
        });
    }

    let moments = Moments::new(a, b);
    let (rows, cols) = (h - n + 1, w - n + 1);
    let row_sums: Vec<f64> = (0..rows)
        .into_par_iter()
        .map(|r| (0..cols).map(|c| moments.stats(r, c, p).score(p)).sum())
        .collect();
    let total: f64 = row_sums.iter().sum();
    Ok(total / (rows * cols) as f64)
}

/// Both measures for one image pair, MSE first.
pub fn compare(
    a: &GrayImage,
    b: &GrayImage,
    p: &SsimParams,
) -> Result<(SimilarityScore, SimilarityScore), SimilarityError> {
    let m = mse(a, b)?;
    let s = ssim(a, b, p)?;
    Ok((
        SimilarityScore {
            measure: Measure::Mse,
            value: m,
        },
        SimilarityScore {
            measure: Measure::Ssim,
            value: s,
        },
    ))
}
