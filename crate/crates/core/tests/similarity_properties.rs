mod common;

use proptest::prelude::*;
use regional_defaults::image::GrayImage;
use regional_defaults::similarity::{mse, ssim, SsimParams};

use common::{naive_ssim, random_gray, rng};

fn gray(max_side: u32) -> impl Strategy<Value = (GrayImage, GrayImage)> {
    (7..=max_side, 7..=max_side).prop_flat_map(|(w, h)| {
        let n = (w * h) as usize;
        (
            prop::collection::vec(any::<u8>(), n),
            prop::collection::vec(any::<u8>(), n),
        )
            .prop_map(move |(a, b)| (GrayImage::new(w, h, a).unwrap(), GrayImage::new(w, h, b).unwrap()))
    })
}

#[test]
fn optimized_matches_naive_on_odd_shapes() {
    let mut r = rng(11);
    for (w, h) in [(7, 7), (9, 7), (8, 11), (13, 10), (32, 32)] {
        let a = random_gray(&mut r, w, h);
        let b = random_gray(&mut r, w, h);
        let p = SsimParams::default();
        let fast = ssim(&a, &b, &p).unwrap();
        assert!((fast - naive_ssim(&a, &b, &p)).abs() < 1e-9, "{w}x{h}");
    }
}

#[test]
fn non_default_parameters_match_naive() {
    let mut r = rng(12);
    let a = random_gray(&mut r, 20, 17);
    let b = GrayImage::from_fn(20, 17, |x, y| a.get(x, y).saturating_add((x * y % 40) as u8));
    for p in [
        SsimParams { window_size: 3, ..Default::default() },
        SsimParams { window_size: 11, k1: 0.02, k2: 0.05, ..Default::default() },
        SsimParams { sample_covariance: false, ..Default::default() },
        SsimParams { alpha: 2.0, beta: 0.5, gamma: 1.0, ..Default::default() },
        SsimParams { data_range: 1.0, ..Default::default() },
    ] {
        let fast = ssim(&a, &b, &p).unwrap();
        let slow = naive_ssim(&a, &b, &p);
        assert!((fast - slow).abs() < 1e-9, "{p:?}: {fast} vs {slow}");
    }
}

#[test]
fn mse_ladder() {
    let a = GrayImage::new(2, 1, vec![0, 255]).unwrap();
    let b = GrayImage::new(2, 1, vec![255, 0]).unwrap();
    assert_eq!(mse(&a, &b).unwrap(), 65025.0);
    assert_eq!(mse(&a, &a).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn both_measures_are_symmetric((a, b) in gray(24)) {
        let p = SsimParams::default();
        prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        prop_assert_eq!(ssim(&a, &b, &p).unwrap(), ssim(&b, &a, &p).unwrap());
    }

    #[test]
    fn measures_stay_in_range((a, b) in gray(24)) {
        let m = mse(&a, &b).unwrap();
        prop_assert!((0.0..=65025.0).contains(&m));
        let s = ssim(&a, &b, &SsimParams::default()).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s), "{}", s);
    }

    #[test]
    fn identical_images_score_perfectly((a, _) in gray(24)) {
        prop_assert_eq!(mse(&a, &a).unwrap(), 0.0);
        prop_assert!((ssim(&a, &a, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_shift_costs_k_squared((a, _) in gray(20), k in 0u8..=60) {
        let a = GrayImage::from_fn(a.width(), a.height(), |x, y| a.get(x, y).min(195));
        let b = GrayImage::from_fn(a.width(), a.height(), |x, y| a.get(x, y) + k);
        prop_assert_eq!(mse(&a, &b).unwrap(), f64::from(k) * f64::from(k));
    }

    #[test]
    fn optimized_ssim_matches_naive((a, b) in gray(16)) {
        let p = SsimParams::default();
        let fast = ssim(&a, &b, &p).unwrap();
        let slow = naive_ssim(&a, &b, &p);
        prop_assert!((fast - slow).abs() < 1e-9, "{} vs {}", fast, slow);
    }
}
