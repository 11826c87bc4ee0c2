//! One PASS/FAIL line per acceptance criterion. Runs as a plain binary so the
//! lines always reach the test log; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use regional_defaults::analysis::{
    all_defaults, apply_threshold, consistency_chains, cross_level_similarities, load_extents,
    match_defaults_to_extent, tail_threshold, tukey_upper_fence, CrossLevelOptions, DefaultReport,
    Extremum, ImageSource,
};
use regional_defaults::cli::{cmd_analyze, cmd_generate, cmd_ingest, RunArgs, RunConfig};
use regional_defaults::generation::{
    run_generation, GenerationOptions, ImageStore, RetryPolicy, SyntheticProvider, Timestamps,
};
use regional_defaults::hierarchy::{Level, RegionHierarchy, REFERENCE_REJECTIONS, WORLD_CODE};
use regional_defaults::image::GrayImage;
use regional_defaults::report::{display_value, read_records_csv};
use regional_defaults::similarity::{mse, ssim, Measure, SsimParams};

use common::{fixture, naive_ssim, random_gray, rng};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn ssim_oracle() -> Outcome {
    let start = Instant::now();
    let p = SsimParams::default();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for (w, h) in [(7, 7), (8, 11), (32, 32), (64, 64)] {
        for _ in 0..50 {
            let a = random_gray(&mut r, w, h);
            let b = random_gray(&mut r, w, h);
            let fast = ssim(&a, &b, &p).map_err(|e| e.to_string())?;
            worst = worst.max((fast - naive_ssim(&a, &b, &p)).abs());
        }
    }
    let took = start.elapsed();
    check(
        worst < 1e-9 && took < Duration::from_secs(30),
        format!("max |optimized - naive| = {worst:.3e} over 200 pairs in {took:.2?}"),
    )
}

fn analytic_ssim() -> Outcome {
    let p = SsimParams::default();
    let mut r = rng(2);
    let mut self_err = 0.0f64;
    for _ in 0..10 {
        let (w, h) = (r.random_range(7..48), r.random_range(7..48));
        let a = random_gray(&mut r, w, h);
        self_err = self_err.max((ssim(&a, &a, &p).unwrap() - 1.0).abs());
    }
    let black = GrayImage::filled(16, 16, 0);
    let white = GrayImage::filled(16, 16, 255);
    let bw = ssim(&black, &white, &p).unwrap();
    // Constant images: only the luminance term differs from 1, giving c1 / (255² + c1).
    let c1 = (0.01f64 * 255.0).powi(2);
    let expected = c1 / (255.0f64.powi(2) + c1);
    let m = mse(
        &GrayImage::new(2, 1, vec![0, 255]).unwrap(),
        &GrayImage::new(2, 1, vec![255, 0]).unwrap(),
    )
    .unwrap();
    check(
        self_err < 1e-12 && (bw - expected).abs() < 1e-8 && (bw - 9.9989e-5).abs() < 1e-8 && m == 65025.0,
        format!("max |ssim(a,a) - 1| = {self_err:.1e}; ssim(0,255) = {bw:.6e}; mse = {m}"),
    )
}

fn hierarchy_counts() -> Outcome {
    let full = RegionHierarchy::bundled();
    let before = full.level_counts(true);
    let h = full.with_exclusions(REFERENCE_REJECTIONS).map_err(|e| e.to_string())?;
    let after = h.level_counts(false);
    let total: usize = after.iter().sum();
    check(
        before == [1, 5, 17, 8, 249] && after == [1, 5, 17, 8, 244] && total == 275,
        format!("{before:?} -> {after:?}, {total} regions"),
    )
}

fn world_reports() -> Result<(RegionHierarchy, Vec<DefaultReport>), String> {
    let h = RegionHierarchy::bundled().with_exclusions(REFERENCE_REJECTIONS).map_err(|e| e.to_string())?;
    let text = fs::read_to_string(fixture("world_records.csv")).map_err(|e| e.to_string())?;
    let records = read_records_csv(text.as_bytes())?;
    let reports = all_defaults(&records).map_err(|e| e.to_string())?;
    Ok((h, reports))
}

fn world_replay() -> Outcome {
    let (h, reports) = world_reports()?;
    // (level, measure) -> (most, least) as printed: region name and value.
    let expected: [(Level, Measure, (&str, &str), (&str, &str)); 8] = [
        (Level::UnRegion, Measure::Mse, ("Americas", "4323"), ("Africa", "14897")),
        (Level::UnRegion, Measure::Ssim, ("Europe", "0.18"), ("Oceania", "0.06")),
        (Level::UnSubRegion, Measure::Mse, ("Latin America and the Caribbean", "3361"), ("Northern Africa", "14128")),
        (Level::UnSubRegion, Measure::Ssim, ("Latin America and the Caribbean", "0.30"), ("Melanesia", "0.07")),
        (Level::UnIntermediateRegion, Measure::Mse, ("South America", "4983"), ("Eastern Africa", "13346")),
        (Level::UnIntermediateRegion, Measure::Ssim, ("Southern Africa", "0.13"), ("Channel Islands", "0.07")),
        (Level::Country, Measure::Mse, ("Nauru", "2922"), ("Antarctica", "18066")),
        (Level::Country, Measure::Ssim, ("Uganda", "0.26"), ("Sint Maarten (Dutch part)", "0.04")),
    ];
    let mut matched = 0;
    for (level, measure, most, least) in expected {
        let Some(r) = reports.iter().find(|r| r.level == level && r.measure == measure) else {
            return Err(format!("no report for {level} {measure}"));
        };
        for (extreme, (name, value)) in [(&r.most_similar, most), (&r.least_similar, least)] {
            let got = (h.node(&extreme.code).unwrap().name.as_str(), display_value(measure, extreme.value));
            if got == (name, value.to_owned()) {
                matched += 1;
            }
        }
    }
    let chains = consistency_chains(&reports, &h, Extremum::Most).map_err(|e| e.to_string())?;
    let run = |m: Measure| {
        chains
            .iter()
            .find(|c| c.measure == m)
            .map(|c| c.longest_hierarchical_run.iter().map(|(_, code)| code.as_str()).collect::<Vec<_>>())
            .unwrap_or_default()
    };
    let (mse_run, ssim_run) = (run(Measure::Mse), run(Measure::Ssim));
    check(
        matched == 16 && mse_run == ["019", "419", "005"] && ssim_run.len() == 1,
        format!("{matched}/16 table entries; MSE run {}; SSIM run length {}", mse_run.join("->"), ssim_run.len()),
    )
}

fn threshold_behaviour() -> Outcome {
    let (_, reports) = world_reports()?;
    let kept: BTreeMap<Level, String> = apply_threshold(&reports, 0.21)
        .into_iter()
        .filter(|f| f.default_exists)
        .map(|f| (f.level, format!("{} {:.2}", f.code, f.value)))
        .collect();
    let expected: BTreeMap<Level, String> =
        [(Level::UnSubRegion, "419 0.30".to_owned()), (Level::Country, "UGA 0.26".to_owned())].into();

    let mse_values: Vec<f64> = reports.iter().filter(|r| r.measure == Measure::Mse).map(|r| r.most_similar.value).collect();
    let mut skewed = mse_values.clone();
    skewed.push(1e6);
    let mse_none = tail_threshold(&mse_values, Measure::Mse).unwrap().is_none()
        && tail_threshold(&skewed, Measure::Mse).unwrap().is_none();

    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = r.random_range(4..200);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (n - 1) as f64;
            let i = h.floor() as usize;
            if i + 1 < n { s[i] + (h - i as f64) * (s[i + 1] - s[i]) } else { s[i] }
        };
        let oracle = q(0.75) + 1.5 * (q(0.75) - q(0.25));
        worst = worst.max((tukey_upper_fence(&v).unwrap() - oracle).abs());
    }
    check(
        kept == expected && mse_none && worst < 1e-12,
        format!("defaults above 0.21: {:?}; MSE threshold none: {mse_none}; fence max error {worst:.1e} over 1000 samples", kept.values().collect::<Vec<_>>()),
    )
}

fn ground_truth_matching() -> Outcome {
    let (h, reports) = world_reports()?;
    let most_forested = "region_code,level,extent_1e6_km2\n019,un_region,13.6\n151,un_sub_region,8.3\n005,un_intermediate_region,6.1\nRUS,country,8.1\n";
    let extents = load_extents(most_forested.as_bytes(), Some(&h)).map_err(|e| e.to_string())?;
    let matches = match_defaults_to_extent(&reports, &extents).map_err(|e| e.to_string())?;
    let levels = |m: Measure| -> Vec<Level> {
        matches.iter().filter(|x| x.measure == m && x.matched).map(|x| x.level).collect()
    };
    let (mse_levels, ssim_levels) = (levels(Measure::Mse), levels(Measure::Ssim));
    check(
        mse_levels == [Level::UnRegion, Level::UnIntermediateRegion] && ssim_levels.is_empty(),
        format!("MSE matches at {mse_levels:?}; SSIM matches at {} levels", ssim_levels.len()),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn end_to_end_determinism() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig::resolve(&RunArgs {
        hierarchy: Some(fixture("toy_regions.csv")),
        seed: Some(2024),
        store_dir: Some(dir.path().join("images")),
        output_dir: Some(dir.path().join("out")),
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for _ in 0..2 {
        let ingest = cmd_ingest(&cfg).map_err(|e| e.to_string())?;
        let gen = cmd_generate(&cfg).map_err(|e| e.to_string())?;
        cmd_analyze(&cfg).map_err(|e| e.to_string())?;
        runs.push((ingest.counts_after.iter().sum::<usize>(), gen.provider_calls, snapshot(dir.path())));
    }
    let took = start.elapsed();
    let identical = runs[0].2 == runs[1].2;
    check(
        runs[0].0 == 30 && identical && runs[1].1 == 0 && took < Duration::from_secs(60),
        format!(
            "{} regions at 1024x1024; {} files byte-identical: {identical}; provider calls {} then {}; {took:.2?}",
            runs[0].0,
            runs[0].2.len(),
            runs[0].1,
            runs[1].1
        ),
    )
}

fn pipeline_scale() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let h = RegionHierarchy::bundled().with_exclusions(REFERENCE_REJECTIONS).map_err(|e| e.to_string())?;
    let store = ImageStore::open(dir.path().join("images")).map_err(|e| e.to_string())?;
    let gen_opts = GenerationOptions {
        retry: RetryPolicy::immediate(1),
        max_in_flight: 4,
        timestamps: Timestamps::Fixed("2024-01-01T00:00:00Z".into()),
        ..Default::default()
    };
    let gen_start = Instant::now();
    let run = run_generation(&h, &SyntheticProvider::new(7), &store, &dir.path().join("manifest.json"), &gen_opts)
        .map_err(|e| e.to_string())?;
    let gen_time = gen_start.elapsed();
    let src = ImageSource { manifest: &run.manifest, store: &store };

    let single = CrossLevelOptions { threads: Some(1), ..Default::default() };
    let start = Instant::now();
    let seq = cross_level_similarities(&h, &src, WORLD_CODE, &single).map_err(|e| e.to_string())?;
    let seq_time = start.elapsed();
    let parallel = CrossLevelOptions { threads: Some(4), ..Default::default() };
    let par = cross_level_similarities(&h, &src, WORLD_CODE, &parallel).map_err(|e| e.to_string())?;
    let bitwise = seq.len() == par.len()
        && seq.iter().zip(&par).all(|(a, b)| {
            a.descendant_code == b.descendant_code
                && a.mse.to_bits() == b.mse.to_bits()
                && a.ssim.to_bits() == b.ssim.to_bits()
        });
    check(
        run.manifest.tallies().0 == 275 && seq.len() == 274 && seq_time < Duration::from_secs(300) && bitwise,
        format!(
            "{} images generated in {gen_time:.1?}; {} comparisons single-threaded in {seq_time:.1?}; parallel bit-identical: {bitwise}",
            run.manifest.tallies().0,
            seq.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("SSIM oracle equivalence", ssim_oracle),
        ("analytic SSIM and MSE checks", analytic_ssim),
        ("hierarchy level counts", hierarchy_counts),
        ("World default replay and consistency runs", world_replay),
        ("SSIM threshold behaviour", threshold_behaviour),
        ("forest-extent matching", ground_truth_matching),
        ("end-to-end determinism", end_to_end_determinism),
        ("pipeline-scale performance", pipeline_scale),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
