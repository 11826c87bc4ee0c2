//! Replay a table of World-to-region similarities through default detection,
//! consistency chains, the 0.21 SSIM cut-off and forest-extent matching.
//!
//! ```bash
//! cargo run -p regional-defaults --example replay_reference_tables
//! ```

use regional_defaults::analysis::{
    all_defaults, apply_threshold, bundled_extents, consistency_chains, match_defaults_to_extent,
    Extremum,
};
use regional_defaults::hierarchy::{RegionHierarchy, REFERENCE_REJECTIONS};
use regional_defaults::report::{display_value, read_records_csv};

const RECORDS: &str = include_str!("../tests/fixtures/world_records.csv");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = RegionHierarchy::bundled().with_exclusions(REFERENCE_REJECTIONS)?;
    let records = read_records_csv(RECORDS.as_bytes())?;
    let reports = all_defaults(&records)?;

    for r in &reports {
        let name = |code: &str| h.get(code).map_or(code.to_owned(), |n| n.name.clone());
        println!(
            "{:<30} {:<4}  most {} ({})  least {} ({})",
            r.level.label(),
            r.measure,
            name(&r.most_similar.code),
            display_value(r.measure, r.most_similar.value),
            name(&r.least_similar.code),
            display_value(r.measure, r.least_similar.value),
        );
    }

    for chain in consistency_chains(&reports, &h, Extremum::Most)? {
        let run: Vec<&str> = chain.longest_hierarchical_run.iter().map(|(_, c)| c.as_str()).collect();
        println!("{} run of {}: {}", chain.measure, chain.run_length(), run.join(" -> "));
    }

    let kept: Vec<_> = apply_threshold(&reports, 0.21)
        .into_iter()
        .filter(|f| f.default_exists)
        .collect();
    println!("defaults above 0.21: {}", kept.len());
    for f in kept {
        println!("  {} {} {:.2}", f.level.label(), f.code, f.value);
    }

    for m in match_defaults_to_extent(&reports, &bundled_extents(&h)?)? {
        println!("{:<30} {:<4} {} vs {}: {}", m.level.label(), m.measure, m.default_code, m.most_forested_code, m.matched);
    }
    Ok(())
}
