//! Load the bundled ISO 3166 / M49 table, drop the five regions the image
//! model refused, and walk the hierarchy.
//!
//! ```bash
//! cargo run -p regional-defaults --example ingest_hierarchy
//! ```

use regional_defaults::hierarchy::{prompt_for, Level, RegionHierarchy, REFERENCE_REJECTIONS, WORLD_CODE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let full = RegionHierarchy::bundled();
    let h = full.with_exclusions(REFERENCE_REJECTIONS)?;

    for (level, (before, after)) in Level::ALL
        .iter()
        .zip(full.level_counts(true).iter().zip(h.level_counts(false)))
    {
        println!("{:<32} {before:>4} -> {after:>4}", level.label());
    }
    println!("regions analyzed: {}", h.level_counts(false).iter().sum::<usize>());

    for region in h.children(WORLD_CODE).filter(|n| n.level == Level::UnRegion) {
        let n = h.descendants_at_level(&region.code, Level::Country)?.len();
        println!("{} {:<10} {n:>3} countries  prompt: {:?}", region.code, region.name, prompt_for(region));
    }

    // Antarctica hangs directly off the root.
    let ata = h.node("ATA")?;
    println!("{} -> parent {}", ata.name, h.parent("ATA").map_or("-", |p| p.code.as_str()));

    let json = h.to_json();
    assert_eq!(RegionHierarchy::from_json(&json)?.to_json(), json);
    println!("hierarchy.json: {} bytes", json.len());
    Ok(())
}
