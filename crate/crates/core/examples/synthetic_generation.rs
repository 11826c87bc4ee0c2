//! Generate images for a handful of regions with the seeded synthetic
//! provider, then run again and watch the cache absorb every request.
//!
//! ```bash
//! cargo run -p regional-defaults --example synthetic_generation
//! ```

use regional_defaults::generation::{
    run_generation, GenerationOptions, ImageStore, Manifest, OutcomeStatus, RetryPolicy,
    SyntheticProvider, Timestamps,
};
use regional_defaults::hierarchy::RegionHierarchy;

const REGIONS: &str = "\
name,alpha-3,region,sub-region,intermediate-region,region-code,sub-region-code,intermediate-region-code
Brazil,BRA,Americas,Latin America and the Caribbean,South America,019,419,005
Finland,FIN,Europe,Northern Europe,,150,154,
Jamaica,JAM,Americas,Latin America and the Caribbean,Caribbean,019,419,029
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let h = regional_defaults::hierarchy::parse_region_table(REGIONS.as_bytes())?;
    let h: RegionHierarchy = h.with_exclusions(["JAM"])?;
    let store = ImageStore::open(dir.path().join("images"))?;
    let manifest_path = dir.path().join("manifest.json");
    let opts = GenerationOptions {
        image_size: 128,
        retry: RetryPolicy::immediate(3),
        max_in_flight: 2,
        timestamps: Timestamps::Fixed("2024-01-01T00:00:00Z".into()),
    };

    // The provider refuses Finland, the way a safety filter would.
    let provider = SyntheticProvider::new(42).with_rejected_prompts(["forest in Finland"]);
    let first = run_generation(&h, &provider, &store, &manifest_path, &opts)?;
    let (g, r, f) = first.manifest.tallies();
    println!("first run: {g}/{r}/{f} generated/rejected/failed, {} calls", first.provider_calls);
    for code in first.manifest.codes_with(OutcomeStatus::Rejected) {
        println!("  rejected: {code}");
    }
    if let Some(o) = first.manifest.outcome("BRA") {
        println!("  BRA -> {}", o.image_ref.as_deref().unwrap_or("-"));
    }

    let again = SyntheticProvider::new(42).with_rejected_prompts(["forest in Finland"]);
    let second = run_generation(&h, &again, &store, &manifest_path, &opts)?;
    println!("second run: {} provider calls", second.provider_calls);
    assert_eq!(Manifest::load(&manifest_path)?.to_json(), first.manifest.to_json());
    Ok(())
}
