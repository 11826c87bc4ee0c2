mod common;

use proptest::prelude::*;
use regional_defaults::generation::{
    run_generation, GenerationOptions, ImageStore, RetryPolicy, SyntheticProvider, Timestamps,
};
use regional_defaults::hierarchy::RegionHierarchy;

fn opts(in_flight: usize) -> GenerationOptions {
    GenerationOptions {
        image_size: 24,
        retry: RetryPolicy::immediate(2),
        max_in_flight: in_flight,
        timestamps: Timestamps::Fixed("2024-05-01T00:00:00Z".into()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rerun_is_a_no_op(seed in any::<u64>(), in_flight in 1usize..5) {
        let h = RegionHierarchy::from_csv_path(common::fixture("toy_regions.csv")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = ImageStore::open(dir.path().join("images")).unwrap();
        let path = dir.path().join("manifest.json");

        let first = run_generation(&h, &SyntheticProvider::new(seed), &store, &path, &opts(in_flight)).unwrap();
        prop_assert_eq!(first.provider_calls, 30);
        let bytes = std::fs::read(&path).unwrap();

        let provider = SyntheticProvider::new(seed);
        let second = run_generation(&h, &provider, &store, &path, &opts(in_flight)).unwrap();
        prop_assert_eq!(provider.calls(), 0);
        prop_assert_eq!(second.requested, 0);
        prop_assert_eq!(std::fs::read(&path).unwrap(), bytes);

        // Same seed elsewhere, different concurrency: same manifest, same images.
        let other = tempfile::tempdir().unwrap();
        let store2 = ImageStore::open(other.path().join("images")).unwrap();
        let third = run_generation(&h, &SyntheticProvider::new(seed), &store2, &other.path().join("m.json"), &opts(1)).unwrap();
        prop_assert_eq!(third.manifest.to_json(), first.manifest.to_json());
    }
}

#[test]
fn different_seeds_give_different_images() {
    let h = RegionHierarchy::from_csv_path(common::fixture("toy_regions.csv")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = ImageStore::open(dir.path().join("images")).unwrap();
    let a = run_generation(&h, &SyntheticProvider::new(1), &store, &dir.path().join("a.json"), &opts(2)).unwrap();
    let b = run_generation(&h, &SyntheticProvider::new(2), &store, &dir.path().join("b.json"), &opts(2)).unwrap();
    let refs = |m: &regional_defaults::generation::Manifest| {
        m.outcomes.values().map(|o| o.image_ref.clone().unwrap()).collect::<std::collections::BTreeSet<_>>()
    };
    assert!(refs(&a.manifest).is_disjoint(&refs(&b.manifest)));
    assert_eq!(refs(&a.manifest).len(), 30);
}
