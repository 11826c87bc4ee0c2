mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use regional_defaults::hierarchy::{Level, RegionHierarchy, WORLD_CODE};

fn bundled() -> RegionHierarchy {
    RegionHierarchy::bundled()
}

fn countries(h: &RegionHierarchy) -> Vec<String> {
    h.nodes().filter(|n| n.level == Level::Country).map(|n| n.code.clone()).collect()
}

#[test]
fn bundled_counts() {
    let h = bundled();
    assert_eq!(h.level_counts(true), [1, 5, 17, 8, 249]);
    assert_eq!(h.len(), 280);
}

#[test]
fn toy_table_parses() {
    let h = RegionHierarchy::from_csv_path(common::fixture("toy_regions.csv")).unwrap();
    assert_eq!(h.level_counts(true), [1, 2, 4, 2, 21]);
    assert!(h.is_descendant("005", "BRA"));
    assert!(!h.is_descendant("150", "BRA"));
}

#[test]
fn every_level_below_world_is_partitioned() {
    let h = bundled();
    for level in Level::World.below() {
        let all: BTreeSet<_> = h.descendants_at_level(WORLD_CODE, level).unwrap().into_iter().map(|n| &n.code).collect();
        let mut seen = BTreeSet::new();
        // Children of the root at `level` itself (Antarctica) belong to no UN region.
        for child in h.children(WORLD_CODE) {
            let part: Vec<_> = if child.level == level {
                vec![&child.code]
            } else if child.level < level {
                h.descendants_at_level(&child.code, level).unwrap().into_iter().map(|n| &n.code).collect()
            } else {
                vec![]
            };
            for code in part {
                assert!(seen.insert(code), "{code} reached twice");
            }
        }
        assert_eq!(seen, all, "{level}");
    }
}

#[test]
fn parents_sit_one_or_more_levels_up() {
    let h = bundled();
    for n in h.nodes().filter(|n| !n.is_root()) {
        let p = h.parent(&n.code).unwrap();
        assert!(p.level < n.level, "{} under {}", n.code, p.code);
        assert!(h.is_descendant(WORLD_CODE, &n.code));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exclusions_round_trip_through_json(picks in prop::collection::vec(0usize..249, 0..12)) {
        let h = bundled();
        let cs = countries(&h);
        let chosen: BTreeSet<&str> = picks.iter().map(|&i| cs[i].as_str()).collect();
        let ex = h.with_exclusions(chosen.iter().copied()).unwrap();
        let back = RegionHierarchy::from_json(&ex.to_json()).unwrap();
        prop_assert_eq!(&back, &ex);
        prop_assert_eq!(back.to_json(), ex.to_json());
        prop_assert_eq!(ex.level_counts(false)[4], 249 - chosen.len());
        for code in &chosen {
            prop_assert!(ex.descendants_at_level(WORLD_CODE, Level::Country).unwrap().iter().all(|n| n.code != *code));
        }
    }
}
