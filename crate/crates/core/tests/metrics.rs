mod common;

use proptest::prelude::*;

use common::checks::metrics_match_brute_force;
use common::set_partitions;
use stratify::metrics::{adjusted_rand_index, completeness, homogeneity, metric_by_name, MetricsReport};

#[test]
fn all_partitions_up_to_six_match_the_oracles() {
    println!("{}", metrics_match_brute_force(6).unwrap());
}

#[test]
fn four_subject_fixture() {
    let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
    assert!((ari - 4.0 / 7.0).abs() < 1e-12, "{ari}");
    // Hand-computed: 0 agreeing pairs, expected 1, maximum 2.
    let ari = adjusted_rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap();
    assert!((ari + 0.5).abs() < 1e-12, "{ari}");
}

#[test]
fn refinement_keeps_homogeneity_and_merging_keeps_completeness() {
    for truth in set_partitions(5) {
        // Splitting every subject into its own cluster refines any partition.
        let singletons: Vec<u32> = (0..5).collect();
        assert!((homogeneity(&truth, &singletons).unwrap() - 1.0).abs() < 1e-12);
        // One big cluster merges everything.
        let merged = vec![0u32; 5];
        assert!((completeness(&truth, &merged).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn homogeneity_and_completeness_are_mirror_images() {
    let parts = set_partitions(5);
    for t in &parts {
        for p in &parts {
            let h = homogeneity(t, p).unwrap();
            let c = completeness(p, t).unwrap();
            assert!((h - c).abs() < 1e-12);
        }
    }
}

#[test]
fn registry_and_report_agree() {
    let t = [1, 1, 2, 2, 3, 3, 3];
    let p = [2, 2, 2, 1, 1, 3, 3];
    let report = MetricsReport::compute(&t, &p).unwrap();
    for (name, value) in [("ari", report.ari), ("homogeneity", report.homogeneity), ("completeness", report.completeness)] {
        let m = metric_by_name(name).unwrap();
        assert_eq!(m.compute(&t, &p).unwrap(), value);
    }
    assert_eq!((report.n_clusters_true, report.n_clusters_pred), (3, 3));
}

#[test]
fn report_json_has_the_documented_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    MetricsReport::compute(&[1, 2, 2], &[1, 1, 2]).unwrap().write(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    keys.sort();
    assert_eq!(keys, ["ari", "completeness", "homogeneity", "n_clusters_pred", "n_clusters_true"]);
}

proptest! {
    #[test]
    fn metrics_ignore_label_names(labels in prop::collection::vec((0u32..4, 0u32..4), 2..40), shift in 1u32..50) {
        let t: Vec<u32> = labels.iter().map(|x| x.0).collect();
        let p: Vec<u32> = labels.iter().map(|x| x.1).collect();
        let renamed: Vec<u32> = p.iter().map(|&l| (3 - l) * 7 + shift).collect();
        prop_assert!((adjusted_rand_index(&t, &p).unwrap() - adjusted_rand_index(&t, &renamed).unwrap()).abs() < 1e-12);
        prop_assert!((homogeneity(&t, &p).unwrap() - homogeneity(&t, &renamed).unwrap()).abs() < 1e-12);
        prop_assert!((completeness(&t, &p).unwrap() - completeness(&t, &renamed).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_bounded(labels in prop::collection::vec((0u32..5, 0u32..5), 2..60)) {
        let t: Vec<u32> = labels.iter().map(|x| x.0).collect();
        let p: Vec<u32> = labels.iter().map(|x| x.1).collect();
        let h = homogeneity(&t, &p).unwrap();
        let c = completeness(&t, &p).unwrap();
        let a = adjusted_rand_index(&t, &p).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&h));
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&c));
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&a));
        prop_assert!((adjusted_rand_index(&t, &p).unwrap() - adjusted_rand_index(&p, &t).unwrap()).abs() < 1e-12);
    }
}
