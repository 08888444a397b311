use std::fs;
use std::path::Path;

use nlcs_core::base::Features;
use nlcs_core::data::{
    convert_linqs, derive_seed, load_dataset, stratified_split, BaseModel, ExperimentConfig,
    SeedStreams,
};
use nlcs_core::Error;
use proptest::prelude::*;

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn loads_a_dataset_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("toy");
    fs::create_dir(&dir).unwrap();
    write(&dir, "edges.txt", "# comment\n0 1\n1 2 2.5\n2 0\n3 3\n");
    write(&dir, "labels.txt", "0 1\n1 0\n2 1\n3 0\n");
    write(&dir, "features.txt", "0 1:0.5 3:1\n1 0:2\n2\n3 2:1\n");
    let d = load_dataset(&dir).unwrap();
    assert_eq!(d.name, "toy");
    assert_eq!(d.num_nodes(), 4);
    assert_eq!(d.classes, 2);
    assert_eq!(d.class_sizes(), vec![2, 2]);
    assert_eq!(d.graph.num_edges(), 3);
    assert_eq!(d.graph.self_loops_dropped(), 1);
    assert_eq!(d.graph.edge_weight(2, 1), Some(2.5));
    match d.features.unwrap() {
        Features::Sparse(s) => {
            assert_eq!((s.rows(), s.cols()), (4, 4));
            assert_eq!(s.nnz(), 4);
        }
        Features::Dense(_) => panic!("expected sparse features"),
    }
}

#[test]
fn dense_features_and_missing_features() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "edges.txt", "0 1\n1 2\n");
    write(tmp.path(), "labels.txt", "2 0\n0 0\n1 1\n");
    let d = load_dataset(tmp.path()).unwrap();
    assert!(d.features.is_none());
    assert_eq!(d.labels, vec![0, 1, 0]);

    write(tmp.path(), "features.txt", "1 3 4\n0 1 2\n2 5 6\n");
    match load_dataset(tmp.path()).unwrap().features.unwrap() {
        Features::Dense(m) => {
            assert_eq!(m.row(0), &[1.0, 2.0]);
            assert_eq!(m.row(1), &[3.0, 4.0]);
        }
        Features::Sparse(_) => panic!("expected dense features"),
    }
}

#[test]
fn malformed_inputs_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    write(p, "labels.txt", "0 0\n1 1\n2 0\n");

    write(p, "edges.txt", "0 1\n1 x\n");
    let err = load_dataset(p).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

    write(p, "edges.txt", "0 1 2 3\n");
    assert!(matches!(load_dataset(p).unwrap_err(), Error::Parse { line: 1, .. }));

    write(p, "edges.txt", "0 9\n");
    assert!(matches!(load_dataset(p).unwrap_err(), Error::NodeOutOfRange { .. }));

    write(p, "edges.txt", "0 1\n");
    write(p, "labels.txt", "0 0\n0 1\n1 0\n");
    assert!(load_dataset(p).is_err());

    // node 2 missing
    write(p, "labels.txt", "0 0\n1 1\n3 0\n");
    assert!(load_dataset(p).is_err());

    // class 1 unused while class 2 exists
    write(p, "labels.txt", "0 0\n1 2\n2 0\n");
    assert!(matches!(load_dataset(p).unwrap_err(), Error::UnknownLabel { .. }));

    write(p, "labels.txt", "0 0\n1 1\n2 0\n");
    write(p, "features.txt", "0 1 2\n1 3 4\n");
    let err = load_dataset(p).unwrap_err().to_string();
    assert!(err.contains("3 rows") && err.contains("2 rows"), "{err}");

    assert!(matches!(load_dataset(&p.join("absent")).unwrap_err(), Error::Io { .. }));
}

#[test]
fn converts_linqs_files() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    write(
        p,
        "toy.content",
        "31 1 0 0 Theory\n7 0 1 0 Neural\n12 0 0 1 Theory\n99 1 1 0 Rule\n",
    );
    write(p, "toy.cites", "31 7\n7 12\n12 31\n99 7\n5000 31\n");
    let out = p.join("toy");
    let summary = convert_linqs(&p.join("toy.content"), &p.join("toy.cites"), &out).unwrap();
    assert_eq!(summary.nodes, 4);
    assert_eq!(summary.edges_written, 4);
    assert_eq!(summary.dangling_citations, 1);
    assert_eq!(summary.classes, vec!["Neural", "Rule", "Theory"]);
    assert_eq!(summary.feature_dim, 3);

    let d = load_dataset(&out).unwrap();
    assert_eq!(d.num_nodes(), 4);
    assert_eq!(d.graph.num_edges(), 4);
    assert_eq!(d.features.as_ref().unwrap().cols(), 3);
    // classes are numbered in sorted name order
    assert_eq!(d.labels, vec![2, 0, 2, 1]);
    assert_eq!(fs::read_to_string(out.join("classes.txt")).unwrap().lines().count(), 3);
}

#[test]
fn config_files_resolve_relative_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("exp.toml");
    fs::write(
        &path,
        "dataset = \"data/cora\"\nk = 0.05\nseeds = [1, 2]\nsigma = \"max\"\nbase = \"file:scores.txt\"\n\n[nhols]\nalpha = 0.3\nbeta = 0.6\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.dataset, tmp.path().join("data/cora"));
    assert_eq!(cfg.base, BaseModel::File(tmp.path().join("scores.txt")));
    assert_eq!(cfg.seeds, vec![1, 2]);
    assert_eq!(cfg.sigma, nlcs_core::MixingFunction::Maximum);
    assert_eq!(cfg.nhols_params().unwrap().alpha(), 0.3);

    fs::write(&path, "dataset = \"x\"\nk = 0.05\n[nhols]\nalpha = 0.6\nbeta = 0.5\n").unwrap();
    let err = ExperimentConfig::load(&path).unwrap_err().to_string();
    assert!(err.contains("alpha+beta must be < 1"), "{err}");
}

#[test]
fn split_rejects_tiny_classes_and_bad_ratios() {
    let labels = vec![0, 0, 0, 0, 1, 1];
    assert!(matches!(
        stratified_split(&labels, 2, 0.1, 0).unwrap_err(),
        Error::ClassTooSmall { class: 1, size: 2 }
    ));
    assert!(stratified_split(&[0; 10], 1, 0.0, 0).is_err());
    assert!(stratified_split(&[0; 10], 1, 1.0, 0).is_err());
}

#[test]
fn seed_streams_are_distinct() {
    let s = SeedStreams::new(42);
    assert_ne!(s.split, s.init);
    assert_eq!(s.split, derive_seed(42, 0));
    assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn splits_partition_the_nodes(
        sizes in proptest::collection::vec(5usize..60, 1..6),
        k in 0.01f64..0.5,
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
        let n = labels.len();
        let split = stratified_split(&labels, sizes.len(), k, seed);
        let Ok(split) = split else {
            // only tiny classes may be refused
            let refused = sizes.iter().any(|&s| ((k * s as f64).round_ties_even() as usize).max(1) + 2 > s);
            prop_assert!(refused);
            return Ok(());
        };
        let mut all: Vec<usize> = split.train.iter().chain(&split.validation).chain(&split.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for set in [&split.train, &split.validation, &split.test] {
            prop_assert!(set.windows(2).all(|w| w[0] < w[1]));
        }
        for (c, &s) in sizes.iter().enumerate() {
            let expected = ((k * s as f64).round_ties_even() as usize).max(1);
            prop_assert_eq!(split.train.iter().filter(|&&i| labels[i] == c).count(), expected);
        }
        let rest = n - split.train.len();
        prop_assert_eq!(split.validation.len(), rest / 2);
        prop_assert_eq!(split.test.len(), rest - rest / 2);
        prop_assert_eq!(&split, &stratified_split(&labels, sizes.len(), k, seed).unwrap());
    }
}
