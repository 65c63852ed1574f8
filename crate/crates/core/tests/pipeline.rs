use cempca::baselines::{kmeans_pca, reduced_kmeans};
use cempca::cempca::{fit_cempca, CempcaConfig};
use cempca::data::{gen_fcps, load_csv, standardize, write_csv, FcpsShape, LabelColumn};
use cempca::metrics::{ari, nmi};
use cempca::mixture::{cem, em_gmm, kmeans, KmeansOptions, MixtureOptions};
use cempca::Execution;

#[test]
fn generated_data_survives_a_csv_round_trip() {
    let ds = gen_fcps(FcpsShape::Tetra, 120, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tetra.csv");
    write_csv(&ds, &path).unwrap();
    let back = load_csv(&path, Some(&LabelColumn::Name("label".into())), true).unwrap();
    assert_eq!(back.labels, ds.labels);
    assert_eq!(back.x, ds.x);
}

#[test]
fn sequential_and_parallel_fits_agree() {
    let ds = gen_fcps(FcpsShape::Hepta, 140, 3).unwrap();
    let mut seq = CempcaConfig::new(7);
    seq.restarts = 6;
    seq.execution = Execution::Sequential;
    let par = CempcaConfig {
        execution: Execution::Parallel,
        ..seq.clone()
    };
    let a = fit_cempca(&ds.x, &seq, 11).unwrap();
    let b = fit_cempca(&ds.x, &par, 11).unwrap();
    assert!(a.same_outcome(&b));

    let opts = |execution| MixtureOptions {
        restarts: 5,
        seed: 2,
        execution,
        ..MixtureOptions::default()
    };
    let a = em_gmm(&ds.x, 7, &opts(Execution::Sequential)).unwrap();
    let b = em_gmm(&ds.x, 7, &opts(Execution::Parallel)).unwrap();
    assert!(a.same_outcome(&b));
}

#[test]
fn adding_restarts_never_worsens_the_selected_objective() {
    let ds = gen_fcps(FcpsShape::Lsun3d, 200, 5).unwrap();
    let fit = |restarts| {
        let opts = KmeansOptions {
            restarts,
            seed: 8,
            ..KmeansOptions::default()
        };
        kmeans(&ds.x, 4, &opts).unwrap()
    };
    let (few, many) = (fit(3), fit(12));
    assert_eq!(few.restart_seeds[..], many.restart_seeds[..3]);
    assert_eq!(few.restart_objectives[..], many.restart_objectives[..3]);
    assert!(many.objective() <= few.objective());
}

#[test]
fn pca_kmeans_on_all_components_matches_plain_kmeans() {
    let ds = gen_fcps(FcpsShape::Hepta, 212, 1).unwrap();
    let opts = KmeansOptions {
        restarts: 10,
        seed: 3,
        ..KmeansOptions::default()
    };
    let plain = kmeans(&ds.x, 7, &opts).unwrap();
    let rotated = kmeans_pca(&ds.x, 7, 3, &opts, false).unwrap();
    let score = ari(&plain.partition.assignments, &rotated.partition.assignments).unwrap();
    assert!((score - 1.0).abs() < 1e-12, "ARI {score}");
    let truth = ds.labels.as_ref().unwrap();
    assert!(nmi(truth, &rotated.partition.assignments).unwrap() >= 0.95);
}

#[test]
fn every_method_recovers_hepta() {
    let ds = gen_fcps(FcpsShape::Hepta, 212, 2).unwrap();
    let x = standardize(&ds.x).unwrap();
    let truth = ds.labels.as_ref().unwrap();
    let kopts = KmeansOptions {
        seed: 1,
        ..KmeansOptions::default()
    };
    let mopts = MixtureOptions {
        seed: 1,
        ..MixtureOptions::default()
    };
    let mut cfg = CempcaConfig::new(7);
    cfg.p = Some(3);
    let fits = [
        ("kmeans", kmeans(&x, 7, &kopts).unwrap()),
        ("em-gmm", em_gmm(&x, 7, &mopts).unwrap()),
        ("cem", cem(&x, 7, &mopts).unwrap()),
        ("reduced-kmeans", reduced_kmeans(&x, 7, 3, &kopts).unwrap()),
        ("cempca", fit_cempca(&ds.x, &cfg, 1).unwrap()),
    ];
    for (name, fit) in fits {
        let score = nmi(truth, &fit.partition.assignments).unwrap();
        assert!(score >= 0.95, "{name}: NMI {score}");
        assert_eq!(fit.restart_objectives.len(), 20, "{name}");
    }
}

#[test]
fn cempca_embedding_has_orthonormal_columns() {
    let ds = gen_fcps(FcpsShape::Atom, 400, 6).unwrap();
    let mut cfg = CempcaConfig::new(2);
    cfg.p = Some(3);
    cfg.restarts = 4;
    let fit = fit_cempca(&ds.x, &cfg, 5).unwrap();
    let bundle = fit.bundle.as_ref().unwrap();
    let gram = bundle.b.transpose() * &bundle.b;
    let eye = cempca::linalg::Matrix::identity(3, 3);
    assert!((gram - eye).amax() < 1e-8);
    assert_eq!(bundle.m.shape(), (400, 3));
    assert_eq!(bundle.q.shape(), (3, 3));
}
