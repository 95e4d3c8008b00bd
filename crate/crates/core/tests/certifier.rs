mod common;

use common::{catalog, piecewise_quarter_fifth, v, K_GRID};
use enriched_fixpoint::certify::{
    check_enriched_bianchini, check_enriched_kannan, check_monotone, estimate_bianchini_constants,
    estimate_kannan_constants, ContractionClass, SampleSet,
};
use enriched_fixpoint::{Error, MappingSpec, Matrix, Vector};
use proptest::prelude::*;

fn grid() -> SampleSet {
    SampleSet::grid_1d(0.0, 1.0, 101).unwrap()
}

fn reflection_witness() -> SampleSet {
    SampleSet::grid_plus_random(&[0.0], &[1.0], 101, 100, 0).unwrap()
}

#[test]
fn estimates_are_consistent_with_checks() {
    for case in catalog() {
        let s = case.witness(1);
        let est = estimate_kannan_constants(&case.map, &s, &K_GRID).unwrap();
        for row in &est.per_k {
            let Some(a) = row.rate else { continue };
            if a + 1e-12 >= 0.5 {
                continue;
            }
            let cert = check_enriched_kannan(&case.map, row.k, a + 1e-12, &s).unwrap();
            assert!(
                cert.holds(),
                "{} k={} a={a}: {}",
                case.name,
                row.k,
                cert.max_violation
            );
        }
        let est = estimate_bianchini_constants(&case.map, &s, &K_GRID).unwrap();
        for row in &est.per_k {
            let Some(h) = row.rate else { continue };
            if h + 1e-12 >= 1.0 {
                continue;
            }
            let cert = check_enriched_bianchini(&case.map, row.k, h + 1e-12, &s).unwrap();
            assert!(
                cert.holds(),
                "{} k={} h={h}: {}",
                case.name,
                row.k,
                cert.max_violation
            );
        }
    }
}

#[test]
fn kannan_implies_bianchini_with_twice_the_constant() {
    for case in catalog() {
        let s = case.witness(2);
        let est = estimate_kannan_constants(&case.map, &s, &K_GRID).unwrap();
        for row in &est.per_k {
            let Some(a) = row.rate else { continue };
            let a = a + 1e-12;
            if a >= 0.5 {
                continue;
            }
            assert!(check_enriched_kannan(&case.map, row.k, a, &s)
                .unwrap()
                .holds());
            let b = check_enriched_bianchini(&case.map, row.k, 2.0 * a, &s).unwrap();
            assert!(
                b.holds(),
                "{} k={} 2a={}: {}",
                case.name,
                row.k,
                2.0 * a,
                b.max_violation
            );
        }
    }
}

#[test]
fn enlarging_the_sample_never_lowers_the_violation() {
    for case in catalog() {
        let small = case.witness(3);
        let big = small
            .extended(case.witness(4).points().to_vec(), "more")
            .unwrap();
        for k in [0.0, 0.5, 2.0] {
            let a = check_enriched_kannan(&case.map, k, 0.3, &small)
                .unwrap()
                .max_violation;
            let b = check_enriched_kannan(&case.map, k, 0.3, &big)
                .unwrap()
                .max_violation;
            assert!(b >= a, "{} k={k}", case.name);
            let a = check_enriched_bianchini(&case.map, k, 0.6, &small)
                .unwrap()
                .max_violation;
            let b = check_enriched_bianchini(&case.map, k, 0.6, &big)
                .unwrap()
                .max_violation;
            assert!(b >= a, "{} k={k}", case.name);
        }
    }
}

#[test]
fn reflection_estimates_follow_the_closed_form() {
    // a_min(k) = |k - 1| / 2 for Tx = 1 - x
    let est =
        estimate_kannan_constants(&MappingSpec::Reflection1D, &grid(), &[0.0, 0.25, 0.5, 0.75])
            .unwrap();
    for row in &est.per_k {
        assert!(
            (row.rate.unwrap() - (row.k - 1.0).abs() / 2.0).abs() < 1e-12,
            "{row:?}"
        );
    }
    assert_eq!(est.best.k, 0.75);
    assert!((est.rate_at(0.5).unwrap() - 0.25).abs() < 1e-12);
    assert!(est.best.holds());
}

#[test]
fn smallest_k_wins_ties() {
    // every k >= 0 gives a_min = 0 for a constant map
    let t = MappingSpec::constant(0.3).unwrap();
    let est = estimate_kannan_constants(&t, &grid(), &[2.0, 0.0, 1.0]).unwrap();
    assert_eq!(est.best.k, 0.0);
    assert_eq!(est.best.rate, 0.0);
    assert_eq!(est.best.class_tag, ContractionClass::Kannan);
}

#[test]
fn equal_points_never_witness() {
    let s = SampleSet::new(vec![v(&[0.3]), v(&[0.7])], "two", 0).unwrap();
    let cert = check_enriched_kannan(&MappingSpec::Reflection1D, 0.0, 0.0, &s).unwrap();
    let (x, y) = cert.witness_pair.unwrap();
    assert_ne!(x, y);
}

#[test]
fn scale_third_separates_the_classes() {
    let t = MappingSpec::scale(1.0 / 3.0).unwrap();
    let k = estimate_kannan_constants(&t, &grid(), &[0.0]).unwrap();
    assert!(k.best.rate >= 0.5);
    assert!(!k.best.holds());
    let b = estimate_bianchini_constants(&t, &grid(), &[0.0]).unwrap();
    assert!((b.best.rate - 0.5).abs() < 1e-12);
    assert!(check_enriched_bianchini(&t, 0.0, 0.5, &grid())
        .unwrap()
        .holds());
}

#[test]
fn both_bianchini_constant_claims_for_the_reflection() {
    let s = reflection_witness();
    let t = MappingSpec::Reflection1D;
    // a = 1/4: (1 - 2a, 2a) = (0.5, 0.5) and (2(1 - a), 2a) = (1.5, 0.5) both hold
    assert!(check_enriched_bianchini(&t, 0.5, 0.5, &s).unwrap().holds());
    assert!(check_enriched_bianchini(&t, 1.5, 0.5, &s).unwrap().holds());
    // a = 0.1: only (1 - 2a, 2a) holds, since |k - 1| <= h is needed
    assert!(check_enriched_bianchini(&t, 0.8, 0.2, &s).unwrap().holds());
    let claim = check_enriched_bianchini(&t, 1.8, 0.2, &s).unwrap();
    assert!(!claim.holds());
    assert!(
        (claim.max_violation - 0.6).abs() < 1e-9,
        "{}",
        claim.max_violation
    );
}

#[test]
fn discontinuous_piecewise_map_is_kannan_not_banach() {
    let t = piecewise_quarter_fifth();
    let s = grid();
    let est = estimate_kannan_constants(&t, &s, &[0.0]).unwrap();
    assert!(est.best.holds());
    assert!(
        (est.best.rate - 1.0 / 3.0).abs() < 1e-3,
        "{}",
        est.best.rate
    );
    let banach = enriched_fixpoint::certify::estimate_banach_constant(&t, &s).unwrap();
    assert!(!banach.holds());
}

#[test]
fn monotone_examples() {
    let s = SampleSet::grid_plus_random(&[-1.0, -1.0], &[1.0, 1.0], 11, 50, 0).unwrap();
    let id = MappingSpec::affine(Matrix::identity(2), Vector::zeros(2)).unwrap();
    assert!(check_monotone(&id, &s).unwrap().holds());
    let neg = MappingSpec::affine(Matrix::identity(2).scaled(-1.0), Vector::zeros(2)).unwrap();
    assert!(!check_monotone(&neg, &s).unwrap().holds());
    let rot = MappingSpec::affine(
        Matrix::from_rows(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap(),
        Vector::zeros(2),
    )
    .unwrap();
    let c = check_monotone(&rot, &s).unwrap();
    assert!(c.holds());
    assert!(c.max_violation.abs() < 1e-12);
}

#[test]
fn estimates_are_deterministic() {
    let case = &catalog()[7];
    let s = case.witness(9);
    let a = estimate_kannan_constants(&case.map, &s, &K_GRID).unwrap();
    let b = estimate_kannan_constants(&case.map, &s, &K_GRID).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn invalid_constants_are_rejected() {
    let s = grid();
    let t = MappingSpec::Reflection1D;
    assert!(check_enriched_kannan(&t, -0.1, 0.2, &s).is_err());
    assert!(check_enriched_kannan(&t, 0.5, 0.5, &s).is_err());
    assert!(check_enriched_bianchini(&t, 0.5, 1.0, &s).is_err());
    assert!(estimate_kannan_constants(&t, &s, &[]).is_err());
    let outside = SampleSet::new(vec![v(&[0.5]), v(&[2.0])], "outside", 0).unwrap();
    assert!(check_enriched_kannan(&t, 0.5, 0.25, &outside).is_err());
    let fixed = SampleSet::new(vec![v(&[0.0]), v(&[1.0])], "fixed", 0).unwrap();
    let id = MappingSpec::scale(1.0).unwrap();
    assert!(matches!(
        estimate_kannan_constants(&id, &fixed, &[0.0]),
        Err(Error::DegenerateSample)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn passing_verdicts_survive_larger_constants(a in 0.25..0.5f64) {
        let cert = check_enriched_kannan(&MappingSpec::Reflection1D, 0.5, a, &grid()).unwrap();
        prop_assert!(cert.holds());
    }

    #[test]
    fn larger_constants_keep_a_certificate(case_ix in 0usize..12, bump in 0.0..1.0f64) {
        let case = &catalog()[case_ix];
        let s = case.witness(5);
        let est = estimate_kannan_constants(&case.map, &s, &K_GRID).unwrap();
        if est.best.holds() {
            let a = est.best.rate + 1e-12;
            let a2 = a + bump * (0.5 - a) * 0.999;
            prop_assert!(check_enriched_kannan(&case.map, est.best.k, a2, &s).unwrap().holds());
        }
    }

    #[test]
    fn violation_grows_with_the_sample(pts in prop::collection::btree_set(0u32..=1000, 3..30)) {
        let all: Vec<Vector> = pts.iter().map(|&i| v(&[i as f64 / 1000.0])).collect();
        let half = all.len() / 2 + 1;
        let small = SampleSet::new(all[..half].to_vec(), "subset", 0).unwrap();
        let big = SampleSet::new(all, "superset", 0).unwrap();
        for k in [0.0, 0.3, 1.0] {
            let a = check_enriched_kannan(&MappingSpec::Reflection1D, k, 0.2, &small).unwrap().max_violation;
            let b = check_enriched_kannan(&MappingSpec::Reflection1D, k, 0.2, &big).unwrap().max_violation;
            prop_assert!(b >= a);
        }
    }
}
