//! End-to-end runs of the identity suite on the closed-form targets, plus
//! the negative controls: a corrupted score must make every check fail.

use std::sync::Arc;

use rwmlab::identity::{
    DEFAULT_THRESHOLD_SIGMAS,
    check_density_bounds, check_ibp, check_lipschitz_score, check_score_covariance,
    check_subgaussian, corrupt_score, override_lipschitz, run_battery, Coordinate,
    CoordinateProduct,
};
use rwmlab::rng::RngStream;
use rwmlab::targets::{logistic_product, make_gaussian, make_logistic_1d, Target};
use rwmlab::SpdMatrix;

const N: usize = 200_000;

fn gaussian_2d() -> Arc<dyn Target> {
    Arc::new(
        make_gaussian(
            vec![0.3, -0.7],
            SpdMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap(),
        )
        .unwrap(),
    )
}

#[test]
fn battery_passes_on_gaussian_and_logistic() {
    for target in [gaussian_2d(), Arc::new(make_logistic_1d()) as Arc<dyn Target>] {
        let reports = run_battery(target.as_ref(), N, DEFAULT_THRESHOLD_SIGMAS, 9001, 0).unwrap();
        for rep in &reports {
            assert!(
                rep.pass,
                "{} failed: estimate {:?}, se {:?}",
                rep.identity_name, rep.estimate, rep.standard_error
            );
        }
    }
}

#[test]
fn battery_passes_on_logistic_product() {
    let target = logistic_product(2).unwrap();
    let reports = run_battery(&target, N, DEFAULT_THRESHOLD_SIGMAS, 9007, 0).unwrap();
    for rep in &reports {
        assert!(rep.pass, "{} failed", rep.identity_name);
    }
}

#[test]
fn ibp_cross_moments_on_logistic_product() {
    // f = x0 x1 exercised against the product of logistics
    let target = logistic_product(2).unwrap();
    let mut rng = RngStream::new(9011, 0);
    let rep = check_ibp(&target, &CoordinateProduct(0, 1), N, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn corrupted_score_fails_ibp() {
    let target = corrupt_score(gaussian_2d(), 1.1);
    let mut rng = RngStream::new(9013, 0);
    let rep = check_ibp(&target, &Coordinate(0), N, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
    assert!(!rep.pass, "corrupted target slipped through ibp: {rep:?}");
}

#[test]
fn corrupted_score_fails_score_covariance() {
    let target = corrupt_score(gaussian_2d(), 1.1);
    let mut rng = RngStream::new(9017, 0);
    let rep = check_score_covariance(&target, N, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
    assert!(!rep.pass, "corrupted target slipped through covariance: {rep:?}");
}

#[test]
fn corrupted_score_fails_subgaussian() {
    // the standard normal attains the bound with equality, so any inflation
    // of the score pushes the MGF above it
    let target = corrupt_score(Arc::new(rwmlab::targets::standard_normal_target(1)), 1.1);
    let mut rng = RngStream::new(9019, 0);
    let rep = check_subgaussian(&target, &[vec![1.0]], N, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
    assert!(!rep.pass, "corrupted target slipped through subgaussian: {rep:?}");
}

#[test]
fn corrupted_score_fails_density_bounds() {
    let target = corrupt_score(Arc::new(rwmlab::targets::standard_normal_target(1)), 1.1);
    let mut rng = RngStream::new(9023, 0);
    let grid = vec![vec![0.0], vec![0.5], vec![-1.0], vec![2.0]];
    let rep = check_density_bounds(&target, &grid, 10_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
    assert!(!rep.pass, "corrupted target slipped through density bounds: {rep:?}");
}

#[test]
fn corrupted_score_fails_lipschitz() {
    let target = corrupt_score(gaussian_2d(), 1.1);
    let mut rng = RngStream::new(9029, 0);
    let rep = check_lipschitz_score(&target, 10_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
    assert!(!rep.pass, "corrupted target slipped through lipschitz: {rep:?}");
}

#[test]
fn understated_constant_fails_lipschitz() {
    let target = override_lipschitz(Arc::new(make_logistic_1d()), 0.25);
    let mut rng = RngStream::new(9031, 0);
    let rep = check_lipschitz_score(&target, 10_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
    assert!(!rep.pass);
}

#[test]
fn battery_is_deterministic_given_seed() {
    let target = make_logistic_1d();
    let a = run_battery(&target, 50_000, DEFAULT_THRESHOLD_SIGMAS, 9037, 0).unwrap();
    let b = run_battery(&target, 50_000, DEFAULT_THRESHOLD_SIGMAS, 9037, 0).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}
