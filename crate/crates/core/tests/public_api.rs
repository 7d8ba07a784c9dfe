//! End-to-end use of the re-exported API.

use ftpath::lattice::covariance;
use ftpath::pairing::pair;
use ftpath::{
    Boundary, Complex64, CouplingSchedule, CovarianceKernel, MeasureConfig, PotentialModel,
    TimeGrid,
};

#[test]
fn unit_mixed_grid_gives_min_kernel() {
    let grid = TimeGrid::unit(6, Boundary::Mixed { v_t: 0.0 }).unwrap();
    let k = covariance(&grid);
    let m = CovarianceKernel::min_kernel(6);
    assert_eq!(k.matrix(), m.matrix());
}

#[test]
fn zero_potential_pairing_is_normalized() {
    let cfg = MeasureConfig::new(3, 1.0, 3.0, 4.5)
        .with_seed(5)
        .with_samples(20_000);
    let r = pair(
        &cfg,
        &CovarianceKernel::min_kernel(3),
        &CouplingSchedule::Exponential { eps: 0.0 },
        &PotentialModel::Zero,
    )
    .unwrap();
    assert!(r.estimate.agrees_with(Complex64::new(1.0, 0.0), 3.0, 0.0));
}

#[test]
fn pairing_is_seed_deterministic() {
    let cfg = MeasureConfig::new(4, 1.0, 3.0, 4.5)
        .with_seed(9)
        .with_samples(4_000);
    let pot = PotentialModel::Cosine {
        amplitude: 0.5,
        frequency: 1.0,
    };
    let run = || {
        pair(
            &cfg,
            &CovarianceKernel::min_kernel(4),
            &CouplingSchedule::Exponential { eps: 0.1 },
            &pot,
        )
        .unwrap()
        .estimate
        .mean
    };
    assert_eq!(run(), run());
}
