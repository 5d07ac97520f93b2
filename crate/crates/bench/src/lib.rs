//! Fixtures shared by the benchmarks.

use poleres::excitation::{sinusoid_poles, ExponentialSignal};
use poleres::frf::{project_coefficients, GridSpec, KernelCoefficients, OscillatorParams};
use poleres::LaguerreBasis;

pub const PARAMS: OscillatorParams = OscillatorParams {
    m: 1.0,
    c: 1.0,
    k1: 10.0,
    k2: 20.0,
    k3: 20.0,
};

/// Projected kernel coefficients of orders `1..=order` on a rate-2 basis.
///
/// Order 3 uses a coarse grid so that fixture setup stays short.
pub fn coefficients(order: usize, r: usize) -> Vec<KernelCoefficients> {
    let b = LaguerreBasis::new(2.0, r).expect("valid basis");
    let grids = [
        GridSpec::LOW_ORDER,
        GridSpec::LOW_ORDER,
        GridSpec::new(0.4, 64).expect("valid grid"),
    ];
    (0..order)
        .map(|i| {
            project_coefficients(&PARAMS, grids[i], &vec![b; i + 1])
                .expect("projection")
                .coeffs
        })
        .collect()
}

/// `sin(pi t)` over `horizon`.
pub fn sine(horizon: f64) -> ExponentialSignal {
    sinusoid_poles(1.0, std::f64::consts::PI, horizon).expect("valid sinusoid")
}

/// `n` output times spaced `dt`.
pub fn times(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt).collect()
}
