//! `phi_p(z) = sum_j z^j / (j + p)!`, the kernels of exponential integrators and
//! of exponential-kernel product quadrature.

/// Below this `|z|` the truncated Taylor series is used; above it the closed
/// forms lose at most a few bits to cancellation.
const SERIES_RADIUS: f64 = 1.0;
const SERIES_TERMS: usize = 22;

fn series(z: f64, p: usize) -> f64 {
    // 1/(p)! + z/(p+1)! + ...
    let mut fact = 1.0;
    for i in 2..=p {
        fact *= i as f64;
    }
    let mut term = 1.0 / fact;
    let mut sum = term;
    for j in 1..SERIES_TERMS {
        term *= z / (j + p) as f64;
        sum += term;
    }
    sum
}

pub fn phi1(z: f64) -> f64 {
    if z.abs() < SERIES_RADIUS {
        series(z, 1)
    } else {
        z.exp_m1() / z
    }
}

pub fn phi2(z: f64) -> f64 {
    if z.abs() < SERIES_RADIUS {
        series(z, 2)
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

pub fn phi3(z: f64) -> f64 {
    if z.abs() < SERIES_RADIUS {
        series(z, 3)
    } else {
        (z.exp_m1() - z - 0.5 * z * z) / (z * z * z)
    }
}
