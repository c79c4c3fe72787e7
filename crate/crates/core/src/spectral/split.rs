use serde::Serialize;

use super::field::FourierField;
use super::operator::DiagonalOperator;
use crate::error::{Error, Result};

/// Slow/fast decomposition of the slow-variable space at Fourier cutoff `k0`.
///
/// Modes `|k| <= k0` are slow; `|k| >= k0 + 1` are fast.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralSplit {
    pub zeta: f64,
    pub omega_a: f64,
    pub k0: usize,
    /// Decay margin of the slow part, `-omega_A/zeta + mu_{k0}`.
    pub n_s: f64,
    /// Decay margin of the fast part, `-omega_A/zeta + mu_{k0+1}`.
    pub n_f: f64,
    /// History-space weight `omega_A/zeta + (N_S + N_F)/2`.
    pub eta: f64,
}

/// Split for `B = Laplacian - 1`.
pub fn split_cutoff(zeta: f64, omega_a: f64) -> Result<SpectralSplit> {
    split_cutoff_for(&DiagonalOperator::laplacian_minus_one(), zeta, omega_a)
}

/// Finds the unique `k0 >= 0` with `mu_{k0+2} < omega_A/zeta <= mu_{k0+1}`.
///
/// For `B = Laplacian - 1` this reads
/// `-4 pi^2 (k0+2)^2 < omega_A/zeta + 1 <= -4 pi^2 (k0+1)^2`.
pub fn split_cutoff_for(op: &DiagonalOperator, zeta: f64, omega_a: f64) -> Result<SpectralSplit> {
    if !(zeta > 0.0) || !(omega_a < 0.0) || !(op.diffusion > 0.0) {
        return Err(Error::Invalid(format!(
            "split needs zeta > 0, omega_A < 0, positive diffusion (got {zeta}, {omega_a}, {})",
            op.diffusion
        )));
    }
    let rate = omega_a / zeta;
    if rate > op.multiplier(1) {
        return Err(Error::ZetaTooLarge { zeta, shifted: rate + op.shift });
    }
    let mut k0 = 0usize;
    while rate <= op.multiplier(k0 as i64 + 2) {
        k0 += 1;
    }
    Ok(build(op, zeta, omega_a, k0))
}

fn build(op: &DiagonalOperator, zeta: f64, omega_a: f64, k0: usize) -> SpectralSplit {
    let rate = omega_a / zeta;
    let n_s = -rate + op.multiplier(k0 as i64);
    let n_f = (-rate + op.multiplier(k0 as i64 + 1)).max(0.0);
    SpectralSplit { zeta, omega_a, k0, n_s, n_f, eta: rate + 0.5 * (n_s + n_f) }
}

impl SpectralSplit {
    /// Largest `zeta` whose bracket selects `k0`, i.e. `omega_A/zeta = mu_{k0+1}`, giving `N_F = 0`.
    pub fn for_cutoff(op: &DiagonalOperator, k0: usize, omega_a: f64) -> Self {
        let edge = op.multiplier(k0 as i64 + 1);
        let mut zeta = omega_a / edge;
        while omega_a / zeta > edge {
            zeta *= 1.0 - f64::EPSILON;
        }
        build(op, zeta, omega_a, k0)
    }

    pub fn gap(&self) -> f64 {
        self.n_s - self.n_f
    }

    pub fn is_slow(&self, k: i64) -> bool {
        k.unsigned_abs() as usize <= self.k0
    }

    pub fn project_slow(&self, field: &FourierField) -> FourierField {
        project_slow(field, self.k0)
    }

    pub fn project_fast(&self, field: &FourierField) -> FourierField {
        project_fast(field, self.k0)
    }

    /// Checks the bracketing, ordering and weight relations for `op`.
    pub fn check_invariants(&self, op: &DiagonalOperator) -> bool {
        let rate = self.omega_a / self.zeta;
        let tol = 1e-9 * rate.abs();
        let bracket = op.multiplier(self.k0 as i64 + 2) < rate
            && rate <= op.multiplier(self.k0 as i64 + 1) + tol;
        let order = 0.0 <= self.n_f && self.n_f < self.n_s && self.n_s < -rate;
        let weight = (self.eta - (rate + 0.5 * (self.n_s + self.n_f))).abs() <= tol;
        bracket && order && weight
    }
}

/// Zeroes every `|k| > k0`.
pub fn project_slow(field: &FourierField, k0: usize) -> FourierField {
    field.filter_modes(|k| k.unsigned_abs() as usize <= k0)
}

/// Zeroes every `|k| <= k0`.
pub fn project_fast(field: &FourierField, k0: usize) -> FourierField {
    field.filter_modes(|k| k.unsigned_abs() as usize > k0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn k0_zero_example() {
        let s = split_cutoff(0.02, -0.9).unwrap();
        assert_eq!(s.k0, 0);
        assert!((s.n_s - 44.0).abs() < 1e-12);
        assert!((s.n_f - (44.0 - 4.0 * PI * PI)).abs() < 1e-12);
        assert!((s.n_f - 4.5216).abs() < 1e-4);
        assert!(s.check_invariants(&DiagonalOperator::laplacian_minus_one()));
    }

    #[test]
    fn k0_one_example() {
        // zeta^-1 omega_A + 1 = -179 and (k0+1)^2 <= 179/(4 pi^2) < (k0+2)^2
        let s = split_cutoff(0.005, -0.9).unwrap();
        assert_eq!(s.k0, 1);
        assert!(s.check_invariants(&DiagonalOperator::laplacian_minus_one()));
    }

    #[test]
    fn zeta_too_large() {
        assert!(matches!(split_cutoff(0.5, -0.9), Err(Error::ZetaTooLarge { .. })));
    }

    #[test]
    fn upper_bracket_equality_selects_k0() {
        let op = DiagonalOperator::laplacian_minus_one();
        for k0 in 0..6 {
            let s = SpectralSplit::for_cutoff(&op, k0, -0.95);
            let again = split_cutoff(s.zeta, s.omega_a).unwrap();
            assert_eq!(again.k0, k0);
            assert!(again.check_invariants(&op));
            assert!(s.n_f.abs() < 1e-9);
        }
    }

    #[test]
    fn projections_on_basis_modes() {
        let e0 = FourierField::mode(0, 2);
        assert_eq!(project_slow(&e0, 0), e0);
        assert!(project_fast(&e0, 0).is_zero());
        assert!(project_slow(&FourierField::mode(2, 3), 1).is_zero());
    }
}
