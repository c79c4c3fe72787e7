use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::field::FourierField;
use crate::error::{Error, Result};

pub const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

/// Smoothness order `s` of the Sobolev space `H^s` on the circle.
///
/// The fast-variable scale is `X_a = H^{2a}` and the slow-variable scale is
/// `Y_a = H^{2 + 2a}`; only `a >= -1` is used, hence `s >= -2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevIndex {
    s: f64,
}

impl SobolevIndex {
    /// Panics if `s < -2`.
    pub fn h(s: f64) -> Self {
        assert!(s >= -2.0, "Sobolev index {s} below -2");
        SobolevIndex { s }
    }

    /// `X_alpha = H^{2 alpha}`.
    pub fn x(alpha: f64) -> Self {
        Self::h(2.0 * alpha)
    }

    /// `Y_alpha = H^{2 + 2 alpha}`.
    pub fn y(alpha: f64) -> Self {
        Self::h(2.0 + 2.0 * alpha)
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    /// Weight `(1 + k^2)^{s/2}` multiplying `|c_k|` inside the l2 sum.
    pub fn weight(&self, k: i64) -> f64 {
        (1.0 + (k * k) as f64).powf(self.s / 2.0)
    }
}

/// `(sum_k (1 + k^2)^s |c_k|^2)^{1/2}`.
pub fn sobolev_norm(field: &FourierField, s: SobolevIndex) -> f64 {
    field
        .iter()
        .map(|(k, c)| (1.0 + (k * k) as f64).powf(s.s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Fourier multiplier `mu_k = -(shift + diffusion * 4 pi^2 k^2)`, i.e. `diffusion * Laplacian - shift`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalOperator {
    pub diffusion: f64,
    pub shift: f64,
}

impl Default for DiagonalOperator {
    fn default() -> Self {
        DiagonalOperator::laplacian_minus_one()
    }
}

impl DiagonalOperator {
    /// `Laplacian - 1`, the operator of the worked reaction-diffusion example.
    pub fn laplacian_minus_one() -> Self {
        DiagonalOperator { diffusion: 1.0, shift: 1.0 }
    }

    pub fn multiplier(&self, k: i64) -> f64 {
        -(self.shift + self.diffusion * FOUR_PI_SQ * (k * k) as f64)
    }

    /// `mu_k c_k` for every mode.
    pub fn apply(&self, field: &FourierField) -> FourierField {
        field.map_modes(|k, c| c * self.multiplier(k))
    }

    /// `c_k / mu_k`. Panics if some multiplier vanishes.
    pub fn apply_inverse(&self, field: &FourierField) -> FourierField {
        field.map_modes(|k, c| {
            let mu = self.multiplier(k);
            assert!(mu != 0.0, "operator not invertible at mode {k}");
            c / mu
        })
    }

    /// `exp(t A / timescale)` for `t >= 0`.
    pub fn semigroup_forward(&self, field: &FourierField, t: f64, timescale: f64) -> FourierField {
        debug_assert!(t >= 0.0);
        field.map_modes(|k, c| c * (self.multiplier(k) * t / timescale).exp())
    }

    /// `exp(t A / timescale)`. Negative times are accepted only for fields supported
    /// on `|k| <= slow_cutoff`, where the semigroup extends to a group.
    pub fn semigroup_apply(
        &self,
        field: &FourierField,
        t: f64,
        timescale: f64,
        slow_cutoff: usize,
    ) -> Result<FourierField> {
        if t < 0.0 {
            if let Some((k, _)) = field
                .iter()
                .find(|(k, c)| k.unsigned_abs() as usize > slow_cutoff && c.norm() > 0.0)
            {
                return Err(Error::NegativeTimeOnFastModes { mode: k });
            }
        }
        Ok(field.map_modes(|k, c| c * (self.multiplier(k) * t / timescale).exp()))
    }

    /// `sup_k (1 + k^2)^{(to - from)/2} / |mu_k|` over `|k| <= k_max`, the norm of
    /// the inverse as a map `H^from -> H^to`.
    pub fn inverse_norm(&self, from: SobolevIndex, to: SobolevIndex, k_max: usize) -> f64 {
        (-(k_max as i64)..=k_max as i64)
            .map(|k| {
                (1.0 + (k * k) as f64).powf((to.order() - from.order()) / 2.0)
                    / self.multiplier(k).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn norm_of_constant_mode_is_one() {
        let f = FourierField::mode(0, 3);
        for s in [-2.0, 0.0, 1.5, 4.0] {
            assert_eq!(sobolev_norm(&f, SobolevIndex::h(s)), 1.0);
        }
    }

    #[test]
    fn norm_of_first_mode_h1() {
        let f = FourierField::mode(1, 2);
        assert!(close(sobolev_norm(&f, SobolevIndex::h(1.0)), 2f64.sqrt(), 1e-15));
    }

    #[test]
    fn scale_indices() {
        assert_eq!(SobolevIndex::x(1.0).order(), 2.0);
        assert_eq!(SobolevIndex::y(1.0).order(), 4.0);
        assert_eq!(SobolevIndex::y(-1.0).order(), 0.0);
    }

    #[test]
    #[should_panic]
    fn index_below_minus_two_rejected() {
        let _ = SobolevIndex::h(-2.5);
    }

    #[test]
    fn semigroup_on_e0() {
        let op = DiagonalOperator::laplacian_minus_one();
        let out = op.semigroup_forward(&FourierField::mode(0, 2), 1.0, 1.0);
        assert!(close(out.get(0).re, (-1.0f64).exp(), 1e-15));
    }

    #[test]
    fn semigroup_on_ek() {
        let op = DiagonalOperator::laplacian_minus_one();
        for k in 1..4i64 {
            let t = 0.01;
            let out = op.semigroup_forward(&FourierField::mode(k, 4), t, 1.0);
            let expected = (-(4.0 * PI * PI * (k * k) as f64 + 1.0) * t).exp();
            assert!(close(out.get(k).re, expected, 1e-14));
        }
    }

    #[test]
    fn semigroup_identity_at_zero() {
        let op = DiagonalOperator::laplacian_minus_one();
        let f = FourierField::from_fn(3, false, |k| Complex64::new(k as f64, 1.0));
        assert_eq!(op.semigroup_apply(&f, 0.0, 0.1, 0).unwrap(), f);
    }

    #[test]
    fn negative_time_on_fast_modes_rejected() {
        let op = DiagonalOperator::laplacian_minus_one();
        let f = FourierField::mode(2, 3);
        assert_eq!(
            op.semigroup_apply(&f, -0.1, 1.0, 1),
            Err(Error::NegativeTimeOnFastModes { mode: 2 })
        );
        let slow = FourierField::mode(1, 3);
        let back = op.semigroup_apply(&slow, -0.1, 1.0, 1).unwrap();
        assert!(back.get(1).re > 1.0);
    }

    #[test]
    fn inverse_norms_of_example_operator() {
        let a = DiagonalOperator::laplacian_minus_one();
        assert!(close(a.inverse_norm(SobolevIndex::x(1.0), SobolevIndex::x(1.0), 10), 1.0, 1e-15));
        assert!(a.inverse_norm(SobolevIndex::x(0.0), SobolevIndex::x(1.0), 10) <= 1.0);
    }
}
