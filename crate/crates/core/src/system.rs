//! Problem definition: diagonal operators, polynomial nonlinearities, the
//! timescale `epsilon`, and the assumption constants that gate the
//! Lyapunov-Perron construction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::spectral::{convolve_full, DiagonalOperator, FourierField, SobolevIndex, SpectralSplit};

/// `coeff * u^pu * v^pv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    #[serde(default)]
    pub pu: u32,
    #[serde(default)]
    pub pv: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolynomialNonlinearity {
    #[serde(default)]
    pub monomials: Vec<Monomial>,
}

impl PolynomialNonlinearity {
    pub fn zero() -> Self {
        PolynomialNonlinearity { monomials: Vec::new() }
    }

    /// `f(u, v) = v^2`.
    pub fn v_squared() -> Self {
        PolynomialNonlinearity { monomials: vec![Monomial { coeff: 1.0, pu: 0, pv: 2 }] }
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.iter().all(|m| m.coeff == 0.0)
    }

    pub fn has_constant_term(&self) -> bool {
        self.monomials.iter().any(|m| m.coeff != 0.0 && m.pu == 0 && m.pv == 0)
    }

    pub fn depends_on_u(&self) -> bool {
        self.monomials.iter().any(|m| m.coeff != 0.0 && m.pu > 0)
    }

    /// Largest total degree among nonzero monomials.
    pub fn degree(&self) -> u32 {
        self.monomials
            .iter()
            .filter(|m| m.coeff != 0.0)
            .map(|m| m.pu + m.pv)
            .max()
            .unwrap_or(0)
    }

    /// Sum of monomials with exact convolution powers, truncated to `target`.
    pub fn evaluate(&self, u: &FourierField, v: &FourierField, target: usize) -> FourierField {
        let real = u.is_real() && v.is_real();
        let mut out = FourierField::zeros(target, real);
        if self.is_zero() {
            return out;
        }
        let max_pu = self.monomials.iter().map(|m| m.pu).max().unwrap_or(0);
        let max_pv = self.monomials.iter().map(|m| m.pv).max().unwrap_or(0);
        let u_pows = powers(u, max_pu);
        let v_pows = powers(v, max_pv);
        for m in self.monomials.iter().filter(|m| m.coeff != 0.0) {
            let term = convolve_full(&u_pows[m.pu as usize], &v_pows[m.pv as usize]);
            out = out.axpy(m.coeff, &term.resized(target));
        }
        if real {
            out.symmetrize();
        }
        out
    }
}

fn powers(a: &FourierField, max: u32) -> Vec<FourierField> {
    let mut one = FourierField::zeros(0, a.is_real());
    one.set(0, Complex64::new(1.0, 0.0));
    let mut out = vec![one];
    for p in 1..=max as usize {
        let next = convolve_full(&out[p - 1], a);
        out.push(next);
    }
    out
}

/// `nl(u, v)` at the larger of the two input resolutions.
pub fn evaluate_nonlinearity(nl: &PolynomialNonlinearity, u: &FourierField, v: &FourierField) -> FourierField {
    nl.evaluate(u, v, u.resolution().max(v.resolution()))
}

/// Which ratio of decay rates enters the `epsilon`-`zeta` gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateForm {
    /// `epsilon < c (omega_f / omega_A) zeta`.
    #[default]
    OmegaFOverOmegaA,
    /// `epsilon < c (omega_A / omega_f) zeta`.
    OmegaAOverOmegaF,
}

/// User-declared constants of the semigroup and derivative bounds, valid on a
/// ball of radius `working_ball_radius` around the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssumptionConstants {
    pub l_f: f64,
    pub l_g: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub m_a: f64,
    pub m_b: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_f: f64,
    pub gamma_x: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    pub working_ball_radius: f64,
    pub gate_form: GateForm,
}

impl Default for AssumptionConstants {
    /// Constants for `f = v^2`, `g = 0`, `A = B = Laplacian - 1` on a ball of radius 0.02,
    /// where `|Df| <= 2 * 0.02`.
    fn default() -> Self {
        AssumptionConstants {
            l_f: 0.04,
            l_g: 0.0,
            c_a: 1.0,
            c_b: 1.0,
            m_a: 1.0,
            m_b: 1.0,
            omega_a: -0.95,
            omega_b: -1.0,
            omega_f: -0.9,
            gamma_x: 1.0,
            delta_x: 1.0,
            delta_y: 1.0,
            working_ball_radius: 0.02,
            gate_form: GateForm::OmegaFOverOmegaA,
        }
    }
}

impl AssumptionConstants {
    /// `omega_f` prescribed for `gamma_X < 1`.
    pub fn omega_f_holomorphic(&self) -> f64 {
        let g = self.gamma_x;
        self.omega_a + (2.0 * self.c_a * self.l_f).powf(1.0 / g) * (1.0 / g).powf((1.0 - g) / g)
    }

    pub fn gate_ratio(&self) -> f64 {
        match self.gate_form {
            GateForm::OmegaFOverOmegaA => self.omega_f / self.omega_a,
            GateForm::OmegaAOverOmegaF => self.omega_a / self.omega_f,
        }
    }

    /// Mutual consistency of the declared constants. The resolvent norms of `A`
    /// are evaluated over `|k| <= k_max`.
    pub fn validate(&self, op_a: &DiagonalOperator, k_max: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InconsistentConstants(m));
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !(unit(self.gamma_x) && unit(self.delta_y)) {
            return bad(format!("gamma_X = {}, delta_Y = {} must lie in (0, 1]", self.gamma_x, self.delta_y));
        }
        if !(self.delta_x >= 1.0 - self.gamma_x && self.delta_x <= 1.0) {
            return bad(format!("delta_X = {} must lie in [1 - gamma_X, 1]", self.delta_x));
        }
        if !(self.l_f > 0.0 && self.l_g >= 0.0) {
            return bad(format!("L_f = {} must be positive and L_g = {} nonnegative", self.l_f, self.l_g));
        }
        if !(self.c_a > 0.0 && self.c_b > 0.0 && self.m_a > 0.0 && self.m_b > 0.0) {
            return bad("semigroup constants must be positive".into());
        }
        if !(self.omega_a < 0.0) {
            return bad(format!("omega_A = {} must be negative", self.omega_a));
        }
        if self.gamma_x < 1.0 {
            let expected = self.omega_f_holomorphic();
            if (self.omega_f - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                return bad(format!("omega_f = {} but gamma_X < 1 prescribes {expected}", self.omega_f));
            }
        } else if !(self.omega_f > self.omega_a + self.c_a * self.l_f) {
            return bad(format!(
                "omega_f = {} must exceed omega_A + C_A L_f = {}",
                self.omega_f,
                self.omega_a + self.c_a * self.l_f
            ));
        }
        if !(self.omega_f < 0.0) {
            return bad(format!("omega_f = {} must be negative", self.omega_f));
        }
        let inv = op_a
            .inverse_norm(SobolevIndex::x(self.gamma_x), SobolevIndex::x(1.0), k_max)
            .max(op_a.inverse_norm(SobolevIndex::x(self.delta_x - 1.0), SobolevIndex::x(self.delta_x), k_max));
        if !(self.l_f * inv < 1.0) {
            return bad(format!("L_f * |A^-1| = {} is not below 1", self.l_f * inv));
        }
        if !(self.working_ball_radius > 0.0) {
            return bad("working ball radius must be positive".into());
        }
        Ok(())
    }
}

/// `epsilon < c * ratio * zeta`, the ratio chosen by `constants.gate_form`.
pub fn timescale_gate(epsilon: f64, zeta: f64, c: f64, constants: &AssumptionConstants) -> bool {
    epsilon < gate_threshold(zeta, c, constants)
}

pub fn gate_threshold(zeta: f64, c: f64, constants: &AssumptionConstants) -> f64 {
    c * constants.gate_ratio() * zeta
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastSlowSystem {
    pub op_a: DiagonalOperator,
    pub op_b: DiagonalOperator,
    pub f: PolynomialNonlinearity,
    pub g: PolynomialNonlinearity,
    pub epsilon: f64,
    pub resolution: usize,
    pub constants: AssumptionConstants,
    /// The `c in (0, 1)` of the timescale gate.
    pub gate_c: f64,
}

impl FastSlowSystem {
    /// `eps u_t = (Laplacian - 1) u + v^2`, `v_t = (Laplacian - 1) v`.
    pub fn quadratic_example(epsilon: f64, resolution: usize) -> Self {
        FastSlowSystem {
            op_a: DiagonalOperator::laplacian_minus_one(),
            op_b: DiagonalOperator::laplacian_minus_one(),
            f: PolynomialNonlinearity::v_squared(),
            g: PolynomialNonlinearity::zero(),
            epsilon,
            resolution,
            constants: AssumptionConstants::default(),
            gate_c: 0.95,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        FastSlowSystem { epsilon, ..self.clone() }
    }

    /// True for the closed-form example (`f = v^2`, `g = 0`, `A = B = Laplacian - 1`).
    pub fn is_quadratic_example(&self) -> bool {
        let lap = DiagonalOperator::laplacian_minus_one();
        let f_ok = {
            let nz: Vec<_> = self.f.monomials.iter().filter(|m| m.coeff != 0.0).collect();
            nz.len() == 1 && nz[0].coeff == 1.0 && nz[0].pu == 0 && nz[0].pv == 2
        };
        self.op_a == lap && self.op_b == lap && f_ok && self.g.is_zero()
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 1 {
            return Err(Error::Invalid("resolution must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Invalid(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if !(self.gate_c > 0.0 && self.gate_c < 1.0) {
            return Err(Error::Invalid(format!("gate c = {} must lie in (0, 1)", self.gate_c)));
        }
        if self.f.has_constant_term() || self.g.has_constant_term() {
            return Err(Error::Invalid("nonlinearities must vanish at the origin".into()));
        }
        self.constants.validate(&self.op_a, self.resolution)
    }

    pub fn timescale_gate(&self, zeta: f64) -> bool {
        timescale_gate(self.epsilon, zeta, self.gate_c, &self.constants)
    }
}

/// The three summands of the contraction estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContractionTerms {
    pub fast: f64,
    pub slow_gamma: f64,
    pub slow_lipschitz: f64,
}

impl ContractionTerms {
    pub fn total(&self) -> f64 {
        self.fast + self.slow_gamma + self.slow_lipschitz
    }
}

pub fn contraction_terms(sys: &FastSlowSystem, split: &SpectralSplit) -> Result<ContractionTerms> {
    let k = &sys.constants;
    let eps = sys.epsilon;
    let threshold = gate_threshold(split.zeta, sys.gate_c, k);
    if !(eps < threshold) {
        return Err(Error::TimescaleOrderViolated { epsilon: eps, threshold });
    }
    let gap = split.gap();
    if !(gap > 0.0) {
        return Err(Error::NonpositiveGap { gap });
    }
    let denom = 2.0 * (eps / split.zeta - 1.0) * k.omega_a + eps * (split.n_s + split.n_f);
    if !(denom > 0.0) {
        return Err(Error::TimescaleOrderViolated { epsilon: eps, threshold });
    }
    let fast = 2f64.powf(k.gamma_x) * k.l_f * k.c_a * gamma(k.gamma_x) / denom.powf(k.gamma_x);
    let slow_gamma = 2f64.powf(k.delta_y) * k.l_g * k.c_b * gamma(k.delta_y) / gap.powf(k.delta_y);
    let slow_lipschitz = 2.0 * split.zeta.powf(k.delta_y - 1.0) * k.l_g * k.m_b / gap;
    Ok(ContractionTerms { fast, slow_gamma, slow_lipschitz })
}

/// Left side of the contraction estimate; the Lyapunov-Perron solve requires it below one.
pub fn contraction_constant(sys: &FastSlowSystem, split: &SpectralSplit) -> Result<f64> {
    contraction_terms(sys, split).map(|t| t.total())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_squared_on_e1() {
        let f = PolynomialNonlinearity::v_squared();
        let u = FourierField::zeros(2, true);
        let out = f.evaluate(&u, &FourierField::mode(1, 2), 2);
        assert_eq!(out, FourierField::mode(2, 2).resized(2));
        let mut expected = FourierField::zeros(2, false);
        expected.set(2, Complex64::new(1.0, 0.0));
        assert_eq!(out.coeffs(), expected.coeffs());
    }

    #[test]
    fn zero_nonlinearity() {
        let g = PolynomialNonlinearity::zero();
        let v = FourierField::from_fn(2, true, |k| Complex64::new(1.0 + k as f64, 0.0));
        assert!(evaluate_nonlinearity(&g, &v, &v).is_zero());
    }

    #[test]
    fn v_squared_on_constant() {
        let a = 0.3;
        let v = FourierField::mode(0, 2).scale(a);
        let out = evaluate_nonlinearity(&PolynomialNonlinearity::v_squared(), &FourierField::zeros(2, true), &v);
        assert!((out.get(0).re - a * a).abs() < 1e-16);
        assert_eq!(out.support_max(), Some(0));
    }

    #[test]
    fn mixed_monomials() {
        // 2 u v - 0.5 u^2 on constants
        let f = PolynomialNonlinearity {
            monomials: vec![Monomial { coeff: 2.0, pu: 1, pv: 1 }, Monomial { coeff: -0.5, pu: 2, pv: 0 }],
        };
        let u = FourierField::mode(0, 1).scale(3.0);
        let v = FourierField::mode(0, 1).scale(5.0);
        assert!((f.evaluate(&u, &v, 1).get(0).re - (30.0 - 4.5)).abs() < 1e-13);
        assert!(f.depends_on_u());
        assert_eq!(f.degree(), 2);
    }

    #[test]
    fn default_constants_are_consistent() {
        let sys = FastSlowSystem::quadratic_example(1e-3, 8);
        sys.validate().unwrap();
        assert!(sys.is_quadratic_example());
    }

    #[test]
    fn inconsistent_omega_f_rejected() {
        let mut k = AssumptionConstants::default();
        k.omega_f = k.omega_a + 0.5 * k.c_a * k.l_f;
        assert!(k.validate(&DiagonalOperator::laplacian_minus_one(), 4).is_err());
        let mut k = AssumptionConstants { gamma_x: 0.5, delta_x: 0.5, ..Default::default() };
        assert!(k.validate(&DiagonalOperator::laplacian_minus_one(), 4).is_err());
        k.omega_f = k.omega_f_holomorphic();
        k.validate(&DiagonalOperator::laplacian_minus_one(), 4).unwrap();
    }

    #[test]
    fn gate_threshold_arithmetic() {
        let mut k = AssumptionConstants { omega_f: -0.5, omega_a: -1.0, ..Default::default() };
        let thr = gate_threshold(0.02, 0.5, &k);
        assert!((thr - 0.005).abs() < 1e-15);
        assert!(timescale_gate(0.0049, 0.02, 0.5, &k));
        assert!(!timescale_gate(thr, 0.02, 0.5, &k));
        assert!(timescale_gate(0.0, 0.02, 0.5, &k));
        k.gate_form = GateForm::OmegaAOverOmegaF;
        assert!((gate_threshold(0.02, 0.5, &k) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn contraction_with_zero_lg_has_only_fast_term() {
        let op = DiagonalOperator::laplacian_minus_one();
        let split = SpectralSplit::for_cutoff(&op, 1, -0.95);
        let sys = FastSlowSystem::quadratic_example(1e-3, 8);
        let t = contraction_terms(&sys, &split).unwrap();
        assert_eq!(t.slow_gamma, 0.0);
        assert_eq!(t.slow_lipschitz, 0.0);
        let k = &sys.constants;
        let denom = 2.0 * (sys.epsilon / split.zeta - 1.0) * k.omega_a + sys.epsilon * (split.n_s + split.n_f);
        assert!((t.fast - 2.0 * k.l_f * k.c_a / denom).abs() < 1e-15);
        assert!(t.total() < 1.0);
        // the denominator equals 2 (eps eta - omega_A) for the external-mode split
        assert!((denom - 2.0 * (sys.epsilon * split.eta - k.omega_a)).abs() < 1e-9);
    }

    #[test]
    fn contraction_refuses_outside_gate() {
        let op = DiagonalOperator::laplacian_minus_one();
        let split = SpectralSplit::for_cutoff(&op, 1, -0.95);
        let sys = FastSlowSystem::quadratic_example(1e-2, 8);
        assert!(matches!(contraction_constant(&sys, &split), Err(Error::TimescaleOrderViolated { .. })));
    }

    #[test]
    fn contraction_decreases_with_gap() {
        let op = DiagonalOperator::laplacian_minus_one();
        let mut sys = FastSlowSystem::quadratic_example(1e-4, 8);
        sys.constants.l_g = 0.1;
        let base = SpectralSplit::for_cutoff(&op, 1, -0.95);
        let mut prev = f64::INFINITY;
        for widen in [0.0, 5.0, 20.0, 80.0] {
            let s = SpectralSplit { n_s: base.n_s + widen, ..base };
            let c = contraction_constant(&sys, &s).unwrap();
            assert!(c < prev);
            prev = c;
        }
    }
}
