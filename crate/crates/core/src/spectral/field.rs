use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

/// Truncated Fourier series on the circle in the basis `e_k(x) = exp(2 pi i k x)`.
///
/// Both halves of the spectrum are stored even when `real` is set; in that case
/// `c_{-k} = conj(c_k)` is restored after every operation.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField {
    k_max: usize,
    coeffs: Vec<Complex64>,
    real: bool,
}

impl FourierField {
    pub fn zeros(k_max: usize, real: bool) -> Self {
        FourierField {
            k_max,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * k_max + 1],
            real,
        }
    }

    /// Single basis mode `e_k`. Only `e_0` is flagged real.
    pub fn mode(k: i64, k_max: usize) -> Self {
        let mut f = FourierField::zeros(k_max, k == 0);
        f.set(k, Complex64::new(1.0, 0.0));
        f
    }

    /// Real field with `c_k = c_{-k} = 1`, i.e. `2 cos(2 pi k x)` (or `1` for `k = 0`).
    pub fn real_mode(k: i64, k_max: usize) -> Self {
        let mut f = FourierField::zeros(k_max, true);
        f.set(k, Complex64::new(1.0, 0.0));
        f
    }

    /// Builds a field from `k -> c_k` for `k` in `-k_max..=k_max`.
    pub fn from_fn(k_max: usize, real: bool, mut coeff: impl FnMut(i64) -> Complex64) -> Self {
        let mut f = FourierField::zeros(k_max, false);
        for k in -(k_max as i64)..=(k_max as i64) {
            let i = f.index(k).unwrap();
            f.coeffs[i] = coeff(k);
        }
        f.real = real;
        f.symmetrize();
        f
    }

    /// Coefficients ordered `k = -k_max, ..., k_max`.
    pub fn from_coeffs(coeffs: Vec<Complex64>, real: bool) -> Self {
        assert!(coeffs.len() % 2 == 1, "coefficient vector must have odd length");
        let k_max = coeffs.len() / 2;
        let mut f = FourierField { k_max, coeffs, real };
        f.symmetrize();
        f
    }

    pub fn resolution(&self) -> usize {
        self.k_max
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn index(&self, k: i64) -> Option<usize> {
        if k.unsigned_abs() as usize > self.k_max {
            None
        } else {
            Some((k + self.k_max as i64) as usize)
        }
    }

    /// Coefficient `c_k`; zero outside the stored range.
    pub fn get(&self, k: i64) -> Complex64 {
        self.index(k).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Sets `c_k`. For real fields the partner `c_{-k}` is set to the conjugate.
    ///
    /// Panics if `|k|` exceeds the resolution.
    pub fn set(&mut self, k: i64, c: Complex64) {
        let i = self.index(k).expect("mode outside resolution");
        self.coeffs[i] = c;
        if self.real {
            let j = self.index(-k).unwrap();
            if k == 0 {
                self.coeffs[i] = Complex64::new(c.re, 0.0);
            } else {
                self.coeffs[j] = c.conj();
            }
        }
    }

    /// Iterates `(k, c_k)` in ascending `k`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let k_max = self.k_max as i64;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (i as i64 - k_max, *c))
    }

    /// Re-imposes `c_{-k} = conj(c_k)` by averaging; no-op for complex fields.
    pub fn symmetrize(&mut self) {
        if !self.real {
            return;
        }
        let k_max = self.k_max as i64;
        for k in 0..=k_max {
            let ip = (k + k_max) as usize;
            let im = (k_max - k) as usize;
            let avg = (self.coeffs[ip] + self.coeffs[im].conj()) * 0.5;
            self.coeffs[ip] = avg;
            self.coeffs[im] = avg.conj();
        }
    }

    /// Maximum deviation from conjugate symmetry.
    pub fn symmetry_defect(&self) -> f64 {
        self.iter()
            .map(|(k, c)| (c - self.get(-k).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Copy at a new resolution: modes beyond `k_max` are dropped, new modes are zero.
    pub fn resized(&self, k_max: usize) -> Self {
        let mut out = FourierField::zeros(k_max, self.real);
        let lim = k_max.min(self.k_max) as i64;
        for k in -lim..=lim {
            let i = out.index(k).unwrap();
            out.coeffs[i] = self.get(k);
        }
        out
    }

    /// Applies `c_k -> m(k, c_k)` to every stored mode.
    pub fn map_modes(&self, mut m: impl FnMut(i64, Complex64) -> Complex64) -> Self {
        let k_max = self.k_max as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| m(i as i64 - k_max, *c))
            .collect();
        let mut out = FourierField { k_max: self.k_max, coeffs, real: self.real };
        out.symmetrize();
        out
    }

    /// Keeps modes satisfying `keep(k)`, zeroing the rest.
    pub fn filter_modes(&self, mut keep: impl FnMut(i64) -> bool) -> Self {
        self.map_modes(|k, c| if keep(k) { c } else { Complex64::new(0.0, 0.0) })
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map_modes(|_, c| c * a)
    }

    /// `self + a * other`, at the larger of the two resolutions.
    pub fn axpy(&self, a: f64, other: &FourierField) -> Self {
        let k_max = self.k_max.max(other.k_max);
        let mut out = self.resized(k_max);
        out.real = self.real && other.real;
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            *c += other.get(i as i64 - k_max as i64) * a;
        }
        out.symmetrize();
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    /// Largest `|k|` with a nonzero coefficient, or `None` for the zero field.
    pub fn support_max(&self) -> Option<usize> {
        self.iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Plain l2 distance of coefficient sequences.
    pub fn l2_distance(&self, other: &FourierField) -> f64 {
        self.axpy(-1.0, other).coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Add for &FourierField {
    type Output = FourierField;
    fn add(self, rhs: &FourierField) -> FourierField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &FourierField {
    type Output = FourierField;
    fn sub(self, rhs: &FourierField) -> FourierField {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &FourierField {
    type Output = FourierField;
    fn mul(self, a: f64) -> FourierField {
        self.scale(a)
    }
}

impl Neg for &FourierField {
    type Output = FourierField;
    fn neg(self) -> FourierField {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_range_reads_are_zero() {
        let f = FourierField::mode(2, 3);
        assert_eq!(f.get(4), Complex64::new(0.0, 0.0));
        assert_eq!(f.get(-100), Complex64::new(0.0, 0.0));
        assert_eq!(f.get(2), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn real_set_writes_conjugate() {
        let mut f = FourierField::zeros(2, true);
        f.set(1, Complex64::new(1.0, 2.0));
        assert_eq!(f.get(-1), Complex64::new(1.0, -2.0));
        assert_eq!(f.symmetry_defect(), 0.0);
    }

    #[test]
    fn resize_keeps_shared_modes() {
        let f = FourierField::from_fn(3, false, |k| Complex64::new(k as f64, 0.0));
        let g = f.resized(1);
        assert_eq!(g.resolution(), 1);
        assert_eq!(g.get(1).re, 1.0);
        assert_eq!(g.get(2), Complex64::new(0.0, 0.0));
        let h = g.resized(4);
        assert_eq!(h.get(-1).re, -1.0);
        assert_eq!(h.coeffs().len(), 9);
    }

    #[test]
    fn axpy_mixed_resolution() {
        let a = FourierField::mode(0, 1);
        let b = FourierField::mode(3, 3);
        let c = &a + &b;
        assert_eq!(c.resolution(), 3);
        assert_eq!(c.support_max(), Some(3));
        assert!(!c.is_real());
    }
}
