use num_complex::Complex64;
use rustfft::FftPlanner;

use super::field::FourierField;

/// Exact linear convolution `c_k = sum_{j+l=k} a_j b_l` over the full support
/// `|k| <= K_a + K_b`, truncated to `target`. No aliasing.
pub fn convolve(a: &FourierField, b: &FourierField, target: usize) -> FourierField {
    let full = convolve_full(a, b);
    let mut out = full.resized(target);
    if a.is_real() && b.is_real() {
        out = FourierField::from_coeffs(out.coeffs().to_vec(), true);
    }
    out
}

/// Exact convolution at resolution `K_a + K_b`.
pub fn convolve_full(a: &FourierField, b: &FourierField) -> FourierField {
    let (ka, kb) = (a.resolution() as i64, b.resolution() as i64);
    let k_out = (ka + kb) as usize;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * k_out + 1];
    for (i, ca) in a.coeffs().iter().enumerate() {
        if ca.norm_sqr() == 0.0 {
            continue;
        }
        for (j, cb) in b.coeffs().iter().enumerate() {
            // (i - ka) + (j - kb) + k_out = i + j
            coeffs[i + j] += ca * cb;
        }
    }
    FourierField::from_coeffs(coeffs, a.is_real() && b.is_real())
}

/// FFT route for the same product, zero-padded so that no wrap-around occurs.
pub fn convolve_fft(a: &FourierField, b: &FourierField, target: usize) -> FourierField {
    let (la, lb) = (a.coeffs().len(), b.coeffs().len());
    let len = (la + lb - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut xa = vec![Complex64::new(0.0, 0.0); len];
    let mut xb = xa.clone();
    xa[..la].copy_from_slice(a.coeffs());
    xb[..lb].copy_from_slice(b.coeffs());
    fwd.process(&mut xa);
    fwd.process(&mut xb);
    for (p, q) in xa.iter_mut().zip(&xb) {
        *p *= q;
    }
    inv.process(&mut xa);
    let scale = 1.0 / len as f64;
    let full: Vec<Complex64> = xa[..la + lb - 1].iter().map(|c| c * scale).collect();
    FourierField::from_coeffs(full, a.is_real() && b.is_real()).resized(target)
}

/// `a^p`, computed exactly and truncated to `target`. `a^0` is the constant one.
pub fn power(a: &FourierField, p: u32, target: usize) -> FourierField {
    let mut acc = FourierField::zeros(0, true);
    acc.set(0, Complex64::new(1.0, 0.0));
    for _ in 0..p {
        acc = convolve_full(&acc, a);
    }
    acc.resized(target)
}
