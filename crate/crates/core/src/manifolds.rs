//! Closed-form critical and slow manifolds of the quadratic example, a Picard
//! solver for the critical manifold of a general system, the resonance set of
//! admissible `epsilon`, and the [`ManifoldGraph`] evaluator shared by dynamics
//! and experiments.

use std::cmp::Ordering;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result, Triple};
use crate::lyapunov_perron::{extract_graph, solve_fixed_point, LpKind, LpOptions};
use crate::spectral::{project_slow, sobolev_norm, FourierField, SobolevIndex, SpectralSplit, FOUR_PI_SQ};
use crate::system::FastSlowSystem;

/// Relative denominator size below which the slow-manifold formula is refused.
pub const DEFAULT_RESONANCE_GUARD: f64 = 1e-9;

fn lambda(k: i64) -> f64 {
    1.0 + FOUR_PI_SQ * (k * k) as f64
}

/// Pairs `(j, l)` with `|j|, |l| <= k0`; the caller groups them by `k = j + l`.
fn pairs(k0: usize) -> impl Iterator<Item = (i64, i64)> {
    let k0 = k0 as i64;
    (-k0..=k0).flat_map(move |j| (-k0..=k0).map(move |l| (j, l)))
}

fn sum_pairs(v: &FourierField, k0: usize, mut den: impl FnMut(i64, i64, i64) -> f64) -> FourierField {
    let mut u = FourierField::zeros(2 * k0, v.is_real());
    let mut acc = vec![Complex64::new(0.0, 0.0); 4 * k0 + 1];
    for (j, l) in pairs(k0) {
        let p = v.get(j) * v.get(l);
        if p.norm_sqr() == 0.0 {
            continue;
        }
        let k = j + l;
        acc[(k + 2 * k0 as i64) as usize] += p / den(j, l, k);
    }
    for (i, c) in acc.into_iter().enumerate() {
        let k = i as i64 - 2 * k0 as i64;
        if !u.is_real() || k >= 0 {
            u.set(k, c);
        }
    }
    u.symmetrize();
    u
}

/// `u_k = sum_{j+l=k, |j|,|l|<=k0} v_j v_l / (1 + 4 pi^2 k^2)`, supported on `|k| <= 2 k0`.
///
/// Modes of `v` beyond `k0` are ignored.
pub fn critical_manifold_explicit(v: &FourierField, k0: usize) -> FourierField {
    sum_pairs(v, k0, |_, _, k| lambda(k))
}

/// Conditioning of an evaluation of the slow-manifold formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FormulaCondition {
    /// `min |denominator| / (1 + 4 pi^2 k^2)` over contributing pairs.
    pub min_relative_denominator: f64,
    /// Reciprocal of the above; grows without bound near a resonance.
    pub condition: f64,
}

/// `u_k = sum v_j v_l / (1 + 4 pi^2 k^2 - eps (2 + 4 pi^2 (j^2 + l^2)))`, supported on `|k| <= 2 k0`.
///
/// `eps = 0` recovers [`critical_manifold_explicit`]. Modes `|k| <= k0` form the
/// Galerkin manifold; the remaining ones complete the slow manifold of the
/// untruncated example.
pub fn galerkin_manifold_explicit(v: &FourierField, epsilon: f64, k0: usize) -> Result<FourierField> {
    galerkin_manifold_with_guard(v, epsilon, k0, DEFAULT_RESONANCE_GUARD).map(|(u, _)| u)
}

pub fn galerkin_manifold_with_guard(
    v: &FourierField,
    epsilon: f64,
    k0: usize,
    guard: f64,
) -> Result<(FourierField, FormulaCondition)> {
    let mut singular: Vec<Triple> = Vec::new();
    let mut min_rel = f64::INFINITY;
    for (j, l) in pairs(k0) {
        if (v.get(j) * v.get(l)).norm_sqr() == 0.0 {
            continue;
        }
        let k = j + l;
        let rel = (lambda(k) - epsilon * (lambda(j) + lambda(l))).abs() / lambda(k);
        min_rel = min_rel.min(rel);
        if rel < guard {
            singular.push((j, l, k));
        }
    }
    if !singular.is_empty() {
        return Err(Error::ResonantEpsilon { epsilon, triples: singular });
    }
    let u = sum_pairs(v, k0, |j, l, k| lambda(k) - epsilon * (lambda(j) + lambda(l)));
    Ok((u, FormulaCondition { min_relative_denominator: min_rel, condition: 1.0 / min_rel }))
}

/// Iteration controls for [`critical_manifold_solve_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalSolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation `theta` in `u <- (1 - theta) u + theta (-A^-1 f(u, v))`.
    pub damping: f64,
    /// Residual measured in `X_n = H^{2n}`.
    pub n: f64,
}

impl Default for CriticalSolveOptions {
    fn default() -> Self {
        CriticalSolveOptions { tol: 1e-12, max_iter: 200, damping: 1.0, n: 1.0 }
    }
}

/// `h0(v)`, the solution of `0 = A u + f(u, v)`, at the system resolution.
pub fn critical_manifold_solve(sys: &FastSlowSystem, v: &FourierField, tol: f64) -> Result<FourierField> {
    let opts = CriticalSolveOptions { tol, ..Default::default() };
    critical_manifold_solve_with(sys, v, &opts).map(|(u, _)| u)
}

/// Picard iteration on `u -> -A^-1 f(u, v)` from `u = 0`. Returns the number of iterations.
pub fn critical_manifold_solve_with(
    sys: &FastSlowSystem,
    v: &FourierField,
    opts: &CriticalSolveOptions,
) -> Result<(FourierField, usize)> {
    let res = sys.resolution;
    let v = v.resized(res);
    let x_n = SobolevIndex::x(opts.n);
    let mut u = FourierField::zeros(res, v.is_real());
    let mut displacement = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let target = sys.op_a.apply_inverse(&sys.f.evaluate(&u, &v, res)).scale(-1.0);
        let next = u.axpy(opts.damping, &(&target - &u));
        displacement = sobolev_norm(&(&next - &u), x_n);
        u = next;
        if !displacement.is_finite() {
            break;
        }
        let residual = sobolev_norm(&sys.op_a.apply(&u).axpy(1.0, &sys.f.evaluate(&u, &v, res)), x_n);
        if residual < opts.tol {
            return Ok((u, it));
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, displacement })
}

/// Exact identity of a resonance value `(1 + q a) / (2 + q b)` with `q = 4 pi^2`
/// kept symbolic, `a = k^2`, `b = j^2 + l^2`.
///
/// Since `q` is transcendental two such values agree only if `(a, b)` agree or
/// both satisfy `b = 2a` (value exactly `1/2`), which is stored as `(0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ResonanceKey {
    pub a: i64,
    pub b: i64,
}

impl ResonanceKey {
    pub fn new(j: i64, l: i64) -> Self {
        let a = (j + l) * (j + l);
        let b = j * j + l * l;
        if b == 2 * a {
            ResonanceKey { a: 0, b: 0 }
        } else {
            ResonanceKey { a, b }
        }
    }

    pub fn value(&self) -> f64 {
        (1.0 + FOUR_PI_SQ * self.a as f64) / (2.0 + FOUR_PI_SQ * self.b as f64)
    }

    /// Exact comparison: the sign of `(1+qa)(2+qb') - (1+qa')(2+qb)`, an integer
    /// polynomial in `q` whose vanishing is decided on its coefficients.
    pub fn cmp_exact(&self, other: &ResonanceKey) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        let lin = other.b + 2 * self.a - self.b - 2 * other.a;
        let quad = self.a * other.b - other.a * self.b;
        if lin == 0 && quad == 0 {
            return Ordering::Equal;
        }
        let s = lin as f64 + FOUR_PI_SQ * quad as f64;
        s.partial_cmp(&0.0).unwrap()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResonanceEntry {
    pub epsilon: f64,
    pub key: ResonanceKey,
    pub witnesses: Vec<Triple>,
}

/// Values of `epsilon` in `(0, 1)` where some denominator of the slow-manifold
/// formula vanishes, sorted ascending.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResonanceSet {
    pub k0: usize,
    pub entries: Vec<ResonanceEntry>,
}

/// Enumerates `eps = (1 + 4 pi^2 k^2) / (2 + 4 pi^2 (j^2 + l^2))` over
/// `|j|, |l|, |k| <= k0`, `k = j + l`, keeping the values inside `range`.
pub fn resonance_set(k0: usize, range: (f64, f64)) -> ResonanceSet {
    let mut entries: Vec<ResonanceEntry> = Vec::new();
    for (j, l) in pairs(k0) {
        let k = j + l;
        if k.unsigned_abs() as usize > k0 {
            continue;
        }
        // eps < 1 iff q (k^2 - j^2 - l^2) = 2 q j l < 1 iff j l <= 0
        let key = ResonanceKey::new(j, l);
        let eps = key.value();
        if !(eps > range.0 && eps < range.1) {
            continue;
        }
        match entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.witnesses.push((j, l, k)),
            None => entries.push(ResonanceEntry { epsilon: eps, key, witnesses: vec![(j, l, k)] }),
        }
    }
    entries.sort_by(|x, y| x.key.cmp_exact(&y.key));
    ResonanceSet { k0, entries }
}

impl ResonanceSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min(&self) -> Option<&ResonanceEntry> {
        self.entries.first()
    }

    pub fn contains_half(&self) -> bool {
        self.entries.iter().any(|e| e.key == ResonanceKey { a: 0, b: 0 })
    }

    /// The entry whose value matches `epsilon` to relative `1e-12`.
    pub fn find(&self, epsilon: f64) -> Option<&ResonanceEntry> {
        self.entries.iter().find(|e| (e.epsilon - epsilon).abs() <= 1e-12 * e.epsilon)
    }

    /// One row per witness, columns `epsilon, j, l, k`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epsilon", "j", "l", "k"])?;
        for e in &self.entries {
            for (j, l, k) in &e.witnesses {
                out.write_record([format!("{:.17e}", e.epsilon), j.to_string(), l.to_string(), k.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `1 / (2 + 8 pi^2 k0^2)`: no resonance lies below it.
pub fn safe_epsilon_bound(k0: usize) -> f64 {
    1.0 / (2.0 + 2.0 * FOUR_PI_SQ * (k0 * k0) as f64)
}

/// Key of [`safe_epsilon_bound`], which is the witness `(k0, -k0, 0)`.
pub fn safe_bound_key(k0: usize) -> ResonanceKey {
    ResonanceKey::new(k0 as i64, -(k0 as i64))
}

/// For a resonant `epsilon`, reports per output mode `|k| <= k0` whether the sum
/// of `v_j v_l` over the resonant pairs with `j + l = k` vanishes.
pub fn resonant_constraint_check(v: &FourierField, epsilon: f64, k0: usize) -> Result<Vec<(i64, bool)>> {
    let set = resonance_set(k0, (0.0, 1.0));
    let entry = set.find(epsilon).ok_or(Error::NotResonant { epsilon, k0 })?;
    let scale = 1.0 + v.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>();
    let k0i = k0 as i64;
    Ok((-k0i..=k0i)
        .map(|k| {
            let sum: Complex64 = pairs(k0)
                .filter(|&(j, l)| j + l == k && ResonanceKey::new(j, l) == entry.key)
                .map(|(j, l)| v.get(j) * v.get(l))
                .sum();
            (k, sum.norm() <= 1e-12 * scale)
        })
        .collect())
}

/// How a [`ManifoldGraph`] is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    /// `h0`, by Picard iteration.
    Critical,
    /// The slow-manifold formula restricted to `|k| <= k0`.
    GalerkinExplicit,
    /// The slow-manifold formula on all `|k| <= 2 k0`, the untruncated example.
    DirectExplicit,
    GalerkinLp,
    DirectLp,
}

/// Maps a slow field `v0S` to `(u, v_F)` on the graph.
#[derive(Clone, Debug)]
pub struct ManifoldGraph {
    pub kind: GraphKind,
    pub system: FastSlowSystem,
    pub split: SpectralSplit,
    pub lp: LpOptions,
    pub critical_tol: f64,
}

impl ManifoldGraph {
    pub fn new(kind: GraphKind, system: FastSlowSystem, split: SpectralSplit) -> Self {
        ManifoldGraph { kind, system, split, lp: LpOptions::default(), critical_tol: 1e-12 }
    }

    pub fn epsilon(&self) -> f64 {
        self.system.epsilon
    }

    /// Returns `(u, v_F)` at the system resolution. The input is projected to slow modes.
    pub fn evaluate(&self, v0s: &FourierField) -> Result<(FourierField, FourierField)> {
        let res = self.system.resolution;
        let k0 = self.split.k0;
        let v0s = project_slow(v0s, k0);
        let zero_vf = FourierField::zeros(res, v0s.is_real());
        let explicit_ok = || {
            if self.system.is_quadratic_example() {
                Ok(())
            } else {
                Err(Error::Invalid("closed-form graph needs f = v^2, g = 0, A = B = Laplacian - 1".into()))
            }
        };
        match self.kind {
            GraphKind::Critical => Ok((critical_manifold_solve(&self.system, &v0s, self.critical_tol)?, zero_vf)),
            GraphKind::GalerkinExplicit => {
                explicit_ok()?;
                let u = galerkin_manifold_explicit(&v0s, self.epsilon(), k0)?;
                Ok((project_slow(&u, k0).resized(res), zero_vf))
            }
            GraphKind::DirectExplicit => {
                explicit_ok()?;
                Ok((galerkin_manifold_explicit(&v0s, self.epsilon(), k0)?.resized(res), zero_vf))
            }
            GraphKind::GalerkinLp | GraphKind::DirectLp => {
                let kind = if self.kind == GraphKind::GalerkinLp { LpKind::Galerkin } else { LpKind::Direct };
                let (traj, _) = solve_fixed_point(kind, &v0s, &self.system, &self.split, &self.lp)?;
                let (u, vf) = extract_graph(&traj);
                Ok((u.resized(res), vf.resized(res)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn critical_on_constant() {
        let a = 0.7;
        let u = critical_manifold_explicit(&FourierField::mode(0, 1).scale(a), 1);
        assert!((u.get(0).re - a * a).abs() < 1e-16);
        assert_eq!(u.support_max(), Some(0));
        assert!(critical_manifold_explicit(&FourierField::zeros(2, true), 2).is_zero());
    }

    #[test]
    fn critical_on_e1() {
        let u = critical_manifold_explicit(&FourierField::mode(1, 1), 1);
        assert!((u.get(2).re - 1.0 / (1.0 + 16.0 * PI * PI)).abs() < 1e-17);
        assert_eq!(u.get(0), re(0.0));
        assert_eq!(u.get(1), re(0.0));
        assert_eq!(u.get(-1), re(0.0));
    }

    #[test]
    fn galerkin_on_constant() {
        let a = 0.4;
        for eps in [0.0, 1e-3, 0.1] {
            let u = galerkin_manifold_explicit(&FourierField::mode(0, 1).scale(a), eps, 1).unwrap();
            assert!((u.get(0).re - a * a / (1.0 - 2.0 * eps)).abs() < 1e-15);
        }
    }

    #[test]
    fn galerkin_at_zero_epsilon_is_critical() {
        let v = FourierField::from_fn(2, true, |k| Complex64::new(0.3 / (1 + k.abs()) as f64, 0.1 * k as f64));
        let g = galerkin_manifold_explicit(&v, 0.0, 2).unwrap();
        assert!(g.l2_distance(&critical_manifold_explicit(&v, 2)) < 1e-16);
    }

    #[test]
    fn galerkin_resonance_is_refused() {
        let v = FourierField::mode(0, 1).scale(0.5);
        match galerkin_manifold_explicit(&v, 0.5, 1) {
            Err(Error::ResonantEpsilon { triples, .. }) => assert_eq!(triples, vec![(0, 0, 0)]),
            other => panic!("{other:?}"),
        }
        let (_, cond) = galerkin_manifold_with_guard(&v, 0.5 - 1e-6, 1, DEFAULT_RESONANCE_GUARD).unwrap();
        assert!(cond.condition > 1e5);
    }

    #[test]
    fn homogeneity_and_reality() {
        let v = FourierField::from_fn(2, true, |k| Complex64::new(0.2, 0.05 * k as f64));
        let u1 = galerkin_manifold_explicit(&v, 1e-3, 2).unwrap();
        let u3 = galerkin_manifold_explicit(&v.scale(3.0), 1e-3, 2).unwrap();
        assert!(u3.l2_distance(&u1.scale(9.0)) < 1e-14);
        assert!(u1.is_real() && u1.symmetry_defect() < 1e-18);
    }

    #[test]
    fn resonance_k0_zero() {
        let s = resonance_set(0, (0.0, 1.0));
        assert_eq!(s.len(), 1);
        assert_eq!(s.entries[0].epsilon, 0.5);
        assert_eq!(s.entries[0].witnesses, vec![(0, 0, 0)]);
    }

    #[test]
    fn resonance_k0_one_minimum() {
        let s = resonance_set(1, (0.0, 1.0));
        let m = s.min().unwrap();
        assert!((m.epsilon - 1.0 / (2.0 + 8.0 * PI * PI)).abs() < 1e-16);
        assert!((m.epsilon - 0.0123522).abs() < 1e-7);
        assert!(m.witnesses.contains(&(1, -1, 0)));
        assert!(s.contains_half());
    }

    #[test]
    fn keys_are_exact() {
        // (j, l) = (1, -1) and (-1, 1) share a key; (0, 1) differs from (0, 0)
        assert_eq!(ResonanceKey::new(1, -1), ResonanceKey::new(-1, 1));
        assert_ne!(ResonanceKey::new(0, 0), ResonanceKey::new(2, 0));
        assert_ne!(ResonanceKey::new(0, 1), ResonanceKey::new(0, 0));
        let k = ResonanceKey::new(2, -1);
        assert_eq!(k.cmp_exact(&k), Ordering::Equal);
        assert_eq!(ResonanceKey::new(1, -1).cmp_exact(&ResonanceKey::new(0, 0)), Ordering::Less);
    }

    #[test]
    fn safe_bounds() {
        assert_eq!(safe_epsilon_bound(0), 0.5);
        assert!((safe_epsilon_bound(1) - 1.0 / (2.0 + 8.0 * PI * PI)).abs() < 1e-18);
        assert!((safe_bound_key(3).value() - safe_epsilon_bound(3)).abs() < 1e-18);
    }

    #[test]
    fn constraint_check_examples() {
        let a = 0.3;
        let checks = resonant_constraint_check(&FourierField::mode(0, 1).scale(a), 0.5, 0).unwrap();
        assert_eq!(checks, vec![(0, false)]);
        let v = &FourierField::mode(1, 1) - &FourierField::mode(-1, 1);
        let checks = resonant_constraint_check(&v, 0.5, 1).unwrap();
        assert!(checks.iter().all(|(_, ok)| *ok));
        let zero = FourierField::zeros(1, true);
        assert!(resonant_constraint_check(&zero, 0.5, 1).unwrap().iter().all(|(_, ok)| *ok));
        assert!(matches!(resonant_constraint_check(&zero, 0.3, 1), Err(Error::NotResonant { .. })));
    }

    #[test]
    fn picard_agrees_with_formula() {
        let sys = FastSlowSystem::quadratic_example(1e-3, 6);
        let v = FourierField::from_fn(3, true, |k| Complex64::new(0.01 / (1 + k * k) as f64, 0.003 * k as f64));
        let (u, it) = critical_manifold_solve_with(&sys, &v, &CriticalSolveOptions::default()).unwrap();
        assert!(it <= 2);
        assert!(u.l2_distance(&critical_manifold_explicit(&v, 3)) < 1e-15);
        let (z, it) = critical_manifold_solve_with(&sys, &FourierField::zeros(3, true), &Default::default()).unwrap();
        assert!(z.is_zero());
        assert_eq!(it, 1);
    }

    #[test]
    fn csv_rows_per_witness() {
        let mut buf = Vec::new();
        resonance_set(0, (0.0, 1.0)).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "epsilon,j,l,k");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("5.00000000000000000e-1,0,0,0"));
    }
}
