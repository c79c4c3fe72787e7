//! Time integration by exponential time differencing, the closed-form solution
//! of the quadratic example, and invariance/attraction diagnostics for graphs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifolds::{critical_manifold_solve, galerkin_manifold_explicit, GraphKind, ManifoldGraph, DEFAULT_RESONANCE_GUARD};
use crate::spectral::phi::{phi1, phi2, phi3};
use crate::spectral::{project_fast, project_slow, sobolev_norm, FourierField, SobolevIndex, SpectralSplit, FOUR_PI_SQ};
use crate::system::FastSlowSystem;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub u: FourierField,
    pub v: FourierField,
}

/// Which system is advanced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Full,
    /// Both variables truncated to `|k| <= k0`.
    Galerkin { k0: usize },
    /// `v` on `|k| <= k0` with `u = h0(v)` slaved to it.
    ReducedSlow { k0: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Cox-Matthews second order.
    Etd2rk,
    /// Cox-Matthews fourth order.
    #[default]
    Etdrk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrateOptions {
    pub scheme: Scheme,
    /// Store every `stride`-th step; the final time is always stored.
    pub stride: usize,
    /// Smoothness index of the defect norms.
    pub n: f64,
    /// Tolerance of the critical-manifold solves inside `ReducedSlow`.
    pub critical_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { scheme: Scheme::Etdrk4, stride: 1, n: 1.0, critical_tol: 1e-13 }
    }
}

/// Per-mode ETD weights for one component with linear rates `c_k`.
struct Weights {
    e: Vec<f64>,
    e_half: Vec<f64>,
    /// ETD2: `h phi1`, `h phi2`. ETDRK4: `h/2 phi1(z/2)` and the three quadrature weights.
    w: [Vec<f64>; 4],
}

impl Weights {
    fn new(rates: &[f64], h: f64, scheme: Scheme) -> Self {
        let mut out = Weights { e: vec![], e_half: vec![], w: [vec![], vec![], vec![], vec![]] };
        for &c in rates {
            let z = c * h;
            out.e.push(z.exp());
            out.e_half.push((0.5 * z).exp());
            match scheme {
                Scheme::Etd2rk => {
                    out.w[0].push(h * phi1(z));
                    out.w[1].push(h * phi2(z));
                    out.w[2].push(0.0);
                    out.w[3].push(0.0);
                }
                Scheme::Etdrk4 => {
                    let (p1, p2, p3) = (phi1(z), phi2(z), phi3(z));
                    out.w[0].push(0.5 * h * phi1(0.5 * z));
                    out.w[1].push(h * (p1 - 3.0 * p2 + 4.0 * p3));
                    out.w[2].push(h * (p2 - 2.0 * p3));
                    out.w[3].push(h * (-p2 + 4.0 * p3));
                }
            }
        }
        out
    }
}

/// `sum_i w_i[m] x_i[m]` coefficientwise.
fn combine(terms: &[(&[f64], &FourierField)], real: bool) -> FourierField {
    let len = terms[0].1.coeffs().len();
    let mut acc = vec![num_complex::Complex64::new(0.0, 0.0); len];
    for (w, x) in terms {
        for (m, c) in x.coeffs().iter().enumerate() {
            acc[m] += c * w[m];
        }
    }
    FourierField::from_coeffs(acc, real)
}

struct Integrator<'a> {
    sys: &'a FastSlowSystem,
    variant: Variant,
    res: usize,
    scheme: Scheme,
    wu: Weights,
    wv: Weights,
    critical_tol: f64,
}

impl<'a> Integrator<'a> {
    fn new(sys: &'a FastSlowSystem, variant: Variant, h: f64, scheme: Scheme, critical_tol: f64) -> Self {
        let res = match variant {
            Variant::Full => sys.resolution,
            Variant::Galerkin { k0 } | Variant::ReducedSlow { k0 } => k0,
        };
        let r = res as i64;
        let ru: Vec<f64> = (-r..=r).map(|k| sys.op_a.multiplier(k) / sys.epsilon).collect();
        let rv: Vec<f64> = (-r..=r).map(|k| sys.op_b.multiplier(k)).collect();
        Integrator {
            sys,
            variant,
            res,
            scheme,
            wu: Weights::new(&ru, h, scheme),
            wv: Weights::new(&rv, h, scheme),
            critical_tol,
        }
    }

    fn slaved_u(&self, v: &FourierField, t: f64) -> Result<FourierField> {
        let u = critical_manifold_solve(self.sys, v, self.critical_tol)
            .map_err(|e| Error::CriticalSolveFailed { t, reason: e.to_string() })?;
        Ok(u.resized(self.sys.resolution))
    }

    /// `(f / eps, g)` at `(u, v)`, projected for the truncated variants.
    fn nonlinear(&self, u: &FourierField, v: &FourierField, t: f64) -> Result<(FourierField, FourierField)> {
        let (f, g) = match self.variant {
            // evaluation at `res` already truncates for the Galerkin variant
            Variant::Full | Variant::Galerkin { .. } => {
                (self.sys.f.evaluate(u, v, self.res), self.sys.g.evaluate(u, v, self.res))
            }
            Variant::ReducedSlow { .. } => {
                let zero = FourierField::zeros(self.res, v.is_real());
                if self.sys.g.is_zero() {
                    (zero.clone(), zero)
                } else {
                    let h0 = self.slaved_u(v, t)?;
                    (zero, project_slow(&self.sys.g.evaluate(&h0, v, self.sys.resolution), self.res).resized(self.res))
                }
            }
        };
        Ok((f.scale(1.0 / self.sys.epsilon), g))
    }

    fn step(&self, u: &FourierField, v: &FourierField, t: f64) -> Result<(FourierField, FourierField)> {
        let real = u.is_real() && v.is_real();
        let (nu, nv) = self.nonlinear(u, v, t)?;
        match self.scheme {
            Scheme::Etd2rk => {
                let au = combine(&[(&self.wu.e, u), (&self.wu.w[0], &nu)], real);
                let av = combine(&[(&self.wv.e, v), (&self.wv.w[0], &nv)], real);
                let (nau, nav) = self.nonlinear(&au, &av, t)?;
                let u1 = au.axpy(1.0, &combine(&[(&self.wu.w[1], &(&nau - &nu))], real));
                let v1 = av.axpy(1.0, &combine(&[(&self.wv.w[1], &(&nav - &nv))], real));
                Ok((u1, v1))
            }
            Scheme::Etdrk4 => {
                let (wu, wv) = (&self.wu, &self.wv);
                let half = |w: &Weights, y: &FourierField, n: &FourierField| combine(&[(&w.e_half, y), (&w.w[0], n)], real);
                let (au, av) = (half(wu, u, &nu), half(wv, v, &nv));
                let (nau, nav) = self.nonlinear(&au, &av, t)?;
                let (bu, bv) = (half(wu, u, &nau), half(wv, v, &nav));
                let (nbu, nbv) = self.nonlinear(&bu, &bv, t)?;
                let cu = half(wu, &au, &(&nbu.scale(2.0) - &nu));
                let cv = half(wv, &av, &(&nbv.scale(2.0) - &nv));
                let (ncu, ncv) = self.nonlinear(&cu, &cv, t)?;
                let fin = |w: &Weights, y: &FourierField, n: &FourierField, na: &FourierField, nb: &FourierField, nc: &FourierField| {
                    combine(&[(&w.e, y), (&w.w[1], n), (&w.w[2], &(na + nb).scale(2.0)), (&w.w[3], nc)], real)
                };
                Ok((fin(wu, u, &nu, &nau, &nbu, &ncu), fin(wv, v, &nv, &nav, &nbv, &ncv)))
            }
        }
    }
}

fn finite(f: &FourierField) -> bool {
    f.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Integrates with the default scheme, storing every step.
pub fn integrate(sys: &FastSlowSystem, state: &FlowState, dt: f64, t_end: f64, variant: Variant) -> Result<Vec<FlowState>> {
    integrate_with(sys, state, dt, t_end, variant, &IntegrateOptions::default())
}

/// Fixed-step exponential integration from `state.t` to `t_end`. The last step
/// is shortened to land on `t_end` exactly.
pub fn integrate_with(
    sys: &FastSlowSystem,
    state: &FlowState,
    dt: f64,
    t_end: f64,
    variant: Variant,
    opts: &IntegrateOptions,
) -> Result<Vec<FlowState>> {
    if !(dt > 0.0) || !(t_end >= state.t) {
        return Err(Error::Invalid(format!("need dt > 0 and t_end >= t0 (dt = {dt}, t_end = {t_end})")));
    }
    let span = t_end - state.t;
    let steps = ((span / dt) * (1.0 - 1e-12)).ceil().max(0.0) as usize;
    let main = Integrator::new(sys, variant, dt, opts.scheme, opts.critical_tol);
    let res = main.res;
    let (mut u, mut v) = match variant {
        Variant::Full => (state.u.resized(res), state.v.resized(res)),
        Variant::Galerkin { k0 } => (project_slow(&state.u, k0).resized(res), project_slow(&state.v, k0).resized(res)),
        Variant::ReducedSlow { k0 } => (FourierField::zeros(res, state.v.is_real()), project_slow(&state.v, k0).resized(res)),
    };
    let reduced = matches!(variant, Variant::ReducedSlow { .. });
    // the slaved u lives at the system resolution and is rebuilt at output times only
    let output_u = |u: &FourierField, v: &FourierField, t: f64| if reduced { main.slaved_u(v, t) } else { Ok(u.clone()) };
    let stride = opts.stride.max(1);
    let mut out = vec![FlowState { t: state.t, u: output_u(&u, &v, state.t)?, v: v.clone() }];
    let mut t = state.t;
    let mut last: Option<Integrator> = None;
    for i in 0..steps {
        let h = if i + 1 == steps { t_end - t } else { dt };
        let (u1, v1) = if (h - dt).abs() <= 1e-12 * dt {
            main.step(&u, &v, t)?
        } else {
            let short = last.get_or_insert_with(|| Integrator::new(sys, variant, h, opts.scheme, opts.critical_tol));
            short.step(&u, &v, t)?
        };
        t = if i + 1 == steps { t_end } else { state.t + (i + 1) as f64 * dt };
        if !(finite(&u1) && finite(&v1)) {
            return Err(Error::StepRejected { t });
        }
        u = u1;
        v = v1;
        if (i + 1) % stride == 0 || i + 1 == steps {
            out.push(FlowState { t, u: output_u(&u, &v, t)?, v: v.clone() });
        }
    }
    Ok(out)
}

fn lambda(k: i64) -> f64 {
    1.0 + FOUR_PI_SQ * (k * k) as f64
}

/// Closed-form state of `eps u' = (Laplacian - 1) u + v^2`, `v' = (Laplacian - 1) v`
/// with `v0` on `|k| <= k0`.
///
/// Each mode is `u_k(t) = e^{-lambda_k t / eps} (u0_k - P_k) + sum_{j+l=k} c_{jl} e^{-[2 + 4 pi^2 (j^2 + l^2)] t}`
/// with `c_{jl} = v_j v_l / (lambda_k - eps (lambda_j + lambda_l))` and `P_k = sum c_{jl}`.
/// Negative `t` is accepted only when `u0` lies on the slow manifold.
pub fn exact_example_solution(v0: &FourierField, u0: &FourierField, epsilon: f64, k0: usize, t: f64) -> Result<FlowState> {
    let v0 = project_slow(v0, k0);
    let on = galerkin_manifold_explicit(&v0, epsilon, k0)?;
    let res = u0.resolution().max(2 * k0);
    let off = &u0.resized(res) - &on.resized(res);
    if t < 0.0 && off.max_abs() > 1e3 * f64::EPSILON * (1.0 + on.max_abs()) {
        return Err(Error::Invalid("backward closed form needs an on-manifold start".into()));
    }
    let k0i = k0 as i64;
    let real = v0.is_real() && u0.is_real();
    let mut u = FourierField::zeros(res, real);
    let mut acc = vec![num_complex::Complex64::new(0.0, 0.0); 2 * res + 1];
    for j in -k0i..=k0i {
        for l in -k0i..=k0i {
            let p = v0.get(j) * v0.get(l);
            if p.norm_sqr() == 0.0 {
                continue;
            }
            let k = j + l;
            let den = lambda(k) - epsilon * (lambda(j) + lambda(l));
            if den.abs() < DEFAULT_RESONANCE_GUARD * lambda(k) {
                return Err(Error::ResonantEpsilon { epsilon, triples: vec![(j, l, k)] });
            }
            acc[(k + res as i64) as usize] += p / den * (-(lambda(j) + lambda(l)) * t).exp();
        }
    }
    for (i, c) in acc.into_iter().enumerate() {
        let k = i as i64 - res as i64;
        let homogeneous = if t < 0.0 { 0.0 } else { (-lambda(k) * t / epsilon).exp() };
        if !real || k >= 0 {
            u.set(k, c + off.get(k) * homogeneous);
        }
    }
    let v = v0.map_modes(|k, c| c * (-lambda(k) * t).exp());
    Ok(FlowState { t, u, v })
}

fn variant_for(graph: &ManifoldGraph) -> Variant {
    match graph.kind {
        GraphKind::GalerkinExplicit | GraphKind::GalerkinLp => Variant::Galerkin { k0: graph.split.k0 },
        _ => Variant::Full,
    }
}

/// `|u - h_u(v_S)|_{X_n} + |v_F - h_F(v_S)|_{Y_n}` per stored state.
fn defect_series(graph: &ManifoldGraph, traj: &[FlowState], n: f64) -> Result<Vec<(f64, f64)>> {
    let k0 = graph.split.k0;
    traj.iter()
        .map(|s| {
            let (hu, hf) = graph.evaluate(&project_slow(&s.v, k0))?;
            let du = sobolev_norm(&(&s.u - &hu), SobolevIndex::x(n));
            let df = sobolev_norm(&(&project_fast(&s.v, k0) - &hf), SobolevIndex::y(n));
            Ok((s.t, du + df))
        })
        .collect()
}

/// For a graph and the system it belongs to (Galerkin graphs are paired with the
/// Galerkin system), launches from `(graph(v0S), v0S)` and returns the sup of the
/// distance to the graph over the stored times.
pub fn invariance_defect(
    graph: &ManifoldGraph,
    v0s: &FourierField,
    t_end: f64,
    dt: f64,
    opts: &IntegrateOptions,
) -> Result<f64> {
    let v0s = project_slow(v0s, graph.split.k0);
    let (u0, vf0) = graph.evaluate(&v0s)?;
    let state = FlowState { t: 0.0, u: u0, v: &v0s.resized(vf0.resolution()) + &vf0 };
    let traj = integrate_with(&graph.system, &state, dt, t_end, variant_for(graph), opts)?;
    Ok(defect_series(graph, &traj, opts.n)?.into_iter().map(|(_, d)| d).fold(0.0, f64::max))
}

/// Least-squares fit `log d(t) = log C - c t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AttractionFit {
    pub rate: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits the decay of the distance to the graph after an offset `u_offset` in the
/// fast variable. Samples at or below `floor` relative to the initial defect are dropped.
pub fn attraction_rate(
    graph: &ManifoldGraph,
    v0s: &FourierField,
    u_offset: &FourierField,
    t_end: f64,
    dt: f64,
    opts: &IntegrateOptions,
) -> Result<AttractionFit> {
    let v0s = project_slow(v0s, graph.split.k0);
    let (u0, vf0) = graph.evaluate(&v0s)?;
    let start = FlowState { t: 0.0, u: &u0 + u_offset, v: &v0s.resized(vf0.resolution()) + &vf0 };
    let traj = integrate_with(&graph.system, &start, dt, t_end, variant_for(graph), opts)?;
    let series = defect_series(graph, &traj, opts.n)?;
    let scale = sobolev_norm(&u0, SobolevIndex::x(opts.n)) + sobolev_norm(u_offset, SobolevIndex::x(opts.n));
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let window: Vec<(f64, f64)> = series.into_iter().take_while(|&(_, d)| d > floor).map(|(t, d)| (t, d.ln())).collect();
    if window.len() < 3 {
        return Err(Error::DefectBelowFloor);
    }
    let (slope, intercept, r2) = linear_fit(&window);
    Ok(AttractionFit { rate: -slope, constant: intercept.exp(), r_squared: r2, points: window.len() })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, R^2)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let a = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (a, my - a * mx, r2)
}

/// Columns `t, component, k, re, im`.
pub fn write_trajectory_csv<W: Write>(traj: &[FlowState], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "component", "k", "re", "im"])?;
    for s in traj {
        let t = format!("{:.17e}", s.t);
        for (name, f) in [("u", &s.u), ("v", &s.v)] {
            for (k, c) in f.iter() {
                out.write_record([t.clone(), name.into(), k.to_string(), format!("{:.17e}", c.re), format!("{:.17e}", c.im)])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Convenience: a graph of `kind` for the split of the system's own cutoff.
pub fn graph(kind: GraphKind, sys: &FastSlowSystem, split: &SpectralSplit) -> ManifoldGraph {
    ManifoldGraph::new(kind, sys.clone(), *split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn v_sample(k0: usize, a: f64) -> FourierField {
        FourierField::from_fn(k0, true, |k| Complex64::new(a / (1 + k * k) as f64, 0.3 * a * k as f64 / (1 + k * k) as f64))
    }

    #[test]
    fn zero_data_stays_zero() {
        let sys = FastSlowSystem::quadratic_example(1e-2, 4);
        let s = FlowState { t: 0.0, u: FourierField::zeros(4, true), v: FourierField::zeros(4, true) };
        let traj = integrate(&sys, &s, 1e-2, 0.1, Variant::Full).unwrap();
        assert!(traj.iter().all(|s| s.u.is_zero() && s.v.is_zero()));
    }

    #[test]
    fn linear_flow_is_exact() {
        let mut sys = FastSlowSystem::quadratic_example(1e-2, 3);
        sys.f = crate::system::PolynomialNonlinearity::zero();
        let v0 = v_sample(3, 0.5);
        let u0 = v_sample(3, 0.2);
        let traj = integrate(&sys, &FlowState { t: 0.0, u: u0.clone(), v: v0.clone() }, 0.05, 0.5, Variant::Full).unwrap();
        let end = traj.last().unwrap();
        let ve = v0.map_modes(|k, c| c * (-lambda(k) * 0.5).exp());
        let ue = u0.map_modes(|k, c| c * (-lambda(k) * 0.5 / 1e-2).exp());
        assert!(end.v.l2_distance(&ve) < 1e-15);
        assert!(end.u.l2_distance(&ue) < 1e-15);
    }

    #[test]
    fn closed_form_identity_at_zero_time() {
        let v0 = v_sample(2, 0.1);
        let u0 = v_sample(4, 0.05);
        let s = exact_example_solution(&v0, &u0, 1e-2, 2, 0.0).unwrap();
        assert!(s.u.l2_distance(&u0) < 1e-16);
        assert!(s.v.l2_distance(&v0) < 1e-16);
    }

    #[test]
    fn closed_form_on_manifold_backward() {
        let v0 = v_sample(1, 0.1);
        let on = galerkin_manifold_explicit(&v0, 1e-2, 1).unwrap();
        let s = exact_example_solution(&v0, &on, 1e-2, 1, -0.01).unwrap();
        let expected = galerkin_manifold_explicit(&s.v, 1e-2, 1).unwrap();
        assert!(s.u.l2_distance(&expected) < 1e-14);
        assert!(exact_example_solution(&v0, &on.scale(2.0), 1e-2, 1, -0.01).is_err());
    }

    #[test]
    fn integrator_matches_closed_form() {
        let (eps, k0) = (1e-2, 2);
        let sys = FastSlowSystem::quadratic_example(eps, 2 * k0);
        let v0 = v_sample(k0, 0.1);
        let u0 = v_sample(2 * k0, 0.02);
        let start = FlowState { t: 0.0, u: u0.clone(), v: v0.clone() };
        for scheme in [Scheme::Etd2rk, Scheme::Etdrk4] {
            let opts = IntegrateOptions { scheme, ..Default::default() };
            let end = integrate_with(&sys, &start, 1e-4, 0.05, Variant::Full, &opts).unwrap().pop().unwrap();
            let exact = exact_example_solution(&v0, &u0, eps, k0, 0.05).unwrap();
            assert!(end.u.l2_distance(&exact.u) < 1e-7, "{scheme:?} {}", end.u.l2_distance(&exact.u));
        }
    }

    #[test]
    fn semiflow_composition() {
        let sys = FastSlowSystem::quadratic_example(1e-2, 4);
        let start = FlowState { t: 0.0, u: v_sample(4, 0.01), v: v_sample(2, 0.1).resized(4) };
        let whole = integrate(&sys, &start, 1e-3, 0.2, Variant::Full).unwrap().pop().unwrap();
        let mid = integrate(&sys, &start, 1e-3, 0.1, Variant::Full).unwrap().pop().unwrap();
        let two = integrate(&sys, &mid, 1e-3, 0.2, Variant::Full).unwrap().pop().unwrap();
        assert!(whole.u.l2_distance(&two.u) < 1e-13);
        assert!(whole.v.l2_distance(&two.v) < 1e-13);
    }

    #[test]
    fn reduced_slow_is_slaved() {
        let sys = FastSlowSystem::quadratic_example(1e-2, 4);
        let v0 = v_sample(2, 0.1);
        let start = FlowState { t: 0.0, u: FourierField::zeros(4, true), v: v0.clone() };
        let traj = integrate(&sys, &start, 1e-2, 0.3, Variant::ReducedSlow { k0: 2 }).unwrap();
        for s in &traj {
            let v = v0.map_modes(|k, c| c * (-lambda(k) * s.t).exp());
            assert!(s.v.l2_distance(&v) < 1e-14);
            let h0 = crate::manifolds::critical_manifold_explicit(&v, 2);
            assert!(s.u.l2_distance(&h0) < 1e-14);
        }
    }

    #[test]
    fn zero_offset_has_no_fit() {
        let sys = FastSlowSystem::quadratic_example(1e-2, 2);
        let split = SpectralSplit::for_cutoff(&sys.op_b, 1, sys.constants.omega_a);
        let g = graph(GraphKind::DirectExplicit, &sys, &split);
        let r = attraction_rate(&g, &v_sample(1, 0.1), &FourierField::zeros(2, true), 0.1, 1e-3, &Default::default());
        assert_eq!(r, Err(Error::DefectBelowFloor));
    }

    #[test]
    fn mode_offset_decays_at_fast_rate() {
        let eps = 1e-2;
        let sys = FastSlowSystem::quadratic_example(eps, 2);
        let split = SpectralSplit::for_cutoff(&sys.op_b, 1, sys.constants.omega_a);
        let g = graph(GraphKind::DirectExplicit, &sys, &split);
        let fit = attraction_rate(&g, &v_sample(1, 0.1), &FourierField::mode(0, 2).scale(1e-3), 0.2, 1e-3, &Default::default())
            .unwrap();
        assert!((fit.rate * eps - 1.0).abs() < 1e-3, "{fit:?}");
    }
}
