//! Lyapunov-Perron fixed point on the weighted history space, discretised on a
//! uniform grid over `[-T, 0]`.
//!
//! Every integral has the form `int e^{lambda (t - s)} F(s) ds` per Fourier
//! mode. The kernel is integrated exactly against the piecewise-linear
//! interpolant of `F`, so stiff `1/epsilon` rates cost nothing extra.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::phi::{phi1, phi2};
use crate::spectral::{project_fast, project_slow, DiagonalOperator, FourierField, SobolevIndex, SpectralSplit};
use crate::system::{contraction_constant, FastSlowSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpKind {
    /// Untruncated system at the reference resolution; unknowns `(u, v_F, v_S)`.
    Direct,
    /// Galerkin system on `|k| <= k0`; unknowns `(u_G, v_G)`.
    Galerkin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LpOptions {
    /// Picard stops when the weighted displacement falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Bound on the neglected `(-inf, -T)` part of the graph value at `t = 0`.
    pub tail_tol: f64,
    /// Target relative error of the piecewise-linear forcing interpolant.
    pub quad_rtol: f64,
    /// Largest allowed `e^{|eta| h} - 1`.
    pub weight_step: f64,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    /// Reference resolution of the direct solve; default `4 k0`.
    pub k_ref: Option<usize>,
    /// Smoothness index of the history norm.
    pub n: f64,
    pub max_nodes: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            tol: 1e-11,
            max_iter: 200,
            tail_tol: 1e-10,
            quad_rtol: 1e-7,
            weight_step: 0.1,
            horizon: None,
            step: None,
            k_ref: None,
            n: 1.0,
            max_nodes: 4_000_000,
        }
    }
}

impl LpOptions {
    pub fn resolution(&self, kind: LpKind, k0: usize) -> usize {
        match kind {
            LpKind::Galerkin => k0,
            LpKind::Direct => self.k_ref.unwrap_or(4 * k0).max(k0 + 1),
        }
    }
}

/// Discrete element of the weighted history space.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryTrajectory {
    pub kind: LpKind,
    /// Uniform, increasing, ending at `0`.
    pub times: Vec<f64>,
    pub u: Vec<FourierField>,
    /// Identically zero for the Galerkin kind.
    pub v_fast: Vec<FourierField>,
    pub v_slow: Vec<FourierField>,
    pub eta: f64,
    pub n: f64,
}

fn weights(res: usize, s: SobolevIndex) -> Vec<f64> {
    let r = res as i64;
    (-r..=r).map(|k| (1.0 + (k * k) as f64).powf(s.order())).collect()
}

fn norm_with(f: &FourierField, w: &[f64]) -> f64 {
    f.coeffs().iter().zip(w).map(|(c, w)| w * c.norm_sqr()).sum::<f64>().sqrt()
}

impl HistoryTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        -self.times[0]
    }

    pub fn step(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn resolution(&self) -> usize {
        self.u[0].resolution()
    }

    fn weighted_sup(&self, other: Option<&HistoryTrajectory>) -> f64 {
        let res = self.resolution();
        let wx = weights(res, SobolevIndex::x(self.n));
        let wy = weights(res, SobolevIndex::y(self.n));
        let mut sup: f64 = 0.0;
        for i in 0..self.len() {
            let (du, df, ds) = match other {
                Some(o) => (&self.u[i] - &o.u[i], &self.v_fast[i] - &o.v_fast[i], &self.v_slow[i] - &o.v_slow[i]),
                None => (self.u[i].clone(), self.v_fast[i].clone(), self.v_slow[i].clone()),
            };
            let val = norm_with(&du, &wx) + norm_with(&df, &wy) + norm_with(&ds, &wy);
            sup = sup.max((-self.eta * self.times[i]).exp() * val);
        }
        sup
    }

    /// `sup_i e^{-eta t_i} (|u|_{X_n} + |v_F|_{Y_n} + |v_S|_{Y_n})`.
    pub fn weighted_norm(&self) -> f64 {
        self.weighted_sup(None)
    }

    /// Weighted norm of the difference; both trajectories share the grid.
    pub fn weighted_distance(&self, other: &HistoryTrajectory) -> f64 {
        self.weighted_sup(Some(other))
    }

    /// Columns `t, component, mode, re, im` with components `u`, `v_fast`, `v_slow`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "component", "mode", "re", "im"])?;
        for i in 0..self.len() {
            let t = format!("{:.17e}", self.times[i]);
            for (name, f) in [("u", &self.u[i]), ("v_fast", &self.v_fast[i]), ("v_slow", &self.v_slow[i])] {
                for (k, c) in f.iter() {
                    out.write_record([
                        t.clone(),
                        name.to_string(),
                        k.to_string(),
                        format!("{:.17e}", c.re),
                        format!("{:.17e}", c.im),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Horizon and step of the history grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LpGrid {
    pub horizon: f64,
    pub step: f64,
    /// Number of nodes, `horizon / step + 1`.
    pub nodes: usize,
}

/// Backward-time decay and growth rates that control the neglected tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailRates {
    /// Slowest kernel decay of the `u` integral, `min_k |mu_k^A| / epsilon`.
    pub decay_u: f64,
    /// Backward growth of `f` along the history, `deg f * |mu_{k0}^B|`.
    pub growth_u: f64,
    pub decay_v: f64,
    pub growth_v: f64,
}

fn slowest(op: &DiagonalOperator, from: usize, to: usize) -> f64 {
    (from..=to).map(|k| op.multiplier(k as i64).abs()).fold(f64::INFINITY, f64::min)
}

pub fn tail_rates(kind: LpKind, sys: &FastSlowSystem, split: &SpectralSplit, opts: &LpOptions) -> Result<TailRates> {
    let res = opts.resolution(kind, split.k0);
    let slow_growth = sys.op_b.multiplier(split.k0 as i64).abs();
    let rates = TailRates {
        decay_u: slowest(&sys.op_a, 0, res) / sys.epsilon,
        growth_u: sys.f.degree() as f64 * slow_growth,
        decay_v: if res > split.k0 { slowest(&sys.op_b, split.k0 + 1, res) } else { f64::INFINITY },
        growth_v: sys.g.degree() as f64 * slow_growth,
    };
    if !sys.f.is_zero() && rates.decay_u <= rates.growth_u {
        return Err(Error::TailToleranceUnreachable { decay: rates.decay_u, growth: rates.growth_u });
    }
    if kind == LpKind::Direct && !sys.g.is_zero() && rates.decay_v <= rates.growth_v {
        return Err(Error::TailToleranceUnreachable { decay: rates.decay_v, growth: rates.growth_v });
    }
    Ok(rates)
}

/// Chooses `T` so that the extrapolated tail at `t = 0` is below `tail_tol`, and
/// `h` so that both the forcing interpolant and the history weight are resolved.
pub fn select_grid(
    kind: LpKind,
    v0s: &FourierField,
    sys: &FastSlowSystem,
    split: &SpectralSplit,
    opts: &LpOptions,
) -> Result<LpGrid> {
    let rates = tail_rates(kind, sys, split, opts)?;
    let res = opts.resolution(kind, split.k0);
    let v = project_slow(v0s, split.k0).resized(res);
    let zero = FourierField::zeros(res, v.is_real());
    let f0 = norm_with(&sys.f.evaluate(&zero, &v, res), &weights(res, SobolevIndex::x(opts.n)));
    let g0 = norm_with(&sys.g.evaluate(&zero, &v, res), &weights(res, SobolevIndex::y(opts.n)));

    let horizon_for = |budget: f64, gap: f64| {
        if budget > 0.0 && gap.is_finite() {
            (budget / (gap * opts.tail_tol)).max(1.0).ln() / gap
        } else {
            0.0
        }
    };
    let mut t = horizon_for(f0 / sys.epsilon, rates.decay_u - rates.growth_u);
    if kind == LpKind::Direct && !sys.g.is_zero() {
        t = t.max(horizon_for(g0, rates.decay_v - rates.growth_v));
    }

    let h_weight = (1.0 + opts.weight_step).ln() / split.eta.abs().max(f64::MIN_POSITIVE);
    let growth = rates.growth_u.max(if kind == LpKind::Direct { rates.growth_v } else { 0.0 });
    let h_quad = if growth > 0.0 { (12.0 * opts.quad_rtol).sqrt() / growth } else { f64::INFINITY };
    let h = opts.step.unwrap_or(h_weight.min(h_quad));
    let t = opts.horizon.unwrap_or(t).max(10.0 * h);
    let steps = (t / h).ceil() as usize;
    if steps + 1 > opts.max_nodes {
        return Err(Error::Invalid(format!("history grid needs {} nodes (cap {})", steps + 1, opts.max_nodes)));
    }
    Ok(LpGrid { horizon: steps as f64 * h, step: h, nodes: steps + 1 })
}

/// Per-mode one-step data of `I(t + h) = decay I(t) + w_far F(t) + w_near F(t + h)`.
struct Kernel {
    decay: Vec<f64>,
    w_far: Vec<f64>,
    w_near: Vec<f64>,
}

impl Kernel {
    /// `prefactor * int_{t-h}^{t} e^{rate_k (t - s)} F(s) ds`; modes failing `keep` are zero.
    fn new(res: usize, h: f64, prefactor: f64, rate: impl Fn(i64) -> f64, keep: impl Fn(i64) -> bool) -> Kernel {
        let r = res as i64;
        let mut k = Kernel { decay: Vec::new(), w_far: Vec::new(), w_near: Vec::new() };
        for m in -r..=r {
            if keep(m) {
                let z = rate(m) * h;
                k.decay.push(z.exp());
                k.w_near.push(prefactor * h * phi2(z));
                k.w_far.push(prefactor * h * (phi1(z) - phi2(z)));
            } else {
                k.decay.push(0.0);
                k.w_near.push(0.0);
                k.w_far.push(0.0);
            }
        }
        k
    }

    /// Runs the recursion from a zero start over `forcing`, in the given node order.
    fn sweep(&self, forcing: &[FourierField], order: impl Iterator<Item = usize> + Clone, real: bool) -> Vec<FourierField> {
        let len = self.decay.len();
        let mut out: Vec<Option<FourierField>> = vec![None; forcing.len()];
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        let mut prev: Option<usize> = None;
        for i in order {
            if let Some(p) = prev {
                let (fp, fi) = (forcing[p].coeffs(), forcing[i].coeffs());
                for m in 0..len {
                    acc[m] = acc[m] * self.decay[m] + fp[m] * self.w_far[m] + fi[m] * self.w_near[m];
                }
            }
            out[i] = Some(FourierField::from_coeffs(acc.clone(), real));
            prev = Some(i);
        }
        out.into_iter().map(|f| f.expect("node visited")).collect()
    }
}

/// The discretised Lyapunov-Perron map for a fixed `v0S` and grid.
pub struct LpOperator<'a> {
    kind: LpKind,
    sys: &'a FastSlowSystem,
    split: &'a SpectralSplit,
    res: usize,
    real: bool,
    times: Vec<f64>,
    ku: Kernel,
    kvf: Kernel,
    kvs: Kernel,
    vs_free: Vec<FourierField>,
    rates: TailRates,
    tail_tol: f64,
    n: f64,
}

impl<'a> LpOperator<'a> {
    pub fn new(
        kind: LpKind,
        v0s: &FourierField,
        sys: &'a FastSlowSystem,
        split: &'a SpectralSplit,
        grid: &LpGrid,
        opts: &LpOptions,
    ) -> Result<Self> {
        let rates = tail_rates(kind, sys, split, opts)?;
        let res = opts.resolution(kind, split.k0);
        let k0 = split.k0;
        let h = grid.step;
        let times: Vec<f64> = (0..grid.nodes).map(|i| -((grid.nodes - 1 - i) as f64) * h).collect();
        let slow = move |k: i64| k.unsigned_abs() as usize <= k0;
        let eps = sys.epsilon;
        let keep_u = move |k: i64| kind == LpKind::Direct || slow(k);
        let ku = Kernel::new(res, h, 1.0 / eps, |k| sys.op_a.multiplier(k) / eps, keep_u);
        let kvf = Kernel::new(res, h, 1.0, |k| sys.op_b.multiplier(k), move |k| kind == LpKind::Direct && !slow(k));
        // J(t) = int_t^0 e^{mu (t - s)} G(s) ds, swept from t = 0 backwards
        let kvs = Kernel::new(res, h, 1.0, |k| -sys.op_b.multiplier(k), slow);
        let v0 = project_slow(v0s, k0).resized(res);
        let vs_free = times
            .iter()
            .map(|&t| v0.map_modes(|k, c| c * (sys.op_b.multiplier(k) * t).exp()))
            .collect();
        if kind == LpKind::Direct && !sys.g.is_zero() {
            log::warn!("g is nonzero: truncation at K_ref = {res} is not certified below the tolerance");
        }
        Ok(LpOperator {
            kind,
            sys,
            split,
            res,
            real: v0s.is_real(),
            times,
            ku,
            kvf,
            kvs,
            vs_free,
            rates,
            tail_tol: opts.tail_tol,
            n: opts.n,
        })
    }

    pub fn resolution(&self) -> usize {
        self.res
    }

    /// `(0, 0, e^{tB} v0S)`, the exact fixed point when `f = g = 0`.
    pub fn initial_guess(&self) -> HistoryTrajectory {
        let zero = FourierField::zeros(self.res, self.real);
        HistoryTrajectory {
            kind: self.kind,
            times: self.times.clone(),
            u: vec![zero.clone(); self.times.len()],
            v_fast: vec![zero; self.times.len()],
            v_slow: self.vs_free.clone(),
            eta: self.split.eta,
            n: self.n,
        }
    }

    fn tail_check(&self, forcing0: &FourierField, prefactor: f64, decay: f64, growth: f64, s: SobolevIndex) -> Result<()> {
        let t = -self.times[0];
        let bound = prefactor * norm_with(forcing0, &weights(self.res, s)) * (-decay * t).exp() / (decay - growth);
        if bound > self.tail_tol {
            return Err(Error::TailToleranceUnreachable { decay, growth });
        }
        Ok(())
    }

    pub fn apply(&self, traj: &HistoryTrajectory) -> Result<HistoryTrajectory> {
        if traj.times.len() != self.times.len() || traj.resolution() != self.res {
            return Err(Error::Invalid("trajectory does not match the operator grid".into()));
        }
        let k0 = self.split.k0;
        let nodes = self.times.len();
        let mut fu = Vec::with_capacity(nodes);
        let mut gv = Vec::with_capacity(nodes);
        let g_zero = self.sys.g.is_zero();
        for i in 0..nodes {
            let v = &traj.v_fast[i] + &traj.v_slow[i];
            let f = self.sys.f.evaluate(&traj.u[i], &v, self.res);
            fu.push(if self.kind == LpKind::Galerkin { project_slow(&f, k0) } else { f });
            if !g_zero {
                gv.push(self.sys.g.evaluate(&traj.u[i], &v, self.res));
            }
        }
        let real = self.real;
        let zero = FourierField::zeros(self.res, real);
        let forward = 0..nodes;
        let u = if self.sys.f.is_zero() {
            vec![zero.clone(); nodes]
        } else {
            self.tail_check(&fu[0], 1.0 / self.sys.epsilon, self.rates.decay_u, self.rates.growth_u, SobolevIndex::x(self.n))?;
            self.ku.sweep(&fu, forward.clone(), real)
        };
        let (v_fast, v_slow) = if g_zero {
            (vec![zero; nodes], self.vs_free.clone())
        } else {
            let v_fast = if self.kind == LpKind::Direct {
                let gf: Vec<_> = gv.iter().map(|g| project_fast(g, k0)).collect();
                self.tail_check(&gf[0], 1.0, self.rates.decay_v, self.rates.growth_v, SobolevIndex::y(self.n))?;
                self.kvf.sweep(&gf, forward, real)
            } else {
                vec![zero; nodes]
            };
            let gs: Vec<_> = gv.iter().map(|g| project_slow(g, k0)).collect();
            let j = self.kvs.sweep(&gs, (0..nodes).rev(), real);
            let v_slow = self.vs_free.iter().zip(&j).map(|(a, b)| a - b).collect();
            (v_fast, v_slow)
        };
        Ok(HistoryTrajectory { kind: self.kind, times: self.times.clone(), u, v_fast, v_slow, eta: traj.eta, n: traj.n })
    }
}

fn grid_of(traj: &HistoryTrajectory) -> Result<LpGrid> {
    let h = traj.step();
    if traj.len() < 2 || traj.times[traj.len() - 1] != 0.0 || !(h > 0.0) {
        return Err(Error::Invalid("history grid must be increasing and end at 0".into()));
    }
    let uniform = traj.times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
    if !uniform {
        return Err(Error::Invalid("history grid must be uniform".into()));
    }
    Ok(LpGrid { horizon: traj.horizon(), step: h, nodes: traj.len() })
}

fn lp_apply(
    kind: LpKind,
    traj: &HistoryTrajectory,
    v0s: &FourierField,
    sys: &FastSlowSystem,
    split: &SpectralSplit,
    opts: &LpOptions,
) -> Result<HistoryTrajectory> {
    let grid = grid_of(traj)?;
    LpOperator::new(kind, v0s, sys, split, &grid, opts)?.apply(traj)
}

/// One application of the direct operator on the grid of `traj`.
pub fn lp_apply_direct(
    traj: &HistoryTrajectory,
    v0s: &FourierField,
    sys: &FastSlowSystem,
    split: &SpectralSplit,
    opts: &LpOptions,
) -> Result<HistoryTrajectory> {
    lp_apply(LpKind::Direct, traj, v0s, sys, split, opts)
}

/// One application of the Galerkin operator on the grid of `traj`.
pub fn lp_apply_galerkin(
    traj: &HistoryTrajectory,
    v0s: &FourierField,
    sys: &FastSlowSystem,
    split: &SpectralSplit,
    opts: &LpOptions,
) -> Result<HistoryTrajectory> {
    lp_apply(LpKind::Galerkin, traj, v0s, sys, split, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpDiagnostics {
    pub iterations: usize,
    pub displacements: Vec<f64>,
    /// Successive displacement quotients.
    pub ratios: Vec<f64>,
    pub observed_ratio: f64,
    pub contraction_constant: f64,
    /// Weighted norm of `LP(traj) - traj` at the returned trajectory.
    pub residual: f64,
    pub grid: LpGrid,
    pub resolution: usize,
}

/// Picard iteration from `(0, 0, e^{tB} v0S)`.
///
/// Refuses outside the timescale gate. Three consecutive displacement quotients
/// at or above one abort with [`Error::ContractionViolated`].
pub fn solve_fixed_point(
    kind: LpKind,
    v0s: &FourierField,
    sys: &FastSlowSystem,
    split: &SpectralSplit,
    opts: &LpOptions,
) -> Result<(HistoryTrajectory, LpDiagnostics)> {
    let bound = contraction_constant(sys, split)?;
    if bound >= 1.0 {
        log::warn!("contraction estimate {bound} is not below one; iterating anyway");
    }
    let grid = select_grid(kind, v0s, sys, split, opts)?;
    let op = LpOperator::new(kind, v0s, sys, split, &grid, opts)?;
    let mut traj = op.initial_guess();
    let mut displacements = Vec::new();
    let mut ratios = Vec::new();
    let mut streak = 0;
    for it in 1..=opts.max_iter {
        let next = op.apply(&traj)?;
        let d = next.weighted_distance(&traj);
        if let Some(&prev) = displacements.last() {
            let r: f64 = if prev > 0.0 { d / prev } else { 0.0 };
            ratios.push(r);
            streak = if r >= 1.0 { streak + 1 } else { 0 };
            if streak >= 3 {
                return Err(Error::ContractionViolated { ratios });
            }
        }
        displacements.push(d);
        traj = next;
        if !d.is_finite() {
            return Err(Error::NoConvergence { iterations: it, displacement: d });
        }
        if d < opts.tol {
            let residual = op.apply(&traj)?.weighted_distance(&traj);
            let observed_ratio = ratios.iter().cloned().fold(0.0, f64::max);
            let diag = LpDiagnostics {
                iterations: it,
                displacements,
                ratios,
                observed_ratio,
                contraction_constant: bound,
                residual,
                grid,
                resolution: op.resolution(),
            };
            return Ok((traj, diag));
        }
    }
    Err(Error::IterationCap { cap: opts.max_iter, displacement: displacements.last().copied().unwrap_or(f64::NAN) })
}

/// `(u(0), v_F(0))`, the graph value at the last node.
pub fn extract_graph(traj: &HistoryTrajectory) -> (FourierField, FourierField) {
    let last = traj.len() - 1;
    (traj.u[last].clone(), traj.v_fast[last].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::galerkin_manifold_explicit;
    use crate::system::{Monomial, PolynomialNonlinearity};

    fn setup(k0: usize, eps: f64) -> (FastSlowSystem, SpectralSplit) {
        let sys = FastSlowSystem::quadratic_example(eps, 4 * k0.max(1));
        let split = SpectralSplit::for_cutoff(&sys.op_b, k0, sys.constants.omega_a);
        (sys, split)
    }

    fn sample(k0: usize) -> FourierField {
        FourierField::from_fn(k0, true, |k| Complex64::new(0.02 / (1 + k * k) as f64, 0.01 * k as f64))
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let (sys, split) = setup(1, 1e-3);
        for kind in [LpKind::Direct, LpKind::Galerkin] {
            let (traj, diag) =
                solve_fixed_point(kind, &FourierField::zeros(1, true), &sys, &split, &LpOptions::default()).unwrap();
            assert_eq!(diag.iterations, 1);
            let (u, vf) = extract_graph(&traj);
            assert!(u.is_zero() && vf.is_zero());
            assert_eq!(traj.weighted_norm(), 0.0);
        }
    }

    #[test]
    fn g_zero_keeps_free_slow_flow() {
        let (sys, split) = setup(1, 1e-3);
        let v0 = sample(1);
        let (traj, _) = solve_fixed_point(LpKind::Direct, &v0, &sys, &split, &LpOptions::default()).unwrap();
        for (i, &t) in traj.times.iter().enumerate().step_by(97) {
            assert!(traj.v_fast[i].is_zero());
            let free = v0.resized(traj.resolution()).map_modes(|k, c| c * (sys.op_b.multiplier(k) * t).exp());
            assert!(traj.v_slow[i].l2_distance(&free) < 1e-14 * (1.0 + free.max_abs()));
        }
    }

    #[test]
    fn constant_mode_matches_formula() {
        let (sys, split) = setup(1, 1e-3);
        let a = 0.05;
        let v0 = FourierField::mode(0, 1).scale(a);
        let (traj, _) = solve_fixed_point(LpKind::Direct, &v0, &sys, &split, &LpOptions::default()).unwrap();
        let (u, _) = extract_graph(&traj);
        assert!((u.get(0).re - a * a / (1.0 - 2.0 * sys.epsilon)).abs() < 1e-10);
    }

    #[test]
    fn galerkin_matches_projected_formula() {
        let (sys, split) = setup(2, 1e-3);
        let v0 = sample(2);
        let (traj, diag) = solve_fixed_point(LpKind::Galerkin, &v0, &sys, &split, &LpOptions::default()).unwrap();
        assert!(diag.residual < 1e-11);
        let (u, _) = extract_graph(&traj);
        let exact = project_slow(&galerkin_manifold_explicit(&v0, sys.epsilon, 2).unwrap(), 2);
        assert!(u.l2_distance(&exact.resized(2)) < 1e-9, "{}", u.l2_distance(&exact.resized(2)));
    }

    #[test]
    fn gate_is_enforced() {
        let (sys, split) = setup(1, 1e-2);
        let r = solve_fixed_point(LpKind::Galerkin, &sample(1), &sys, &split, &LpOptions::default());
        assert!(matches!(r, Err(Error::TimescaleOrderViolated { .. })));
    }

    #[test]
    fn divergent_tail_is_reported() {
        let sys = FastSlowSystem::quadratic_example(4e-3, 8);
        let split = SpectralSplit::for_cutoff(&sys.op_b, 2, -0.95);
        assert!(matches!(
            tail_rates(LpKind::Galerkin, &sys, &split, &LpOptions::default()),
            Err(Error::TailToleranceUnreachable { .. })
        ));
    }

    #[test]
    fn u_dependent_nonlinearity_contracts() {
        // f = v^2 + 0.5 u v exercises genuine Picard iteration
        let (mut sys, split) = setup(1, 1e-3);
        sys.f = PolynomialNonlinearity {
            monomials: vec![Monomial { coeff: 1.0, pu: 0, pv: 2 }, Monomial { coeff: 0.5, pu: 1, pv: 1 }],
        };
        let v0 = sample(1);
        let (_, diag) = solve_fixed_point(LpKind::Direct, &v0, &sys, &split, &LpOptions::default()).unwrap();
        assert!(diag.iterations > 2);
        assert!(diag.observed_ratio <= diag.contraction_constant + 0.05, "{diag:?}");
    }

    #[test]
    fn apply_at_fixed_point_is_stationary() {
        let (sys, split) = setup(1, 1e-3);
        let v0 = sample(1);
        let opts = LpOptions::default();
        let (traj, _) = solve_fixed_point(LpKind::Direct, &v0, &sys, &split, &opts).unwrap();
        let again = lp_apply_direct(&traj, &v0, &sys, &split, &opts).unwrap();
        assert!(again.weighted_distance(&traj) < opts.tol);
    }
}
