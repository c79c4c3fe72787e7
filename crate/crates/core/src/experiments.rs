//! Parameter sweeps over `(epsilon, k0)` and seeded slow samples: the
//! direct-versus-Galerkin comparison, scaling fits, distance to the critical
//! manifold and the slow-subsystem approximation error.
//!
//! Rows come out in grid order regardless of `--jobs`, and floats are written
//! with shortest round-trip formatting, so identical inputs give identical CSV bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::Config;
use crate::dynamics::{integrate_with, linear_fit, FlowState, IntegrateOptions, Variant};
use crate::error::{Error, Result};
use crate::lyapunov_perron::{LpKind, LpOptions};
use crate::manifolds::{critical_manifold_solve, galerkin_manifold_explicit, GraphKind, ManifoldGraph};
use crate::spectral::{project_fast, sobolev_norm, FourierField, SobolevIndex, SpectralSplit, FOUR_PI_SQ};
use crate::system::{gate_threshold, FastSlowSystem};

/// How the two graphs of a comparison are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMethod {
    /// Lyapunov-Perron fixed points.
    #[default]
    Lp,
    /// Closed form of the quadratic example.
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub epsilons: Vec<f64>,
    pub k0s: Vec<usize>,
    pub m: u32,
    pub n: u32,
    pub samples: usize,
    /// `|v0S|_{Y_n}` of every sample.
    pub sample_norm: f64,
    pub graph_method: GraphMethod,
    pub scaling_k0s: Vec<usize>,
    /// Values of `n - m` for the scaling fits.
    pub scaling_gaps: Vec<u32>,
    /// `epsilon / threshold` held fixed along the `k0` sweep.
    pub scaling_gate_fraction: f64,
    pub scaling_epsilons: Vec<f64>,
    pub scaling_method: GraphMethod,
    pub slow_t_end: f64,
    pub slow_dt: f64,
    pub slow_offset: f64,
    pub out_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            epsilons: vec![1e-3, 1e-2],
            k0s: vec![1, 2, 3, 4],
            m: 0,
            n: 1,
            samples: 20,
            sample_norm: 1.0,
            graph_method: GraphMethod::Lp,
            scaling_k0s: (2..=8).collect(),
            scaling_gaps: vec![0, 1, 2],
            scaling_gate_fraction: 0.5,
            scaling_epsilons: vec![1.2e-3, 8e-4, 5e-4, 3e-4, 2e-4, 1.5e-4, 1e-4],
            scaling_method: GraphMethod::Explicit,
            slow_t_end: 1.0,
            slow_dt: 1e-3,
            slow_offset: 1e-2,
            out_dir: "out".into(),
        }
    }
}

/// Seeded slow field on `|k| <= k0`, real, with `|v|_{Y_n} = norm`.
///
/// The stream depends on `(seed, k0, index)` only.
pub fn sample_slow_field(seed: u64, k0: usize, index: usize, n: f64, norm: f64) -> FourierField {
    let stream = seed ^ ((k0 as u64) << 40) ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let f = FourierField::from_fn(k0, true, |k| {
        let re = rng.gen_range(-1.0..1.0);
        let im = if k == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
        Complex64::new(re, im)
    });
    f.scale(norm / sobolev_norm(&f, SobolevIndex::y(n)))
}

pub fn sample_slow_fields(seed: u64, k0: usize, count: usize, n: f64, norm: f64) -> Vec<FourierField> {
    (0..count).map(|i| sample_slow_field(seed, k0, i, n, norm)).collect()
}

/// `(zeta^{n-m} / (N_S - N_F)^{delta_Y}, zeta^{n-m+gamma_X})`.
pub fn bound_terms(sys: &FastSlowSystem, split: &SpectralSplit, m: u32, n: u32) -> (f64, f64) {
    let d = n as f64 - m as f64;
    let k = &sys.constants;
    (split.zeta.powf(d) / split.gap().powf(k.delta_y), split.zeta.powf(d + k.gamma_x))
}

/// System and split of one grid point, with the resolution wide enough for the direct graph.
pub fn point_system(cfg: &Config, epsilon: f64, k0: usize) -> (FastSlowSystem, SpectralSplit) {
    let mut sys = cfg.system().with_epsilon(epsilon);
    sys.resolution = cfg.lp.resolution(LpKind::Direct, k0).max(2 * k0);
    let split = SpectralSplit::for_cutoff(&sys.op_b, k0, sys.constants.omega_a);
    (sys, split)
}

fn graph_pair(method: GraphMethod, sys: &FastSlowSystem, split: &SpectralSplit, lp: &LpOptions) -> (ManifoldGraph, ManifoldGraph) {
    let (d, g) = match method {
        GraphMethod::Lp => (GraphKind::DirectLp, GraphKind::GalerkinLp),
        GraphMethod::Explicit => (GraphKind::DirectExplicit, GraphKind::GalerkinExplicit),
    };
    let mut direct = ManifoldGraph::new(d, sys.clone(), *split);
    let mut galerkin = ManifoldGraph::new(g, sys.clone(), *split);
    direct.lp = lp.clone();
    galerkin.lp = lp.clone();
    (direct, galerkin)
}

/// `|h_X - h_G|_{X_m} + |h_{Y_F}|_{Y_m}`.
pub fn comparison_lhs(
    method: GraphMethod,
    sys: &FastSlowSystem,
    split: &SpectralSplit,
    lp: &LpOptions,
    v0s: &FourierField,
    m: u32,
) -> Result<f64> {
    let (direct, galerkin) = graph_pair(method, sys, split, lp);
    let (ux, vf) = direct.evaluate(v0s)?;
    let (ug, _) = galerkin.evaluate(v0s)?;
    Ok(sobolev_norm(&(&ux - &ug), SobolevIndex::x(m as f64)) + sobolev_norm(&vf, SobolevIndex::y(m as f64)))
}

/// The fast-mode tail `k0 < |k| <= 2 k0` of the slow-manifold formula in `X_m`.
pub fn analytic_tail(v0s: &FourierField, epsilon: f64, k0: usize, m: u32) -> Result<f64> {
    let u = galerkin_manifold_explicit(v0s, epsilon, k0)?;
    Ok(sobolev_norm(&project_fast(&u, k0), SobolevIndex::x(m as f64)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub epsilon: f64,
    pub zeta: f64,
    pub k0: usize,
    pub m: u32,
    pub n: u32,
    pub sample: usize,
    pub lhs: f64,
    /// Closed-form value of `lhs`, for the quadratic example only.
    pub analytic: Option<f64>,
    pub term1: f64,
    pub term2: f64,
    pub ratio: f64,
    pub v_norm: f64,
}

/// A grid point that produced no row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skip {
    pub epsilon: f64,
    pub k0: usize,
    pub sample: usize,
    pub category: String,
    pub message: String,
}

impl Skip {
    fn new(epsilon: f64, k0: usize, sample: usize, e: &Error) -> Self {
        Skip { epsilon, k0, sample, category: e.category().into(), message: e.to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table<R> {
    pub rows: Vec<R>,
    pub skips: Vec<Skip>,
}

impl<R: Serialize> Table<R> {
    pub fn write_rows<W: Write>(&self, w: W) -> Result<()> {
        write_csv(&self.rows, w)
    }

    pub fn write_skips<W: Write>(&self, w: W) -> Result<()> {
        write_csv(&self.skips, w)
    }
}

/// Serialises rows with a header; an empty table still gets its header from the type.
pub fn write_csv<R: Serialize, W: Write>(rows: &[R], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn grid(cfg: &Config) -> Vec<(f64, usize, usize)> {
    let e = &cfg.experiment;
    let mut pts = Vec::new();
    for &eps in &e.epsilons {
        for &k0 in &e.k0s {
            for s in 0..e.samples {
                pts.push((eps, k0, s));
            }
        }
    }
    pts
}

fn check_sample_norm(cfg: &Config) {
    if cfg.experiment.sample_norm > cfg.constants.working_ball_radius {
        log::warn!(
            "sample norm {} exceeds the working-ball radius {} on which L_f is declared",
            cfg.experiment.sample_norm,
            cfg.constants.working_ball_radius
        );
    }
}

fn split_results<R>(pts: &[(f64, usize, usize)], results: Vec<Result<R>>) -> Table<R> {
    let mut table = Table { rows: Vec::new(), skips: Vec::new() };
    for (&(eps, k0, s), r) in pts.iter().zip(results) {
        match r {
            Ok(row) => table.rows.push(row),
            Err(e) => table.skips.push(Skip::new(eps, k0, s, &e)),
        }
    }
    table
}

/// One row per `(epsilon, k0, sample)`; failures become skips.
pub fn compare_manifolds(cfg: &Config) -> Result<Table<ComparisonRow>> {
    check_sample_norm(cfg);
    let e = &cfg.experiment;
    let pts = grid(cfg);
    let results: Vec<Result<ComparisonRow>> = pts
        .par_iter()
        .map(|&(eps, k0, s)| {
            let (sys, split) = point_system(cfg, eps, k0);
            let v = sample_slow_field(cfg.seed, k0, s, e.n as f64, e.sample_norm);
            let lhs = comparison_lhs(e.graph_method, &sys, &split, &cfg.lp, &v, e.m)?;
            let analytic = if sys.is_quadratic_example() { Some(analytic_tail(&v, eps, k0, e.m)?) } else { None };
            let (term1, term2) = bound_terms(&sys, &split, e.m, e.n);
            Ok(ComparisonRow {
                epsilon: eps,
                zeta: split.zeta,
                k0,
                m: e.m,
                n: e.n,
                sample: s,
                lhs,
                analytic,
                term1,
                term2,
                ratio: lhs / (term1 + term2),
                v_norm: sobolev_norm(&v, SobolevIndex::y(e.n as f64)),
            })
        })
        .collect();
    Ok(split_results(&pts, results))
}

/// Least-squares slope with a two-sided 95% Student interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub r_squared: f64,
}

pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints { have: points.len(), need: 3 });
    }
    let (a, b, r2) = linear_fit(points);
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let ssr: f64 = points.iter().map(|p| (p.1 - a * p.0 - b).powi(2)).sum();
    let se = (ssr / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0).map_err(|e| Error::Invalid(e.to_string()))?.inverse_cdf(0.975);
    Ok(SlopeFit { slope: a, intercept: b, ci_low: a - t * se, ci_high: a + t * se, r_squared: r2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    K0,
    Epsilon,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub sweep: Sweep,
    pub gap: u32,
    pub epsilon: f64,
    pub k0: usize,
    /// Largest LHS over the samples.
    pub lhs_max: f64,
    pub lhs_mean: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub sweep: Sweep,
    pub gap: u32,
    pub m: u32,
    pub n: u32,
    pub expected: f64,
    pub fit: SlopeFit,
    /// Slope of the mean LHS, for comparison with the worst case.
    pub mean_slope: f64,
    /// Slope of `term1 + term2`, the structural bound itself.
    pub bound_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub fits: Vec<ScalingFit>,
    pub skips: Vec<Skip>,
    /// `LHS(2 v) / LHS(v)`; `2` for a bound linear in `|v0S|`, `4` for the quadratic example.
    pub homogeneity_ratio: f64,
}

/// Largest `k0` with `k0 < sqrt(c |omega_f| / (4 pi^2 epsilon)) - 2`, if any.
pub fn k0_for_epsilon(sys: &FastSlowSystem, epsilon: f64) -> Option<usize> {
    let x = (sys.gate_c * sys.constants.omega_f.abs() / (FOUR_PI_SQ * epsilon)).sqrt() - 2.0;
    let k = x.ceil() - 1.0;
    if k >= 1.0 {
        Some(k as usize)
    } else {
        None
    }
}

fn scaling_point(cfg: &Config, sweep: Sweep, gap: u32, eps: f64, k0: usize) -> Result<ScalingPoint> {
    let e = &cfg.experiment;
    let (m, n) = (e.m, e.m + gap);
    let (sys, split) = point_system(cfg, eps, k0);
    let mut lhs = Vec::with_capacity(e.samples);
    for s in 0..e.samples {
        let v = sample_slow_field(cfg.seed, k0, s, n as f64, e.sample_norm);
        lhs.push(comparison_lhs(e.scaling_method, &sys, &split, &cfg.lp, &v, m)?);
    }
    let (t1, t2) = bound_terms(&sys, &split, m, n);
    Ok(ScalingPoint {
        sweep,
        gap,
        epsilon: eps,
        k0,
        lhs_max: lhs.iter().cloned().fold(0.0, f64::max),
        lhs_mean: lhs.iter().sum::<f64>() / lhs.len().max(1) as f64,
        bound: t1 + t2,
    })
}

/// Log-log slopes of the comparison LHS along a `k0` sweep (at a fixed fraction
/// of the gate threshold) and along an `epsilon` sweep (with `k0` tied to it).
pub fn scaling_study(cfg: &Config) -> Result<ScalingReport> {
    check_sample_norm(cfg);
    let e = &cfg.experiment;
    let base = cfg.system();
    let mut tasks: Vec<(Sweep, u32, f64, usize)> = Vec::new();
    let mut skips = Vec::new();
    for &gap in &e.scaling_gaps {
        for &k0 in &e.scaling_k0s {
            let split = SpectralSplit::for_cutoff(&base.op_b, k0, base.constants.omega_a);
            let eps = e.scaling_gate_fraction * gate_threshold(split.zeta, base.gate_c, &base.constants);
            tasks.push((Sweep::K0, gap, eps, k0));
        }
        for &eps in &e.scaling_epsilons {
            match k0_for_epsilon(&base, eps) {
                Some(k0) => tasks.push((Sweep::Epsilon, gap, eps, k0)),
                None => skips.push(Skip::new(eps, 0, 0, &Error::Invalid("no admissible k0 for this epsilon".into()))),
            }
        }
    }
    let results: Vec<Result<ScalingPoint>> =
        tasks.par_iter().map(|&(sw, gap, eps, k0)| scaling_point(cfg, sw, gap, eps, k0)).collect();
    let mut points = Vec::new();
    for (&(_, _, eps, k0), r) in tasks.iter().zip(results) {
        match r {
            Ok(p) => points.push(p),
            Err(err) => skips.push(Skip::new(eps, k0, 0, &err)),
        }
    }
    let mut fits = Vec::new();
    for &gap in &e.scaling_gaps {
        for sweep in [Sweep::K0, Sweep::Epsilon] {
            let sel: Vec<&ScalingPoint> = points.iter().filter(|p| p.sweep == sweep && p.gap == gap).collect();
            let x = |p: &ScalingPoint| match sweep {
                Sweep::K0 => (p.k0 as f64).ln(),
                Sweep::Epsilon => p.epsilon.ln(),
            };
            let fit = fit_slope(&sel.iter().map(|p| (x(p), p.lhs_max.ln())).collect::<Vec<_>>())?;
            let mean_slope = fit_slope(&sel.iter().map(|p| (x(p), p.lhs_mean.ln())).collect::<Vec<_>>())?.slope;
            let bound_slope = fit_slope(&sel.iter().map(|p| (x(p), p.bound.ln())).collect::<Vec<_>>())?.slope;
            let expected = match sweep {
                Sweep::K0 => -(2.0 * gap as f64 + 1.0),
                Sweep::Epsilon => gap as f64 + 0.5,
            };
            fits.push(ScalingFit { sweep, gap, m: e.m, n: e.m + gap, expected, fit, mean_slope, bound_slope });
        }
    }
    let homogeneity_ratio = {
        let k0 = e.scaling_k0s.first().copied().unwrap_or(2);
        let (sys, split) = point_system(cfg, e.scaling_gate_fraction * gate_threshold(
            SpectralSplit::for_cutoff(&base.op_b, k0, base.constants.omega_a).zeta,
            base.gate_c,
            &base.constants,
        ), k0);
        let v = sample_slow_field(cfg.seed, k0, 0, e.n as f64, e.sample_norm);
        let one = comparison_lhs(e.scaling_method, &sys, &split, &cfg.lp, &v, e.m)?;
        let two = comparison_lhs(e.scaling_method, &sys, &split, &cfg.lp, &v.scale(2.0), e.m)?;
        two / one
    };
    Ok(ScalingReport { points, fits, skips, homogeneity_ratio })
}

impl ScalingReport {
    pub fn write_points<W: Write>(&self, w: W) -> Result<()> {
        write_csv(&self.points, w)
    }

    pub fn write_fits<W: Write>(&self, w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Flat {
            sweep: Sweep,
            gap: u32,
            m: u32,
            n: u32,
            expected: f64,
            slope: f64,
            ci_low: f64,
            ci_high: f64,
            r_squared: f64,
            mean_slope: f64,
            bound_slope: f64,
        }
        let rows: Vec<Flat> = self
            .fits
            .iter()
            .map(|f| Flat {
                sweep: f.sweep,
                gap: f.gap,
                m: f.m,
                n: f.n,
                expected: f.expected,
                slope: f.fit.slope,
                ci_low: f.fit.ci_low,
                ci_high: f.fit.ci_high,
                r_squared: f.fit.r_squared,
                mean_slope: f.mean_slope,
                bound_slope: f.bound_slope,
            })
            .collect();
        write_csv(&rows, w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceRow {
    pub epsilon: f64,
    pub zeta: f64,
    pub k0: usize,
    pub sample: usize,
    /// `|h_X - h0|_{X_m} + |h_{Y_F}|_{Y_m}`.
    pub distance: f64,
    /// `epsilon + (N_S - N_F)^{-delta_Y}`.
    pub bound: f64,
    pub ratio: f64,
}

pub fn distance_to_critical(cfg: &Config) -> Result<Table<DistanceRow>> {
    check_sample_norm(cfg);
    let e = &cfg.experiment;
    let pts = grid(cfg);
    let results: Vec<Result<DistanceRow>> = pts
        .par_iter()
        .map(|&(eps, k0, s)| {
            let (sys, split) = point_system(cfg, eps, k0);
            let v = sample_slow_field(cfg.seed, k0, s, e.n as f64, e.sample_norm);
            let (direct, _) = graph_pair(e.graph_method, &sys, &split, &cfg.lp);
            let (ux, vf) = direct.evaluate(&v)?;
            let h0 = critical_manifold_solve(&sys, &v, 1e-13)?;
            let m = e.m as f64;
            let distance = sobolev_norm(&(&ux - &h0), SobolevIndex::x(m)) + sobolev_norm(&vf, SobolevIndex::y(m));
            let bound = eps + split.gap().powf(-sys.constants.delta_y);
            Ok(DistanceRow { epsilon: eps, zeta: split.zeta, k0, sample: s, distance, bound, ratio: distance / bound })
        })
        .collect();
    Ok(split_results(&pts, results))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlowStart {
    OnManifold,
    Critical,
    Offset,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlowErrorRow {
    pub epsilon: f64,
    pub k0: usize,
    pub start: SlowStart,
    pub t: f64,
    /// `|u - h0(v0)|_{X_m} + |v - v0|_{Y_m}` against the reduced slow solution.
    pub error: f64,
    /// `e^{omega_f t / epsilon} |u(0) - h0(v(0))|_{X_m}`.
    pub layer_term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerFit {
    pub epsilon: f64,
    pub k0: usize,
    /// Fitted decay of the off-manifold error while it dominates.
    pub rate: f64,
    /// `|omega_f| / epsilon`.
    pub reference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlowErrorReport {
    pub rows: Vec<SlowErrorRow>,
    pub fits: Vec<LayerFit>,
    pub skips: Vec<Skip>,
}

fn slow_point(cfg: &Config, eps: f64, k0: usize) -> Result<(Vec<SlowErrorRow>, Option<LayerFit>)> {
    let e = &cfg.experiment;
    let (sys, split) = point_system(cfg, eps, k0);
    let m = e.m as f64;
    let v0 = sample_slow_field(cfg.seed, k0, 0, e.n as f64, e.sample_norm).resized(sys.resolution);
    let opts = IntegrateOptions { scheme: cfg.dynamics.scheme, stride: cfg.dynamics.stride, ..Default::default() };
    let reduced = integrate_with(
        &sys,
        &FlowState { t: 0.0, u: FourierField::zeros(sys.resolution, true), v: v0.clone() },
        e.slow_dt,
        e.slow_t_end,
        Variant::ReducedSlow { k0 },
        &opts,
    )?;
    let h0 = critical_manifold_solve(&sys, &v0, 1e-13)?;
    let (direct, _) = graph_pair(e.graph_method, &sys, &split, &cfg.lp);
    let mut rows = Vec::new();
    let mut offset_series = Vec::new();
    let mut critical_floor: f64 = 0.0;
    for start in [SlowStart::OnManifold, SlowStart::Critical, SlowStart::Offset] {
        let u0 = match start {
            SlowStart::OnManifold => direct.evaluate(&v0)?.0,
            SlowStart::Critical => h0.clone(),
            SlowStart::Offset => h0.axpy(e.slow_offset, &FourierField::mode(0, sys.resolution)),
        };
        let initial = sobolev_norm(&(&u0 - &h0), SobolevIndex::x(m));
        let full = integrate_with(&sys, &FlowState { t: 0.0, u: u0, v: v0.clone() }, e.slow_dt, e.slow_t_end, Variant::Full, &opts)?;
        for (a, b) in full.iter().zip(&reduced) {
            let v_red = b.v.resized(sys.resolution);
            let error = sobolev_norm(&(&a.u - &b.u), SobolevIndex::x(m)) + sobolev_norm(&(&a.v - &v_red), SobolevIndex::y(m));
            let layer_term = (sys.constants.omega_f * a.t / eps).exp() * initial;
            match start {
                SlowStart::Critical => critical_floor = critical_floor.max(error),
                SlowStart::Offset => offset_series.push((a.t, error)),
                SlowStart::OnManifold => {}
            }
            rows.push(SlowErrorRow { epsilon: eps, k0, start, t: a.t, error, layer_term });
        }
    }
    let window: Vec<(f64, f64)> =
        offset_series.iter().take_while(|p| p.1 > 100.0 * critical_floor).map(|p| (p.0, p.1.ln())).collect();
    let fit = if window.len() >= 3 {
        let (slope, _, _) = linear_fit(&window);
        Some(LayerFit { epsilon: eps, k0, rate: -slope, reference: sys.constants.omega_f.abs() / eps })
    } else {
        None
    };
    Ok((rows, fit))
}

/// Full system against the reduced slow subsystem for three starts: on the slow
/// manifold, on the critical manifold, and off it by `slow_offset` in mode 0.
pub fn slow_subsystem_error(cfg: &Config) -> Result<SlowErrorReport> {
    let e = &cfg.experiment;
    let pts: Vec<(f64, usize)> = e.epsilons.iter().flat_map(|&eps| e.k0s.iter().map(move |&k| (eps, k))).collect();
    let results: Vec<_> = pts.par_iter().map(|&(eps, k0)| slow_point(cfg, eps, k0)).collect();
    let mut report = SlowErrorReport { rows: Vec::new(), fits: Vec::new(), skips: Vec::new() };
    for (&(eps, k0), r) in pts.iter().zip(results) {
        match r {
            Ok((rows, fit)) => {
                report.rows.extend(rows);
                report.fits.extend(fit);
            }
            Err(err) => report.skips.push(Skip::new(eps, k0, 0, &err)),
        }
    }
    Ok(report)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    seed: u64,
    config_sha256: String,
    files: Vec<String>,
}

/// Writes `manifest.toml` next to the outputs: tool version, command, seed and config hash.
pub fn write_manifest(dir: &Path, cfg: &Config, command: &str, files: &[PathBuf]) -> Result<PathBuf> {
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cfg.seed,
        config_sha256: cfg.hash()?,
        files: files.iter().filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect(),
    };
    let path = dir.join("manifest.toml");
    std::fs::write(&path, toml::to_string(&m).map_err(|e| Error::Config(e.to_string()))?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Config {
        let mut cfg = Config::default();
        cfg.experiment.epsilons = vec![1e-3];
        cfg.experiment.k0s = vec![1];
        cfg.experiment.samples = 2;
        cfg
    }

    #[test]
    fn samples_are_normalised_and_seeded() {
        let a = sample_slow_field(1, 3, 0, 1.0, 1.0);
        assert!((sobolev_norm(&a, SobolevIndex::y(1.0)) - 1.0).abs() < 1e-14);
        assert_eq!(a, sample_slow_field(1, 3, 0, 1.0, 1.0));
        assert_ne!(a, sample_slow_field(2, 3, 0, 1.0, 1.0));
        assert!(a.is_real() && a.support_max() == Some(3));
    }

    #[test]
    fn zero_sample_has_zero_lhs() {
        let cfg = small();
        let (sys, split) = point_system(&cfg, 1e-3, 1);
        let z = FourierField::zeros(1, true);
        assert_eq!(comparison_lhs(GraphMethod::Lp, &sys, &split, &cfg.lp, &z, 0).unwrap(), 0.0);
    }

    #[test]
    fn bookkeeping_counts_every_point() {
        let mut cfg = small();
        cfg.experiment.epsilons = vec![1e-3, 1e-2];
        let t = compare_manifolds(&cfg).unwrap();
        assert_eq!(t.rows.len() + t.skips.len(), 2 * 2);
        assert_eq!(t.rows.len(), 2);
        assert!(t.skips.iter().all(|s| s.category == "timescale_order_violated"));
        for r in &t.rows {
            assert!((r.lhs - r.analytic.unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn distance_on_constant_mode() {
        // only mode 0: h_X - h0 = a^2 (1/(1 - 2 eps) - 1)
        let cfg = small();
        let (sys, split) = point_system(&cfg, 1e-3, 1);
        let a = 0.3;
        let v = FourierField::mode(0, 1).scale(a);
        let g = ManifoldGraph::new(GraphKind::DirectExplicit, sys.clone(), split);
        let (ux, _) = g.evaluate(&v).unwrap();
        let h0 = critical_manifold_solve(&sys, &v, 1e-14).unwrap();
        let d = (ux.get(0) - h0.get(0)).re;
        assert!((d - 2.0 * 1e-3 * a * a / (1.0 - 2e-3)).abs() < 1e-15);
    }

    #[test]
    fn k0_from_epsilon() {
        let sys = FastSlowSystem::quadratic_example(1e-3, 8);
        for eps in [1e-3, 3e-4, 1e-4] {
            let k0 = k0_for_epsilon(&sys, eps).unwrap();
            let bound = (sys.gate_c * sys.constants.omega_f.abs() / (FOUR_PI_SQ * eps)).sqrt() - 2.0;
            assert!((k0 as f64) < bound && (k0 + 1) as f64 >= bound);
        }
        assert!(k0_for_epsilon(&sys, 0.1).is_none());
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = (1..6).map(|k| ((k as f64).ln(), 2.0 - 3.0 * (k as f64).ln())).collect();
        let f = fit_slope(&pts).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-12);
        assert!(fit_slope(&pts[..2]).is_err());
    }

    #[test]
    fn csv_is_deterministic() {
        let cfg = small();
        let write = || {
            let mut buf = Vec::new();
            compare_manifolds(&cfg).unwrap().write_rows(&mut buf).unwrap();
            buf
        };
        assert_eq!(write(), write());
    }
}
