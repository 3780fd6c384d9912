//! Instance-based half-quadratic splitting for
//! `||F_Omega x - y||^2 + alpha TV(x) + beta ||W x||_1`.
//!
//! The regularizer acts on the real and imaginary planes independently and the
//! two contributions are summed.

use alloc::vec::Vec;

use crate::clock::{Clock, NoClock};
use crate::error::{bail, Result};
use crate::forward::{data_residual_sq, dc_update, zero_filled, Measurements};
use crate::grid::{ComplexGrid, RealGrid};
use crate::numerics::{dwt2, idwt2, sign, tv_subgrad, tv_value, WaveletCoeffs, DEFAULT_LEVELS};

#[derive(Debug, Clone, PartialEq)]
pub struct HqsConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub outer_max: usize,
    /// Relative change of the objective between outer iterations.
    pub outer_tol: f64,
    pub inner_max: usize,
    pub inner_step: f64,
    /// Relative change of the iterate between inner steps.
    pub inner_tol: f64,
}

impl Default for HqsConfig {
    fn default() -> Self {
        Self {
            lambda: 1.8,
            alpha: 0.005,
            beta: 0.002,
            outer_max: 50,
            outer_tol: 1e-5,
            inner_max: 100,
            inner_step: 1e-2,
            inner_tol: 1e-4,
        }
    }
}

impl HqsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.alpha >= 0.0 && self.beta >= 0.0) {
            bail!(Domain, "lambda, alpha and beta must be nonnegative");
        }
        if !(self.outer_tol > 0.0 && self.inner_tol > 0.0 && self.inner_step > 0.0) {
            bail!(Domain, "tolerances and the inner step must be positive");
        }
        if self.outer_max == 0 || self.inner_max == 0 {
            bail!(Domain, "iteration caps must be positive");
        }
        Ok(())
    }
}

/// Objectives below this are treated as zero by the stopping rule.
const OBJECTIVE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Best objective seen after each outer iteration (index 0 is the
    /// zero-filled start), hence non-increasing.
    pub objective_trace: Vec<f64>,
    /// Objective of each raw iterate, same indexing; HQS need not decrease it monotonically.
    pub iterate_trace: Vec<f64>,
    pub converged: bool,
    pub outer_iters: usize,
    pub wall_time: f64,
}

fn wavelet_l1(coeffs: &WaveletCoeffs) -> f64 {
    coeffs.grid.as_slice().iter().map(|v| v.abs()).sum()
}

/// `alpha TV(p) + beta ||W p||_1` for one real plane.
pub fn plane_regularizer(p: &RealGrid, alpha: f64, beta: f64) -> Result<f64> {
    let mut acc = 0.0;
    if alpha != 0.0 {
        acc += alpha * tv_value(p);
    }
    if beta != 0.0 {
        acc += beta * wavelet_l1(&dwt2(p, DEFAULT_LEVELS)?);
    }
    Ok(acc)
}

/// Regularizer summed over the real and imaginary planes.
pub fn regularizer(x: &ComplexGrid, alpha: f64, beta: f64) -> Result<f64> {
    Ok(plane_regularizer(&x.re(), alpha, beta)? + plane_regularizer(&x.im(), alpha, beta)?)
}

/// Classical objective of a complex image.
pub fn objective(x: &ComplexGrid, y: &Measurements, alpha: f64, beta: f64) -> Result<f64> {
    Ok(data_residual_sq(x, y)? + regularizer(x, alpha, beta)?)
}

/// Value and subgradient of `R(z) + lambda ||z - anchor||^2` on one plane.
fn prox_value_and_subgrad(z: &RealGrid, anchor: &RealGrid, cfg: &HqsConfig) -> Result<(f64, RealGrid)> {
    let mut value = 0.0;
    let mut grad = RealGrid::zeros(z.height(), z.width());
    if cfg.alpha != 0.0 {
        value += cfg.alpha * tv_value(z);
        let tv = tv_subgrad(z);
        for (g, t) in grad.as_mut_slice().iter_mut().zip(tv.as_slice()) {
            *g += cfg.alpha * t;
        }
    }
    if cfg.beta != 0.0 {
        let mut coeffs = dwt2(z, DEFAULT_LEVELS)?;
        value += cfg.beta * wavelet_l1(&coeffs);
        for c in coeffs.grid.as_mut_slice() {
            *c = sign(*c);
        }
        let back = idwt2(&coeffs)?;
        for (g, b) in grad.as_mut_slice().iter_mut().zip(back.as_slice()) {
            *g += cfg.beta * b;
        }
    }
    let two_lambda = 2.0 * cfg.lambda;
    for ((g, &zv), &a) in grad.as_mut_slice().iter_mut().zip(z.as_slice()).zip(anchor.as_slice()) {
        let d = zv - a;
        value += cfg.lambda * d * d;
        *g += two_lambda * d;
    }
    Ok((value, grad))
}

/// `R(z) + lambda ||z - x||^2`, the proximal objective.
pub fn prox_objective(z: &ComplexGrid, x: &ComplexGrid, cfg: &HqsConfig) -> Result<f64> {
    let diff: f64 = z.as_slice().iter().zip(x.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(regularizer(z, cfg.alpha, cfg.beta)? + cfg.lambda * diff)
}

/// Approximate proximal step by fixed-step subgradient descent started at `x`.
/// Returns the best iterate seen, so the result never scores worse than `x`.
pub fn prox_step(x: &ComplexGrid, cfg: &HqsConfig) -> Result<ComplexGrid> {
    let anchors = [x.re(), x.im()];
    let mut planes = anchors.clone();
    let mut best = planes.clone();
    let mut best_value = f64::INFINITY;

    for it in 0..=cfg.inner_max {
        let mut value = 0.0;
        let mut grads = Vec::with_capacity(2);
        for (p, a) in planes.iter().zip(&anchors) {
            let (v, g) = prox_value_and_subgrad(p, a, cfg)?;
            value += v;
            grads.push(g);
        }
        if value < best_value {
            best_value = value;
            best.clone_from(&planes);
        }
        if it == cfg.inner_max {
            break;
        }

        let mut step_sq = 0.0;
        let mut norm_sq = 0.0;
        for (p, g) in planes.iter_mut().zip(&grads) {
            for (pv, gv) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
                let delta = cfg.inner_step * gv;
                norm_sq += *pv * *pv;
                step_sq += delta * delta;
                *pv -= delta;
            }
        }
        if step_sq == 0.0 || libm::sqrt(step_sq) < cfg.inner_tol * libm::sqrt(norm_sq) {
            // the final iterate still competes for best
            let value: f64 = planes
                .iter()
                .zip(&anchors)
                .map(|(p, a)| prox_value_and_subgrad(p, a, cfg).map(|(v, _)| v))
                .sum::<Result<f64>>()?;
            if value < best_value {
                best.clone_from(&planes);
            }
            break;
        }
    }
    ComplexGrid::from_parts(&best[0], &best[1])
}

/// Runs HQS from the zero-filled image, returning the best iterate by objective.
pub fn solve(y: &Measurements, cfg: &HqsConfig) -> Result<(ComplexGrid, SolveReport)> {
    solve_with_clock(y, cfg, &NoClock)
}

pub fn solve_with_clock(y: &Measurements, cfg: &HqsConfig, clock: &impl Clock) -> Result<(ComplexGrid, SolveReport)> {
    cfg.validate()?;
    let start = clock.now();
    let mut x = zero_filled(y);
    let mut current = objective(&x, y, cfg.alpha, cfg.beta)?;
    let mut best = x.clone();
    let mut best_value = current;
    let mut trace = alloc::vec![current];
    let mut iterate_trace = alloc::vec![current];
    let mut converged = false;
    let mut outer_iters = 0;

    for _ in 0..cfg.outer_max {
        outer_iters += 1;
        let z = prox_step(&x, cfg)?;
        x = dc_update(&z, y, cfg.lambda)?;
        let value = objective(&x, y, cfg.alpha, cfg.beta)?;
        if value < best_value {
            best_value = value;
            best.clone_from(&x);
        }
        trace.push(best_value);
        iterate_trace.push(value);
        let change = (current - value).abs() / current.abs().max(OBJECTIVE_FLOOR);
        current = value;
        if change < cfg.outer_tol {
            converged = true;
            break;
        }
    }

    let wall_time = clock.now() - start;
    Ok((best, SolveReport { objective_trace: trace, iterate_trace, converged, outer_iters, wall_time }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::forward_model;
    use crate::sampling::{generate_mask, Mask};
    use crate::testutil::{random_complex, random_real, rng};
    use alloc::sync::Arc;
    use num_complex::Complex64;
    use rand::Rng;

    fn instance(seed: u64, n: usize) -> Measurements {
        let mut r = rng(seed);
        let mask = Arc::new(generate_mask(n, n, 4.0, 2, seed).unwrap());
        let x = RealGrid::from_fn(n, n, |_, _| r.random_range(0.0..1.0));
        forward_model(&x, &mask).unwrap()
    }

    #[test]
    fn objective_zero_at_truth_without_regularization() {
        let mut r = rng(1);
        let x = random_real(&mut r, 16, 16);
        let y = forward_model(&x, &Arc::new(Mask::full(16, 16))).unwrap();
        assert!(objective(&x.to_complex(), &y, 0.0, 0.0).unwrap() < 1e-20);
    }

    #[test]
    fn objective_at_zero_image() {
        let y = instance(2, 16);
        let v = objective(&ComplexGrid::zeros(16, 16), &y, 0.005, 0.002).unwrap();
        assert!((v - y.ksp().norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn objective_is_sum_of_terms() {
        let mut r = rng(3);
        let y = instance(3, 16);
        let x = random_complex(&mut r, 16, 16);
        let (a, b) = (0.3, 0.7);
        let mut expect = data_residual_sq(&x, &y).unwrap();
        for p in [x.re(), x.im()] {
            expect += a * tv_value(&p);
            expect += b * dwt2(&p, 2).unwrap().grid.as_slice().iter().map(|v| v.abs()).sum::<f64>();
        }
        assert!((objective(&x, &y, a, b).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn prox_without_regularizer_is_identity() {
        let mut r = rng(4);
        let x = random_complex(&mut r, 16, 16);
        let cfg = HqsConfig { alpha: 0.0, beta: 0.0, ..HqsConfig::default() };
        assert_eq!(prox_step(&x, &cfg).unwrap(), x);
    }

    #[test]
    fn prox_keeps_constants_under_tv() {
        let x = ComplexGrid::filled(16, 16, Complex64::new(0.4, -0.1));
        let cfg = HqsConfig { beta: 0.0, ..HqsConfig::default() };
        assert_eq!(prox_step(&x, &cfg).unwrap(), x);
    }

    #[test]
    fn prox_descends_and_is_locally_optimal() {
        let mut r = rng(5);
        let x = random_complex(&mut r, 32, 32);
        let cfg = HqsConfig::default();
        let z = prox_step(&x, &cfg).unwrap();
        let at_z = prox_objective(&z, &x, &cfg).unwrap();
        assert!(at_z <= prox_objective(&x, &x, &cfg).unwrap());
        for _ in 0..100 {
            let mut d = random_complex(&mut r, 32, 32);
            let scale = 1e-2 / d.norm();
            d.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
            let p = ComplexGrid::from_fn(32, 32, |i, j| z[(i, j)] + d[(i, j)]);
            assert!(at_z <= prox_objective(&p, &x, &cfg).unwrap());
        }
    }

    #[test]
    fn unregularized_solve_is_data_consistent() {
        let y = instance(6, 32);
        let cfg = HqsConfig { alpha: 0.0, beta: 0.0, ..HqsConfig::default() };
        let (x, report) = solve(&y, &cfg).unwrap();
        assert!(libm::sqrt(data_residual_sq(&x, &y).unwrap()) < 1e-6);
        assert!(report.converged);
    }

    #[test]
    fn trace_is_monotone_and_deterministic() {
        let y = instance(7, 32);
        let cfg = HqsConfig { outer_max: 10, ..HqsConfig::default() };
        let (x1, r1) = solve(&y, &cfg).unwrap();
        for w in r1.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-8);
        }
        let (x2, r2) = solve(&y, &cfg).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(r1, r2);
        assert_eq!(r1.objective_trace.len(), r1.outer_iters + 1);
    }

    #[test]
    fn invalid_config_rejected() {
        let y = instance(8, 16);
        let cfg = HqsConfig { inner_tol: 0.0, ..HqsConfig::default() };
        assert!(solve(&y, &cfg).is_err());
    }
}
