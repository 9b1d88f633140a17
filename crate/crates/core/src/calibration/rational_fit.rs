//! Relative least-squares fitting of rational cost functions.
//!
//! The fitter minimizes `Σ ((g(k_i) − v_i) / v_i)²` over the coefficients of
//! `g = N/D` with `d_0 = 1`, using a damped Gauss–Newton (Levenberg–Marquardt)
//! iteration. Candidate steps that would make `g` or its denominator
//! non-positive on the integer domain `[1, k_max]` are rejected, as are steps
//! that break monotonicity when a non-increasing shape is requested.
//!
//! Internally `k` is rescaled to `k / max k_i` and values to their geometric
//! mean so the normal equations stay well conditioned for degree-3 terms at
//! `k = 128`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{horner, RationalFn, MAX_DEGREE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Constrain the fitted function to be non-increasing on `[1, k_max]`.
    pub nonincreasing: bool,
    pub max_iterations: usize,
    /// Relative step size below which the iteration is considered converged.
    pub step_tolerance: f64,
    /// Domain of the fitted function. Defaults to the largest input `k`.
    pub k_max: Option<u32>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            nonincreasing: false,
            max_iterations: 10_000,
            step_tolerance: 1e-10,
            k_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalFit {
    pub function: RationalFn,
    /// `(k, (g(k) − v) / v)` for every input point, ascending in `k`.
    pub residuals: Vec<PointResidual>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub k: u32,
    pub relative: f64,
}

impl RationalFit {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals
            .iter()
            .map(|r| r.relative.abs())
            .fold(0.0, f64::max)
    }
}

/// Fits a rational function of degrees `(p, q)` to `(k, value)` points.
///
/// The result does not depend on the order of `points`.
pub fn fit_rational(
    points: &[(u32, f64)],
    degrees: (usize, usize),
    opts: &FitOptions,
) -> Result<RationalFit> {
    let (p, q) = degrees;
    if p > MAX_DEGREE || q > MAX_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "degrees {degrees:?} exceed the supported maximum {MAX_DEGREE}"
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if pts.len() < p + q + 1 {
        return Err(Error::InsufficientData(format!(
            "degree ({p},{q}) fit needs at least {} points, got {}",
            p + q + 1,
            pts.len()
        )));
    }
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidParameter("duplicate k values".into()));
    }
    if pts[0].0 == 0 {
        return Err(Error::InvalidParameter("k values must be >= 1".into()));
    }
    if let Some(&(k, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "value at k={k} must be positive and finite, got {v}"
        )));
    }
    let k_top = pts.last().map(|p| p.0).unwrap_or(1);
    let k_max = opts.k_max.unwrap_or(k_top);
    if k_max < k_top {
        return Err(Error::InvalidParameter(format!(
            "k_max {k_max} below the largest data point {k_top}"
        )));
    }

    // Unconstrained (positive-only) descent from every start first. With the
    // shape constraint on, those optima seed a second, constrained pass
    // together with every feasible start and the feasible end of the segment
    // from each start towards each optimum; the constrained pass alone tends
    // to stall on the constraint boundary far from the optimum.
    let free = Problem::new(&pts, p, q, k_max, false);
    let starts: Vec<DVector<f64>> = free
        .initial_guesses()
        .into_iter()
        .filter(|t| free.feasible(t))
        .collect();
    let free_runs: Vec<LmOutcome> = starts
        .iter()
        .map(|t| free.levenberg_marquardt(t.clone(), opts))
        .collect();

    let (problem, outcomes) = if opts.nonincreasing {
        let shaped = Problem::new(&pts, p, q, k_max, true);
        let mut seeds: Vec<DVector<f64>> =
            starts.iter().filter(|t| shaped.feasible(t)).cloned().collect();
        let anchors = seeds.clone();
        for run in &free_runs {
            if shaped.feasible(&run.theta) {
                seeds.push(run.theta.clone());
            }
            for a in &anchors {
                if let Some(t) = shaped.farthest_feasible(a, &run.theta) {
                    seeds.push(t);
                }
            }
        }
        let runs: Vec<LmOutcome> = seeds
            .into_iter()
            .map(|t| shaped.levenberg_marquardt(t, opts))
            .collect();
        (shaped, runs)
    } else {
        (free, free_runs)
    };
    let outcome = outcomes
        .into_iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .ok_or(Error::InfeasiblePositivity)?;

    let (num, den) = problem.unscale(&outcome.theta);
    let function = RationalFn::new(num, den, k_max)?;
    let residuals = pts
        .iter()
        .map(|&(k, v)| PointResidual {
            k,
            relative: (function.eval_at(f64::from(k)) - v) / v,
        })
        .collect();
    Ok(RationalFit {
        function,
        residuals,
        converged: outcome.converged,
        iterations: outcome.iterations,
    })
}

struct LmOutcome {
    theta: DVector<f64>,
    cost: f64,
    converged: bool,
    iterations: usize,
}

struct Problem {
    p: usize,
    q: usize,
    /// Scaled abscissae `k / k_scale`.
    xs: Vec<f64>,
    /// Scaled values `v / v_scale`.
    vs: Vec<f64>,
    k_scale: f64,
    v_scale: f64,
    k_max: u32,
    nonincreasing: bool,
}

impl Problem {
    fn new(pts: &[(u32, f64)], p: usize, q: usize, k_max: u32, nonincreasing: bool) -> Self {
        let k_scale = f64::from(pts.last().map(|p| p.0).unwrap_or(1));
        let log_mean = pts.iter().map(|(_, v)| v.ln()).sum::<f64>() / pts.len() as f64;
        let v_scale = log_mean.exp();
        Problem {
            p,
            q,
            xs: pts.iter().map(|(k, _)| f64::from(*k) / k_scale).collect(),
            vs: pts.iter().map(|(_, v)| v / v_scale).collect(),
            k_scale,
            v_scale,
            k_max,
            nonincreasing,
        }
    }

    fn n_params(&self) -> usize {
        self.p + 1 + self.q
    }

    fn split<'a>(&self, theta: &'a DVector<f64>) -> (&'a [f64], &'a [f64]) {
        let s = theta.as_slice();
        (&s[..=self.p], &s[self.p + 1..])
    }

    /// Numerator and denominator at scaled `x`.
    fn parts(&self, theta: &DVector<f64>, x: f64) -> (f64, f64) {
        let (c, d) = self.split(theta);
        let n = horner(c, x);
        // d_0 = 1 is implicit.
        let den = 1.0 + x * horner(d, x);
        (n, den)
    }

    fn residuals(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().zip(&self.vs).map(|(&x, &v)| {
                let (n, d) = self.parts(theta, x);
                (n / d - v) / v
            }),
        )
    }

    fn cost(&self, theta: &DVector<f64>) -> f64 {
        0.5 * self.residuals(theta).norm_squared()
    }

    fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let m = self.xs.len();
        let mut jac = DMatrix::zeros(m, self.n_params());
        for (i, (&x, &v)) in self.xs.iter().zip(&self.vs).enumerate() {
            let (n, d) = self.parts(theta, x);
            let mut xp = 1.0;
            for j in 0..=self.p {
                jac[(i, j)] = xp / (d * v);
                xp *= x;
            }
            let mut xp = x;
            for j in 0..self.q {
                jac[(i, self.p + 1 + j)] = -n * xp / (d * d * v);
                xp *= x;
            }
        }
        jac
    }

    /// Coefficients in the caller's units, `d_0 = 1`.
    fn unscale(&self, theta: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let (c, d) = self.split(theta);
        let num = c
            .iter()
            .enumerate()
            .map(|(j, cj)| self.v_scale * cj / self.k_scale.powi(j as i32))
            .collect();
        let den = std::iter::once(1.0)
            .chain(
                d.iter()
                    .enumerate()
                    .map(|(j, dj)| dj / self.k_scale.powi(j as i32 + 1)),
            )
            .collect();
        (num, den)
    }

    /// Checks positivity (and monotonicity if requested) of the unscaled
    /// function on every integer `k` in the domain, using the same arithmetic
    /// as [`RationalFn::eval_at`].
    fn feasible(&self, theta: &DVector<f64>) -> bool {
        if theta.iter().any(|t| !t.is_finite()) {
            return false;
        }
        let (num, den) = self.unscale(theta);
        let mut prev = f64::INFINITY;
        for k in 1..=self.k_max {
            let x = f64::from(k);
            let d = horner(&den, x);
            if !(d > 0.0) {
                return false;
            }
            let v = horner(&num, x) / d;
            if !(v > 0.0 && v.is_finite()) {
                return false;
            }
            if self.nonincreasing && v > prev {
                return false;
            }
            prev = v;
        }
        true
    }

    /// The feasible point farthest along the segment from feasible `from`
    /// towards `to`, probing by halving.
    fn farthest_feasible(&self, from: &DVector<f64>, to: &DVector<f64>) -> Option<DVector<f64>> {
        let mut t = 1.0;
        for _ in 0..12 {
            let candidate = from + (to - from) * t;
            if self.feasible(&candidate) {
                return (t < 1.0).then_some(candidate);
            }
            t *= 0.5;
        }
        None
    }

    /// Starting points: the linearized fit `N(x) ≈ v·D(x)` at the full
    /// degree and at every lower equal-degree embedding, then the best
    /// constant.
    fn initial_guesses(&self) -> Vec<DVector<f64>> {
        let mut out = Vec::new();
        let top = self.p.max(self.q);
        for deg in (1..=top).rev() {
            let (pp, qq) = (deg.min(self.p), deg.min(self.q));
            if let Some(theta) = self.linearized(pp, qq) {
                out.push(theta);
            }
        }
        let inv: f64 = self.vs.iter().map(|v| 1.0 / v).sum();
        let inv2: f64 = self.vs.iter().map(|v| 1.0 / (v * v)).sum();
        let mut constant = DVector::zeros(self.n_params());
        constant[0] = inv / inv2;
        out.push(constant);
        out
    }

    /// Solves `Σ ((N(x_i) − v_i·D(x_i)) / v_i)²` for degrees `(pp, qq)` and
    /// embeds the result in the full parameter vector.
    fn linearized(&self, pp: usize, qq: usize) -> Option<DVector<f64>> {
        let m = self.xs.len();
        let n = pp + 1 + qq;
        if m < n {
            return None;
        }
        let mut a = DMatrix::zeros(m, n);
        let mut b = DVector::zeros(m);
        for (i, (&x, &v)) in self.xs.iter().zip(&self.vs).enumerate() {
            let w = 1.0 / v;
            let mut xp = 1.0;
            for j in 0..=pp {
                a[(i, j)] = w * xp;
                xp *= x;
            }
            let mut xp = x;
            for j in 0..qq {
                a[(i, pp + 1 + j)] = -w * v * xp;
                xp *= x;
            }
            b[i] = 1.0;
        }
        let sol = a.svd(true, true).solve(&b, 1e-14).ok()?;
        let mut theta = DVector::zeros(self.n_params());
        for j in 0..=pp {
            theta[j] = sol[j];
        }
        for j in 0..qq {
            theta[self.p + 1 + j] = sol[pp + 1 + j];
        }
        theta.iter().all(|t| t.is_finite()).then_some(theta)
    }

    fn levenberg_marquardt(&self, mut theta: DVector<f64>, opts: &FitOptions) -> LmOutcome {
        let mut cost = self.cost(&theta);
        let mut lambda = 1e-3;
        let mut converged = false;
        let mut iterations = 0;

        while iterations < opts.max_iterations {
            iterations += 1;
            if cost == 0.0 {
                converged = true;
                break;
            }
            let jac = self.jacobian(&theta);
            let r = self.residuals(&theta);
            let jtj = jac.transpose() * &jac;
            let grad = jac.transpose() * r;

            let mut accepted = None;
            while lambda < 1e20 {
                let mut lhs = jtj.clone();
                for i in 0..lhs.nrows() {
                    lhs[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
                }
                let Some(delta) = solve_spd(lhs, -&grad) else {
                    lambda *= 4.0;
                    continue;
                };
                let candidate = &theta + &delta;
                if self.feasible(&candidate) {
                    let c = self.cost(&candidate);
                    if c < cost {
                        accepted = Some((candidate, c, delta));
                        break;
                    }
                }
                lambda *= 4.0;
            }

            let Some((candidate, new_cost, delta)) = accepted else {
                // No feasible descent direction at any damping.
                converged = true;
                break;
            };
            let step = delta.norm() / (theta.norm() + opts.step_tolerance);
            theta = candidate;
            cost = new_cost;
            lambda = (lambda / 3.0).max(1e-12);
            if step < opts.step_tolerance {
                converged = true;
                break;
            }
        }

        LmOutcome {
            theta,
            cost,
            converged,
            iterations,
        }
    }
}

fn solve_spd(lhs: DMatrix<f64>, rhs: DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = lhs.clone().cholesky() {
        return Some(chol.solve(&rhs));
    }
    lhs.lu().solve(&rhs)
}
