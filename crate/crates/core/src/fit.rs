//! Two-Gaussian decomposition of a spectrum: splitting, widths and component
//! area ratio with linearized uncertainties.
//!
//! The model is y(x) = amp1·exp(−(x−c1)²/(2s1²)) + amp2·exp(−(x−c2)²/(2s2²)),
//! optionally plus a constant baseline. Amplitudes are peak heights; the area
//! of a component is amp·s·√(2π). Optimization is damped least squares: a
//! Gauss–Newton step with adaptive diagonal damping, increased when the cost
//! goes up and relaxed on acceptance. Widths are optimized as log-widths so
//! they can never turn negative.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { got: usize, needed: usize },
    #[error("x and y lengths differ: {x} vs {y}")]
    MismatchedLengths { x: usize, y: usize },
    #[error("spectrum is constant; nothing to fit")]
    ConstantSpectrum,
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
}

/// Sum of two Gaussian peaks (no baseline).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoGaussianModel {
    pub amp1: f64,
    pub c1: f64,
    pub s1: f64,
    pub amp2: f64,
    pub c2: f64,
    pub s2: f64,
}

impl TwoGaussianModel {
    pub fn eval(&self, x: f64) -> f64 {
        two_gaussian_eval(self, x)
    }

    /// |c2 − c1|.
    pub fn splitting(&self) -> f64 {
        (self.c2 - self.c1).abs()
    }

    /// Area ratio upper/lower, components ordered by center:
    /// (amp_upper·s_upper)/(amp_lower·s_lower).
    pub fn area_ratio(&self) -> f64 {
        let (lo, up) = if self.c1 <= self.c2 {
            ((self.amp1, self.s1), (self.amp2, self.s2))
        } else {
            ((self.amp2, self.s2), (self.amp1, self.s1))
        };
        (up.0 * up.1) / (lo.0 * lo.1)
    }
}

/// Evaluate the two-Gaussian model at x.
pub fn two_gaussian_eval(m: &TwoGaussianModel, x: f64) -> f64 {
    let g1 = (-((x - m.c1) * (x - m.c1)) / (2.0 * m.s1 * m.s1)).exp();
    let g2 = (-((x - m.c2) * (x - m.c2)) / (2.0 * m.s2 * m.s2)).exp();
    m.amp1 * g1 + m.amp2 * g2
}

/// Standard errors of the fitted parameters (linearized, scaled by the
/// residual variance). NaN when the curvature matrix is singular.
#[derive(Clone, Copy, Debug)]
pub struct ParamErrors {
    pub amp1: f64,
    pub c1: f64,
    pub s1: f64,
    pub amp2: f64,
    pub c2: f64,
    pub s2: f64,
    pub baseline: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub model: TwoGaussianModel,
    /// Fitted constant offset, present when the baseline was enabled.
    pub baseline: Option<f64>,
    /// |c2 − c1| in the units of the x axis.
    pub splitting: f64,
    /// Area ratio upper/lower by center.
    pub area_ratio: f64,
    pub stderr: ParamErrors,
    /// √(cost/n) at the optimum.
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Cost after every accepted step (starts with the initial cost);
    /// non-increasing by construction.
    pub cost_history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Fit an additional constant offset.
    pub baseline: bool,
    pub max_iterations: usize,
    /// Convergence threshold on the relative cost decrease of an accepted step.
    pub cost_tol: f64,
    /// Convergence threshold on the step norm.
    pub step_tol: f64,
    pub initial_damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            baseline: false,
            max_iterations: 500,
            cost_tol: 1e-10,
            step_tol: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

fn validate(xs: &[f64], ys: &[f64], n_params: usize) -> Result<(), FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::MismatchedLengths {
            x: xs.len(),
            y: ys.len(),
        });
    }
    let needed = (2 * n_params).max(12);
    if xs.len() < needed {
        return Err(FitError::TooFewPoints {
            got: xs.len(),
            needed,
        });
    }
    for (i, v) in xs.iter().chain(ys.iter()).enumerate() {
        if !v.is_finite() {
            return Err(FitError::NonFinite {
                index: i % xs.len(),
            });
        }
    }
    Ok(())
}

/// Two-peak starting point: smooth with a fixed 5-point moving average and
/// take the two highest local maxima separated by more than 3 bins. When only
/// one peak stands out, fall back to splitting the moment-based center by ±1
/// sample standard deviation.
pub fn initial_guess(xs: &[f64], ys: &[f64]) -> Result<TwoGaussianModel, FitError> {
    validate(xs, ys, 6)?;
    let n = xs.len();
    let (ymin, ymax) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        });
    if ymax - ymin <= 0.0 {
        return Err(FitError::ConstantSpectrum);
    }

    // 5-point moving average
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            ys[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();

    // local maxima ranked by height, keeping only those whose prominence
    // (height above the deepest valley separating them from higher terrain)
    // clears 10% of the smoothed range; noise ripples on top of a broad
    // component do not count as peaks
    let smin = smooth.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let prominence_floor = 0.1 * (smax - smin);
    let mut maxima: Vec<usize> = (1..n - 1)
        .filter(|&i| smooth[i] > smooth[i - 1] && smooth[i] > smooth[i + 1])
        .filter(|&i| {
            let h = smooth[i];
            let mut deepest = f64::NEG_INFINITY;
            for side in [0..i, i + 1..n] {
                let mut valley = h;
                let range: Vec<usize> = if side.start == 0 {
                    (side.start..side.end).rev().collect()
                } else {
                    side.collect()
                };
                for j in range {
                    valley = valley.min(smooth[j]);
                    if smooth[j] > h {
                        break;
                    }
                }
                deepest = deepest.max(valley);
            }
            h - deepest >= prominence_floor
        })
        .collect();
    maxima.sort_by(|&a, &b| smooth[b].total_cmp(&smooth[a]));

    let bin = ((xs[n - 1] - xs[0]) / (n as f64 - 1.0))
        .abs()
        .max(f64::MIN_POSITIVE);

    if let Some(&first) = maxima.first() {
        if let Some(&second) = maxima.iter().find(|&&i| i.abs_diff(first) > 3) {
            let width_at = |peak: usize| -> f64 {
                let half = smooth[peak] / 2.0;
                let mut left = peak;
                while left > 0 && smooth[left] > half {
                    left -= 1;
                }
                let mut right = peak;
                while right < n - 1 && smooth[right] > half {
                    right += 1;
                }
                let fwhm = (xs[right] - xs[left]).abs();
                let sigma = fwhm / 2.355;
                if sigma > 0.0 {
                    sigma
                } else {
                    (xs[first] - xs[second]).abs() / 4.0 + bin
                }
            };
            let (a, b) = if xs[first] <= xs[second] {
                (first, second)
            } else {
                (second, first)
            };
            return Ok(TwoGaussianModel {
                amp1: smooth[a].max(1e-3 * ymax),
                c1: xs[a],
                s1: width_at(a),
                amp2: smooth[b].max(1e-3 * ymax),
                c2: xs[b],
                s2: width_at(b),
            });
        }
    }

    // single-peak fallback: moments of the (non-negative part of the) data
    let weights: Vec<f64> = ys.iter().map(|&y| y.max(0.0)).collect();
    let wsum: f64 = weights.iter().sum();
    if wsum <= 0.0 {
        return Err(FitError::ConstantSpectrum);
    }
    let mean = xs.iter().zip(&weights).map(|(&x, &w)| w * x).sum::<f64>() / wsum;
    let var = xs
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * (x - mean) * (x - mean))
        .sum::<f64>()
        / wsum;
    let std = var.sqrt().max(bin);
    let amp = ymax.max(1e-12);
    Ok(TwoGaussianModel {
        amp1: 0.6 * amp,
        c1: mean - std,
        s1: 0.7 * std,
        amp2: 0.6 * amp,
        c2: mean + std,
        s2: 0.7 * std,
    })
}

/// Internal parameter vector: [amp1, c1, ln s1, amp2, c2, ln s2, (baseline)].
fn pack(m: &TwoGaussianModel, baseline: Option<f64>) -> DVector<f64> {
    let mut p = vec![m.amp1, m.c1, m.s1.ln(), m.amp2, m.c2, m.s2.ln()];
    if let Some(b) = baseline {
        p.push(b);
    }
    DVector::from_vec(p)
}

fn unpack(p: &DVector<f64>) -> (TwoGaussianModel, Option<f64>) {
    let m = TwoGaussianModel {
        amp1: p[0],
        c1: p[1],
        s1: p[2].exp(),
        amp2: p[3],
        c2: p[4],
        s2: p[5].exp(),
    };
    let b = if p.len() > 6 { Some(p[6]) } else { None };
    (m, b)
}

fn cost_of(p: &DVector<f64>, xs: &[f64], ys: &[f64]) -> f64 {
    let (m, b) = unpack(p);
    let b = b.unwrap_or(0.0);
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - (m.eval(x) + b);
            r * r
        })
        .sum()
}

/// Model Jacobian rows (∂model/∂p) and residuals (y − model).
fn jacobian(p: &DVector<f64>, xs: &[f64], ys: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let (m, b) = unpack(p);
    let b = b.unwrap_or(0.0);
    let np = p.len();
    let n = xs.len();
    let mut jac = DMatrix::zeros(n, np);
    let mut res = DVector::zeros(n);
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let d1 = x - m.c1;
        let d2 = x - m.c2;
        let g1 = (-d1 * d1 / (2.0 * m.s1 * m.s1)).exp();
        let g2 = (-d2 * d2 / (2.0 * m.s2 * m.s2)).exp();
        jac[(i, 0)] = g1;
        jac[(i, 1)] = m.amp1 * g1 * d1 / (m.s1 * m.s1);
        jac[(i, 2)] = m.amp1 * g1 * d1 * d1 / (m.s1 * m.s1); // ∂/∂ln s1
        jac[(i, 3)] = g2;
        jac[(i, 4)] = m.amp2 * g2 * d2 / (m.s2 * m.s2);
        jac[(i, 5)] = m.amp2 * g2 * d2 * d2 / (m.s2 * m.s2);
        if np > 6 {
            jac[(i, 6)] = 1.0;
        }
        res[i] = y - (m.amp1 * g1 + m.amp2 * g2 + b);
    }
    (jac, res)
}

/// Fit a sum of two Gaussians to (xs, ys). A starting point can be supplied;
/// otherwise [`initial_guess`] is used. Non-convergence is not an error: the
/// best point found is returned with `converged = false`.
pub fn fit_two_gaussians(
    xs: &[f64],
    ys: &[f64],
    guess: Option<TwoGaussianModel>,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    let n_params = if opts.baseline { 7 } else { 6 };
    validate(xs, ys, n_params)?;
    let mut start = match guess {
        Some(g) => g,
        None => initial_guess(xs, ys)?,
    };
    // log-width parameterization needs strictly positive starting widths
    let bin = ((xs[xs.len() - 1] - xs[0]) / (xs.len() as f64 - 1.0))
        .abs()
        .max(1e-12);
    if start.s1 <= 0.0 || start.s1.is_nan() {
        start.s1 = bin;
    }
    if start.s2 <= 0.0 || start.s2.is_nan() {
        start.s2 = bin;
    }

    let mut p = pack(&start, opts.baseline.then_some(0.0));
    let mut cost = cost_of(&p, xs, ys);
    let mut damping = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let mut history = vec![cost];

    while iterations < opts.max_iterations {
        iterations += 1;
        let (jac, res) = jacobian(&p, xs, ys);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &res;
        let max_diag = (0..p.len()).map(|k| jtj[(k, k)]).fold(0.0f64, f64::max);

        let mut stepped = false;
        while damping < 1e12 {
            let mut damped = jtj.clone();
            for k in 0..p.len() {
                // floor keeps the system regular when a component has zero
                // amplitude and its center/width columns vanish
                let d = jtj[(k, k)].max(1e-12 * max_diag).max(1e-300);
                damped[(k, k)] = jtj[(k, k)] + damping * d;
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                damping *= 10.0;
                continue;
            };
            let candidate = &p + &step;
            let new_cost = cost_of(&candidate, xs, ys);
            if new_cost.is_finite() && new_cost <= cost {
                let drop = cost - new_cost;
                p = candidate;
                cost = new_cost;
                history.push(cost);
                damping = (damping * 0.1).max(1e-12);
                stepped = true;
                if drop <= opts.cost_tol * cost.max(1e-300) || step.norm() < opts.step_tol {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        if converged || !stepped {
            break;
        }
    }

    let (model, baseline) = unpack(&p);
    let stderr = parameter_errors(&p, xs, ys, cost);
    Ok(FitResult {
        splitting: model.splitting(),
        area_ratio: model.area_ratio(),
        model,
        baseline,
        stderr,
        residual_rms: (cost / xs.len() as f64).sqrt(),
        converged,
        iterations,
        cost_history: history,
    })
}

fn parameter_errors(p: &DVector<f64>, xs: &[f64], ys: &[f64], cost: f64) -> ParamErrors {
    let (m, b) = unpack(p);
    let dof = xs.len().saturating_sub(p.len()).max(1) as f64;
    let variance = cost / dof;
    let (jac, _) = jacobian(p, xs, ys);
    let jtj = jac.transpose() * &jac;
    let sigma: Vec<f64> = match jtj.try_inverse() {
        Some(inv) => (0..p.len())
            .map(|k| (variance * inv[(k, k)]).max(0.0).sqrt())
            .collect(),
        None => vec![f64::NAN; p.len()],
    };
    ParamErrors {
        amp1: sigma[0],
        c1: sigma[1],
        s1: m.s1 * sigma[2], // chain rule through ln s
        amp2: sigma[3],
        c2: sigma[4],
        s2: m.s2 * sigma[5],
        baseline: b.map(|_| sigma[6]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn sample_model(m: &TwoGaussianModel, lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let xs: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n as f64 - 1.0))
            .collect();
        let ys: Vec<f64> = xs.iter().map(|&x| m.eval(x)).collect();
        (xs, ys)
    }

    const TRUTH: TwoGaussianModel = TwoGaussianModel {
        amp1: 1.0,
        c1: -100.0,
        s1: 40.0,
        amp2: 0.6,
        c2: 100.0,
        s2: 55.0,
    };

    #[test]
    fn eval_peak_and_width_points() {
        let m = TwoGaussianModel {
            amp1: 2.0,
            c1: 5.0,
            s1: 3.0,
            amp2: 0.0,
            c2: 50.0,
            s2: 1.0,
        };
        assert_abs_diff_eq!(two_gaussian_eval(&m, 5.0), 2.0);
        assert_abs_diff_eq!(
            two_gaussian_eval(&m, 8.0),
            2.0 * (-0.5f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn eval_symmetric_model_is_even_about_midpoint() {
        let m = TwoGaussianModel {
            amp1: 1.0,
            c1: -30.0,
            s1: 10.0,
            amp2: 1.0,
            c2: 70.0,
            s2: 10.0,
        };
        let mid = 20.0;
        for d in [0.0, 3.7, 11.0, 42.0] {
            assert_abs_diff_eq!(m.eval(mid + d), m.eval(mid - d), epsilon = 1e-14);
        }
    }

    #[test]
    fn guess_recovers_separated_centers() {
        let (xs, ys) = sample_model(&TRUTH, -300.0, 300.0, 201);
        let g = initial_guess(&xs, &ys).unwrap();
        assert!(
            (g.c1 - TRUTH.c1).abs() < 0.1 * TRUTH.c1.abs(),
            "c1 guess {}",
            g.c1
        );
        assert!(
            (g.c2 - TRUTH.c2).abs() < 0.1 * TRUTH.c2.abs(),
            "c2 guess {}",
            g.c2
        );
        assert!(g.s1 > 0.0 && g.s2 > 0.0);
    }

    #[test]
    fn guess_falls_back_on_single_peak() {
        let single = TwoGaussianModel {
            amp1: 1.0,
            c1: 10.0,
            s1: 25.0,
            amp2: 0.0,
            c2: 0.0,
            s2: 1.0,
        };
        let (xs, ys) = sample_model(&single, -100.0, 120.0, 111);
        let g = initial_guess(&xs, &ys).unwrap();
        for c in [g.c1, g.c2] {
            assert!((c - 10.0).abs() < 2.0 * 25.0, "fallback center {c} too far");
        }
    }

    #[test]
    fn guess_rejects_degenerate_input() {
        assert_eq!(
            initial_guess(&[], &[]),
            Err(FitError::TooFewPoints { got: 0, needed: 12 })
        );
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys = vec![1.0; 20];
        assert_eq!(initial_guess(&xs, &ys), Err(FitError::ConstantSpectrum));
    }

    #[test]
    fn noiseless_fit_recovers_parameters() {
        let (xs, ys) = sample_model(&TRUTH, -300.0, 300.0, 241);
        let fit = fit_two_gaussians(&xs, &ys, None, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let m = fit.model;
        for (got, want) in [
            (m.amp1, TRUTH.amp1),
            (m.c1, TRUTH.c1),
            (m.s1, TRUTH.s1),
            (m.amp2, TRUTH.amp2),
            (m.c2, TRUTH.c2),
            (m.s2, TRUTH.s2),
        ] {
            assert!(
                (got - want).abs() <= 1e-6 * want.abs().max(1.0),
                "recovered {got} vs {want}"
            );
        }
        assert_abs_diff_eq!(fit.splitting, 200.0, epsilon = 1e-5);
        assert!(fit.residual_rms < 1e-8);
    }

    #[test]
    fn accepted_costs_never_increase() {
        let (xs, mut ys) = sample_model(&TRUTH, -300.0, 300.0, 201);
        let mut rng = crate::ensemble::test_rng(3);
        for y in ys.iter_mut() {
            *y *= 1.0 + 0.05 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let fit = fit_two_gaussians(&xs, &ys, None, &FitOptions::default()).unwrap();
        for w in fit.cost_history.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-15),
                "cost increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn area_ratio_survives_five_percent_noise() {
        // truth constructed with area ratio exactly 0.7
        let truth = TwoGaussianModel {
            amp1: 1.0,
            c1: -100.0,
            s1: 50.0,
            amp2: 0.7,
            c2: 100.0,
            s2: 50.0,
        };
        assert_abs_diff_eq!(truth.area_ratio(), 0.7, epsilon = 1e-15);
        let (xs, ys) = sample_model(&truth, -350.0, 350.0, 281);
        let mut rng = crate::ensemble::test_rng(101);
        let noisy: Vec<f64> = ys
            .iter()
            .map(|&y| y * (1.0 + 0.05 * rng.sample::<f64, _>(rand_distr::StandardNormal)))
            .collect();
        let fit = fit_two_gaussians(&xs, &noisy, None, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(
            (fit.area_ratio - 0.7).abs() < 0.05,
            "area ratio {} strayed from 0.7",
            fit.area_ratio
        );
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = crate::ensemble::test_rng(77);
        let xs: Vec<f64> = (0..20).map(|i| -200.0 + 20.0 * i as f64).collect();
        let ys = vec![0.0; 20];
        for _ in 0..100 {
            let p = DVector::from_vec(vec![
                0.5 + rng.random::<f64>(),
                -150.0 + 300.0 * rng.random::<f64>(),
                (20.0 + 50.0 * rng.random::<f64>()).ln(),
                0.5 + rng.random::<f64>(),
                -150.0 + 300.0 * rng.random::<f64>(),
                (20.0 + 50.0 * rng.random::<f64>()).ln(),
            ]);
            let (jac, _) = jacobian(&p, &xs, &ys);
            for k in 0..6 {
                // step large enough that cancellation noise stays below the
                // truncation error
                let h = 1e-5 * p[k].abs().max(1.0);
                let mut pp = p.clone();
                pp[k] += h;
                let mut pm = p.clone();
                pm[k] -= h;
                for (i, &x) in xs.iter().enumerate() {
                    let (mp, _) = unpack(&pp);
                    let (mm, _) = unpack(&pm);
                    let fd = (mp.eval(x) - mm.eval(x)) / (2.0 * h);
                    let an = jac[(i, k)];
                    // the 1e-4 floor keeps finite-difference truncation noise
                    // in the far tails from dominating the comparison
                    let scale = an.abs().max(fd.abs()).max(1e-4);
                    assert!(
                        (an - fd).abs() <= 1e-6 * scale,
                        "param {k} at x={x}: analytic {an} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn fit_is_shift_equivariant() {
        let (xs, ys) = sample_model(&TRUTH, -300.0, 300.0, 201);
        let base = fit_two_gaussians(&xs, &ys, None, &FitOptions::default()).unwrap();
        let delta = 1234.5;
        let shifted: Vec<f64> = xs.iter().map(|&x| x + delta).collect();
        let moved = fit_two_gaussians(&shifted, &ys, None, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(
            moved.model.c1,
            base.model.c1 + delta,
            epsilon = 1e-8 * delta
        );
        assert_abs_diff_eq!(
            moved.model.c2,
            base.model.c2 + delta,
            epsilon = 1e-8 * delta
        );
        assert_abs_diff_eq!(
            moved.splitting,
            base.splitting,
            epsilon = 1e-8 * base.splitting
        );
        assert_abs_diff_eq!(
            moved.model.s1,
            base.model.s1,
            epsilon = 1e-8 * base.model.s1
        );
        assert_abs_diff_eq!(moved.area_ratio, base.area_ratio, epsilon = 1e-8);
    }

    #[test]
    fn fit_is_scale_equivariant() {
        let (xs, ys) = sample_model(&TRUTH, -300.0, 300.0, 201);
        let base = fit_two_gaussians(&xs, &ys, None, &FitOptions::default()).unwrap();
        let k = 17.0;
        let scaled: Vec<f64> = ys.iter().map(|&y| k * y).collect();
        let tall = fit_two_gaussians(&xs, &scaled, None, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(tall.model.amp1, k * base.model.amp1, epsilon = 1e-8 * k);
        assert_abs_diff_eq!(tall.model.amp2, k * base.model.amp2, epsilon = 1e-8 * k);
        assert_abs_diff_eq!(tall.model.c1, base.model.c1, epsilon = 1e-8 * 100.0);
        assert_abs_diff_eq!(tall.model.s2, base.model.s2, epsilon = 1e-8 * base.model.s2);
        assert_abs_diff_eq!(tall.area_ratio, base.area_ratio, epsilon = 1e-8);
    }

    #[test]
    fn synthesized_area_ratio_matches_analytic() {
        let truth = TwoGaussianModel {
            amp1: 0.8,
            c1: -80.0,
            s1: 35.0,
            amp2: 0.5,
            c2: 120.0,
            s2: 60.0,
        };
        let analytic = (0.5 * 60.0) / (0.8 * 35.0);
        let (xs, ys) = sample_model(&truth, -400.0, 400.0, 321);
        let fit = fit_two_gaussians(&xs, &ys, None, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.area_ratio, analytic, epsilon = 1e-6);
    }

    #[test]
    fn baseline_option_recovers_offset() {
        let (xs, ys) = sample_model(&TRUTH, -300.0, 300.0, 201);
        let offset = 0.05;
        let lifted: Vec<f64> = ys.iter().map(|&y| y + offset).collect();
        let opts = FitOptions {
            baseline: true,
            ..FitOptions::default()
        };
        let fit = fit_two_gaussians(&xs, &lifted, None, &opts).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.baseline.unwrap(), offset, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.model.c1, TRUTH.c1, epsilon = 1e-4);
        assert!(fit.stderr.baseline.is_some());
    }

    #[test]
    fn too_few_points_rejected() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys = xs.clone();
        assert!(matches!(
            fit_two_gaussians(&xs, &ys, None, &FitOptions::default()),
            Err(FitError::TooFewPoints { .. })
        ));
    }
}
