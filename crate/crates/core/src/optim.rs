//! Nonlinear conjugate gradient (Polak–Ribière⁺) with Armijo backtracking.

#[derive(Debug, Clone)]
pub struct ConjugateGradient {
    pub max_steps: usize,
    /// Stop once the gradient max-norm falls below this.
    pub grad_tol: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    /// Sufficient-decrease constant of the Armijo condition.
    pub armijo: f64,
}

impl Default for ConjugateGradient {
    fn default() -> Self {
        Self {
            max_steps: 50,
            grad_tol: 1e-5,
            backtrack_factor: 0.5,
            max_backtracks: 30,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Accepted line-search steps.
    pub steps: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Set when a line search exhausted its backtracks; `x` is then the last accepted point.
    pub line_search_failed: bool,
    /// Objective after the start point and after every accepted step.
    pub trace: Vec<f64>,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ConjugateGradient {
    /// Minimises `f`, which returns the objective and writes its gradient.
    pub fn minimize<F>(&self, x0: &[f64], mut f: F) -> CgOutcome
    where
        F: FnMut(&[f64], &mut [f64]) -> f64,
    {
        let n = x0.len();
        let mut x = x0.to_vec();
        let mut g = vec![0.0; n];
        let mut fx = f(&x, &mut g);
        let mut evaluations = 1;
        let mut trace = vec![fx];
        let out = |x: Vec<f64>, value, steps, evaluations, converged, failed, trace| CgOutcome {
            x,
            value,
            steps,
            evaluations,
            converged,
            line_search_failed: failed,
            trace,
        };
        if !fx.is_finite() {
            return out(x, fx, 0, evaluations, false, true, trace);
        }
        if max_norm(&g) < self.grad_tol {
            return out(x, fx, 0, evaluations, true, false, trace);
        }

        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut prev_decrease = f64::NAN;
        // Max-norm of the last accepted displacement.
        let mut prev_move = f64::NAN;
        let mut x_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];
        let mut steps = 0;
        let mut converged = false;
        let mut failed = false;

        while steps < self.max_steps {
            let mut slope = dot(&g, &d);
            let restart = slope >= 0.0 || !slope.is_finite();
            if restart {
                d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
                slope = -dot(&g, &g);
            }
            let d_norm = max_norm(&d).max(f64::MIN_POSITIVE);
            let step = if prev_move.is_nan() {
                1.0 / d_norm.max(1.0)
            } else {
                // At most twice the last move; along a conjugate direction also
                // aim for the same decrease as the last step.
                let cap = 2.0 * prev_move / d_norm;
                if restart { cap } else { (2.02 * prev_decrease / slope).min(cap) }
            }
            .clamp(1e-12, 1e12);

            let mut t = step;
            let mut accepted = None;
            for _ in 0..=self.max_backtracks {
                x_new.iter_mut().zip(x.iter().zip(&d)).for_each(|(xn, (xi, di))| *xn = xi + t * di);
                let f_new = f(&x_new, &mut g_new);
                evaluations += 1;
                if f_new.is_finite() && f_new <= fx + self.armijo * t * slope {
                    accepted = Some(f_new);
                    break;
                }
                t *= self.backtrack_factor;
            }
            let Some(f_new) = accepted else {
                failed = true;
                break;
            };

            let g_sq = dot(&g, &g);
            let beta = if (steps + 1) % n.max(1) == 0 {
                0.0
            } else {
                let y: f64 = g_new.iter().zip(&g).map(|(a, b)| a * (a - b)).sum();
                (y / g_sq).max(0.0)
            };
            d.iter_mut().zip(&g_new).for_each(|(di, gi)| *di = -gi + beta * *di);
            let fx_old = fx;
            std::mem::swap(&mut x, &mut x_new);
            std::mem::swap(&mut g, &mut g_new);
            fx = f_new;
            trace.push(fx);
            steps += 1;
            prev_decrease = f_new - fx_old;
            prev_move = t * d_norm;
            if max_norm(&g) < self.grad_tol {
                converged = true;
                break;
            }
        }
        out(x, fx, steps, evaluations, converged, failed, trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let cg = ConjugateGradient {
            max_steps: 200,
            grad_tol: 1e-8,
            ..Default::default()
        };
        let r = cg.minimize(&[1.0, 1.0], |x, g| {
            g[0] = 2.0 * x[0];
            g[1] = 20.0 * x[1];
            x[0] * x[0] + 10.0 * x[1] * x[1]
        });
        assert!(r.converged);
        assert!(r.x.iter().all(|v| v.abs() < 1e-7), "{:?}", r.x);
    }

    #[test]
    fn rosenbrock() {
        let cg = ConjugateGradient {
            max_steps: 5000,
            grad_tol: 1e-6,
            ..Default::default()
        };
        let r = cg.minimize(&[-1.2, 1.0], |x, g| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        });
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn trace_never_increases() {
        let cg = ConjugateGradient::default();
        let r = cg.minimize(&[3.0, -2.0, 0.5], |x, g| {
            let mut v = 0.0;
            for i in 0..3 {
                let w = (i + 1) as f64;
                v += w * (x[i] - 0.3).powi(4) + x[i].cosh();
                g[i] = 4.0 * w * (x[i] - 0.3).powi(3) + x[i].sinh();
            }
            v
        });
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn unbounded_direction_stops_at_step_budget() {
        let cg = ConjugateGradient {
            max_steps: 7,
            ..Default::default()
        };
        let r = cg.minimize(&[0.0], |x, g| {
            g[0] = -1.0;
            -x[0]
        });
        assert_eq!(r.steps, 7);
        assert!(!r.converged);
    }
}
