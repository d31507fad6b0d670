//! Levenberg-Marquardt with Marquardt's diagonal scaling.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmSettings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Relative to `|x| + 1`; coordinates are expected to be of order one.
    pub step_tolerance: f64,
    pub damping_init: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub ssr: f64,
    /// `J^T J` at `params`, undamped.
    pub jtj: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Residuals `r = data - model` and the Jacobian of the model (not of `r`).
pub(crate) type Evaluation = (DVector<f64>, DMatrix<f64>);

/// Largest cosine between the residual vector and a Jacobian column; zero at
/// a stationary point regardless of parameter or residual scale.
fn gradient_cosine(r: &DVector<f64>, j: &DMatrix<f64>, g: &DVector<f64>) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    (0..j.ncols())
        .map(|c| {
            let cn = j.column(c).norm();
            if cn == 0.0 {
                0.0
            } else {
                g[c].abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

pub(crate) fn levenberg_marquardt<F>(p0: &[f64], mut eval: F, s: &LmSettings) -> LmOutcome
where
    F: FnMut(&[f64]) -> Option<Evaluation>,
{
    let n = p0.len();
    let mut p = DVector::from_column_slice(p0);
    let (mut r, mut j) = eval(p.as_slice()).expect("initial parameters evaluate");
    let mut ssr = r.norm_squared();
    let mut lambda = s.damping_init;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < s.max_iterations {
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if ssr == 0.0 || gradient_cosine(&r, &j, &g) <= s.gradient_tolerance {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e32 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&g),
                None => match a.lu().solve(&g) {
                    Some(x) => x,
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                },
            };
            let trial = &p + &step;
            let Some((r_new, j_new)) = eval(trial.as_slice()) else {
                lambda *= 10.0;
                continue;
            };
            let ssr_new = r_new.norm_squared();
            if ssr_new.is_finite() && ssr_new <= ssr {
                let small_step = step
                    .iter()
                    .zip(p.iter())
                    .all(|(d, x)| d.abs() <= s.step_tolerance * (x.abs() + 1.0));
                p = trial;
                r = r_new;
                j = j_new;
                let improved = ssr - ssr_new > 1e-14 * ssr;
                ssr = ssr_new;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small_step || !improved {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step exists at working precision.
            let g = j.transpose() * &r;
            converged = gradient_cosine(&r, &j, &g) <= s.gradient_tolerance.sqrt();
            break;
        }
        if converged {
            break;
        }
    }
    let jtj = j.transpose() * &j;
    LmOutcome { params: p.iter().copied().collect(), ssr, jtj, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let t: Vec<f64> = (0..30).map(|k| k as f64 * 0.2).collect();
        let y: Vec<f64> = t.iter().map(|&x| 2.5 * (-1.3 * x).exp()).collect();
        let eval = |p: &[f64]| {
            let r = DVector::from_iterator(t.len(), t.iter().zip(&y).map(|(x, yy)| yy - p[0] * (-p[1] * x).exp()));
            let j = DMatrix::from_fn(t.len(), 2, |i, c| {
                let e = (-p[1] * t[i]).exp();
                if c == 0 {
                    e
                } else {
                    -p[0] * t[i] * e
                }
            });
            Some((r, j))
        };
        let s = LmSettings { max_iterations: 200, gradient_tolerance: 1e-10, step_tolerance: 1e-12, damping_init: 1e-3 };
        let out = levenberg_marquardt(&[1.0, 0.5], eval, &s);
        assert!(out.converged);
        assert!((out.params[0] - 2.5).abs() < 1e-9 && (out.params[1] - 1.3).abs() < 1e-9);
    }
}
