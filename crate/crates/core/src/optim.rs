//! Derivative-free local minimizers used by the solvers and planners.

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop once the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and the simplex is smaller than this in every coordinate.
    pub x_tol: f64,
    /// Number of times the simplex is rebuilt around the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            f_tol: 1e-16,
            x_tol: 1e-12,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Minimizes `f` from `x0` with an initial simplex spanned by `step`.
///
/// Uses the dimension-adaptive coefficients of Gao and Han, which behave
/// better than the classic ones once there are more than a handful of
/// parameters.
pub fn nelder_mead<F>(f: F, x0: &[f64], step: &[f64], opts: &NelderMead) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(step.len(), n, "step must match dimension");
    let mut best = Minimum {
        x: x0.to_vec(),
        value: f(x0),
        evals: 1,
    };
    if n == 0 {
        return best;
    }

    let nf = n as f64;
    let alpha = 1.0;
    let gamma = 1.0 + 2.0 / nf;
    let rho = 0.75 - 1.0 / (2.0 * nf);
    let sigma = 1.0 - 1.0 / nf;

    let mut scale = 1.0;
    for _round in 0..=opts.restarts {
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(best.x.clone());
        for i in 0..n {
            let mut v = best.x.clone();
            v[i] += step[i] * scale;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        best.evals += n;
        let start_value = best.value;

        loop {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            if values[0] < best.value {
                best.value = values[0];
                best.x = simplex[0].clone();
            }

            let spread = values[n] - values[0];
            let size = (0..n)
                .map(|j| {
                    simplex
                        .iter()
                        .map(|v| (v[j] - simplex[0][j]).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if (spread <= opts.f_tol && size <= opts.x_tol.max(1e-300)) || best.evals >= opts.max_evals
            {
                break;
            }
            if spread <= opts.f_tol * 1e-3 && size <= opts.x_tol * 1e3 {
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / nf)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(alpha);
            let fr = f(&xr);
            best.evals += 1;
            if fr < values[0] {
                let xe = along(gamma);
                let fe = f(&xe);
                best.evals += 1;
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
            } else {
                let (xc, fc) = if fr < values[n] {
                    let xc = along(alpha * rho);
                    let fc = f(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = f(&xc);
                    (xc, fc)
                };
                best.evals += 1;
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                } else {
                    // shrink toward the best vertex
                    for i in 1..=n {
                        for j in 0..n {
                            simplex[i][j] = simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]);
                        }
                        values[i] = f(&simplex[i]);
                    }
                    best.evals += n;
                }
            }
        }

        if best.evals >= opts.max_evals {
            break;
        }
        // a restart that did not help means we are done
        if _round > 0 && best.value >= start_value {
            break;
        }
        scale *= 0.1;
    }
    best
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Bisection for a sign change of `f` on `[a, b]`, assuming `f(a) < 0 <= f(b)`.
/// Returns the right end of the final bracket, so `f` there is non-negative.
pub fn bisect<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if f(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], &NelderMead::default());
        assert_abs_diff_eq!(m.x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.x[1], 1.0, epsilon = 1e-6);
        assert!(m.value < 1e-12);
    }

    #[test]
    fn quadratic_in_eight_dimensions() {
        let f = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| (i as f64 + 1.0) * (v - 0.1 * i as f64).powi(2))
                .sum()
        };
        let m = nelder_mead(f, &[1.0; 8], &[0.3; 8], &NelderMead::default());
        assert!(m.value < 1e-12, "value {}", m.value);
    }

    #[test]
    fn golden_and_bisect() {
        let (x, fx) = golden_section(|x| (x - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-10);
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-7);
        assert_abs_diff_eq!(fx, 1.0, epsilon = 1e-15);
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert_abs_diff_eq!(r, 2f64.sqrt(), epsilon = 1e-13);
    }
}
