//! Derivative-free simplex search.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 2000, f_tol: 1e-6, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Counter<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counter<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn simplex_around(x0: &[f64], fx0: f64, step: f64, f: &mut Counter<impl FnMut(&[f64]) -> f64>) -> Vec<(Vec<f64>, f64)> {
    let mut s = vec![(x0.to_vec(), fx0)];
    for i in 0..x0.len() {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f.call(&x);
        s.push((x, v));
    }
    s
}

/// Minimizes `f` from `x0`. After each collapse the simplex is rebuilt
/// around the best point; the search ends when a rebuild no longer improves
/// by more than `f_tol`, or when the evaluation budget runs out.
pub fn nelder_mead(f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult {
    let n = x0.len();
    let mut f = Counter { f, evals: 0 };
    let f0 = f.call(x0);
    if n == 0 {
        return NelderMeadResult { x: Vec::new(), f: f0, evals: 1, converged: true };
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut best = (x0.to_vec(), f0);
    let mut step = opts.initial_step;
    let mut converged = false;
    'outer: loop {
        let mut simplex = simplex_around(&best.0, best.1, step, &mut f);
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            if spread <= opts.f_tol {
                break;
            }
            if f.evals >= opts.max_evals {
                if simplex[0].1 < best.1 {
                    best = simplex[0].clone();
                }
                break 'outer;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
            let xr = along(alpha);
            let fr = f.call(&xr);
            if fr < simplex[0].1 {
                let xe = along(gamma);
                let fe = f.call(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst.1 {
                    let x = along(rho);
                    let v = f.call(&x);
                    (x, v)
                } else {
                    let x = along(-rho);
                    let v = f.call(&x);
                    (x, v)
                };
                if fc < worst.1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = x_best.iter().zip(&v.0).map(|(b, xi)| b + sigma * (xi - b)).collect();
                        let fx = f.call(&x);
                        *v = (x, fx);
                    }
                }
            }
        }
        let improved = best.1 - simplex[0].1;
        if simplex[0].1 < best.1 {
            best = simplex[0].clone();
        }
        if improved <= opts.f_tol {
            // one more pass with a smaller simplex before declaring victory
            if step <= opts.initial_step * 1e-2 {
                converged = true;
                break;
            }
            step *= 0.1;
        } else {
            step = opts.initial_step;
        }
        if f.evals >= opts.max_evals {
            break;
        }
    }
    NelderMeadResult { x: best.0, f: best.1, evals: f.evals, converged }
}
