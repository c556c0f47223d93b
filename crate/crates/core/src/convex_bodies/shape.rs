//! Upper bounds on the shape distance `inf_g rho(g omega1, omega2)`.
//!
//! The search runs over `g = g0 * exp(E)` with `E` traceless; the scale of
//! `g` is optimized in closed form, since for every `g` the best scalar
//! multiple turns the clamped distance into the unclamped log-product.
//! Starting maps are the identity and an ellipsoid-based guess
//! `g0 = W2^{-1} R W1` (whitening maps `W1`, `W2`) with the orthogonal factor
//! `R` chosen by scanning a fixed set of orthogonal matrices.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::body::{LinearMap, SupportBody};
use super::fit::whitening_map;
use super::grid::DirectionGrid;
use super::metric::scaled_log_product;
use super::optim::{nelder_mead, NelderMeadOptions};
use super::surrogate::{default_cells, CubeSurrogate};
use crate::error::{check_dim, Result};
use crate::linear_systems::matrix_exponential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitOrder {
    EllipsoidFirst,
    IdentityFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeOptions {
    /// Objective evaluations per simplex start.
    pub max_evals: usize,
    /// Simplex value-spread stopping tolerance.
    pub tol: f64,
    pub init_order: InitOrder,
    /// Random orthogonal matrices scanned for the ellipsoid start (n >= 3).
    pub alignment_samples: usize,
    /// Additional simplex starts from the runner-up alignments.
    pub extra_starts: usize,
    pub initial_step: f64,
    /// Face resolution of the interpolation table for expensive bodies.
    pub surrogate_cells: Option<usize>,
    pub whitening_iters: usize,
    pub seed: u64,
}

impl Default for ShapeOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            tol: 1e-6,
            init_order: InitOrder::EllipsoidFirst,
            alignment_samples: 3000,
            extra_starts: 5,
            initial_step: 0.1,
            surrogate_cells: None,
            whitening_iters: 3,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShapeResult {
    /// `rho(map * omega1, omega2)`, an upper bound on the shape distance.
    pub distance: f64,
    pub map: LinearMap,
    /// `t(map omega1, omega2)` and `t(omega2, map omega1)`.
    pub t12: f64,
    pub t21: f64,
    pub converged: bool,
    pub evaluations: usize,
}

type SupportEval<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

struct Objective<'a> {
    n: usize,
    /// Grid directions, column-major `n x N`.
    dirs: &'a DMatrix<f64>,
    hb: &'a [f64],
    eval: &'a (dyn Fn(&[f64]) -> f64 + Sync),
}

impl Objective<'_> {
    /// Log-product of the two containment ratios; with `p` set, each max is
    /// replaced by a log-sum-exp smoothing of sharpness `p`, which never
    /// exceeds the max.
    fn value_with(&self, g: &DMatrix<f64>, p: Option<f64>) -> f64 {
        let y = g.transpose() * self.dirs;
        let data = y.as_slice();
        let mut logs = Vec::with_capacity(self.hb.len());
        for (k, hb) in self.hb.iter().enumerate() {
            let ha = (self.eval)(&data[k * self.n..(k + 1) * self.n]);
            if !(ha > 0.0) {
                return f64::INFINITY;
            }
            logs.push((hb / ha).ln());
        }
        let (up, down) = logs.iter().fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(u, d), &l| (u.max(l), d.max(-l)));
        match p {
            None => up + down,
            Some(p) => {
                let len = logs.len() as f64;
                let su: f64 = logs.iter().map(|&l| (p * (l - up)).exp()).sum::<f64>() / len;
                let sd: f64 = logs.iter().map(|&l| (p * (-l - down)).exp()).sum::<f64>() / len;
                up + down + (su.ln() + sd.ln()) / p
            }
        }
    }

    fn value(&self, g: &DMatrix<f64>) -> f64 {
        self.value_with(g, None)
    }
}

/// Sharpness schedule of the smoothed stages run before the exact objective.
const SMOOTHING: [f64; 3] = [30.0, 300.0, 3000.0];

fn traceless(n: usize, p: &[f64]) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, n);
    let mut it = p.iter();
    let mut trace = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == n - 1 && j == n - 1 {
                continue;
            }
            let v = *it.next().expect("parameter count");
            e[(i, j)] = v;
            if i == j {
                trace += v;
            }
        }
    }
    e[(n - 1, n - 1)] = -trace;
    e
}

fn rotation2(theta: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
}

/// Fixed candidate set of orthogonal matrices. Since bodies are symmetric,
/// `R` and `-R` act identically, so in odd dimensions only rotations are
/// listed.
fn orthogonal_candidates(n: usize, samples: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    if n == 1 {
        return vec![DMatrix::identity(1, 1)];
    }
    if n == 2 {
        let flip = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        for k in 0..180 {
            let r = rotation2(std::f64::consts::PI * k as f64 / 180.0);
            out.push(&r * &flip);
            out.push(r);
        }
        return out;
    }
    // signed permutations
    let mut perm: Vec<usize> = (0..n).collect();
    let mut perms = Vec::new();
    permutations(&mut perm, 0, &mut perms);
    for p in perms {
        for signs in 0..(1u32 << n) {
            let m = DMatrix::from_fn(n, n, |i, j| if p[i] == j { if signs >> i & 1 == 1 { -1.0 } else { 1.0 } } else { 0.0 });
            if n.is_multiple_of(2) || m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        if n % 2 == 1 && q.determinant() < 0.0 {
            q.neg_mut();
        }
        out.push(q);
    }
    out
}

fn permutations(p: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == p.len() {
        out.push(p.clone());
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, out);
        p.swap(k, i);
    }
}

/// Searches `g` minimizing `rho(g omega1, omega2)` on the grid.
///
/// The returned distance is exact for the returned map (evaluated with the
/// bodies' own support functions) and never exceeds the identity-map value,
/// so it is at most `bm_distance(omega1, omega2)`.
pub fn shape_distance(
    omega1: &SupportBody,
    omega2: &SupportBody,
    grid: &DirectionGrid,
    opts: &ShapeOptions,
) -> Result<ShapeResult> {
    check_dim(omega1.dim(), omega2.dim())?;
    check_dim(omega1.dim(), grid.dim())?;
    let n = omega1.dim();
    let h1 = omega1.check_nondegenerate(grid)?;
    let h2 = omega2.check_nondegenerate(grid)?;
    let dirs = DMatrix::from_column_slice(n, grid.len(), &grid.iter().flatten().copied().collect::<Vec<_>>());

    let w1 = whitening_map(omega1, grid, opts.whitening_iters)?;
    let w2 = whitening_map(omega2, grid, opts.whitening_iters)?;

    let surrogate = if omega1.is_expensive() && n <= 8 {
        let cells = opts.surrogate_cells.unwrap_or_else(|| default_cells(n));
        Some(CubeSurrogate::build(omega1, &w1, cells)?)
    } else {
        None
    };
    let eval: Box<SupportEval> = match &surrogate {
        Some(s) => Box::new(move |x: &[f64]| s.eval(x)),
        None => Box::new(|x: &[f64]| omega1.support(x).unwrap_or(f64::NAN)),
    };
    let objective = Objective { n, dirs: &dirs, hb: &h2, eval: eval.as_ref() };

    // ellipsoid starts: g0 = W2^{-1} R W1 for the best-scoring R
    let w2inv = crate::linalg::invert(&w2, "whitening map")?;
    let mut scored: Vec<(f64, DMatrix<f64>)> = orthogonal_candidates(n, opts.alignment_samples, opts.seed)
        .into_iter()
        .map(|r| {
            let g = &w2inv * &r * &w1;
            (objective.value(&g), g)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ellipsoid_starts: Vec<DMatrix<f64>> = Vec::new();
    for (_, g) in &scored {
        if ellipsoid_starts.len() > opts.extra_starts {
            break;
        }
        let distinct = ellipsoid_starts.iter().all(|s| (s - g).norm() > 0.3 * g.norm());
        if distinct {
            ellipsoid_starts.push(g.clone());
        }
    }
    let identity = DMatrix::identity(n, n);
    let mut starts = Vec::new();
    match opts.init_order {
        InitOrder::EllipsoidFirst => {
            starts.push(ellipsoid_starts[0].clone());
            starts.push(identity);
        }
        InitOrder::IdentityFirst => {
            starts.push(identity);
            starts.push(ellipsoid_starts[0].clone());
        }
    }
    starts.extend(ellipsoid_starts.into_iter().skip(1));

    let nm = NelderMeadOptions { max_evals: opts.max_evals, f_tol: opts.tol, initial_step: opts.initial_step };
    let mut best: Option<(f64, DMatrix<f64>, bool)> = None;
    let mut evaluations = scored.len();
    let minimize = |g0: &DMatrix<f64>, p: Option<f64>| {
        nelder_mead(
            |q| match matrix_exponential(&traceless(n, q)) {
                Ok(e) => objective.value_with(&(g0 * e), p),
                Err(_) => f64::INFINITY,
            },
            &vec![0.0; n * n - 1],
            &nm,
        )
    };
    for g0 in starts {
        // the exact objective directly, and a continuation through
        // smoothed objectives that avoids the kinks of the max early on
        let direct = minimize(&g0, None);
        evaluations += direct.evals;
        let mut candidates = vec![(direct.f, &g0 * matrix_exponential(&traceless(n, &direct.x))?, direct.converged)];
        let mut g_cur = g0;
        for p in SMOOTHING.iter().map(|&p| Some(p)).chain([None]) {
            let r = minimize(&g_cur, p);
            evaluations += r.evals;
            g_cur = &g_cur * matrix_exponential(&traceless(n, &r.x))?;
            if p.is_none() {
                candidates.push((r.f, g_cur.clone(), r.converged));
            }
        }
        for c in candidates {
            if best.as_ref().is_none_or(|b| c.0 < b.0) {
                best = Some(c);
            }
        }
    }
    let (_, g_best, converged) = best.expect("at least one start");

    // exact value at the best map, compared with the identity
    let mapped: Vec<Vec<f64>> = {
        let y = g_best.transpose() * &dirs;
        y.as_slice().chunks(n).map(<[f64]>::to_vec).collect()
    };
    let h1g = omega1.support_many(&mapped)?;
    let exact_best = if h1g.iter().all(|&v| v > 0.0) { scaled_log_product(&h1g, &h2) } else { (f64::INFINITY, 0.0, 0.0) };
    let exact_id = scaled_log_product(&h1, &h2);
    let ((rho, up, down), g) = if exact_best.0 < exact_id.0 { (exact_best, g_best) } else { (exact_id, identity_of(n)) };
    let c = (up / down).sqrt();
    let t = (up * down).sqrt();
    Ok(ShapeResult {
        distance: rho.max(0.0),
        map: LinearMap::new(g * c)?,
        t12: t.max(1.0),
        t21: t.max(1.0),
        converged,
        evaluations,
    })
}

fn identity_of(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}
