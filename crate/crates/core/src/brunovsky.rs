//! Brunovsky normal form of controllable time-invariant pairs and the
//! self-similar scaling `delta(T)` of the canonical chains.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::convex_bodies::{BodyKind, LinearMap, SupportBody};
use crate::error::{Error, Result};
use crate::linalg;
use crate::linear_systems::{kalman_check, LinearSystem, LtiSystem};
use crate::reachable::reach_body;

/// Condition number of `P` above which the transform is refused.
pub const MAX_CONDITION: f64 = 1e12;

fn require_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    let (rank, ok) = kalman_check(a, b)?;
    if ok {
        Ok(())
    } else {
        Err(Error::NotControllable { rank, n: a.nrows() })
    }
}

/// Greedy selection over `b_1..b_m, A b_1..A b_m, ...`; returns the chain
/// length of every input in input order (zero for inputs never selected).
fn chain_lengths(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<usize> {
    let (n, m) = (a.nrows(), b.ncols());
    let mut kappa = vec![0usize; m];
    let mut alive = vec![true; m];
    let mut selected: Vec<DVector<f64>> = Vec::new();
    let mut powers: Vec<DVector<f64>> = (0..m).map(|i| b.column(i).into_owned()).collect();
    for _ in 0..n {
        for i in 0..m {
            if selected.len() == n {
                break;
            }
            if !alive[i] {
                continue;
            }
            let c = &powers[i];
            let norm = c.norm();
            if norm == 0.0 {
                alive[i] = false;
                continue;
            }
            let mut cols = selected.clone();
            cols.push(c / norm);
            let mat = DMatrix::from_columns(&cols);
            if linalg::numerical_rank(&mat) == cols.len() {
                selected = cols;
                kappa[i] += 1;
            } else {
                // higher powers of a dependent column stay dependent
                alive[i] = false;
            }
        }
        for p in &mut powers {
            *p = a * &*p;
        }
    }
    kappa
}

/// Controllability indices, sorted non-increasing, summing to `n`.
pub fn controllability_indices(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<usize>> {
    require_controllable(a, b)?;
    let mut k: Vec<usize> = chain_lengths(a, b).into_iter().filter(|&k| k > 0).collect();
    k.sort_unstable_by(|x, y| y.cmp(x));
    if k.iter().sum::<usize>() != a.nrows() {
        return Err(Error::Invalid("rank decisions are inconsistent with the Kalman rank".into()));
    }
    Ok(k)
}

/// Canonical chain matrices for the given indices and `m` inputs.
pub fn canonical_pair(indices: &[usize], m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n: usize = indices.iter().sum();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    let mut start = 0;
    for (i, &k) in indices.iter().enumerate() {
        for j in 0..k.saturating_sub(1) {
            a[(start + j, start + j + 1)] = 1.0;
        }
        b[(start + k - 1, i)] = 1.0;
        start += k;
    }
    (a, b)
}

/// `P (A + B K) P^{-1} = A_br`, `P B G = B_br`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrunovskyForm {
    pub indices: Vec<usize>,
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub a_br: DMatrix<f64>,
    pub b_br: DMatrix<f64>,
}

impl BrunovskyForm {
    /// Largest entrywise residuals of the two reconstruction identities.
    pub fn residuals(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, f64)> {
        let p_inv = linalg::invert(&self.p, "state transform")?;
        let ra = &self.p * (a + b * &self.k) * p_inv - &self.a_br;
        let rb = &self.p * b * &self.g - &self.b_br;
        Ok((linalg::max_abs(&ra), linalg::max_abs(&rb)))
    }

    pub fn condition(&self) -> f64 {
        linalg::condition_number(&self.p)
    }
}

/// Luenberger construction of the Brunovsky form. Inputs are processed in the
/// given order and powers ascending; `G` makes the leading input
/// coefficients exactly one.
pub fn brunovsky_transform(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<BrunovskyForm> {
    require_controllable(a, b)?;
    let (n, m) = (a.nrows(), b.ncols());
    let kappa = chain_lengths(a, b);
    if kappa.iter().sum::<usize>() != n {
        return Err(Error::Invalid("rank decisions are inconsistent with the Kalman rank".into()));
    }
    let active: Vec<usize> = (0..m).filter(|&i| kappa[i] > 0).collect();
    let r = active.len();

    let mut cols = Vec::with_capacity(n);
    for &i in &active {
        let mut c = b.column(i).into_owned();
        for _ in 0..kappa[i] {
            cols.push(c.clone());
            c = a * c;
        }
    }
    let l = DMatrix::from_columns(&cols);
    if linalg::condition_number(&l) > MAX_CONDITION {
        return Err(Error::IllConditioned(linalg::condition_number(&l)));
    }
    let q = linalg::invert(&l, "selected-column basis")?;

    // Rows q_i A^j for each active input, blocks in input order.
    let mut rows: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    let mut lead = DMatrix::zeros(r, n); // q_i A^{kappa_i}
    let mut end = 0;
    for (bi, &i) in active.iter().enumerate() {
        end += kappa[i];
        let mut row = q.row(end - 1).into_owned();
        for _ in 0..kappa[i] {
            rows.push(DMatrix::from_row_slice(1, n, row.as_slice()));
            row = &row * a;
        }
        lead.row_mut(bi).copy_from(&row);
    }
    let p_blocks = DMatrix::from_fn(n, n, |i, j| rows[i][(0, j)]);
    let gamma = {
        let mut g = DMatrix::zeros(r, m);
        let mut end = 0;
        for (bi, &i) in active.iter().enumerate() {
            end += kappa[i];
            g.row_mut(bi).copy_from(&(p_blocks.row(end - 1) * b));
        }
        g
    };
    let gamma_s = DMatrix::from_fn(r, r, |i, j| gamma[(i, active[j])]);
    let gamma_s_inv = linalg::invert(&gamma_s, "leading input coefficients")?;

    // Columns of G and rows of K in input coordinates, for the block order.
    let mut g_blocks = DMatrix::zeros(m, m);
    let mut k = DMatrix::zeros(m, n);
    let kk = -(&gamma_s_inv * &lead);
    for (bi, &i) in active.iter().enumerate() {
        for (bj, _) in active.iter().enumerate() {
            g_blocks[(i, bj)] = gamma_s_inv[(bi, bj)];
        }
        k.row_mut(i).copy_from(&kk.row(bi));
    }
    let inactive: Vec<usize> = (0..m).filter(|&i| kappa[i] == 0).collect();
    for (zi, &l_in) in inactive.iter().enumerate() {
        let col = r + zi;
        g_blocks[(l_in, col)] = 1.0;
        let corr = &gamma_s_inv * gamma.column(l_in);
        for (bi, &i) in active.iter().enumerate() {
            g_blocks[(i, col)] -= corr[bi];
        }
    }

    // Reorder blocks by non-increasing chain length (stable).
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| kappa[active[y]].cmp(&kappa[active[x]]));
    let starts: Vec<usize> = active
        .iter()
        .scan(0, |acc, &i| {
            let s = *acc;
            *acc += kappa[i];
            Some(s)
        })
        .collect();
    let mut p = DMatrix::zeros(n, n);
    let mut g = DMatrix::zeros(m, m);
    let mut row = 0;
    for (new_b, &old_b) in order.iter().enumerate() {
        let len = kappa[active[old_b]];
        for j in 0..len {
            p.row_mut(row + j).copy_from(&p_blocks.row(starts[old_b] + j));
        }
        row += len;
        g.column_mut(new_b).copy_from(&g_blocks.column(old_b));
    }
    for col in r..m {
        g.column_mut(col).copy_from(&g_blocks.column(col));
    }
    let indices: Vec<usize> = order.iter().map(|&o| kappa[active[o]]).collect();
    let (a_br, b_br) = canonical_pair(&indices, m);

    let cond = linalg::condition_number(&p);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    Ok(BrunovskyForm { indices, p, k, g, a_br, b_br })
}

/// `delta(T) = blockdiag(T^{-kappa_i}, ..., T^{-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaScaling {
    t_final: f64,
    matrix: DMatrix<f64>,
}

impl DeltaScaling {
    pub fn new(indices: &[usize], t_final: f64) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidTime(format!("terminal time {t_final} must be positive")));
        }
        let diag: Vec<f64> = indices.iter().flat_map(|&k| (0..k).map(move |j| t_final.powi(-((k - j) as i32)))).collect();
        if diag.iter().any(|d| !d.is_finite()) {
            return Err(Error::TimeResolution(format!("T^-kappa overflows at T = {t_final:e}")));
        }
        let matrix = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
        let out = Self { t_final, matrix };

        let (a_br, b_br) = canonical_pair(indices, indices.len());
        let inv = DMatrix::from_diagonal(&out.matrix.diagonal().map(|d| 1.0 / d));
        let lhs_a = &out.matrix * &a_br * inv;
        let lhs_b = &out.matrix * &b_br;
        let scale = 1.0 / t_final;
        let ra = linalg::max_abs(&(lhs_a - &a_br * scale));
        let rb = linalg::max_abs(&(lhs_b - &b_br * scale));
        if ra.max(rb) > 1e-9 * scale {
            return Err(Error::Invalid(format!("delta scaling identities violated ({:e})", ra.max(rb))));
        }
        Ok(out)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

pub fn delta_scaling(indices: &[usize], t_final: f64) -> Result<DeltaScaling> {
    DeltaScaling::new(indices, t_final)
}

/// The Brunovsky system `(A_br, B_br)` with controls in `G^{-1} U`.
pub fn brunovsky_system(sys: &LtiSystem) -> Result<(BrunovskyForm, LtiSystem)> {
    let form = brunovsky_transform(sys.a(), sys.b())?;
    let g_inv = LinearMap::new(linalg::invert(&form.g, "input transform")?)?;
    let u = sys.control().image(&g_inv)?;
    let canon = LtiSystem::new(form.a_br.clone(), form.b_br.clone(), u)?;
    Ok((form, canon))
}

/// Limit body of the Brunovsky route: the reachable set at `T = 1` of the
/// Brunovsky system with controls `G^{-1} U`.
pub fn brunovsky_limit_body(sys: &LtiSystem, rtol: f64) -> Result<SupportBody> {
    let (_, canon) = brunovsky_system(sys)?;
    Ok(reach_body(&LinearSystem::Lti(canon), 1.0, rtol)?.into_body().with_kind(BodyKind::Limit))
}

/// Normalizer `delta(T) P` carrying `D(T)` towards the Brunovsky limit body.
pub fn brunovsky_normalizer(form: &BrunovskyForm, t_final: f64) -> Result<LinearMap> {
    LinearMap::new(DeltaScaling::new(&form.indices, t_final)?.matrix() * &form.p)
}
