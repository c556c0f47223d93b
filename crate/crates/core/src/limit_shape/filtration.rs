//! Driftless reduction, the Taylor filtration of the dual space and its
//! graded splitting.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::linear_systems::LinearSystem;

/// Taylor coefficients at `t = 0` of `B~(t) = C(t)^{-1} B(t)`, `C' = A C`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftlessReduction {
    pub b_tilde: Vec<DMatrix<f64>>,
    pub warnings: Vec<String>,
}

impl DriftlessReduction {
    pub fn order(&self) -> usize {
        self.b_tilde.len() - 1
    }

    pub fn n(&self) -> usize {
        self.b_tilde[0].nrows()
    }

    pub fn m(&self) -> usize {
        self.b_tilde[0].ncols()
    }
}

/// `M = C^{-1}` by `M_0 = I`, `M_{j+1} = -(1/(j+1)) sum_{i+l=j} M_i A_l`;
/// then `B~_k = sum_{i+j=k} M_i B_j`.
pub fn reduce_to_driftless(sys: &LinearSystem, order: usize) -> Result<DriftlessReduction> {
    let (data, warnings) = sys.taylor(order);
    if data.order() < order {
        return Err(Error::MissingTaylor(format!("need order {order}, have {}", data.order())));
    }
    let n = sys.n();
    let mut mcoef: Vec<DMatrix<f64>> = vec![DMatrix::identity(n, n)];
    for j in 0..order {
        let mut acc = DMatrix::zeros(n, n);
        for i in 0..=j {
            acc += &mcoef[i] * &data.a[j - i];
        }
        mcoef.push(acc * (-1.0 / (j + 1) as f64));
    }
    let b_tilde: Vec<DMatrix<f64>> = (0..=order)
        .map(|k| {
            let mut acc = DMatrix::zeros(n, sys.m());
            for i in 0..=k {
                acc += &mcoef[i] * &data.b[k - i];
            }
            acc
        })
        .collect();

    if let Some(lti) = sys.as_lti() {
        // cross-check against (-A)^k B / k!
        let mut term = lti.b().clone();
        for (k, bt) in b_tilde.iter().enumerate() {
            if k > 0 {
                term = -(lti.a() * term) / k as f64;
            }
            let scale = linalg::max_abs(&term).max(linalg::max_abs(lti.b()));
            if linalg::max_abs(&(bt - &term)) > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Invalid(format!("driftless coefficient {k} disagrees with (-A)^k B / k!")));
            }
        }
    }
    Ok(DriftlessReduction { b_tilde, warnings })
}

/// `F_k* = { xi : B~_j^T xi = 0, j < k }` for `k = 0, 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtration {
    /// Orthonormal bases (columns) of `F_0*, F_1*, ...`.
    pub bases: Vec<DMatrix<f64>>,
    pub dims: Vec<usize>,
    /// Whether the dimension reached zero within the available order.
    pub complete: bool,
}

impl Filtration {
    /// Orders `k` with `d_k > d_{k+1}`.
    pub fn jumps(&self) -> Vec<usize> {
        self.dims.windows(2).enumerate().filter(|(_, w)| w[0] > w[1]).map(|(k, _)| k).collect()
    }
}

fn subspace_excess(inner: &DMatrix<f64>, outer: &DMatrix<f64>) -> f64 {
    if inner.ncols() == 0 {
        return 0.0;
    }
    let resid = inner - outer * (outer.transpose() * inner);
    linalg::max_abs(&resid)
}

/// Builds `F_0*, ..., F_K*` (stopping early at dimension zero) and verifies
/// that the subspaces are nested.
pub fn filtration(red: &DriftlessReduction) -> Result<Filtration> {
    let n = red.n();
    let mut bases = vec![DMatrix::identity(n, n)];
    let mut dims = vec![n];
    for k in 1..=red.order() {
        let stacked = DMatrix::from_fn(k * red.m(), n, |r, c| red.b_tilde[r / red.m()][(c, r % red.m())]);
        let basis = linalg::kernel_basis(&stacked, n);
        let d = basis.ncols();
        if d > *dims.last().expect("nonempty") {
            return Err(Error::SplittingFailure(format!("filtration dimension grew at order {k}")));
        }
        let excess = subspace_excess(&basis, bases.last().expect("nonempty"));
        if excess > 1e-9 {
            return Err(Error::SplittingFailure(format!("F_{k}* is not inside F_{}* (excess {excess:e})", k - 1)));
        }
        bases.push(basis);
        dims.push(d);
        if d == 0 {
            break;
        }
    }
    let complete = *dims.last().expect("nonempty") == 0;
    Ok(Filtration { bases, dims, complete })
}

/// True iff the filtration reaches dimension zero by order `k_max`.
pub fn genericity_check(filt: &Filtration, k_max: usize) -> bool {
    filt.dims.iter().take(k_max + 1).any(|&d| d == 0)
}

/// Default order bound: `n` for time-invariant systems, `2n` otherwise.
pub fn default_k_max(sys: &LinearSystem) -> usize {
    match sys {
        LinearSystem::Lti(_) => sys.n(),
        LinearSystem::Ltv(_) => 2 * sys.n(),
    }
}

/// `V_k = F_k* ∩ (F_{k+1}*)^⊥` for every jump `k`, with orthogonal projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedSplitting {
    pub jumps: Vec<usize>,
    pub bases: Vec<DMatrix<f64>>,
    pub projectors: Vec<DMatrix<f64>>,
    /// `L_k = B~_k^T V_k`.
    pub leading: Vec<DMatrix<f64>>,
}

impl GradedSplitting {
    pub fn n(&self) -> usize {
        self.projectors[0].nrows()
    }
}

const SPLIT_TOL: f64 = 1e-10;

pub fn graded_splitting(filt: &Filtration, red: &DriftlessReduction) -> Result<GradedSplitting> {
    if !filt.complete {
        return Err(Error::Genericity { dims: filt.dims.clone() });
    }
    let n = red.n();
    let jumps = filt.jumps();
    let mut bases = Vec::new();
    let mut projectors = Vec::new();
    let mut leading = Vec::new();
    for &k in &jumps {
        let (fk, fk1) = (&filt.bases[k], &filt.bases[k + 1]);
        let complement = fk - fk1 * (fk1.transpose() * fk);
        let v = linalg::range_basis(&complement);
        let want = filt.dims[k] - filt.dims[k + 1];
        if v.ncols() != want {
            return Err(Error::SplittingFailure(format!("V_{k} has dimension {}, expected {want}", v.ncols())));
        }
        if subspace_excess(&v, fk) > SPLIT_TOL {
            return Err(Error::SplittingFailure(format!("V_{k} leaves F_{k}*")));
        }
        let l = red.b_tilde[k].transpose() * &v;
        let sv = linalg::singular_values(&l);
        let (smin, smax) = (sv.iter().copied().fold(f64::INFINITY, f64::min), sv.iter().copied().fold(0.0, f64::max));
        if sv.len() < want || !(smin > SPLIT_TOL * smax) {
            return Err(Error::SplittingFailure(format!("leading map on V_{k} is not injective")));
        }
        projectors.push(&v * v.transpose());
        bases.push(v);
        leading.push(l);
    }
    let sum = projectors.iter().fold(DMatrix::zeros(n, n), |acc, p| acc + p);
    if linalg::max_abs(&(sum - DMatrix::identity(n, n))) > SPLIT_TOL {
        return Err(Error::SplittingFailure("projectors do not sum to the identity".into()));
    }
    for (i, p) in projectors.iter().enumerate() {
        for (j, q) in projectors.iter().enumerate() {
            let expect = if i == j { p.clone() } else { DMatrix::zeros(n, n) };
            if linalg::max_abs(&(p * q - expect)) > SPLIT_TOL {
                return Err(Error::SplittingFailure(format!("projectors {i} and {j} are not complementary")));
            }
        }
    }
    Ok(GradedSplitting { jumps, bases, projectors, leading })
}

/// `Delta*(T) = sum_k T^{-(k+1)} Pi_k` and its adjoint `Delta(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerDelta {
    pub t_final: f64,
    pub delta_star: DMatrix<f64>,
    pub delta: DMatrix<f64>,
}

pub fn delta_normalizer(split: &GradedSplitting, t_final: f64) -> Result<NormalizerDelta> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::InvalidTime(format!("terminal time {t_final} must be positive")));
    }
    let n = split.n();
    let mut delta_star = DMatrix::zeros(n, n);
    for (&k, p) in split.jumps.iter().zip(&split.projectors) {
        let s = t_final.powi(-(k as i32 + 1));
        if !s.is_finite() {
            return Err(Error::TimeResolution(format!("T^-{} overflows at T = {t_final:e}", k + 1)));
        }
        delta_star += p * s;
    }
    let delta = delta_star.transpose();
    Ok(NormalizerDelta { t_final, delta_star, delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_bodies::ControlSet;
    use crate::lab::builtin_system;
    use crate::linear_systems::LtiSystem;

    fn lti(n: usize, a: &[f64], b: &[f64]) -> LinearSystem {
        let m = b.len() / n;
        LtiSystem::new(DMatrix::from_row_slice(n, n, a), DMatrix::from_row_slice(n, m, b), ControlSet::unit_box(m))
            .unwrap()
            .into()
    }

    #[test]
    fn reduction_examples() {
        let di = builtin_system("double_integrator").unwrap();
        let r = reduce_to_driftless(&di, 2).unwrap();
        assert_eq!(r.b_tilde[0].as_slice(), &[0.0, 1.0]);
        assert_eq!(r.b_tilde[1].as_slice(), &[-1.0, 0.0]);
        assert_eq!(r.b_tilde[2].as_slice(), &[0.0, 0.0]);

        let rot = builtin_system("rotating_b").unwrap();
        let r = reduce_to_driftless(&rot, 2).unwrap();
        assert_eq!(r.b_tilde[0].as_slice(), &[1.0, 0.0]);
        assert_eq!(r.b_tilde[1].as_slice(), &[0.0, 1.0]);
        assert_eq!(r.b_tilde[2].as_slice(), &[-0.5, 0.0]);
        assert!(r.warnings.is_empty());

        let zero_a = lti(2, &[0.0; 4], &[1.0, 2.0]);
        let r = reduce_to_driftless(&zero_a, 3).unwrap();
        assert_eq!(r.b_tilde[0].as_slice(), &[1.0, 2.0]);
        assert!(r.b_tilde[1..].iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn filtration_examples() {
        for name in ["double_integrator", "rotating_b"] {
            let sys = builtin_system(name).unwrap();
            let f = filtration(&reduce_to_driftless(&sys, default_k_max(&sys)).unwrap()).unwrap();
            assert_eq!(f.dims, vec![2, 1, 0], "{name}");
            assert!(genericity_check(&f, default_k_max(&sys)));
        }
        let di = builtin_system("double_integrator").unwrap();
        let f = filtration(&reduce_to_driftless(&di, 2).unwrap()).unwrap();
        assert!(f.bases[1][(1, 0)].abs() < 1e-15 && (f.bases[1][(0, 0)].abs() - 1.0).abs() < 1e-15);

        let flat = lti(2, &[0.0; 4], &[1.0, 0.0]);
        let f = filtration(&reduce_to_driftless(&flat, 2).unwrap()).unwrap();
        assert_eq!(f.dims, vec![2, 1, 1]);
        assert!(!f.complete);
        assert!(!genericity_check(&f, 2));
    }

    #[test]
    fn splitting_examples() {
        let di = builtin_system("double_integrator").unwrap();
        let red = reduce_to_driftless(&di, 2).unwrap();
        let s = graded_splitting(&filtration(&red).unwrap(), &red).unwrap();
        assert_eq!(s.jumps, vec![0, 1]);
        assert!((s.bases[0][(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((s.bases[1][(0, 0)].abs() - 1.0).abs() < 1e-15);

        let rot = builtin_system("rotating_b").unwrap();
        let red = reduce_to_driftless(&rot, 4).unwrap();
        let s = graded_splitting(&filtration(&red).unwrap(), &red).unwrap();
        assert!((s.bases[0][(0, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((s.bases[1][(1, 0)].abs() - 1.0).abs() < 1e-15);

        let full = lti(2, &[0.0; 4], &[1.0, 0.0, 0.0, 1.0]);
        let red = reduce_to_driftless(&full, 2).unwrap();
        let s = graded_splitting(&filtration(&red).unwrap(), &red).unwrap();
        assert_eq!(s.jumps, vec![0]);
        assert!(linalg::max_abs(&(&s.projectors[0] - DMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn splitting_requires_genericity() {
        let flat = lti(2, &[0.0; 4], &[1.0, 0.0]);
        let red = reduce_to_driftless(&flat, 2).unwrap();
        let err = graded_splitting(&filtration(&red).unwrap(), &red).unwrap_err();
        assert!(matches!(err, Error::Genericity { dims } if dims == vec![2, 1, 1]));
    }

    #[test]
    fn normalizer_examples() {
        let di = builtin_system("double_integrator").unwrap();
        let red = reduce_to_driftless(&di, 2).unwrap();
        let s = graded_splitting(&filtration(&red).unwrap(), &red).unwrap();
        let d1 = delta_normalizer(&s, 1.0).unwrap();
        assert!(linalg::max_abs(&(&d1.delta_star - DMatrix::identity(2, 2))) < 1e-15);
        let d = delta_normalizer(&s, 0.5).unwrap();
        let mut eig: Vec<f64> = d.delta_star.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 2.0).abs() < 1e-12 && (eig[1] - 4.0).abs() < 1e-12);
        // same spectrum as the Brunovsky scaling delta(0.5) = diag(4, 2)
        assert!(matches!(delta_normalizer(&s, -1.0), Err(Error::InvalidTime(_))));
    }
}
