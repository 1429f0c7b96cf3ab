//! Symmetric tridiagonal eigensolver (Sturm bisection + inverse iteration)
//! and the Chebyshev characteristic polynomials of the protocol matrices.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpectraError {
    #[error("tridiagonal matrix needs {expected} off-diagonal entries, got {got}")]
    OffDiagonalLength { expected: usize, got: usize },
    #[error("tridiagonal matrix must have at least one diagonal entry")]
    Empty,
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("no sign change found in [{lo}, {hi}] with {panels} panels")]
    NoSignChange { lo: f64, hi: f64, panels: usize },
}

/// Real symmetric tridiagonal matrix: `diag` of length `n`, `off` of length
/// `n - 1` (entry `off[i]` couples rows `i` and `i + 1`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymTridiag {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self, SpectraError> {
        if diag.is_empty() {
            return Err(SpectraError::Empty);
        }
        if off.len() != diag.len() - 1 {
            return Err(SpectraError::OffDiagonalLength {
                expected: diag.len() - 1,
                got: off.len(),
            });
        }
        if diag.iter().chain(off.iter()).any(|x| !x.is_finite()) {
            return Err(SpectraError::NonFinite);
        }
        Ok(SymTridiag { diag, off })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(v.len(), n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = self.diag[i] * v[i];
            if i > 0 {
                out[i] += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                out[i] += self.off[i] * v[i + 1];
            }
        }
        out
    }

    /// Interval certainly containing all eigenvalues (Gershgorin discs).
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }
}

/// Extreme eigenpair with a unit-norm, sign-canonicalized eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// Set when the top of the spectrum is (nearly) degenerate; the vector
    /// is then only one representative of the invariant subspace.
    pub degenerate: bool,
}

/// Number of eigenvalues strictly below `lambda` (Sturm sequence via the
/// LDL^T pivot signs).
pub fn sturm_count(t: &SymTridiag, lambda: f64) -> usize {
    let n = t.n();
    let mut count = 0;
    let mut q = t.diag[0] - lambda;
    if q < 0.0 {
        count += 1;
    }
    // Guard scaled to the matrix so tiny pivots cannot blow up the recurrence.
    let scale: f64 = t
        .diag
        .iter()
        .chain(t.off.iter())
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let guard = f64::MIN_POSITIVE.max(scale * 1e-300).max(1e-300);
    for i in 1..n {
        let q_safe = if q.abs() < guard {
            if q >= 0.0 {
                guard
            } else {
                -guard
            }
        } else {
            q
        };
        q = (t.diag[i] - lambda) - t.off[i - 1] * t.off[i - 1] / q_safe;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// k-th smallest eigenvalue (0-based) by bisection on the Sturm count.
fn eigenvalue_by_index(t: &SymTridiag, k: usize) -> f64 {
    let (mut lo, mut hi) = t.gershgorin_bounds();
    lo -= 1.0;
    hi += 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-14 * mid.abs().max(1.0) {
            break;
        }
        if sturm_count(t, mid) <= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest eigenvalue and its eigenvector.
///
/// The eigenvalue comes from Sturm bisection; the eigenvector from inverse
/// iteration with a perturbed shift. The vector is unit 2-norm with its
/// largest-magnitude entry made positive. When the spectral gap at the top
/// is below `1e-12` the pair is flagged [`EigenPair::degenerate`].
pub fn max_eigenpair(t: &SymTridiag) -> EigenPair {
    let n = t.n();
    if n == 1 {
        return EigenPair {
            value: t.diag[0],
            vector: vec![1.0],
            degenerate: false,
        };
    }
    let value = eigenvalue_by_index(t, n - 1);
    let runner_up = eigenvalue_by_index(t, n - 2);
    let degenerate = (value - runner_up).abs() < 1e-12;
    let vector = inverse_iteration(t, value);
    EigenPair {
        value,
        vector,
        degenerate,
    }
}

fn inverse_iteration(t: &SymTridiag, lambda: f64) -> Vec<f64> {
    let n = t.n();
    let scale: f64 = t
        .diag
        .iter()
        .chain(t.off.iter())
        .fold(1.0f64, |m, x| m.max(x.abs()));
    // Slightly detuned shift keeps the factorization well defined while the
    // iteration still converges onto the dominant direction in a step or two.
    let shift = lambda + scale * 1e-14;
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 1e-3).collect();
    normalize(&mut x);
    for _ in 0..64 {
        let mut y = solve_tridiag(t, shift, &x);
        normalize(&mut y);
        let residual = residual_inf(t, lambda, &y);
        x = y;
        if residual <= 1e-12 * lambda.abs().max(1.0).max(scale) {
            break;
        }
    }
    canonicalize_sign(&mut x);
    x
}

fn residual_inf(t: &SymTridiag, lambda: f64, v: &[f64]) -> f64 {
    t.matvec(v)
        .iter()
        .zip(v)
        .map(|(mv, vi)| (mv - lambda * vi).abs())
        .fold(0.0, f64::max)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

fn canonicalize_sign(v: &mut [f64]) {
    let mut idx = 0;
    let mut best = 0.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Solves `(T - sigma I) y = b` with partial pivoting (band storage with one
/// fill-in superdiagonal).
fn solve_tridiag(t: &SymTridiag, sigma: f64, b: &[f64]) -> Vec<f64> {
    let n = t.n();
    let mut d: Vec<f64> = t.diag.iter().map(|x| x - sigma).collect();
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut sub: Vec<f64> = vec![0.0; n];
    for i in 0..n - 1 {
        u1[i] = t.off[i];
        sub[i + 1] = t.off[i];
    }
    let mut rhs = b.to_vec();
    let scale: f64 = t
        .diag
        .iter()
        .chain(t.off.iter())
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let tiny = (scale * 1e-280).max(f64::MIN_POSITIVE);
    for i in 0..n - 1 {
        if d[i].abs() < sub[i + 1].abs() {
            // Pivot: swap row i and row i+1.
            let (ra, rb) = (i, i + 1);
            let row_a = (d[ra], u1[ra], u2[ra], rhs[ra]);
            let row_b = (sub[rb], d[rb], u1[rb], rhs[rb]);
            d[ra] = row_b.0;
            u1[ra] = row_b.1;
            u2[ra] = row_b.2;
            rhs[ra] = row_b.3;
            sub[rb] = row_a.0;
            d[rb] = row_a.1;
            u1[rb] = row_a.2;
            rhs[rb] = row_a.3;
        }
        if d[i].abs() < tiny {
            d[i] = if d[i] >= 0.0 { tiny } else { -tiny };
        }
        let m = sub[i + 1] / d[i];
        d[i + 1] -= m * u1[i];
        u1[i + 1] -= m * u2[i];
        rhs[i + 1] -= m * rhs[i];
        sub[i + 1] = 0.0;
    }
    if d[n - 1].abs() < tiny {
        d[n - 1] = if d[n - 1] >= 0.0 { tiny } else { -tiny };
    }
    let mut y = vec![0.0; n];
    y[n - 1] = rhs[n - 1] / d[n - 1];
    if n >= 2 {
        y[n - 2] = (rhs[n - 2] - u1[n - 2] * y[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        y[i] = (rhs[i] - u1[i] * y[i + 1] - u2[i] * y[i + 2]) / d[i];
    }
    y
}

/// Chebyshev polynomial of the second kind, `U_{-1} = 0`, `U_0 = 1`,
/// `U_{k+1} = 2 x U_k - U_{k-1}`.
pub fn chebyshev_u(n: i64, x: f64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    let mut prev = 0.0; // U_{-1}
    let mut cur = 1.0; // U_0
    for _ in 0..n {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `det(M + 2 lambda I)` for the multiplicity-protocol matrix of dimension
/// `n`, expressed through Chebyshev polynomials:
/// `U_n - 2/(2n+1) U_{n-1} + (2n-1)/(2n) U_{n-2}`.
pub fn charpoly_multiplicity(n: usize, lambda: f64) -> f64 {
    assert!(n >= 2, "multiplicity characteristic polynomial needs n >= 2");
    let nf = n as f64;
    chebyshev_u(n as i64, lambda) - 2.0 / (2.0 * nf + 1.0) * chebyshev_u(n as i64 - 1, lambda)
        + (2.0 * nf - 1.0) / (2.0 * nf) * chebyshev_u(n as i64 - 2, lambda)
}

/// Boundary term of the entangled-protocol matrix: `-1` when the lowest
/// irrep is spin 0 (even spin count), `0` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Zeta {
    MinusOne,
    Zero,
}

impl Zeta {
    pub fn value(self) -> f64 {
        match self {
            Zeta::MinusOne => -1.0,
            Zeta::Zero => 0.0,
        }
    }
}

/// `det(M + 2 lambda I)` for the entangled-protocol matrix of dimension `n`:
/// `U_n + zeta U_{n-1}`.
pub fn charpoly_entangled(n: usize, zeta: Zeta, lambda: f64) -> f64 {
    assert!(n >= 1, "entangled characteristic polynomial needs n >= 1");
    chebyshev_u(n as i64, lambda) + zeta.value() * chebyshev_u(n as i64 - 1, lambda)
}

/// `det(M + 2 lambda I)` by the three-term continuant recurrence; the
/// numeric ground truth tying the characteristic polynomials to their
/// matrices.
pub fn det_plus_two_lambda(t: &SymTridiag, lambda: f64) -> f64 {
    let n = t.n();
    let mut prev = 1.0;
    let mut cur = t.diag[0] + 2.0 * lambda;
    for i in 1..n {
        let next = (t.diag[i] + 2.0 * lambda) * cur - t.off[i - 1] * t.off[i - 1] * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Leftmost zero of `f` in `[lo, hi]`: a uniform pre-scan over `panels`
/// panels locates the first sign change, then bisection refines it to
/// `1e-13` relative accuracy.
pub fn smallest_root<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    panels: usize,
) -> Result<f64, SpectraError> {
    assert!(panels >= 1 && hi > lo);
    let step = (hi - lo) / panels as f64;
    let mut x0 = lo;
    let mut f0 = f(x0);
    if f0 == 0.0 {
        return Ok(x0);
    }
    let mut bracket = None;
    for i in 1..=panels {
        let x1 = if i == panels { hi } else { lo + i as f64 * step };
        let f1 = f(x1);
        if f1 == 0.0 {
            return Ok(x1);
        }
        if f0.signum() != f1.signum() {
            bracket = Some((x0, x1, f0));
            break;
        }
        x0 = x1;
        f0 = f1;
    }
    let (mut a, mut b, fa) = bracket.ok_or(SpectraError::NoSignChange { lo, hi, panels })?;
    let sign_a = fa.signum();
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if b - a < 1e-13 * mid.abs().max(1.0) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == sign_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn residual(t: &SymTridiag, p: &EigenPair) -> f64 {
        residual_inf(t, p.value, &p.vector)
    }

    #[test]
    fn two_by_two_symmetric_exchange() {
        let t = SymTridiag::new(vec![0.0, 0.0], vec![1.0]).unwrap();
        let p = max_eigenpair(&t);
        assert!((p.value - 1.0).abs() < 1e-13);
        let s = 1.0 / 2.0f64.sqrt();
        assert!((p.vector[0] - s).abs() < 1e-10);
        assert!((p.vector[1] - s).abs() < 1e-10);
        assert!(!p.degenerate);
    }

    #[test]
    fn two_by_two_quadratic_formula() {
        // Largest spin block of the single protocol at J = 1:
        // diag (1/2, 0), off sqrt(1/3).
        let t = SymTridiag::new(vec![0.5, 0.0], vec![(1.0f64 / 3.0).sqrt()]).unwrap();
        let p = max_eigenpair(&t);
        let expect = 0.5 * (0.5 + (0.25f64 + 4.0 / 3.0).sqrt());
        assert!((p.value - expect).abs() < 1e-13);
        assert!((expect - 0.879152870).abs() < 1e-9);
        assert!(residual(&t, &p) < 1e-12);
    }

    #[test]
    fn free_chain_matches_closed_form() {
        for n in 2..=32usize {
            let t = SymTridiag::new(vec![0.0; n], vec![1.0; n - 1]).unwrap();
            let p = max_eigenpair(&t);
            let expect = 2.0 * (PI / (n as f64 + 1.0)).cos();
            assert!(
                (p.value - expect).abs() < 1e-12,
                "n={n}: {} vs {expect}",
                p.value
            );
            assert!(residual(&t, &p) < 1e-10 * p.value.abs().max(1.0));
        }
    }

    #[test]
    fn dense_oracle_agreement_small_sizes() {
        // Brute-force dense eigensolve as the independent route.
        use nalgebra::DMatrix;
        let cases: Vec<SymTridiag> = vec![
            SymTridiag::new(vec![0.5, 0.0], vec![(1.0f64 / 3.0).sqrt()]).unwrap(),
            SymTridiag::new(vec![-0.4, 0.0], vec![0.5]).unwrap(),
            SymTridiag::new(vec![1.0, -2.0, 0.5, 0.3], vec![0.7, 0.2, -0.9]).unwrap(),
            SymTridiag::new(
                vec![2.0 / 3.0, 0.5, 0.0],
                vec![(3.0f64 / 5.0).sqrt(), (1.0f64 / 3.0).sqrt()],
            )
            .unwrap(),
            SymTridiag::new(vec![0.0; 8], vec![1.0; 7]).unwrap(),
        ];
        for t in cases {
            let n = t.n();
            let mut dense = DMatrix::zeros(n, n);
            for i in 0..n {
                dense[(i, i)] = t.diag()[i];
                if i + 1 < n {
                    dense[(i, i + 1)] = t.off()[i];
                    dense[(i + 1, i)] = t.off()[i];
                }
            }
            let eig = dense.symmetric_eigen();
            let max_dense = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
            let p = max_eigenpair(&t);
            assert!(
                (p.value - max_dense).abs() < 1e-10,
                "{} vs dense {max_dense}",
                p.value
            );
        }
    }

    #[test]
    fn single_entry_matrix() {
        let t = SymTridiag::new(vec![-3.5], vec![]).unwrap();
        let p = max_eigenpair(&t);
        assert_eq!(p.value, -3.5);
        assert_eq!(p.vector, vec![1.0]);
    }

    #[test]
    fn degenerate_top_is_flagged() {
        let t = SymTridiag::new(vec![2.0, 2.0, 0.0], vec![0.0, 0.0]).unwrap();
        let p = max_eigenpair(&t);
        assert!(p.degenerate);
        assert!((p.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sturm_count_brackets_spectrum() {
        let t = SymTridiag::new(vec![1.0, 3.0], vec![-1.0]).unwrap();
        assert_eq!(sturm_count(&t, 0.0), 0);
        assert_eq!(sturm_count(&t, 1.0), 1);
        assert_eq!(sturm_count(&t, 4.0), 2);
    }

    #[test]
    fn chebyshev_low_orders() {
        assert_eq!(chebyshev_u(-1, 0.4), 0.0);
        assert_eq!(chebyshev_u(0, 0.4), 1.0);
        assert!((chebyshev_u(1, 0.4) - 0.8).abs() < 1e-15);
        assert!((chebyshev_u(2, 0.3) - (-0.64)).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_matches_trig_form() {
        let theta = 0.7f64;
        let x = theta.cos();
        let trig = (6.0 * theta).sin() / theta.sin();
        assert!((chebyshev_u(5, x) - trig).abs() < 1e-12);
    }

    #[test]
    fn charpoly_multiplicity_endpoint() {
        // U_k(1) = k + 1.
        for n in 2..=12usize {
            let nf = n as f64;
            let expect =
                (nf + 1.0) - 2.0 * nf / (2.0 * nf + 1.0) + (2.0 * nf - 1.0) * (nf - 1.0) / (2.0 * nf);
            assert!((charpoly_multiplicity(n, 1.0) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn charpoly_entangled_endpoint_and_free_case() {
        for n in 1..=12usize {
            let nf = n as f64;
            assert!((charpoly_entangled(n, Zeta::Zero, 1.0) - (nf + 1.0)).abs() < 1e-12);
            assert!(
                (charpoly_entangled(n, Zeta::MinusOne, 1.0) - (nf + 1.0 - nf)).abs() < 1e-12
            );
        }
        // n = 2, zeta = 0: roots of U_2 at +-1/2 <=> eigenvalues -+1 of the
        // 2x2 exchange matrix under det(M + 2 lambda).
        let t = SymTridiag::new(vec![0.0, 0.0], vec![1.0]).unwrap();
        for lambda in [-0.9, -0.5, -0.1, 0.3, 0.5, 0.8] {
            let lhs = charpoly_entangled(2, Zeta::Zero, lambda);
            let rhs = det_plus_two_lambda(&t, lambda);
            assert!((lhs - rhs).abs() < 1e-12, "lambda={lambda}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn smallest_root_linear() {
        let r = smallest_root(|x| x, -1.0, 1.0, 64).unwrap();
        assert!(r.abs() < 1e-13);
    }

    #[test]
    fn smallest_root_picks_leftmost() {
        let r = smallest_root(|x| (x + 0.75) * (x - 0.25), -1.0, 1.0, 128).unwrap();
        assert!((r + 0.75).abs() < 1e-12);
    }

    #[test]
    fn smallest_root_reports_missing_change() {
        let err = smallest_root(|x| x * x + 1.0, -1.0, 1.0, 32).unwrap_err();
        assert!(matches!(err, SpectraError::NoSignChange { .. }));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            SymTridiag::new(vec![], vec![]),
            Err(SpectraError::Empty)
        ));
        assert!(matches!(
            SymTridiag::new(vec![1.0, 2.0], vec![]),
            Err(SpectraError::OffDiagonalLength { .. })
        ));
        assert!(matches!(
            SymTridiag::new(vec![f64::NAN], vec![]),
            Err(SpectraError::NonFinite)
        ));
    }

    proptest! {
        #[test]
        fn chebyshev_recurrence_vs_trig(theta in 0.05f64..3.1, n in 0usize..24) {
            let x = theta.cos();
            let trig = ((n as f64 + 1.0) * theta).sin() / theta.sin();
            prop_assert!((chebyshev_u(n as i64, x) - trig).abs() < 1e-10 * trig.abs().max(1.0));
        }

        #[test]
        fn max_eigenpair_residual_small(
            diag in proptest::collection::vec(-3.0f64..3.0, 2..12),
            seed in 0u64..1000,
        ) {
            let n = diag.len();
            let mut off = Vec::with_capacity(n - 1);
            let mut s = seed;
            for _ in 0..n - 1 {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                off.push(((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0);
            }
            let t = SymTridiag::new(diag, off).unwrap();
            let p = max_eigenpair(&t);
            prop_assert!(residual(&t, &p) < 1e-10 * p.value.abs().max(1.0));
            // No eigenvalue exceeds it.
            prop_assert_eq!(sturm_count(&t, p.value + 1e-9 * p.value.abs().max(1.0)), t.n());
        }
    }
}
