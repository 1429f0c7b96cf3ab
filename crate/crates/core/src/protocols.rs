//! The three frame-transmission protocols: fidelity matrices over irrep
//! weights, optimal encoding/measurement states, closed forms and
//! asymptotic rates.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::spectra::{
    charpoly_multiplicity, max_eigenpair, smallest_root, SpectraError, SymTridiag, Zeta,
};
use crate::su2::{IrrepBlock, Spin, Su2Error};

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("single-system protocol needs integer J >= 1, got J={0}")]
    MaxSpinTooSmall(u32),
    #[error(
        "the multiplicity-protocol matrix is defined for an odd number of spins; got N={0} (even)"
    )]
    EvenSpinCount(u32),
    #[error("multiplicity protocol needs N >= 3, got N={0}")]
    TooFewSpins(u32),
    #[error("entangled protocol needs N >= 1")]
    ZeroSpins,
    #[error("expected {expected} weight entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("row-sum bound needs non-negative entries, found {0}")]
    NegativeEntry(f64),
    #[error("independent routes disagree: {a} vs {b} (tolerance {tol})")]
    RouteMismatch { a: f64, b: f64, tol: f64 },
    #[error("state norm deviates from 1 by {0}")]
    BadNormalization(f64),
    #[error(transparent)]
    Su2(#[from] Su2Error),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// Which transmission protocol a result or state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// One system carrying each spin `j = 0..J` once.
    Single,
    /// `N` spins (odd) with equivalent representations entangled against
    /// the magnetic number.
    Multiplicity,
    /// Shared maximally entangled state between sender and receiver.
    Entangled,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Protocol::Single => "single",
            Protocol::Multiplicity => "multiplicity",
            Protocol::Entangled => "entangled",
        };
        f.write_str(name)
    }
}

/// Provenance of a reported fidelity value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Eigensolve,
    ClosedForm,
    CharpolyRoot,
}

/// Real per-irrep amplitudes, tagged with their protocol and the spin each
/// entry belongs to (descending `j`, matching matrix row order).
#[derive(Debug, Clone, Serialize)]
pub struct IrrepWeights {
    pub protocol: Protocol,
    pub js: Vec<Spin>,
    pub entries: Vec<f64>,
}

impl IrrepWeights {
    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum()
    }
}

/// Alice's messenger state: a list of irrep blocks with unit global norm.
#[derive(Debug, Clone)]
pub struct FiducialState {
    blocks: Vec<IrrepBlock>,
}

impl FiducialState {
    pub fn new(blocks: Vec<IrrepBlock>) -> Result<Self, ProtocolError> {
        let norm_sqr: f64 = blocks.iter().map(|b| b.norm_sqr()).sum();
        let defect = (norm_sqr - 1.0).abs();
        if defect > 1e-12 {
            return Err(ProtocolError::BadNormalization(defect));
        }
        Ok(FiducialState { blocks })
    }

    pub fn blocks(&self) -> &[IrrepBlock] {
        &self.blocks
    }

    pub fn max_twice_j(&self) -> u32 {
        self.blocks.iter().map(|b| b.j().twice()).max().unwrap_or(0)
    }
}

/// Bob's POVM seed. Schur's lemma fixes the normalization: within each
/// block, the amplitudes grouped by equivalent-representation label must
/// have unit norm per label (for unlabelled blocks, unit norm overall).
/// The `sqrt(d_j)` weights of the full seed vector are applied externally
/// by the overlap.
#[derive(Debug, Clone)]
pub struct PovmSeed {
    blocks: Vec<IrrepBlock>,
}

impl PovmSeed {
    pub fn new(blocks: Vec<IrrepBlock>) -> Result<Self, ProtocolError> {
        for block in &blocks {
            let mut per_label: std::collections::BTreeMap<u32, f64> = Default::default();
            for (idx, amp) in block.amps().iter().enumerate() {
                *per_label.entry(block.alpha_at(idx)).or_insert(0.0) += amp.norm_sqr();
            }
            for (_, norm_sqr) in per_label {
                let defect = (norm_sqr - 1.0).abs();
                if defect > 1e-12 {
                    return Err(ProtocolError::BadNormalization(defect));
                }
            }
        }
        Ok(PovmSeed { blocks })
    }

    pub fn blocks(&self) -> &[IrrepBlock] {
        &self.blocks
    }

    pub fn max_twice_j(&self) -> u32 {
        self.blocks.iter().map(|b| b.j().twice()).max().unwrap_or(0)
    }
}

/// A solved protocol instance: the maximal average fidelity, derived error
/// figures, the optimal irrep weights, the matrix they came from, and the
/// provenance of every number.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolResult {
    pub protocol: Protocol,
    /// `J` for the single-system protocol, the spin count `N` otherwise.
    pub size: u32,
    pub chi1_max: f64,
    pub h_avg: f64,
    pub mse: f64,
    pub weights: IrrepWeights,
    pub matrix: SymTridiag,
    pub method: SolveMethod,
    /// Values of the same quantity obtained through independent routes.
    pub alternates: Vec<(SolveMethod, f64)>,
}

impl ProtocolResult {
    fn from_parts(
        protocol: Protocol,
        size: u32,
        chi1_max: f64,
        weights: IrrepWeights,
        matrix: SymTridiag,
        method: SolveMethod,
        alternates: Vec<(SolveMethod, f64)>,
    ) -> Self {
        debug_assert!(chi1_max > 0.0 && chi1_max < 3.0);
        ProtocolResult {
            protocol,
            size,
            chi1_max,
            h_avg: 6.0 - 2.0 * chi1_max,
            mse: (3.0 - chi1_max) / 6.0,
            weights,
            matrix,
            method,
            alternates,
        }
    }
}

// ---------------------------------------------------------------------------
// Single-system protocol (one copy of each spin j = 0..J)
// ---------------------------------------------------------------------------

/// Dominating fidelity matrix of the single-system protocol, rows ordered
/// `j = J .. 0`: diagonal `j/(j+1)`, off-diagonal between `j` and `j-1`
/// equal to `sqrt((2j-1)/(2j+1))`.
pub fn build_m_single(j_max: u32) -> Result<SymTridiag, ProtocolError> {
    if j_max < 1 {
        return Err(ProtocolError::MaxSpinTooSmall(j_max));
    }
    let n = j_max as usize + 1;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n - 1);
    for i in 0..n {
        let j = (j_max - i as u32) as f64;
        diag.push(j / (j + 1.0));
        if i + 1 < n {
            off.push(((2.0 * j - 1.0) / (2.0 * j + 1.0)).sqrt());
        }
    }
    Ok(SymTridiag::new(diag, off)?)
}

fn js_descending_from(top_twice_j: u32, count: usize) -> Vec<Spin> {
    (0..count)
        .map(|i| Spin::from_twice(top_twice_j - 2 * i as u32))
        .collect()
}

/// Solves the single-system protocol for maximum spin `J`: the fidelity is
/// the largest eigenvalue of [`build_m_single`], the optimal weights its
/// eigenvector, the optimal seed `B^j = |j, j>`.
pub fn solve_single(j_max: u32) -> Result<ProtocolResult, ProtocolError> {
    let matrix = build_m_single(j_max)?;
    let pair = max_eigenpair(&matrix);
    let weights = IrrepWeights {
        protocol: Protocol::Single,
        js: js_descending_from(2 * j_max, matrix.n()),
        entries: pair.vector,
    };
    Ok(ProtocolResult::from_parts(
        Protocol::Single,
        j_max,
        pair.value,
        weights,
        matrix,
        SolveMethod::Eigensolve,
        Vec::new(),
    ))
}

/// Upper bound on the top eigenvalue of a matrix with non-negative entries:
/// the maximum row sum.
pub fn rowsum_upper_bound(t: &SymTridiag) -> Result<f64, ProtocolError> {
    for &x in t.diag().iter().chain(t.off().iter()) {
        if x < 0.0 {
            return Err(ProtocolError::NegativeEntry(x));
        }
    }
    let n = t.n();
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { t.off()[i - 1] } else { 0.0 };
        let right = if i + 1 < n { t.off()[i] } else { 0.0 };
        best = best.max(left + t.diag()[i] + right);
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Multiplicity protocol (N odd spins, labels entangled with m)
// ---------------------------------------------------------------------------

/// Fidelity matrix of the multiplicity protocol for odd `N`, rows ordered
/// `j = N/2 .. 1/2`: first diagonal `-1/(J+1)`, first off-diagonal
/// `1/sqrt(d_J)`, all other diagonals 0 and off-diagonals 1. The fidelity
/// quadratic form is `a^t (1 + M) a`.
pub fn build_m_multiplicity(n: u32) -> Result<SymTridiag, ProtocolError> {
    if n % 2 == 0 {
        return Err(ProtocolError::EvenSpinCount(n));
    }
    if n < 3 {
        return Err(ProtocolError::TooFewSpins(n));
    }
    let dim = ((n + 1) / 2) as usize;
    let j_top = n as f64 / 2.0;
    let mut diag = vec![0.0; dim];
    diag[0] = -1.0 / (j_top + 1.0);
    let mut off = vec![1.0; dim - 1];
    off[0] = 1.0 / ((n + 1) as f64).sqrt();
    Ok(SymTridiag::new(diag, off)?)
}

/// Solves the multiplicity protocol: `chi1 = 1 + lambda_max(M)`, with the
/// eigenvector as messenger weights, cross-checked against
/// `1 - 2 * lambda_0` from the Chebyshev characteristic polynomial (whose
/// dimension index is `(N+1)/2`).
pub fn solve_multiplicity(n: u32) -> Result<ProtocolResult, ProtocolError> {
    let matrix = build_m_multiplicity(n)?;
    let pair = max_eigenpair(&matrix);
    let chi1 = 1.0 + pair.value;

    let dim = matrix.n();
    let lambda0 = smallest_root(|x| charpoly_multiplicity(dim, x), -1.0, 1.0, 32 * dim)?;
    let chi1_root = 1.0 - 2.0 * lambda0;
    let tol = 1e-9;
    if (chi1 - chi1_root).abs() > tol {
        return Err(ProtocolError::RouteMismatch {
            a: chi1,
            b: chi1_root,
            tol,
        });
    }

    let weights = IrrepWeights {
        protocol: Protocol::Multiplicity,
        js: js_descending_from(n, dim),
        entries: pair.vector,
    };
    Ok(ProtocolResult::from_parts(
        Protocol::Multiplicity,
        n,
        chi1,
        weights,
        matrix,
        SolveMethod::Eigensolve,
        vec![(SolveMethod::CharpolyRoot, chi1_root)],
    ))
}

/// Messenger state of the multiplicity protocol: `a_J |J J>` plus, for each
/// `j < J`, the uniform superposition over `m` entangled with a distinct
/// label per `m`.
pub fn messenger_multiplicity(n: u32, weights: &[f64]) -> Result<FiducialState, ProtocolError> {
    let blocks = multiplicity_blocks(n, Some(weights))?;
    FiducialState::new(blocks)
}

/// POVM seed of the multiplicity protocol: `|J J>` on the top block and the
/// label-entangled uniform pattern below.
pub fn seed_multiplicity(n: u32) -> Result<PovmSeed, ProtocolError> {
    let blocks = multiplicity_blocks(n, None)?;
    PovmSeed::new(blocks)
}

fn multiplicity_blocks(n: u32, weights: Option<&[f64]>) -> Result<Vec<IrrepBlock>, ProtocolError> {
    if n % 2 == 0 {
        return Err(ProtocolError::EvenSpinCount(n));
    }
    if n < 3 {
        return Err(ProtocolError::TooFewSpins(n));
    }
    let dim = ((n + 1) / 2) as usize;
    if let Some(w) = weights {
        if w.len() != dim {
            return Err(ProtocolError::DimensionMismatch {
                expected: dim,
                got: w.len(),
            });
        }
    }
    let mut blocks = Vec::with_capacity(dim);
    for (i, j) in js_descending_from(n, dim).into_iter().enumerate() {
        let scale = weights.map_or(1.0, |w| w[i]);
        if i == 0 {
            let mut amps = vec![Complex64::ZERO; j.dim()];
            amps[0] = Complex64::new(scale, 0.0);
            blocks.push(IrrepBlock::new(j, amps)?);
        } else {
            blocks.push(labelled_uniform_block(j, scale, weights.is_some())?);
        }
    }
    Ok(blocks)
}

/// Uniform block over `m` with one label per `m`. For a messenger the
/// amplitudes are `scale / sqrt(d_j)`; for a seed they are 1 (unit norm per
/// label).
fn labelled_uniform_block(
    j: Spin,
    scale: f64,
    is_messenger: bool,
) -> Result<IrrepBlock, Su2Error> {
    let dim = j.dim();
    let amp = if is_messenger {
        scale / (dim as f64).sqrt()
    } else {
        1.0
    };
    let amps = vec![Complex64::new(amp, 0.0); dim];
    let alphas = (0..dim as u32).collect();
    IrrepBlock::with_alphas(j, amps, alphas)
}

// ---------------------------------------------------------------------------
// Entangled protocol (dense covariant coding)
// ---------------------------------------------------------------------------

/// Fidelity matrix of the entangled protocol for any `N >= 1`, rows ordered
/// by descending `j`: off-diagonals 1, diagonals 0 except the last (lowest
/// spin), which is -1 for `N` even and 0 for `N` odd.
pub fn build_m_entangled(n: u32) -> Result<SymTridiag, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::ZeroSpins);
    }
    let dim = entangled_dim(n);
    let mut diag = vec![0.0; dim];
    diag[dim - 1] = entangled_zeta(n).value();
    let off = vec![1.0; dim - 1];
    Ok(SymTridiag::new(diag, off)?)
}

fn entangled_dim(n: u32) -> usize {
    (n as usize + 2) / 2
}

pub fn entangled_zeta(n: u32) -> Zeta {
    if n % 2 == 0 {
        Zeta::MinusOne
    } else {
        Zeta::Zero
    }
}

/// Closed-form optimal weights of the entangled protocol:
/// `a_j = 2/sqrt(N+3) sin((2j+1) pi / (N+3))`, ordered by descending `j`.
pub fn entangled_weights_closed_form(n: u32) -> Vec<f64> {
    let dim = entangled_dim(n);
    let denom = (n + 3) as f64;
    (0..dim)
        .map(|i| {
            let twice_j = n - 2 * i as u32;
            2.0 / denom.sqrt() * ((twice_j as f64 + 1.0) * PI / denom).sin()
        })
        .collect()
}

/// Solves the entangled protocol. The closed form
/// `chi1 = 1 + 2 cos(2 pi / (N + 3))` is exact for every `N`; the
/// eigensolver route is computed alongside and both values (and the two
/// weight vectors) must agree to 1e-10.
pub fn solve_entangled(n: u32) -> Result<ProtocolResult, ProtocolError> {
    let matrix = build_m_entangled(n)?;
    let chi1_closed = 1.0 + 2.0 * (2.0 * PI / (n as f64 + 3.0)).cos();
    let closed_weights = entangled_weights_closed_form(n);

    let pair = max_eigenpair(&matrix);
    let chi1_eigen = 1.0 + pair.value;
    let tol = 1e-10;
    if (chi1_closed - chi1_eigen).abs() > tol {
        return Err(ProtocolError::RouteMismatch {
            a: chi1_closed,
            b: chi1_eigen,
            tol,
        });
    }
    for (c, e) in closed_weights.iter().zip(&pair.vector) {
        if (c - e).abs() > tol {
            return Err(ProtocolError::RouteMismatch {
                a: *c,
                b: *e,
                tol,
            });
        }
    }

    let weights = IrrepWeights {
        protocol: Protocol::Entangled,
        js: js_descending_from(n, matrix.n()),
        entries: closed_weights,
    };
    Ok(ProtocolResult::from_parts(
        Protocol::Entangled,
        n,
        chi1_closed,
        weights,
        matrix,
        SolveMethod::ClosedForm,
        vec![(SolveMethod::Eigensolve, chi1_eigen)],
    ))
}

/// Messenger of the entangled protocol in overlap form: every block is the
/// label-entangled uniform superposition weighted by `a_j`, the label
/// standing in for the receiver's half of the shared pair.
pub fn messenger_entangled(n: u32, weights: &[f64]) -> Result<FiducialState, ProtocolError> {
    let dim = entangled_dim(n);
    if weights.len() != dim {
        return Err(ProtocolError::DimensionMismatch {
            expected: dim,
            got: weights.len(),
        });
    }
    let mut blocks = Vec::with_capacity(dim);
    for (i, j) in js_descending_from(n, dim).into_iter().enumerate() {
        blocks.push(labelled_uniform_block(j, weights[i], true)?);
    }
    FiducialState::new(blocks)
}

/// POVM seed of the entangled protocol in overlap form (the maximally
/// entangled measurement state).
pub fn seed_entangled(n: u32) -> Result<PovmSeed, ProtocolError> {
    let dim = entangled_dim(n);
    let mut blocks = Vec::with_capacity(dim);
    for j in js_descending_from(n, dim) {
        blocks.push(labelled_uniform_block(j, 1.0, false)?);
    }
    PovmSeed::new(blocks)
}

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

/// Messenger of the single-system protocol, `A^j_m = C^j delta_{m j}`.
pub fn messenger_single(j_max: u32, weights: &[f64]) -> Result<FiducialState, ProtocolError> {
    let expected = j_max as usize + 1;
    if weights.len() != expected {
        return Err(ProtocolError::DimensionMismatch {
            expected,
            got: weights.len(),
        });
    }
    let mut blocks = Vec::with_capacity(expected);
    for (i, j) in js_descending_from(2 * j_max, expected).into_iter().enumerate() {
        let mut amps = vec![Complex64::ZERO; j.dim()];
        amps[0] = Complex64::new(weights[i], 0.0);
        blocks.push(IrrepBlock::new(j, amps)?);
    }
    FiducialState::new(blocks)
}

/// Optimal seed of the single-system protocol, `B^j_m = delta^j_m`.
pub fn seed_single(j_max: u32) -> Result<PovmSeed, ProtocolError> {
    if j_max < 1 {
        return Err(ProtocolError::MaxSpinTooSmall(j_max));
    }
    let count = j_max as usize + 1;
    let mut blocks = Vec::with_capacity(count);
    for j in js_descending_from(2 * j_max, count) {
        blocks.push(IrrepBlock::basis_state(j, j.twice() as i32)?);
    }
    PovmSeed::new(blocks)
}

/// The optimal encoding/measurement pair realizing a solved protocol, in
/// the overlap representation consumed by the verification module.
pub fn optimal_states(result: &ProtocolResult) -> Result<(FiducialState, PovmSeed), ProtocolError> {
    match result.protocol {
        Protocol::Single => Ok((
            messenger_single(result.size, &result.weights.entries)?,
            seed_single(result.size)?,
        )),
        Protocol::Multiplicity => Ok((
            messenger_multiplicity(result.size, &result.weights.entries)?,
            seed_multiplicity(result.size)?,
        )),
        Protocol::Entangled => Ok((
            messenger_entangled(result.size, &result.weights.entries)?,
            seed_entangled(result.size)?,
        )),
    }
}

/// The fidelity quadratic form at given weights: `a^t M a` for the
/// single-system protocol, `a^t (1 + M) a` for the other two. Maximized
/// exactly by the top eigenvector.
pub fn chi1_from_weights(
    protocol: Protocol,
    weights: &[f64],
    matrix: &SymTridiag,
) -> Result<f64, ProtocolError> {
    if weights.len() != matrix.n() {
        return Err(ProtocolError::DimensionMismatch {
            expected: matrix.n(),
            got: weights.len(),
        });
    }
    let mv = matrix.matvec(weights);
    let quad: f64 = weights.iter().zip(&mv).map(|(w, m)| w * m).sum();
    match protocol {
        Protocol::Single => Ok(quad),
        Protocol::Multiplicity | Protocol::Entangled => {
            let norm_sqr: f64 = weights.iter().map(|w| w * w).sum();
            Ok(norm_sqr + quad)
        }
    }
}

/// Leading truncation of the single-system fidelity: `3 - 4/N`.
pub fn asymptote_single(n: u32) -> f64 {
    assert!(n >= 1);
    3.0 - 4.0 / n as f64
}

/// Truncation of the multiplicity-protocol fidelity:
/// `3 - 4 pi^2/N^2 + 8 pi^2/N^3`.
pub fn asymptote_multiplicity(n: u32) -> f64 {
    assert!(n >= 1);
    let nf = n as f64;
    3.0 - 4.0 * PI * PI / (nf * nf) + 8.0 * PI * PI / (nf * nf * nf)
}

/// Leading truncation of the entangled-protocol fidelity: `3 - 4 pi^2/N^2`.
pub fn asymptote_entangled(n: u32) -> f64 {
    assert!(n >= 1);
    let nf = n as f64;
    3.0 - 4.0 * PI * PI / (nf * nf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{charpoly_entangled, det_plus_two_lambda};
    use crate::su2::m_matrix_from_seed;
    use proptest::prelude::*;

    const SQRT_THIRD: f64 = 0.577_350_269_189_625_8;

    #[test]
    fn single_matrix_small_cases() {
        let m1 = build_m_single(1).unwrap();
        assert_eq!(m1.diag(), &[0.5, 0.0]);
        assert!((m1.off()[0] - SQRT_THIRD).abs() < 1e-15);

        let m2 = build_m_single(2).unwrap();
        assert_eq!(m2.diag(), &[2.0 / 3.0, 0.5, 0.0]);
        assert!((m2.off()[0] - (3.0f64 / 5.0).sqrt()).abs() < 1e-15);
        assert!((m2.off()[1] - SQRT_THIRD).abs() < 1e-15);

        assert!(matches!(
            build_m_single(0),
            Err(ProtocolError::MaxSpinTooSmall(0))
        ));
    }

    #[test]
    fn single_matrix_matches_projector_construction() {
        for j_max in 1..=6u32 {
            let direct = build_m_single(j_max).unwrap();
            let via_projector = m_matrix_from_seed(&seed_single(j_max).unwrap()).unwrap();
            for (a, b) in direct.diag().iter().zip(via_projector.diag()) {
                assert!((a - b).abs() < 1e-12, "J={j_max} diag {a} vs {b}");
            }
            for (a, b) in direct.off().iter().zip(via_projector.off()) {
                assert!((a - b).abs() < 1e-12, "J={j_max} off {a} vs {b}");
            }
        }
    }

    #[test]
    fn solve_single_j1_quadratic_oracle() {
        let r = solve_single(1).unwrap();
        let expect = 0.5 * (0.5 + (0.25f64 + 4.0 / 3.0).sqrt());
        assert!((r.chi1_max - expect).abs() < 1e-12);
        assert!((r.chi1_max - 0.8791528696058958).abs() < 1e-12);
        assert!((r.h_avg - (6.0 - 2.0 * expect)).abs() < 1e-14);
        assert!((r.mse - (3.0 - expect) / 6.0).abs() < 1e-14);
        assert_eq!(r.method, SolveMethod::Eigensolve);
    }

    #[test]
    fn solve_single_beats_top_spin_eigenstate() {
        for j_max in 1..=20u32 {
            let r = solve_single(j_max).unwrap();
            let ceiling = j_max as f64 / (j_max as f64 + 1.0);
            assert!(r.chi1_max > ceiling, "J={j_max}");
            assert!(r.chi1_max < 3.0);
        }
    }

    #[test]
    fn rowsum_bounds_eigenvalue() {
        let m1 = build_m_single(1).unwrap();
        let bound = rowsum_upper_bound(&m1).unwrap();
        assert!((bound - (0.5 + SQRT_THIRD)).abs() < 1e-14);
        assert!(bound >= solve_single(1).unwrap().chi1_max);

        let m10 = build_m_single(10).unwrap();
        let r10 = solve_single(10).unwrap();
        assert!(rowsum_upper_bound(&m10).unwrap() > r10.chi1_max);

        let diag_only = SymTridiag::new(vec![0.3, 0.9], vec![0.0]).unwrap();
        assert!((rowsum_upper_bound(&diag_only).unwrap() - 0.9).abs() < 1e-15);

        let negative = SymTridiag::new(vec![-0.1], vec![]).unwrap();
        assert!(matches!(
            rowsum_upper_bound(&negative),
            Err(ProtocolError::NegativeEntry(_))
        ));
    }

    #[test]
    fn multiplicity_matrix_small_cases() {
        let m3 = build_m_multiplicity(3).unwrap();
        assert_eq!(m3.diag(), &[-0.4, 0.0]);
        assert_eq!(m3.off(), &[0.5]);

        let m5 = build_m_multiplicity(5).unwrap();
        assert!((m5.diag()[0] + 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(&m5.diag()[1..], &[0.0, 0.0]);
        assert!((m5.off()[0] - 1.0 / 6.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(m5.off()[1], 1.0);

        assert!(matches!(
            build_m_multiplicity(4),
            Err(ProtocolError::EvenSpinCount(4))
        ));
        assert!(matches!(
            build_m_multiplicity(1),
            Err(ProtocolError::TooFewSpins(1))
        ));
    }

    #[test]
    fn multiplicity_spectrum_inside_gershgorin_window() {
        for n in (3..=101u32).step_by(2) {
            let m = build_m_multiplicity(n).unwrap();
            let top = max_eigenpair(&m).value;
            assert!(top > 0.0 && top < 2.0, "N={n}: {top}");
        }
    }

    #[test]
    fn solve_multiplicity_n3_closed_form_oracle() {
        let r = solve_multiplicity(3).unwrap();
        let lambda = 0.5 * (-0.4 + (0.16f64 + 1.0).sqrt());
        assert!((r.chi1_max - (1.0 + lambda)).abs() < 1e-12);
        assert!((r.chi1_max - 1.3385164807134504).abs() < 1e-12);
        assert_eq!(r.alternates.len(), 1);
        let (method, value) = r.alternates[0];
        assert_eq!(method, SolveMethod::CharpolyRoot);
        assert!((value - r.chi1_max).abs() < 1e-9);
    }

    #[test]
    fn multiplicity_charpoly_ties_to_matrix_determinant() {
        // The Chebyshev combination with dimension index (N+1)/2 equals
        // det(M + 2 lambda I) for the explicitly built matrix.
        for n in (3..=21u32).step_by(2) {
            let m = build_m_multiplicity(n).unwrap();
            let dim = m.n();
            for k in 0..=16 {
                let lambda = -1.0 + 2.0 * k as f64 / 16.0;
                let lhs = charpoly_multiplicity(dim, lambda);
                let rhs = det_plus_two_lambda(&m, lambda);
                assert!(
                    (lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0),
                    "N={n} lambda={lambda}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn entangled_charpoly_ties_to_matrix_determinant() {
        for n in 1..=20u32 {
            let m = build_m_entangled(n).unwrap();
            let dim = m.n();
            for k in 0..=16 {
                let lambda = -1.0 + 2.0 * k as f64 / 16.0;
                let lhs = charpoly_entangled(dim, entangled_zeta(n), lambda);
                let rhs = det_plus_two_lambda(&m, lambda);
                assert!(
                    (lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0),
                    "N={n} lambda={lambda}"
                );
            }
        }
    }

    #[test]
    fn entangled_matrix_small_cases() {
        let m3 = build_m_entangled(3).unwrap();
        assert_eq!(m3.diag(), &[0.0, 0.0]);
        assert_eq!(m3.off(), &[1.0]);

        let m2 = build_m_entangled(2).unwrap();
        assert_eq!(m2.diag(), &[0.0, -1.0]);
        assert_eq!(m2.off(), &[1.0]);

        assert!(matches!(build_m_entangled(0), Err(ProtocolError::ZeroSpins)));
    }

    #[test]
    fn entangled_eigenvalue_matches_closed_form_up_to_60() {
        for n in 1..=60u32 {
            let m = build_m_entangled(n).unwrap();
            let top = max_eigenpair(&m).value;
            let expect = 2.0 * (2.0 * PI / (n as f64 + 3.0)).cos();
            assert!((top - expect).abs() < 1e-12, "N={n}: {top} vs {expect}");
        }
    }

    #[test]
    fn solve_entangled_small_cases() {
        let r1 = solve_entangled(1).unwrap();
        assert!((r1.chi1_max - 1.0).abs() < 1e-14);
        assert_eq!(r1.weights.entries.len(), 1);
        assert!((r1.weights.entries[0] - 1.0).abs() < 1e-12);

        let r3 = solve_entangled(3).unwrap();
        assert!((r3.chi1_max - 2.0).abs() < 1e-13);
        let s = 1.0 / 2.0f64.sqrt();
        assert!((r3.weights.entries[0] - s).abs() < 1e-12);
        assert!((r3.weights.entries[1] - s).abs() < 1e-12);
        assert_eq!(r3.method, SolveMethod::ClosedForm);
    }

    #[test]
    fn entangled_weights_unit_norm() {
        for n in 1..=60u32 {
            let w = entangled_weights_closed_form(n);
            let norm_sqr: f64 = w.iter().map(|x| x * x).sum();
            assert!((norm_sqr - 1.0).abs() < 1e-12, "N={n}");
            assert!(w.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn protocol_chi1_increases_with_size() {
        let mut prev = 0.0;
        for j in 1..=30u32 {
            let c = solve_single(j).unwrap().chi1_max;
            assert!(c > prev, "J={j}");
            prev = c;
        }
        let mut prev = 0.0;
        for n in (3..=59u32).step_by(2) {
            let c = solve_multiplicity(n).unwrap().chi1_max;
            assert!(c > prev, "N={n}");
            prev = c;
        }
        let mut prev = 0.0;
        for n in 1..=60u32 {
            let c = solve_entangled(n).unwrap().chi1_max;
            assert!(c > prev, "N={n}");
            prev = c;
        }
    }

    #[test]
    fn messenger_multiplicity_structure() {
        let r = solve_multiplicity(3).unwrap();
        let state = messenger_multiplicity(3, &r.weights.entries).unwrap();
        let blocks = state.blocks();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].j(), Spin::from_twice(3));
        assert!(blocks[0].alphas().is_none());
        assert!((blocks[0].amps()[0].re - r.weights.entries[0]).abs() < 1e-14);
        let lower = &blocks[1];
        assert_eq!(lower.j(), Spin::from_twice(1));
        assert_eq!(lower.alphas(), Some(&[0u32, 1][..]));
        let expect = r.weights.entries[1] / 2.0f64.sqrt();
        for amp in lower.amps() {
            assert!((amp.re - expect).abs() < 1e-14);
        }
        let total: f64 = blocks.iter().map(|b| b.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn messenger_rejects_bad_dimensions_and_norms() {
        assert!(matches!(
            messenger_multiplicity(5, &[1.0, 0.0]),
            Err(ProtocolError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            messenger_multiplicity(3, &[1.0, 1.0]),
            Err(ProtocolError::BadNormalization(_))
        ));
    }

    #[test]
    fn chi1_from_weights_at_optimum_and_elsewhere() {
        let r = solve_entangled(3).unwrap();
        let at_top = chi1_from_weights(Protocol::Entangled, &r.weights.entries, &r.matrix).unwrap();
        assert!((at_top - r.chi1_max).abs() < 1e-12);

        let e1 = chi1_from_weights(Protocol::Entangled, &[1.0, 0.0], &r.matrix).unwrap();
        assert!((e1 - 1.0).abs() < 1e-14);

        let rs = solve_single(2).unwrap();
        let at_top = chi1_from_weights(Protocol::Single, &rs.weights.entries, &rs.matrix).unwrap();
        assert!((at_top - rs.chi1_max).abs() < 1e-12);

        assert!(matches!(
            chi1_from_weights(Protocol::Single, &[1.0], &rs.matrix),
            Err(ProtocolError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn asymptote_values() {
        assert!((asymptote_single(100) - 2.96).abs() < 1e-14);
        for n in [10u32, 50, 100] {
            let gap = asymptote_multiplicity(n) - asymptote_entangled(n);
            let expect = 8.0 * PI * PI / (n as f64).powi(3);
            assert!((gap - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn single_asymptote_trend() {
        // The large-spin limit is approached slowly, from above; the scaled
        // gap decreases monotonically toward 4 across the sweep.
        let mut prev = f64::INFINITY;
        for n in [40u32, 80, 160] {
            let r = solve_single(n / 2).unwrap();
            let scaled = n as f64 * (3.0 - r.chi1_max);
            assert!(scaled > 4.0 && scaled < prev, "N={n}: {scaled}");
            prev = scaled;
        }
    }

    proptest! {
        #[test]
        fn rayleigh_quotient_bounded_by_top_eigenvalue(
            raw in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            let norm: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let w: Vec<f64> = raw.iter().map(|x| x / norm).collect();
            let r = solve_entangled(6).unwrap();
            prop_assert_eq!(w.len(), r.matrix.n());
            let val = chi1_from_weights(Protocol::Entangled, &w, &r.matrix).unwrap();
            prop_assert!(val <= r.chi1_max + 1e-10);
        }

        #[test]
        fn random_seeds_dominated_by_optimal_matrix(
            raw in proptest::collection::vec(-1.0f64..1.0, 22),
        ) {
            // Random normalized complex seed blocks at J = 2; every matrix
            // entry is non-negative and bounded by the dominating matrix.
            let mut blocks = Vec::new();
            let mut cursor = 0;
            for j in [2u32, 1, 0] {
                let spin = Spin::integer(j);
                let dim = spin.dim();
                let mut amps = Vec::with_capacity(dim);
                let mut norm_sqr = 0.0;
                for _ in 0..dim {
                    let a = Complex64::new(raw[cursor], raw[cursor + 1]);
                    cursor += 2;
                    norm_sqr += a.norm_sqr();
                    amps.push(a);
                }
                prop_assume!(norm_sqr > 1e-4);
                let scale = norm_sqr.sqrt();
                for a in &mut amps {
                    *a /= scale;
                }
                blocks.push(IrrepBlock::new(spin, amps).unwrap());
            }
            let seed = PovmSeed::new(blocks).unwrap();
            let m = m_matrix_from_seed(&seed).unwrap();
            let op = build_m_single(2).unwrap();
            for (a, b) in m.diag().iter().zip(op.diag()) {
                prop_assert!(*a >= -1e-12);
                prop_assert!(*a <= b + 1e-12);
            }
            for (a, b) in m.off().iter().zip(op.off()) {
                prop_assert!(*a >= -1e-12);
                prop_assert!(*a <= b + 1e-12);
            }
        }
    }
}
