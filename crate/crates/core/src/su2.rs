//! SU(2)/SO(3) representation theory: Wigner d and D matrices, characters,
//! Clebsch-Gordan coefficients, irrep multiplicities, time reversal, and the
//! spin-1 projector matrix elements behind the single-system protocol.
//!
//! Spins are carried as exact `2j` integers; Condon-Shortley phases
//! throughout. Factorial-laden coefficients are assembled in exact
//! big-integer rationals and converted to floating point once, so no
//! cancellation happens in `f64`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::protocols::PovmSeed;
use crate::so3::EulerAngles;
use crate::spectra::{chebyshev_u, SymTridiag};

#[derive(Debug, Error, PartialEq)]
pub enum Su2Error {
    #[error("magnetic number 2m={twice_m} invalid for 2j={twice_j}")]
    InvalidMagneticNumber { twice_j: u32, twice_m: i32 },
    #[error("block for 2j={twice_j} needs {expected} amplitudes, got {got}")]
    BlockLength {
        twice_j: u32,
        expected: usize,
        got: usize,
    },
    #[error("equivalent-representation labels need one entry per amplitude")]
    LabelLength,
    #[error("spin 2j={twice_j} does not occur for {n} spin-1/2 systems")]
    MultiplicityDomain { n: u32, twice_j: u32 },
    #[error("seed block for 2j={twice_j} violates the Schur normalization (norm^2 {norm_sqr})")]
    UnnormalizedSeed { twice_j: u32, norm_sqr: f64 },
    #[error("projector matrix elements are defined for unlabelled seed blocks")]
    LabelledSeed,
}

/// A spin quantum number stored exactly as `2j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Spin(u32);

impl Spin {
    /// From the doubled value: `Spin::from_twice(3)` is `j = 3/2`.
    pub const fn from_twice(twice_j: u32) -> Self {
        Spin(twice_j)
    }

    /// An integer spin `j`.
    pub const fn integer(j: u32) -> Self {
        Spin(2 * j)
    }

    pub const fn twice(self) -> u32 {
        self.0
    }

    /// Representation dimension `2j + 1`.
    pub const fn dim(self) -> usize {
        self.0 as usize + 1
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// Magnetic numbers `2m` from `+2j` down to `-2j`, matching the row and
    /// column order of all matrices in this module.
    pub fn magnetics_desc(self) -> impl Iterator<Item = i32> {
        let tj = self.0 as i32;
        (0..self.dim()).map(move |r| tj - 2 * r as i32)
    }

    fn check_magnetic(self, twice_m: i32) -> Result<(), Su2Error> {
        let tj = self.0 as i32;
        if twice_m.abs() > tj || (twice_m - tj) % 2 != 0 {
            return Err(Su2Error::InvalidMagneticNumber {
                twice_j: self.0,
                twice_m,
            });
        }
        Ok(())
    }
}

impl Serialize for Spin {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

/// One irrep's worth of complex amplitudes, indexed by `m` descending from
/// `+j` to `-j`, optionally tagged with equivalent-representation labels
/// (one label per `m` entry; labels do not rotate).
#[derive(Debug, Clone)]
pub struct IrrepBlock {
    j: Spin,
    amps: Vec<Complex64>,
    alphas: Option<Vec<u32>>,
}

impl IrrepBlock {
    pub fn new(j: Spin, amps: Vec<Complex64>) -> Result<Self, Su2Error> {
        if amps.len() != j.dim() {
            return Err(Su2Error::BlockLength {
                twice_j: j.twice(),
                expected: j.dim(),
                got: amps.len(),
            });
        }
        Ok(IrrepBlock {
            j,
            amps,
            alphas: None,
        })
    }

    pub fn with_alphas(j: Spin, amps: Vec<Complex64>, alphas: Vec<u32>) -> Result<Self, Su2Error> {
        if alphas.len() != amps.len() {
            return Err(Su2Error::LabelLength);
        }
        let mut block = IrrepBlock::new(j, amps)?;
        block.alphas = Some(alphas);
        Ok(block)
    }

    /// The basis state `|j, m>`.
    pub fn basis_state(j: Spin, twice_m: i32) -> Result<Self, Su2Error> {
        j.check_magnetic(twice_m)?;
        let mut amps = vec![Complex64::ZERO; j.dim()];
        let r = ((j.twice() as i32 - twice_m) / 2) as usize;
        amps[r] = Complex64::ONE;
        IrrepBlock::new(j, amps)
    }

    pub fn j(&self) -> Spin {
        self.j
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn alphas(&self) -> Option<&[u32]> {
        self.alphas.as_deref()
    }

    pub fn alpha_at(&self, idx: usize) -> u32 {
        self.alphas.as_ref().map_or(0, |a| a[idx])
    }

    pub fn twice_m_at(&self, idx: usize) -> i32 {
        self.j.twice() as i32 - 2 * idx as i32
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Time reversal of a block: the entry at `m` becomes
/// `i^{2m} conj(entry at -m)`, which reduces to `(-1)^m conj(A_{-m})` for
/// integer spins. Applying it twice multiplies the block by `(-1)^{2j}`.
/// Labels ride along from `-m` to `m`.
pub fn time_reverse(block: &IrrepBlock) -> IrrepBlock {
    let dim = block.dim();
    let mut amps = vec![Complex64::ZERO; dim];
    for r in 0..dim {
        let tm = block.twice_m_at(r);
        let mirrored = dim - 1 - r; // index of -m
        amps[r] = i_power(tm) * block.amps[mirrored].conj();
    }
    let alphas = block
        .alphas
        .as_ref()
        .map(|a| (0..dim).map(|r| a[dim - 1 - r]).collect());
    IrrepBlock {
        j: block.j,
        amps,
        alphas,
    }
}

/// `i^k` for the doubled exponent `k = 2m`.
fn i_power(twice_m: i32) -> Complex64 {
    match twice_m.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

// ---------------------------------------------------------------------------
// Factorials and exact-rational helpers
// ---------------------------------------------------------------------------

fn factorial(n: usize) -> BigUint {
    static TABLE: OnceLock<Mutex<Vec<BigUint>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| Mutex::new(vec![BigUint::one()]));
    let mut table = table.lock().expect("factorial table lock");
    while table.len() <= n {
        let k = table.len();
        let next = table[k - 1].clone() * BigUint::from(k);
        table.push(next);
    }
    table[n].clone()
}

fn big_ratio_to_f64(num: BigUint, den: BigUint) -> f64 {
    BigRational::new(BigInt::from(num), BigInt::from(den))
        .to_f64()
        .expect("factorial ratio fits in f64 at desk scale")
}

// ---------------------------------------------------------------------------
// Wigner small-d matrices
// ---------------------------------------------------------------------------

struct Term {
    coef: f64,
    cos_pow: u32,
    sin_pow: u32,
}

/// Per-spin table of the small-d expansion
/// `d^j_{a b}(beta) = sum_s coef_s cos(beta/2)^{p_s} sin(beta/2)^{q_s}`,
/// with exact-rational coefficients, built once and cached process-wide.
pub(crate) struct SmallDTable {
    dim: usize,
    elems: Vec<Vec<Term>>, // row-major: row a (bra m), column b (ket m')
    max_pow: usize,
}

impl SmallDTable {
    fn build(j: Spin) -> Self {
        let tj = j.twice() as i64;
        let dim = j.dim();
        let mut elems = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            let ta = tj - 2 * r as i64;
            for c in 0..dim {
                let tb = tj - 2 * c as i64;
                elems.push(element_terms(tj, ta, tb));
            }
        }
        SmallDTable {
            dim,
            elems,
            max_pow: tj as usize,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fills `cos(beta/2)^k` and `sin(beta/2)^k` for `k = 0..=2j`.
    pub fn powers(&self, beta: f64, cos_pows: &mut Vec<f64>, sin_pows: &mut Vec<f64>) {
        let (s, c) = (0.5 * beta).sin_cos();
        cos_pows.clear();
        sin_pows.clear();
        let mut cp = 1.0;
        let mut sp = 1.0;
        for _ in 0..=self.max_pow {
            cos_pows.push(cp);
            sin_pows.push(sp);
            cp *= c;
            sp *= s;
        }
    }

    pub fn element(&self, row: usize, col: usize, cos_pows: &[f64], sin_pows: &[f64]) -> f64 {
        self.elems[row * self.dim + col]
            .iter()
            .map(|t| t.coef * cos_pows[t.cos_pow as usize] * sin_pows[t.sin_pow as usize])
            .sum()
    }

    pub fn matrix(&self, beta: f64) -> Vec<Vec<f64>> {
        let mut cp = Vec::new();
        let mut sp = Vec::new();
        self.powers(beta, &mut cp, &mut sp);
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.element(r, c, &cp, &sp)).collect())
            .collect()
    }
}

fn element_terms(tj: i64, ta: i64, tb: i64) -> Vec<Term> {
    // All in undoubled integer units.
    let ja_plus = ((tj + ta) / 2) as usize;
    let ja_minus = ((tj - ta) / 2) as usize;
    let jb_plus = ((tj + tb) / 2) as usize;
    let jb_minus = ((tj - tb) / 2) as usize;
    let adiff = (ta - tb) / 2; // a - b
    let prefactor_num =
        factorial(ja_plus) * factorial(ja_minus) * factorial(jb_plus) * factorial(jb_minus);
    let s_min = 0.max(-adiff) as usize;
    let s_max = jb_plus.min(ja_minus);
    debug_assert!(s_min <= s_max);
    let mut terms = Vec::new();
    for s in s_min..=s_max {
        let d1 = jb_plus - s;
        let d2 = s;
        let d3 = (adiff + s as i64) as usize;
        let d4 = ja_minus - s;
        let den = factorial(d1) * factorial(d2) * factorial(d3) * factorial(d4);
        let magnitude = big_ratio_to_f64(prefactor_num.clone(), den.clone() * den).sqrt();
        let sign = if (adiff + s as i64).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        let cos_pow = (tj + (tb - ta) / 2 - 2 * s as i64) as u32;
        let sin_pow = (adiff + 2 * s as i64) as u32;
        terms.push(Term {
            coef: sign * magnitude,
            cos_pow,
            sin_pow,
        });
    }
    terms
}

pub(crate) fn d_table(j: Spin) -> Arc<SmallDTable> {
    static TABLES: OnceLock<Mutex<HashMap<u32, Arc<SmallDTable>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut tables = tables.lock().expect("d-table lock");
    tables
        .entry(j.twice())
        .or_insert_with(|| Arc::new(SmallDTable::build(j)))
        .clone()
}

/// Wigner small-d matrix element `d^j_{m m'}(beta)` (row index `m`, column
/// index `m'`; the `2j+1` square matrix is real orthogonal).
pub fn wigner_small_d(j: Spin, twice_m: i32, twice_mp: i32, beta: f64) -> Result<f64, Su2Error> {
    j.check_magnetic(twice_m)?;
    j.check_magnetic(twice_mp)?;
    let table = d_table(j);
    let row = ((j.twice() as i32 - twice_m) / 2) as usize;
    let col = ((j.twice() as i32 - twice_mp) / 2) as usize;
    let mut cp = Vec::new();
    let mut sp = Vec::new();
    table.powers(beta, &mut cp, &mut sp);
    Ok(table.element(row, col, &cp, &sp))
}

/// Full small-d matrix, rows and columns ordered `m = +j .. -j`.
pub fn wigner_small_d_matrix(j: Spin, beta: f64) -> Vec<Vec<f64>> {
    d_table(j).matrix(beta)
}

/// Wigner D matrix `D^j_{m m'}(g) = e^{-i alpha m} d^j_{m m'}(beta)
/// e^{-i gamma m'}`, rows and columns ordered `m = +j .. -j`.
pub fn wigner_d_matrix(j: Spin, g: &EulerAngles) -> Vec<Vec<Complex64>> {
    let table = d_table(j);
    let dim = table.dim();
    let mut cp = Vec::new();
    let mut sp = Vec::new();
    table.powers(g.beta, &mut cp, &mut sp);
    let tj = j.twice() as i32;
    let phase = |angle: f64, twice_m: i32| {
        let arg = -angle * twice_m as f64 / 2.0;
        Complex64::from_polar(1.0, arg)
    };
    (0..dim)
        .map(|r| {
            let tm = tj - 2 * r as i32;
            let row_phase = phase(g.alpha, tm);
            (0..dim)
                .map(|c| {
                    let tmp = tj - 2 * c as i32;
                    row_phase * table.element(r, c, &cp, &sp) * phase(g.gamma, tmp)
                })
                .collect()
        })
        .collect()
}

/// Character of the spin-`j` representation, evaluated through the rotation
/// angle: `chi_j(g) = U_{2j}(x)` with
/// `x = cos(beta/2) cos((alpha + gamma)/2)`. Equals the trace of
/// [`wigner_d_matrix`] for the same element.
pub fn character(j: Spin, g: &EulerAngles) -> f64 {
    let x = (0.5 * g.beta).cos() * (0.5 * (g.alpha + g.gamma)).cos();
    chebyshev_u(j.twice() as i64, x)
}

// ---------------------------------------------------------------------------
// Clebsch-Gordan coefficients
// ---------------------------------------------------------------------------

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | J M>` in the Condon-Shortley
/// convention, via Racah's closed form evaluated in exact rationals.
///
/// Selection-rule violations (`M != m1 + m2`, triangle rule, mixed
/// integrality of the triple) return 0; malformed `(j, m)` pairs are errors.
pub fn clebsch_gordan(
    j1: Spin,
    twice_m1: i32,
    j2: Spin,
    twice_m2: i32,
    j: Spin,
    twice_m: i32,
) -> Result<f64, Su2Error> {
    j1.check_magnetic(twice_m1)?;
    j2.check_magnetic(twice_m2)?;
    j.check_magnetic(twice_m)?;
    let (tj1, tj2, tj) = (j1.twice() as i64, j2.twice() as i64, j.twice() as i64);
    let (tm1, tm2, tm) = (twice_m1 as i64, twice_m2 as i64, twice_m as i64);
    if tm != tm1 + tm2 {
        return Ok(0.0);
    }
    if tj < (tj1 - tj2).abs() || tj > tj1 + tj2 || (tj1 + tj2 + tj) % 2 != 0 {
        return Ok(0.0);
    }

    let half = |x: i64| -> usize {
        debug_assert!(x >= 0 && x % 2 == 0);
        (x / 2) as usize
    };

    // Prefactor (2J+1) * triangle coefficient * m-dependent factorials, as
    // one exact rational.
    let mut num = BigUint::from((tj + 1) as u64);
    num *= factorial(half(tj1 + tj2 - tj));
    num *= factorial(half(tj1 - tj2 + tj));
    num *= factorial(half(-tj1 + tj2 + tj));
    num *= factorial(half(tj + tm));
    num *= factorial(half(tj - tm));
    num *= factorial(half(tj1 - tm1));
    num *= factorial(half(tj1 + tm1));
    num *= factorial(half(tj2 - tm2));
    num *= factorial(half(tj2 + tm2));
    let den = factorial(half(tj1 + tj2 + tj) + 1);

    // Alternating sum over k, accumulated exactly.
    let k_min = 0i64.max(half2(tj2 - tj - tm1)).max(half2(tj1 - tj + tm2));
    let k_max = half2(tj1 + tj2 - tj)
        .min(half2(tj1 - tm1))
        .min(half2(tj2 + tm2));
    let mut sum = BigRational::zero();
    let mut k = k_min;
    while k <= k_max {
        let den_k = factorial(k as usize)
            * factorial(half(tj1 + tj2 - tj) - k as usize)
            * factorial(half(tj1 - tm1) - k as usize)
            * factorial(half(tj2 + tm2) - k as usize)
            * factorial((half2(tj - tj2 + tm1) + k) as usize)
            * factorial((half2(tj - tj1 - tm2) + k) as usize);
        let term = BigRational::new(BigInt::one(), BigInt::from(den_k));
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        k += 1;
    }
    if sum.is_zero() {
        return Ok(0.0);
    }
    let sign = if sum.is_negative() { -1.0 } else { 1.0 };
    let prefactor = BigRational::new(BigInt::from(num), BigInt::from(den));
    let value_sq = prefactor * sum.clone() * sum;
    Ok(sign * value_sq.to_f64().expect("CG magnitude fits in f64").sqrt())
}

/// Signed halving for doubled quantities that may be negative.
fn half2(x: i64) -> i64 {
    debug_assert!(x % 2 == 0);
    x / 2
}

// ---------------------------------------------------------------------------
// Irrep multiplicities
// ---------------------------------------------------------------------------

/// Multiplicity of spin `j` in the decomposition of `N` spin-1/2 systems:
/// `n_j = C(N, N/2 + j) (2j+1) / (N/2 + j + 1)`, computed exactly as the
/// binomial difference `C(N, N/2+j) - C(N, N/2+j+1)`.
pub fn multiplicity(n: u32, j: Spin) -> Result<u128, Su2Error> {
    let tj = j.twice();
    if n == 0 || tj > n || (n - tj) % 2 != 0 {
        return Err(Su2Error::MultiplicityDomain { n, twice_j: tj });
    }
    let k = ((n + tj) / 2) as u128;
    Ok(binomial(n as u128, k) - binomial(n as u128, k + 1))
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 1..=k {
        result = result * (n - k + i) / i;
    }
    result
}

// ---------------------------------------------------------------------------
// Spin-1 projector matrix elements
// ---------------------------------------------------------------------------

/// The fidelity matrix generated by a POVM seed:
/// `M^{j j'} = sqrt(d_j d_j')/3 <B^j Btilde^{j'}| P_1 |B^j Btilde^{j'}>`,
/// expanded over the coupled basis with [`clebsch_gordan`]. Rows ordered by
/// descending `j`; entries vanish unless `|j - j'| <= 1`, so the result is
/// symmetric tridiagonal with non-negative entries.
pub fn m_matrix_from_seed(seed: &PovmSeed) -> Result<SymTridiag, Su2Error> {
    let mut blocks: Vec<&IrrepBlock> = seed.blocks().iter().collect();
    blocks.sort_by(|a, b| b.j().cmp(&a.j()));
    for block in &blocks {
        if block.alphas().is_some() {
            return Err(Su2Error::LabelledSeed);
        }
        let norm_sqr = block.norm_sqr();
        if (norm_sqr - 1.0).abs() > 1e-12 {
            return Err(Su2Error::UnnormalizedSeed {
                twice_j: block.j().twice(),
                norm_sqr,
            });
        }
    }
    let n = blocks.len();
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        diag.push(projector_entry(blocks[i], blocks[i])?);
        if i + 1 < n {
            off.push(projector_entry(blocks[i], blocks[i + 1])?);
        }
    }
    Ok(SymTridiag::new(diag, off).expect("projector matrix shape"))
}

fn projector_entry(row: &IrrepBlock, col: &IrrepBlock) -> Result<f64, Su2Error> {
    let spin1 = Spin::integer(1);
    let reversed = time_reverse(col);
    let mut total = 0.0;
    for twice_big_m in [-2i32, 0, 2] {
        let mut amp = Complex64::ZERO;
        for (ra, &a) in row.amps().iter().enumerate() {
            if a == Complex64::ZERO {
                continue;
            }
            let tma = row.twice_m_at(ra);
            let tmb = twice_big_m - tma;
            if tmb.abs() > reversed.j().twice() as i32 {
                continue;
            }
            let rb = ((reversed.j().twice() as i32 - tmb) / 2) as usize;
            let b = reversed.amps()[rb];
            if b == Complex64::ZERO {
                continue;
            }
            let cg = clebsch_gordan(row.j(), tma, reversed.j(), tmb, spin1, twice_big_m)?;
            amp += cg * a * b;
        }
        total += amp.norm_sqr();
    }
    let weight = ((row.dim() * col.dim()) as f64).sqrt() / 3.0;
    Ok(weight * total)
}
