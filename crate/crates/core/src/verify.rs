//! Independent evaluation of the defining group averages: exact product
//! quadrature for the invariant measure, Haar Monte Carlo, and an
//! end-to-end alignment simulation with rejection-sampled outcomes.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use std::sync::Arc;
use thiserror::Error;

use crate::protocols::{
    optimal_states, FiducialState, IrrepWeights, PovmSeed, Protocol, ProtocolError, ProtocolResult,
};
use crate::so3::{chi1_geometric, loss_h, sample_haar, EulerAngles};
use crate::su2::{character, d_table, IrrepBlock, SmallDTable, Spin};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("quadrature of degree {available} cannot integrate degree {needed} exactly")]
    InsufficientDegree { needed: u32, available: u32 },
    #[error("messenger block 2j={twice_j} has no matching seed block")]
    MissingSeedBlock { twice_j: u32 },
    #[error("block 2j={twice_j} mixes labelled and unlabelled amplitudes")]
    LabelMismatch { twice_j: u32 },
    #[error("outcome density {density} exceeds the rejection envelope {envelope}")]
    EnvelopeViolated { density: f64, envelope: f64 },
    #[error("at least one sample is required")]
    NoSamples,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Product quadrature for the invariant measure
/// `sin(beta) d(beta) d(alpha) d(gamma) / (8 pi^2)`: uniform periodic grids
/// in `alpha` and `gamma` crossed with Gauss-Legendre in `cos(beta)`.
///
/// A rule of degree `K` integrates exactly every integrand whose `alpha`
/// and `gamma` frequencies are integers of magnitude at most `K` and whose
/// `cos(beta)` dependence is polynomial of degree at most `K`; all the
/// block overlaps and character products handled here are of this form.
#[derive(Debug, Clone)]
pub struct So3Quadrature {
    max_degree: u32,
    n_angle: usize,
    angle_nodes: Vec<f64>,
    beta_nodes: Vec<f64>,
    beta_weights: Vec<f64>, // Gauss-Legendre weights scaled to sum to 1
}

/// Builds a quadrature exact to `max_degree` (at least 1), with
/// `2 * max_degree + 2` points per angle grid and `max_degree + 1`
/// Gauss-Legendre nodes in `cos(beta)`.
pub fn make_quadrature(max_degree: u32) -> So3Quadrature {
    let degree = max_degree.max(1);
    So3Quadrature::with_counts(degree, 2 * degree as usize + 2, degree as usize + 1)
}

impl So3Quadrature {
    fn with_counts(max_degree: u32, n_angle: usize, n_beta: usize) -> Self {
        let angle_nodes = (0..n_angle).map(|i| TAU * i as f64 / n_angle as f64).collect();
        let (nodes, weights) = gauss_legendre(n_beta);
        So3Quadrature {
            max_degree,
            n_angle,
            angle_nodes,
            beta_nodes: nodes.iter().map(|t| t.clamp(-1.0, 1.0).acos()).collect(),
            beta_weights: weights.iter().map(|w| w / 2.0).collect(),
        }
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn node_count(&self) -> usize {
        self.n_angle * self.n_angle * self.beta_nodes.len()
    }

    /// The same design degree with all node counts doubled; agreement
    /// between the two rules certifies exactness empirically.
    pub fn doubled(&self) -> So3Quadrature {
        So3Quadrature::with_counts(self.max_degree, 2 * self.n_angle, 2 * self.beta_nodes.len())
    }

    /// Integrates `f` against the normalized invariant measure.
    pub fn integrate<F: FnMut(&EulerAngles) -> f64>(&self, mut f: F) -> f64 {
        let angle_weight = 1.0 / (self.n_angle * self.n_angle) as f64;
        let mut total = 0.0;
        for (beta, wb) in self.beta_nodes.iter().zip(&self.beta_weights) {
            let mut slice = 0.0;
            for &alpha in &self.angle_nodes {
                for &gamma in &self.angle_nodes {
                    slice += f(&EulerAngles {
                        alpha,
                        beta: *beta,
                        gamma,
                    });
                }
            }
            total += wb * slice * angle_weight;
        }
        total
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

// ---------------------------------------------------------------------------
// Overlap machinery
// ---------------------------------------------------------------------------

/// One matched (messenger, seed) block pair prepared for fast repeated
/// evaluation: only non-zero, label-compatible amplitude pairs are kept,
/// with the `sqrt(d_j)` weight and amplitude product folded into `coef`.
struct BlockPlan {
    table: Arc<SmallDTable>,
    half_tj: f64,
    pairs: Vec<(usize, usize, Complex64)>, // (row in A, row in B, coef)
}

struct OverlapPlan {
    blocks: Vec<BlockPlan>,
    max_pow: usize,
}

impl OverlapPlan {
    fn build(a: &FiducialState, b: &PovmSeed) -> Result<Self, VerifyError> {
        let mut blocks = Vec::new();
        let mut max_pow = 0;
        for block_a in a.blocks() {
            let twice_j = block_a.j().twice();
            let block_b = b
                .blocks()
                .iter()
                .find(|bb| bb.j() == block_a.j())
                .ok_or(VerifyError::MissingSeedBlock { twice_j })?;
            if block_a.alphas().is_some() != block_b.alphas().is_some() {
                return Err(VerifyError::LabelMismatch { twice_j });
            }
            let weight = (block_a.j().dim() as f64).sqrt();
            let mut pairs = Vec::new();
            for (ra, amp_a) in block_a.amps().iter().enumerate() {
                if *amp_a == Complex64::ZERO {
                    continue;
                }
                for (rb, amp_b) in block_b.amps().iter().enumerate() {
                    if *amp_b == Complex64::ZERO {
                        continue;
                    }
                    if block_a.alpha_at(ra) != block_b.alpha_at(rb) {
                        continue;
                    }
                    pairs.push((ra, rb, weight * amp_a.conj() * amp_b));
                }
            }
            max_pow = max_pow.max(twice_j as usize);
            blocks.push(BlockPlan {
                table: d_table(block_a.j()),
                half_tj: twice_j as f64 / 2.0,
                pairs,
            });
        }
        Ok(OverlapPlan { blocks, max_pow })
    }

    fn eval(&self, g: &EulerAngles, cos_pows: &mut Vec<f64>, sin_pows: &mut Vec<f64>) -> Complex64 {
        fill_half_angle_powers(g.beta, self.max_pow, cos_pows, sin_pows);
        let mut total = Complex64::ZERO;
        for block in &self.blocks {
            let tj = block.half_tj;
            for &(ra, rb, coef) in &block.pairs {
                let m_a = tj - ra as f64;
                let m_b = tj - rb as f64;
                let d = block.table.element(ra, rb, cos_pows, sin_pows);
                let phase = Complex64::from_polar(1.0, -(g.alpha * m_a + g.gamma * m_b));
                total += coef * d * phase;
            }
        }
        total
    }
}

fn fill_half_angle_powers(beta: f64, max_pow: usize, cos_pows: &mut Vec<f64>, sin_pows: &mut Vec<f64>) {
    let (s, c) = (0.5 * beta).sin_cos();
    cos_pows.clear();
    sin_pows.clear();
    let mut cp = 1.0;
    let mut sp = 1.0;
    for _ in 0..=max_pow {
        cos_pows.push(cp);
        sin_pows.push(sp);
        cp *= c;
        sp *= s;
    }
}

/// The transition amplitude `<A| U(g) |B>` including the `sqrt(d_j)` seed
/// weights; equivalent-representation labels contract diagonally.
pub fn overlap(
    a: &FiducialState,
    b: &PovmSeed,
    g: &EulerAngles,
) -> Result<Complex64, VerifyError> {
    let plan = OverlapPlan::build(a, b)?;
    let mut cp = Vec::new();
    let mut sp = Vec::new();
    Ok(plan.eval(g, &mut cp, &mut sp))
}

fn required_degree(a: &FiducialState, b: &PovmSeed, with_chi1: bool) -> u32 {
    let twice_j = a.max_twice_j().max(b.max_twice_j());
    twice_j + if with_chi1 { 1 } else { 0 }
}

fn check_degree(quad: &So3Quadrature, needed: u32) -> Result<(), VerifyError> {
    if quad.max_degree() < needed {
        return Err(VerifyError::InsufficientDegree {
            needed,
            available: quad.max_degree(),
        });
    }
    Ok(())
}

/// Average fidelity `integral of |<A|U(g)|B>|^2 chi1(g) dg` by exact
/// quadrature. The rule must cover degree `2 j_max + 1`.
pub fn fidelity_quadrature(
    a: &FiducialState,
    b: &PovmSeed,
    quad: &So3Quadrature,
) -> Result<f64, VerifyError> {
    check_degree(quad, required_degree(a, b, true))?;
    let plan = OverlapPlan::build(a, b)?;
    let mut cp = Vec::new();
    let mut sp = Vec::new();
    Ok(quad.integrate(|g| plan.eval(g, &mut cp, &mut sp).norm_sqr() * chi1_geometric(g)))
}

/// The outcome-density normalization `integral of |<A|U(g)|B>|^2 dg`;
/// equals 1 for any unit messenger against a Schur-normalized seed.
pub fn completeness_quadrature(
    a: &FiducialState,
    b: &PovmSeed,
    quad: &So3Quadrature,
) -> Result<f64, VerifyError> {
    check_degree(quad, required_degree(a, b, false))?;
    let plan = OverlapPlan::build(a, b)?;
    let mut cp = Vec::new();
    let mut sp = Vec::new();
    Ok(quad.integrate(|g| plan.eval(g, &mut cp, &mut sp).norm_sqr()))
}

/// Entangled-protocol fidelity
/// `integral of chi1(g) |sum_j a_j chi_j(g)|^2 dg` straight from the
/// character expansion.
pub fn fidelity_entangled_quadrature(
    weights: &IrrepWeights,
    quad: &So3Quadrature,
) -> Result<f64, VerifyError> {
    let twice_j = weights.js.iter().map(|j| j.twice()).max().unwrap_or(0);
    check_degree(quad, twice_j + 1)?;
    Ok(quad.integrate(|g| {
        let amp: f64 = weights
            .js
            .iter()
            .zip(&weights.entries)
            .map(|(j, a)| a * character(*j, g))
            .sum();
        chi1_geometric(g) * amp * amp
    }))
}

fn chunk_streams(total: u64, chunk: u64) -> Vec<(u64, u64)> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut stream = 0u64;
    while start < total {
        let len = chunk.min(total - start);
        spans.push((stream, len));
        start += len;
        stream += 1;
    }
    spans
}

/// Monte Carlo estimate of the average fidelity over Haar-distributed
/// rotations: returns `(mean, standard error)`.
///
/// Samples are drawn in fixed-size chunks, one counter-based stream per
/// chunk (`ChaCha8`, stream = chunk index), and reduced in chunk order, so
/// a given `(samples, seed)` reproduces bit-identical results regardless of
/// thread count.
pub fn mc_fidelity(
    a: &FiducialState,
    b: &PovmSeed,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64), VerifyError> {
    if samples == 0 {
        return Err(VerifyError::NoSamples);
    }
    let plan = OverlapPlan::build(a, b)?;
    const CHUNK: u64 = 1 << 13;
    let partials: Vec<(f64, f64)> = chunk_streams(samples, CHUNK)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let mut cp = Vec::new();
            let mut sp = Vec::new();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..len {
                let g = sample_haar(&mut rng);
                let x = plan.eval(&g, &mut cp, &mut sp).norm_sqr() * chi1_geometric(&g);
                sum += x;
                sum_sq += x * x;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(s, q), (ps, pq)| (s + ps, q + pq));
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Outcome of an end-to-end alignment run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub trials: u64,
    pub mean_h: f64,
    pub stderr_h: f64,
    pub acceptance_rate: f64,
    pub seed: u64,
}

/// Simulates the full alignment loop for a solved protocol: draw the true
/// frame from the invariant measure, sample the measurement outcome from
/// the Born density by rejection, and score the loss between true and
/// guessed frames. `mean_h` estimates `6 - 2 chi1_max`.
pub fn simulate_alignment(
    result: &ProtocolResult,
    trials: u64,
    seed: u64,
) -> Result<SimulationReport, VerifyError> {
    let (a, b) = optimal_states(result)?;
    let envelope = proposal_envelope(result);
    simulate_states(&a, &b, envelope, trials, seed)
}

/// Supremum bound on the outcome density `|<A|U|B>|^2` used as the
/// rejection envelope:
/// * single protocol: `sum_j d_j` (Cauchy-Schwarz);
/// * multiplicity: `(|a_J| sqrt(d_J) + sum_{j<J} |a_j| d_j)^2`;
/// * entangled: `(sum_j |a_j| d_j)^2` (each `|chi_j| <= d_j`).
pub fn proposal_envelope(result: &ProtocolResult) -> f64 {
    let dims = result.weights.js.iter().map(|j| j.dim() as f64);
    match result.protocol {
        Protocol::Single => dims.sum(),
        Protocol::Multiplicity => {
            let mut bound = 0.0;
            for (i, (d, a)) in dims.zip(&result.weights.entries).enumerate() {
                bound += a.abs() * if i == 0 { d.sqrt() } else { d };
            }
            bound * bound
        }
        Protocol::Entangled => {
            let bound: f64 = dims
                .zip(&result.weights.entries)
                .map(|(d, a)| a.abs() * d)
                .sum();
            bound * bound
        }
    }
}

/// Rejection-sampling alignment simulation for an explicit state pair.
/// Each trial consumes one Haar draw for the true frame plus
/// `(proposal, uniform)` draws until acceptance; chunked deterministic
/// streams as in [`mc_fidelity`].
pub fn simulate_states(
    a: &FiducialState,
    b: &PovmSeed,
    envelope: f64,
    trials: u64,
    seed: u64,
) -> Result<SimulationReport, VerifyError> {
    if trials == 0 {
        return Err(VerifyError::NoSamples);
    }
    let plan = OverlapPlan::build(a, b)?;
    const CHUNK: u64 = 1 << 10;
    let partials: Vec<Result<(f64, f64, u64), VerifyError>> = chunk_streams(trials, CHUNK)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let mut cp = Vec::new();
            let mut sp = Vec::new();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut proposals = 0u64;
            for _ in 0..len {
                let g = sample_haar(&mut rng);
                let g_prime = loop {
                    let candidate = sample_haar(&mut rng);
                    let density = plan
                        .eval(&g.relative(&candidate), &mut cp, &mut sp)
                        .norm_sqr();
                    proposals += 1;
                    if density > envelope * (1.0 + 1e-9) {
                        return Err(VerifyError::EnvelopeViolated { density, envelope });
                    }
                    if rng.gen::<f64>() * envelope < density {
                        break candidate;
                    }
                };
                let h = loss_h(&g, &g_prime);
                sum += h;
                sum_sq += h * h;
            }
            Ok((sum, sum_sq, proposals))
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut proposals = 0u64;
    for partial in partials {
        let (s, q, p) = partial?;
        sum += s;
        sum_sq += q;
        proposals += p;
    }
    let n = trials as f64;
    let mean_h = sum / n;
    let var = ((sum_sq - n * mean_h * mean_h) / (n - 1.0).max(1.0)).max(0.0);
    Ok(SimulationReport {
        trials,
        mean_h,
        stderr_h: (var / n).sqrt(),
        acceptance_rate: trials as f64 / proposals as f64,
        seed,
    })
}

/// Convenience: a single-block state pair supported on one `|j, m>` level,
/// used to exercise degenerate protocols in tests.
pub fn basis_pair(j: Spin, twice_m: i32) -> Result<(FiducialState, PovmSeed), VerifyError> {
    let block = IrrepBlock::basis_state(j, twice_m).map_err(ProtocolError::Su2)?;
    let a = FiducialState::new(vec![block.clone()]).map_err(VerifyError::Protocol)?;
    let b = PovmSeed::new(vec![block]).map_err(VerifyError::Protocol)?;
    Ok((a, b))
}
