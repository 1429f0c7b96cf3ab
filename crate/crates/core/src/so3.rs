//! Rotation-group geometry: Euler angles, orthonormal frames, the alignment
//! loss `h`, and Haar-distributed sampling.
//!
//! Convention used throughout the crate: active z-y-z rotations,
//! `R(g) = Rz(alpha) * Ry(beta) * Rz(gamma)` with `alpha, gamma` in
//! `[0, 2*pi)` and `beta` in `[0, pi]`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use thiserror::Error;

/// Row-major 3x3 real matrix.
pub type Mat3 = [[f64; 3]; 3];

/// Threshold below which `beta` (or `pi - beta`) is treated as gimbal-locked
/// when extracting Euler angles from a rotation matrix. In that regime only
/// `alpha + gamma` (or `alpha - gamma`) is defined; we set `gamma = 0` and
/// fold the remaining angle into `alpha`.
const GIMBAL_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum So3Error {
    #[error("average chi1 value {0} lies outside [-1, 3]")]
    Chi1OutOfRange(f64),
}

/// An SO(3) group element as canonical z-y-z Euler angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EulerAngles {
    pub const IDENTITY: Self = EulerAngles {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
    };

    /// Builds a canonical element from an arbitrary real triple.
    ///
    /// `beta` outside `[0, pi]` is folded back using
    /// `Ry(-b) = Rz(pi) Ry(b) Rz(-pi)`, so the returned triple always
    /// generates the same rotation matrix as the input.
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        let mut a = alpha;
        let mut b = beta.rem_euclid(TAU);
        let mut c = gamma;
        if b > PI {
            b = TAU - b;
            a += PI;
            c -= PI;
        }
        EulerAngles {
            alpha: a.rem_euclid(TAU),
            beta: b,
            gamma: c.rem_euclid(TAU),
        }
    }

    /// The 3x3 orthogonal matrix `Rz(alpha) Ry(beta) Rz(gamma)`.
    pub fn rotation_matrix(&self) -> Mat3 {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        let (sg, cg) = self.gamma.sin_cos();
        [
            [ca * cb * cg - sa * sg, -ca * cb * sg - sa * cg, ca * sb],
            [sa * cb * cg + ca * sg, -sa * cb * sg + ca * cg, sa * sb],
            [-sb * cg, sb * sg, cb],
        ]
    }

    /// Extracts canonical Euler angles from a rotation matrix.
    ///
    /// Near the gimbal degeneracy (`beta` within [`GIMBAL_EPS`] of 0 or pi)
    /// the returned `gamma` is 0 and the remaining angle is folded into
    /// `alpha`.
    pub fn from_matrix(m: &Mat3) -> Self {
        // atan2 keeps beta well conditioned at the poles, where acos of the
        // (2,2) entry would lose half the significant digits.
        let sb = (m[0][2] * m[0][2] + m[1][2] * m[1][2]).sqrt();
        let beta = sb.atan2(m[2][2]);
        if beta < GIMBAL_EPS {
            let alpha = m[1][0].atan2(m[0][0]);
            return EulerAngles::new(alpha, 0.0, 0.0);
        }
        if PI - beta < GIMBAL_EPS {
            let alpha = (-m[0][1]).atan2(-m[0][0]);
            return EulerAngles::new(alpha, PI, 0.0);
        }
        let alpha = m[1][2].atan2(m[0][2]);
        let gamma = m[2][1].atan2(-m[2][0]);
        EulerAngles::new(alpha, beta, gamma)
    }

    /// Group composition: `rotation_matrix(self.compose(other))` equals
    /// `rotation_matrix(self) * rotation_matrix(other)`.
    pub fn compose(&self, other: &EulerAngles) -> EulerAngles {
        EulerAngles::from_matrix(&mat_mul(
            &self.rotation_matrix(),
            &other.rotation_matrix(),
        ))
    }

    /// Group inverse, extracted from the transposed rotation matrix.
    pub fn inverse(&self) -> EulerAngles {
        EulerAngles::from_matrix(&transpose(&self.rotation_matrix()))
    }

    /// The rotation taking `self` into `other`: `self^{-1} * other`.
    pub fn relative(&self, other: &EulerAngles) -> EulerAngles {
        EulerAngles::from_matrix(&mat_mul(
            &transpose(&self.rotation_matrix()),
            &other.rotation_matrix(),
        ))
    }
}

/// A right-handed orthonormal triad, the "spatial frame" attached to a
/// group element.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub n1: [f64; 3],
    pub n2: [f64; 3],
    pub n3: [f64; 3],
}

impl Frame {
    pub fn axes(&self) -> [[f64; 3]; 3] {
        [self.n1, self.n2, self.n3]
    }

    /// Largest deviation from orthonormality and right-handedness; zero for
    /// an exact frame.
    pub fn defect(&self) -> f64 {
        let ax = self.axes();
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(&ax[i], &ax[j]) - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(d.abs());
            }
        }
        let triple = dot(&ax[0], &cross(&ax[1], &ax[2]));
        worst.max((triple - 1.0).abs())
    }
}

/// The frame obtained by rotating the reference triad: the columns of
/// `rotation_matrix(g)`.
pub fn frame_of(g: &EulerAngles) -> Frame {
    let r = g.rotation_matrix();
    Frame {
        n1: [r[0][0], r[1][0], r[2][0]],
        n2: [r[0][1], r[1][1], r[2][1]],
        n3: [r[0][2], r[1][2], r[2][2]],
    }
}

/// The spin-1 character in closed form,
/// `cos(beta) + (1 + cos(beta)) cos(alpha + gamma)`; equals the trace of
/// [`EulerAngles::rotation_matrix`] and takes values in `[-1, 3]`.
pub fn chi1_geometric(g: &EulerAngles) -> f64 {
    let cb = g.beta.cos();
    cb + (1.0 + cb) * (g.alpha + g.gamma).cos()
}

/// Alignment loss between two frames: the summed squared differences of
/// their axes, in `[0, 8]`. Equals `6 - 2 chi1(relative(g, g'))`.
pub fn loss_h(g: &EulerAngles, g_prime: &EulerAngles) -> f64 {
    let f = frame_of(g).axes();
    let fp = frame_of(g_prime).axes();
    let mut sum = 0.0;
    for a in 0..3 {
        for i in 0..3 {
            let d = f[a][i] - fp[a][i];
            sum += d * d;
        }
    }
    sum
}

/// Mean square error per axis, `(3 - chi1) / 6`.
pub fn mse_from_chi1(chi1_avg: f64) -> Result<f64, So3Error> {
    check_chi1_range(chi1_avg)?;
    Ok((3.0 - chi1_avg) / 6.0)
}

/// Average loss from the average character, `6 - 2 chi1`.
pub fn h_from_chi1(chi1_avg: f64) -> Result<f64, So3Error> {
    check_chi1_range(chi1_avg)?;
    Ok(6.0 - 2.0 * chi1_avg)
}

fn check_chi1_range(x: f64) -> Result<(), So3Error> {
    if !(-1.0..=3.0).contains(&x) {
        return Err(So3Error::Chi1OutOfRange(x));
    }
    Ok(())
}

/// Draws a Haar-distributed rotation: `alpha`, `gamma` uniform on
/// `[0, 2 pi)` and `cos(beta)` uniform on `[-1, 1]`.
///
/// Exactly three variates are consumed, in the order
/// `(alpha, gamma, cos beta)`, so a fixed stream reproduces fixed draws.
pub fn sample_haar<R: Rng + ?Sized>(rng: &mut R) -> EulerAngles {
    let alpha = TAU * rng.gen::<f64>();
    let gamma = TAU * rng.gen::<f64>();
    let cos_beta = 2.0 * rng.gen::<f64>() - 1.0;
    EulerAngles {
        alpha,
        beta: cos_beta.clamp(-1.0, 1.0).acos(),
        gamma,
    }
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn trace(a: &Mat3) -> f64 {
    a[0][0] + a[1][1] + a[2][2]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((a[i][j] - b[i][j]).abs());
            }
        }
        worst
    }

    fn identity() -> Mat3 {
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    }

    #[test]
    fn rotation_matrix_identity() {
        let r = EulerAngles::IDENTITY.rotation_matrix();
        assert!(max_abs_diff(&r, &identity()) == 0.0);
    }

    #[test]
    fn rotation_matrix_half_turn_about_y() {
        let g = EulerAngles::new(0.0, PI, 0.0);
        let r = g.rotation_matrix();
        assert!((trace(&r) - (-1.0)).abs() < 1e-12);
        assert!((r[1][1] - 1.0).abs() < 1e-12);
        assert!((r[0][0] + 1.0).abs() < 1e-12);
        assert!((r[2][2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_matrix_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let g = sample_haar(&mut rng);
            let r = g.rotation_matrix();
            let rtr = mat_mul(&transpose(&r), &r);
            assert!(max_abs_diff(&rtr, &identity()) < 1e-12);
        }
    }

    #[test]
    fn compose_with_identity_is_identity_map() {
        let g = EulerAngles::new(1.1, 0.7, 5.2);
        let h = g.compose(&EulerAngles::IDENTITY);
        assert!((g.alpha - h.alpha).abs() < 1e-12);
        assert!((g.beta - h.beta).abs() < 1e-12);
        assert!((g.gamma - h.gamma).abs() < 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let g = sample_haar(&mut rng);
            let e = g.compose(&g.inverse());
            assert!(max_abs_diff(&e.rotation_matrix(), &identity()) < 1e-12);
        }
    }

    #[test]
    fn compose_matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let g1 = sample_haar(&mut rng);
            let g2 = sample_haar(&mut rng);
            let lhs = g1.compose(&g2).rotation_matrix();
            let rhs = mat_mul(&g1.rotation_matrix(), &g2.rotation_matrix());
            assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn relative_is_inverse_then_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let g = sample_haar(&mut rng);
            let gp = sample_haar(&mut rng);
            let lhs = g.relative(&gp).rotation_matrix();
            let rhs = g.inverse().compose(&gp).rotation_matrix();
            assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn chi1_known_values() {
        assert!((chi1_geometric(&EulerAngles::IDENTITY) - 3.0).abs() < 1e-15);
        let half_turn = EulerAngles::new(0.0, PI, 0.0);
        assert!((chi1_geometric(&half_turn) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi1_equals_matrix_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..500 {
            let g = sample_haar(&mut rng);
            let t = trace(&g.rotation_matrix());
            let c = chi1_geometric(&g);
            assert!((t - c).abs() < 1e-12, "trace {t} vs chi1 {c}");
            assert!((-1.0 - 1e-12..=3.0 + 1e-12).contains(&c));
        }
    }

    #[test]
    fn loss_of_equal_frames_is_zero() {
        let g = EulerAngles::new(0.3, 1.2, 4.4);
        assert!(loss_h(&g, &g).abs() < 1e-14);
    }

    #[test]
    fn loss_of_half_turn_is_eight() {
        let h = loss_h(&EulerAngles::IDENTITY, &EulerAngles::new(0.0, PI, 0.0));
        assert!((h - 8.0).abs() < 1e-12);
    }

    #[test]
    fn loss_two_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let g = sample_haar(&mut rng);
            let gp = sample_haar(&mut rng);
            let direct = loss_h(&g, &gp);
            let via_chi1 = 6.0 - 2.0 * chi1_geometric(&g.relative(&gp));
            assert!((direct - via_chi1).abs() < 1e-10);
            assert!((-1e-12..=8.0 + 1e-12).contains(&direct));
        }
    }

    #[test]
    fn mse_and_h_mappings() {
        assert_eq!(mse_from_chi1(3.0), Ok(0.0));
        assert_eq!(h_from_chi1(3.0), Ok(0.0));
        assert_eq!(h_from_chi1(1.0), Ok(4.0));
        assert_eq!(h_from_chi1(0.0), Ok(6.0));
        assert_eq!(mse_from_chi1(0.0), Ok(0.5));
        assert!(matches!(h_from_chi1(3.5), Err(So3Error::Chi1OutOfRange(_))));
        assert!(matches!(
            mse_from_chi1(-1.5),
            Err(So3Error::Chi1OutOfRange(_))
        ));
    }

    #[test]
    fn frames_are_orthonormal_and_right_handed() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let g = sample_haar(&mut rng);
            assert!(frame_of(&g).defect() < 1e-12);
        }
    }

    #[test]
    fn haar_sampler_moments() {
        let n = 400_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (mut s1, mut s1sq, mut scb) = (0.0, 0.0, 0.0);
        let mut s1_var = 0.0;
        for _ in 0..n {
            let g = sample_haar(&mut rng);
            let c = chi1_geometric(&g);
            s1 += c;
            s1sq += c * c;
            s1_var += c * c;
            scb += g.beta.cos();
        }
        let nf = n as f64;
        let mean1 = s1 / nf;
        let mean1sq = s1sq / nf;
        let meancb = scb / nf;
        // chi1 has unit Haar variance; cos(beta) has variance 1/3.
        let sigma1 = (s1_var / nf - mean1 * mean1).sqrt() / nf.sqrt();
        assert!(
            mean1.abs() < 3.0 * sigma1,
            "chi1 mean {mean1} vs 3 sigma {}",
            3.0 * sigma1
        );
        assert!(meancb.abs() < 3.0 * (1.0f64 / 3.0 / nf).sqrt());
        // Character orthogonality: the Haar average of chi1^2 is 1.
        let sigma_sq = 3.0 * (2.0 / nf).sqrt();
        assert!(
            (mean1sq - 1.0).abs() < sigma_sq,
            "chi1^2 mean {mean1sq} vs window {sigma_sq}"
        );
    }

    #[test]
    fn haar_sampler_deterministic_for_fixed_seed() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..32 {
            assert_eq!(sample_haar(&mut a), sample_haar(&mut b));
        }
    }

    proptest! {
        #[test]
        fn canonicalization_lands_in_ranges(
            a in -20.0f64..20.0, b in -20.0f64..20.0, c in -20.0f64..20.0
        ) {
            let g = EulerAngles::new(a, b, c);
            prop_assert!((0.0..TAU).contains(&g.alpha));
            prop_assert!((0.0..=PI).contains(&g.beta));
            prop_assert!((0.0..TAU).contains(&g.gamma));
        }

        #[test]
        fn canonicalization_preserves_rotation(
            a in -20.0f64..20.0, b in -20.0f64..20.0, c in -20.0f64..20.0
        ) {
            let raw = EulerAngles { alpha: a, beta: b, gamma: c };
            let canon = EulerAngles::new(a, b, c);
            prop_assert!(max_abs_diff(&raw.rotation_matrix(), &canon.rotation_matrix()) < 1e-12);
        }

        #[test]
        fn composition_is_associative_on_matrices(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g1 = sample_haar(&mut rng);
            let g2 = sample_haar(&mut rng);
            let g3 = sample_haar(&mut rng);
            let lhs = g1.compose(&g2).compose(&g3).rotation_matrix();
            let rhs = g1.compose(&g2.compose(&g3)).rotation_matrix();
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }

        #[test]
        fn roundtrip_through_matrix(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = sample_haar(&mut rng);
            let back = EulerAngles::from_matrix(&g.rotation_matrix());
            prop_assert!(max_abs_diff(&g.rotation_matrix(), &back.rotation_matrix()) < 1e-12);
        }
    }
}
