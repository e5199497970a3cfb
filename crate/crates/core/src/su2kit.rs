//! Spin-S operator algebra, SU(2) coherent states, rotations and the
//! distance functions between classical configurations.
//!
//! The single-site basis is ordered by magnetic quantum number
//! `M = -S, ..., S`, so basis index `i` carries `M = i - S`.

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_function, CMat, CVec, C64, I};

/// A real 3-vector.
pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn normalized(a: &Vec3) -> Vec3 {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    norm(&sub(a, b))
}

/// Uniformly distributed unit vector.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    UnitSphere.sample(rng)
}

/// Spin magnitude stored as the integer `2S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinMagnitude {
    two_s: u32,
}

impl SpinMagnitude {
    pub fn new(two_s: u32) -> Result<Self> {
        if two_s == 0 {
            return Err(Error::InvalidSpin(two_s));
        }
        Ok(Self { two_s })
    }

    /// Parses a half-integer value such as `0.5` or `3.0`.
    pub fn from_spin(s: f64) -> Result<Self> {
        let two_s = (2.0 * s).round();
        if !(two_s >= 1.0) || (2.0 * s - two_s).abs() > 1e-9 || two_s > u32::MAX as f64 {
            return Err(Error::InvalidArgument(format!(
                "{s} is not a positive half-integer"
            )));
        }
        Self::new(two_s as u32)
    }

    pub fn two_s(self) -> u32 {
        self.two_s
    }

    pub fn s(self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.two_s as usize + 1
    }

    /// Magnetic quantum number of basis index `i`.
    pub fn m_of(self, i: usize) -> f64 {
        i as f64 - self.s()
    }
}

/// Dense spin matrices in the `M = -S..S` basis.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub spin: SpinMagnitude,
    pub sx: CMat,
    pub sy: CMat,
    pub sz: CMat,
    pub splus: CMat,
    pub sminus: CMat,
}

impl SpinOperators {
    /// `a·S = a_x S^x + a_y S^y + a_z S^z`.
    pub fn dot(&self, a: &Vec3) -> CMat {
        self.sx.scale(a[0]) + self.sy.scale(a[1]) + self.sz.scale(a[2])
    }

    pub fn component(&self, axis: usize) -> &CMat {
        match axis {
            0 => &self.sx,
            1 => &self.sy,
            2 => &self.sz,
            _ => panic!("axis index {axis} out of range"),
        }
    }
}

pub fn build_spin_operators(spin: SpinMagnitude) -> SpinOperators {
    let n = spin.dim();
    let s = spin.s();
    let mut splus = CMat::zeros(n, n);
    for i in 0..n - 1 {
        let m = spin.m_of(i);
        splus[(i + 1, i)] = c((s * (s + 1.0) - m * (m + 1.0)).sqrt());
    }
    let sminus = splus.adjoint();
    let sx = (&splus + &sminus).scale(0.5);
    let sy = (&splus - &sminus) * C64::new(0.0, -0.5);
    let sz = CMat::from_fn(n, n, |i, j| if i == j { c(spin.m_of(i)) } else { c(0.0) });
    SpinOperators {
        spin,
        sx,
        sy,
        sz,
        splus,
        sminus,
    }
}

/// A point on the unit sphere in spherical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalPoint {
    pub theta: f64,
    pub phi: f64,
}

impl SphericalPoint {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta,
            phi: phi.rem_euclid(std::f64::consts::TAU),
        }
    }

    pub fn from_cartesian(v: &Vec3) -> Self {
        let n = norm(v);
        let theta = (v[2] / n).clamp(-1.0, 1.0).acos();
        Self::new(theta, v[1].atan2(v[0]))
    }

    pub fn cartesian(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// `tan(θ/2) e^{iφ}`; `None` at the south pole.
    pub fn stereographic(&self) -> Option<C64> {
        if self.theta >= std::f64::consts::PI {
            return None;
        }
        Some(C64::from_polar((0.5 * self.theta).tan(), self.phi))
    }

    /// Reflection through the xz-plane.
    pub fn sigma(&self) -> Self {
        Self::new(self.theta, -self.phi)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::from_cartesian(&random_unit(rng))
    }
}

#[derive(Debug, Clone)]
pub struct CoherentVector {
    pub point: SphericalPoint,
    pub amplitudes: CVec,
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    let lf = |m: u32| (1..=m).map(|x| (x as f64).ln()).sum::<f64>();
    lf(n) - lf(k) - lf(n - k)
}

/// Coherent state with amplitude on `M` equal to
/// `sqrt(C(2S, S+M)) cos(θ/2)^{S+M} sin(θ/2)^{S-M} e^{i(S-M)φ}`.
pub fn coherent_vector(spin: SpinMagnitude, point: SphericalPoint) -> CoherentVector {
    let n = spin.two_s;
    let (sh, ch) = (0.5 * point.theta).sin_cos();
    let amplitudes = CVec::from_fn(spin.dim(), |i, _| {
        let i = i as u32;
        let mag = (0.5 * ln_binomial(n, i)).exp() * ch.powi(i as i32) * sh.powi((n - i) as i32);
        C64::from_polar(mag, (n - i) as f64 * point.phi)
    });
    CoherentVector { point, amplitudes }
}

/// `⟨Ω′|Ω⟩ = [cos(θ/2)cos(θ′/2) + e^{i(φ−φ′)} sin(θ/2)sin(θ′/2)]^{2S}`.
pub fn overlap(spin: SpinMagnitude, omega: &SphericalPoint, omega_prime: &SphericalPoint) -> C64 {
    let (s1, c1) = (0.5 * omega.theta).sin_cos();
    let (s2, c2) = (0.5 * omega_prime.theta).sin_cos();
    let base = c(c1 * c2) + C64::from_polar(s1 * s2, omega.phi - omega_prime.phi);
    base.powu(spin.two_s)
}

/// `exp(i t ω·S)`.
pub fn rotation_unitary(spin: SpinMagnitude, omega: &SphericalPoint, t: f64) -> CMat {
    let ops = build_spin_operators(spin);
    hermitian_function(&ops.dot(&omega.cartesian()), |x| (I * (t * x)).exp())
}

/// Right-handed rotation by `angle` about the unit axis `n` (Rodrigues).
pub fn axis_rotation(n: &Vec3, angle: f64) -> [[f64; 3]; 3] {
    let (s, co) = angle.sin_cos();
    let v = 1.0 - co;
    let [x, y, z] = *n;
    [
        [co + x * x * v, x * y * v - z * s, x * z * v + y * s],
        [y * x * v + z * s, co + y * y * v, y * z * v - x * s],
        [z * x * v - y * s, z * y * v + x * s, co + z * z * v],
    ]
}

pub fn mat_vec(m: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// The classical rotation induced by `exp(i t ω·S)`:
/// `U (Ω·S) U† = (R Ω)·S`. With the `+i` sign in the exponent this is the
/// right-handed rotation by `-t` about `ω`.
pub fn rotation_matrix(omega: &SphericalPoint, t: f64) -> [[f64; 3]; 3] {
    axis_rotation(&omega.cartesian(), -t)
}

/// A classical spin configuration: one unit vector per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalConfig {
    pub spins: Vec<Vec3>,
}

impl ClassicalConfig {
    /// Normalizes every input vector.
    pub fn new(spins: Vec<Vec3>) -> Self {
        Self {
            spins: spins.iter().map(normalized).collect(),
        }
    }

    pub fn uniform(n: usize, v: Vec3) -> Self {
        Self::new(vec![v; n])
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            spins: (0..n).map(|_| random_unit(rng)).collect(),
        }
    }

    pub fn from_points(points: &[SphericalPoint]) -> Self {
        Self {
            spins: points.iter().map(SphericalPoint::cartesian).collect(),
        }
    }

    pub fn points(&self) -> Vec<SphericalPoint> {
        self.spins
            .iter()
            .map(SphericalPoint::from_cartesian)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// Reflection of every spin through the xz-plane.
    pub fn sigma(&self) -> Self {
        Self {
            spins: self.spins.iter().map(|v| [v[0], -v[1], v[2]]).collect(),
        }
    }
}

/// Distances between two configurations on the same site set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBundle {
    /// Sum of per-site Euclidean distances.
    pub l1: f64,
    /// Sum of squared per-site distances.
    pub l2sq: f64,
    /// `Σ_r min(√S |Ω_r − Ω′_r|, S |Ω_r − Ω′_r|²)`.
    pub mixed: f64,
    pub sqrt_s_l1: f64,
    /// Overlap decay constant.
    pub eta: f64,
}

pub const ETA: f64 = 0.25;

pub fn config_distances(
    spin: SpinMagnitude,
    a: &ClassicalConfig,
    b: &ClassicalConfig,
) -> Result<DistanceBundle> {
    if a.len() != b.len() {
        return Err(Error::SiteMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let s = spin.s();
    let rs = s.sqrt();
    let mut out = DistanceBundle {
        l1: 0.0,
        l2sq: 0.0,
        mixed: 0.0,
        sqrt_s_l1: 0.0,
        eta: ETA,
    };
    for (x, y) in a.spins.iter().zip(&b.spins) {
        let dist = distance(x, y);
        out.l1 += dist;
        out.l2sq += dist * dist;
        out.mixed += (rs * dist).min(s * dist * dist);
    }
    out.sqrt_s_l1 = rs * out.l1;
    Ok(out)
}

/// Product coherent state `⊗_r |Ω_r⟩`, site 0 most significant.
pub fn product_coherent_state(spin: SpinMagnitude, config: &ClassicalConfig) -> CVec {
    let vs: Vec<CVec> = config
        .points()
        .iter()
        .map(|p| coherent_vector(spin, *p).amplitudes)
        .collect();
    crate::linalg::product_state(&vs)
}

/// `⟨Ω′|Ω⟩` for product coherent states.
pub fn product_overlap(
    spin: SpinMagnitude,
    a: &ClassicalConfig,
    b: &ClassicalConfig,
) -> Result<C64> {
    if a.len() != b.len() {
        return Err(Error::SiteMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| overlap(spin, p, &q))
        .product())
}
