//! The five spin models: quantum Hamiltonians in their original and
//! reflection-positive frames, classical limits, the frame-changing
//! unitaries, large-entropy interaction profiles and the block-bond
//! combinatorial constants used by the large-entropy analysis.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    add_local_operator, c, checked_dim, gauss_legendre_on, hermitian_function, kron, CMat, C64, I,
};
use crate::su2kit::{build_spin_operators, dot, SpinMagnitude, SpinOperators, Vec3};
use crate::torus::{Bond, TorusGeometry};

/// Default cap on the many-body Hilbert-space dimension.
pub const DIMENSION_CAP: usize = 1 << 14;

/// Largest interaction-polynomial degree accepted for the large-entropy models.
pub const MAX_POLY_DEGREE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    HeisenbergAf,
    NonlinearXy,
    Nematic,
    OrbitalCompass2d,
    Onetwenty3d,
}

impl ModelKind {
    pub fn number(self) -> u8 {
        match self {
            ModelKind::HeisenbergAf => 1,
            ModelKind::NonlinearXy => 2,
            ModelKind::Nematic => 3,
            ModelKind::OrbitalCompass2d => 4,
            ModelKind::Onetwenty3d => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::HeisenbergAf => "heisenberg_af",
            ModelKind::NonlinearXy => "nonlinear_xy",
            ModelKind::Nematic => "nematic",
            ModelKind::OrbitalCompass2d => "orbital_compass_2d",
            ModelKind::Onetwenty3d => "onetwenty_3d",
        }
    }
}

/// Sign in front of the odd part of the nonlinear XY interaction polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    #[default]
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Original,
    Rp,
}

/// Which modified dot product enters the large-entropy interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiamondMode {
    /// Planar product of two components. After the frame change these are
    /// the x and z components.
    XyOnly,
    /// `x x′ − y y′ + z z′`.
    XzFlipY,
}

impl DiamondMode {
    pub fn apply(self, a: &Vec3, b: &Vec3) -> f64 {
        match self {
            DiamondMode::XyOnly => a[0] * b[0] + a[2] * b[2],
            DiamondMode::XzFlipY => a[0] * b[0] - a[1] * b[1] + a[2] * b[2],
        }
    }
}

/// Sites and bonds on which a Hamiltonian lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub d: usize,
    pub n_sites: usize,
    pub bonds: Vec<Bond>,
    /// Sublattice parity of every site.
    pub parity: Vec<usize>,
    pub geometry: Option<TorusGeometry>,
}

impl Lattice {
    pub fn torus(geom: &TorusGeometry) -> Self {
        Lattice {
            d: geom.d,
            n_sites: geom.n_sites(),
            bonds: geom.bonds(),
            parity: (0..geom.n_sites()).map(|r| geom.parity(r)).collect(),
            geometry: Some(*geom),
        }
    }

    /// Two sites joined by one bond in direction `dir` of a `d`-dimensional lattice.
    pub fn bond(d: usize, dir: usize) -> Self {
        Lattice {
            d,
            n_sites: 2,
            bonds: vec![Bond { a: 0, b: 1, dir }],
            parity: vec![0, 1],
            geometry: None,
        }
    }
}

/// A large-entropy interaction polynomial `𝔈_p(x) = Σ_k c_k x^k` together
/// with its scale `ε_p` and the limiting profile `A(s)`.
#[derive(Clone)]
pub struct EntropyProfile {
    pub p: usize,
    /// `c_0, ..., c_p`, nonnegative with unit sum.
    pub coefficients: Vec<f64>,
    pub epsilon_p: f64,
    limit: LimitForm,
    pub family: String,
}

#[derive(Clone)]
enum LimitForm {
    Exponential(f64),
    /// Quadrature nodes `(λ_i, w_i φ(λ_i) / ∫φ)` of the Laplace transform.
    Laplace(Vec<(f64, f64)>),
}

impl fmt::Debug for EntropyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EntropyProfile")
            .field("family", &self.family)
            .field("p", &self.p)
            .field("epsilon_p", &self.epsilon_p)
            .finish()
    }
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum EntropyFamily {
    /// `𝔈_p(x) = ((1 + x)/2)^p`.
    PowerMean,
    /// `c_k ∝ φ(k/p)` for `k = 1..p`.
    Density { name: String, phi: DensityFn },
}

impl EntropyFamily {
    pub fn density(
        name: impl Into<String>,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        EntropyFamily::Density {
            name: name.into(),
            phi: Arc::new(phi),
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn entropy_profile(p: usize, family: &EntropyFamily) -> Result<EntropyProfile> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    match family {
        EntropyFamily::PowerMean => {
            let scale = 0.5f64.powi(p as i32);
            let coefficients = (0..=p).map(|k| binomial(p, k) * scale).collect();
            Ok(EntropyProfile {
                p,
                coefficients,
                epsilon_p: 1.0 / p as f64,
                limit: LimitForm::Exponential(0.5),
                family: "power_mean".into(),
            })
        }
        EntropyFamily::Density { name, phi } => {
            let mut coefficients = vec![0.0];
            for k in 1..=p {
                let v = phi(k as f64 / p as f64) / p as f64;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "density {name} is negative or non-finite at {}",
                        k as f64 / p as f64
                    )));
                }
                coefficients.push(v);
            }
            let total: f64 = coefficients.iter().sum();
            if !(total > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "density {name} cannot be normalized"
                )));
            }
            coefficients.iter_mut().for_each(|x| *x /= total);
            let nodes = gauss_legendre_on(64, 0.0, 1.0);
            let norm: f64 = nodes.iter().map(|(x, w)| w * phi(*x)).sum();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "density {name} has no finite positive integral"
                )));
            }
            let laplace = nodes
                .iter()
                .map(|(x, w)| (*x, w * phi(*x) / norm))
                .collect();
            Ok(EntropyProfile {
                p,
                coefficients,
                epsilon_p: 1.0 / p as f64,
                limit: LimitForm::Laplace(laplace),
                family: format!("density:{name}"),
            })
        }
    }
}

impl EntropyProfile {
    /// Builds a profile from explicit coefficients `c_0..c_p`.
    pub fn from_coefficients(coefficients: Vec<f64>, epsilon_p: f64) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidArgument(
                "coefficients must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = coefficients.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "coefficients sum to {total}, not 1"
            )));
        }
        Ok(EntropyProfile {
            p: coefficients.len() - 1,
            coefficients,
            epsilon_p,
            limit: LimitForm::Laplace(Vec::new()),
            family: "explicit".into(),
        })
    }

    /// `𝔈_p(x)` by Horner's rule.
    pub fn e_p(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c)
    }

    pub fn a_p(&self, s: f64) -> f64 {
        self.e_p(1.0 - self.epsilon_p * s)
    }

    /// The limiting profile `A(s)`.
    pub fn limit(&self, s: f64) -> f64 {
        match &self.limit {
            LimitForm::Exponential(rate) => (-rate * s).exp(),
            LimitForm::Laplace(nodes) => nodes.iter().map(|(x, w)| w * (-x * s).exp()).sum(),
        }
    }

    /// `sup_{s ∈ [0, s_max]} |A_p(s) − A(s)|` on a uniform grid.
    pub fn sup_gap(&self, s_max: f64, grid: usize) -> f64 {
        (0..=grid)
            .map(|i| s_max * i as f64 / grid as f64)
            .map(|s| (self.a_p(s) - self.limit(s)).abs())
            .fold(0.0, f64::max)
    }
}

/// A fully specified model on a lattice.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub spin: SpinMagnitude,
    pub j1: f64,
    pub j2: f64,
    /// Interaction polynomial for the large-entropy models.
    pub profile: Option<EntropyProfile>,
    pub sign: SignMode,
    pub lattice: Lattice,
}

impl ModelSpec {
    pub fn heisenberg_af(spin: SpinMagnitude, j1: f64, j2: f64, lattice: Lattice) -> Result<Self> {
        Self {
            kind: ModelKind::HeisenbergAf,
            spin,
            j1,
            j2,
            profile: None,
            sign: SignMode::Plus,
            lattice,
        }
        .validated()
    }

    pub fn nonlinear_xy(
        spin: SpinMagnitude,
        profile: EntropyProfile,
        sign: SignMode,
        lattice: Lattice,
    ) -> Result<Self> {
        Self {
            kind: ModelKind::NonlinearXy,
            spin,
            j1: 0.0,
            j2: 0.0,
            profile: Some(profile),
            sign,
            lattice,
        }
        .validated()
    }

    pub fn nematic(spin: SpinMagnitude, profile: EntropyProfile, lattice: Lattice) -> Result<Self> {
        Self {
            kind: ModelKind::Nematic,
            spin,
            j1: 0.0,
            j2: 0.0,
            profile: Some(profile),
            sign: SignMode::Plus,
            lattice,
        }
        .validated()
    }

    pub fn orbital_compass(spin: SpinMagnitude, lattice: Lattice) -> Result<Self> {
        Self {
            kind: ModelKind::OrbitalCompass2d,
            spin,
            j1: 0.0,
            j2: 0.0,
            profile: None,
            sign: SignMode::Plus,
            lattice,
        }
        .validated()
    }

    pub fn onetwenty(spin: SpinMagnitude, lattice: Lattice) -> Result<Self> {
        Self {
            kind: ModelKind::Onetwenty3d,
            spin,
            j1: 0.0,
            j2: 0.0,
            profile: None,
            sign: SignMode::Plus,
            lattice,
        }
        .validated()
    }

    /// Same model and couplings on another lattice or spin.
    pub fn with_lattice(&self, lattice: Lattice) -> Result<Self> {
        Self {
            lattice,
            ..self.clone()
        }
        .validated()
    }

    pub fn with_spin(&self, spin: SpinMagnitude) -> Self {
        Self {
            spin,
            ..self.clone()
        }
    }

    fn validated(self) -> Result<Self> {
        let d = self.lattice.d;
        match self.kind {
            ModelKind::HeisenbergAf => {
                for (name, j) in [("J1", self.j1), ("J2", self.j2)] {
                    if !(0.0..1.0).contains(&j) {
                        return Err(Error::Model(format!("{name} = {j} must lie in [0, 1)")));
                    }
                }
            }
            ModelKind::NonlinearXy | ModelKind::Nematic => {
                let prof = self
                    .profile
                    .as_ref()
                    .ok_or_else(|| Error::Model("missing interaction polynomial".into()))?;
                if prof.p > MAX_POLY_DEGREE {
                    return Err(Error::Model(format!(
                        "polynomial degree {} exceeds the cap {MAX_POLY_DEGREE}",
                        prof.p
                    )));
                }
                if prof.coefficients.iter().any(|c| *c < 0.0)
                    || (prof.coefficients.iter().sum::<f64>() - 1.0).abs() > 1e-12
                {
                    return Err(Error::Model(
                        "coefficients must be nonnegative with unit sum".into(),
                    ));
                }
            }
            ModelKind::OrbitalCompass2d if d != 2 => {
                return Err(Error::Model(format!(
                    "the orbital-compass model needs d = 2, got {d}"
                )))
            }
            ModelKind::Onetwenty3d if d != 3 => {
                return Err(Error::Model(format!(
                    "the 120-degree model needs d = 3, got {d}"
                )))
            }
            _ => {}
        }
        if self.lattice.bonds.iter().any(|b| b.dir >= d) {
            return Err(Error::Model(
                "bond direction exceeds the lattice dimension".into(),
            ));
        }
        Ok(self)
    }

    pub fn diamond_mode(&self) -> Option<DiamondMode> {
        match self.kind {
            ModelKind::NonlinearXy => Some(DiamondMode::XyOnly),
            ModelKind::Nematic => Some(DiamondMode::XzFlipY),
            _ => None,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites
    }

    /// Classical bond energy in the reflection-positive frame.
    pub fn bond_energy(&self, a: &Vec3, b: &Vec3, dir: usize) -> f64 {
        match self.kind {
            ModelKind::HeisenbergAf => {
                -(self.j1 * a[0] * b[0] - self.j2 * a[1] * b[1] + a[2] * b[2])
            }
            ModelKind::NonlinearXy => -self
                .profile
                .as_ref()
                .expect("validated")
                .e_p(DiamondMode::XyOnly.apply(a, b)),
            ModelKind::Nematic => {
                let x = DiamondMode::XzFlipY.apply(a, b);
                -self.profile.as_ref().expect("validated").e_p(x * x)
            }
            ModelKind::OrbitalCompass2d => {
                let axis = if dir == 0 { 0 } else { 2 };
                -a[axis] * b[axis]
            }
            ModelKind::Onetwenty3d => {
                let v = onetwenty_rp_vector(dir);
                -dot(a, &v) * dot(b, &v)
            }
        }
    }

    /// Energetic strength of a bond for the large-entropy models:
    /// `𝔈_p` evaluated on the model's bond variable.
    pub fn bond_strength(&self, a: &Vec3, b: &Vec3, dir: usize) -> f64 {
        -self.bond_energy(a, b, dir)
    }
}

/// The six planar vectors `v̂_k = (cos((k−1)π/3), 0, sin((k−1)π/3))`, `k = 1..6`.
pub fn onetwenty_vector(k: usize) -> Vec3 {
    assert!((1..=6).contains(&k), "vector index {k} out of range");
    let h = 3f64.sqrt() / 2.0;
    match k {
        1 => [1.0, 0.0, 0.0],
        2 => [0.5, 0.0, h],
        3 => [-0.5, 0.0, h],
        4 => [-1.0, 0.0, 0.0],
        5 => [-0.5, 0.0, -h],
        _ => [0.5, 0.0, -h],
    }
}

/// Vector coupled along lattice direction `dir` (0-based) in the
/// reflection-positive 120-degree Hamiltonian: `v̂_{2(dir+1)}`.
pub fn onetwenty_rp_vector(dir: usize) -> Vec3 {
    onetwenty_vector(2 * (dir + 1))
}

/// Classical Hamiltonian `H^∞` in the reflection-positive frame, summed bond by bond.
pub fn classical_energy(spec: &ModelSpec, config: &crate::su2kit::ClassicalConfig) -> f64 {
    spec.lattice
        .bonds
        .iter()
        .map(|b| spec.bond_energy(&config.spins[b.a], &config.spins[b.b], b.dir))
        .sum()
}

/// Completed-square form of `H^∞` for the orbital-compass and 120-degree
/// models; requires every bond `(r, r + e_j)` to be present once per
/// site and direction, as on a torus.
pub fn classical_energy_completed_square(
    spec: &ModelSpec,
    config: &crate::su2kit::ClassicalConfig,
) -> Result<f64> {
    let (weight_y, constant): (f64, f64) = match spec.kind {
        ModelKind::OrbitalCompass2d => (1.0, 1.0),
        ModelKind::Onetwenty3d => (1.5, 1.5),
        _ => {
            return Err(Error::Model(format!(
                "{} has no completed-square form",
                spec.kind.name()
            )))
        }
    };
    if spec.lattice.geometry.is_none() {
        return Err(Error::Model(
            "the completed-square form needs a torus".into(),
        ));
    }
    let axis = |dir: usize| -> Vec3 {
        match spec.kind {
            ModelKind::OrbitalCompass2d => {
                if dir == 0 {
                    [1.0, 0.0, 0.0]
                } else {
                    [0.0, 0.0, 1.0]
                }
            }
            _ => onetwenty_rp_vector(dir),
        }
    };
    let mut e = 0.0;
    for b in &spec.lattice.bonds {
        let v = axis(b.dir);
        let diff = dot(&config.spins[b.a], &v) - dot(&config.spins[b.b], &v);
        e += 0.5 * diff * diff;
    }
    for s in &config.spins {
        e += weight_y * s[1] * s[1];
    }
    Ok(e - constant * config.len() as f64)
}

fn polynomial_of(x: &CMat, coefficients: &[f64]) -> CMat {
    let n = x.nrows();
    let mut out = CMat::zeros(n, n);
    let mut power = CMat::identity(n, n);
    for (k, &ck) in coefficients.iter().enumerate() {
        if k > 0 {
            power = &power * x;
        }
        if ck != 0.0 {
            out += power.scale(ck);
        }
    }
    out
}

/// Two-site operator for a bond in direction `dir`, acting on `site_a ⊗ site_b`.
pub fn bond_operator(spec: &ModelSpec, frame: Frame, dir: usize) -> CMat {
    let ops = build_spin_operators(spec.spin);
    bond_operator_with(spec, &ops, frame, dir)
}

fn bond_operator_with(spec: &ModelSpec, ops: &SpinOperators, frame: Frame, dir: usize) -> CMat {
    let s2 = spec.spin.s().powi(2);
    let pair = |a: &CMat, b: &CMat| kron(a, b);
    let (sx, sy, sz) = (&ops.sx, &ops.sy, &ops.sz);
    match (spec.kind, frame) {
        (ModelKind::HeisenbergAf, Frame::Original) => {
            (pair(sx, sx).scale(spec.j1) + pair(sy, sy).scale(spec.j2) + pair(sz, sz)).unscale(s2)
        }
        (ModelKind::HeisenbergAf, Frame::Rp) => {
            -(pair(sx, sx).scale(spec.j1) - pair(sy, sy).scale(spec.j2) + pair(sz, sz)).unscale(s2)
        }
        (ModelKind::NonlinearXy, frame) => {
            let prof = spec.profile.as_ref().expect("validated");
            let (x, coefficients): (CMat, Vec<f64>) = match frame {
                Frame::Original => {
                    let signed = prof
                        .coefficients
                        .iter()
                        .enumerate()
                        .map(|(k, ck)| {
                            if spec.sign == SignMode::Minus && k % 2 == 1 {
                                -ck
                            } else {
                                *ck
                            }
                        })
                        .collect();
                    ((pair(sx, sx) + pair(sy, sy)).unscale(s2), signed)
                }
                Frame::Rp => (
                    (pair(sx, sx) + pair(sz, sz)).unscale(s2),
                    prof.coefficients.clone(),
                ),
            };
            -polynomial_of(&x, &coefficients)
        }
        (ModelKind::Nematic, frame) => {
            let prof = spec.profile.as_ref().expect("validated");
            let y_sign = if frame == Frame::Original { 1.0 } else { -1.0 };
            let dotp = (pair(sx, sx) + pair(sy, sy).scale(y_sign) + pair(sz, sz)).unscale(s2);
            -polynomial_of(&(&dotp * &dotp), &prof.coefficients)
        }
        (ModelKind::OrbitalCompass2d, Frame::Original) => {
            let a = if dir == 0 { sy } else { sx };
            pair(a, a).unscale(s2)
        }
        (ModelKind::OrbitalCompass2d, Frame::Rp) => {
            let a = if dir == 0 { sx } else { sz };
            -pair(a, a).unscale(s2)
        }
        (ModelKind::Onetwenty3d, Frame::Original) => {
            let h = 3f64.sqrt() / 2.0;
            let t = match dir {
                0 => sx.clone(),
                1 => sx.scale(-0.5) - sy.scale(h),
                _ => sx.scale(-0.5) + sy.scale(h),
            };
            pair(&t, &t).unscale(s2)
        }
        (ModelKind::Onetwenty3d, Frame::Rp) => {
            let t = ops.dot(&onetwenty_rp_vector(dir));
            -pair(&t, &t).unscale(s2)
        }
    }
}

/// An operator supported on a few sites, listed in tensor order.
#[derive(Debug, Clone)]
pub struct LocalTerm {
    pub sites: Vec<usize>,
    pub op: Arc<CMat>,
    pub dir: usize,
}

/// The Hamiltonian as a list of bond terms; terms in the same direction
/// share one operator.
pub fn local_terms(spec: &ModelSpec, frame: Frame) -> Vec<LocalTerm> {
    let ops = build_spin_operators(spec.spin);
    let per_dir: Vec<Arc<CMat>> = (0..spec.lattice.d)
        .map(|dir| Arc::new(bond_operator_with(spec, &ops, frame, dir)))
        .collect();
    spec.lattice
        .bonds
        .iter()
        .map(|b| LocalTerm {
            sites: vec![b.a, b.b],
            op: Arc::clone(&per_dir[b.dir]),
            dir: b.dir,
        })
        .collect()
}

pub fn build_quantum_hamiltonian(spec: &ModelSpec, frame: Frame) -> Result<CMat> {
    build_quantum_hamiltonian_with_cap(spec, frame, DIMENSION_CAP)
}

pub fn build_quantum_hamiltonian_with_cap(
    spec: &ModelSpec,
    frame: Frame,
    cap: usize,
) -> Result<CMat> {
    let d = spec.spin.dim();
    let dim = checked_dim(d, spec.n_sites(), cap)?;
    let mut h = CMat::zeros(dim, dim);
    for term in local_terms(spec, frame) {
        add_local_operator(&mut h, &term.op, &term.sites, spec.n_sites(), d, c(1.0));
    }
    Ok(h)
}

/// Single-site ingredients of the frame changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RpTransform {
    /// `U_A = Π_r e^{iπ/2 S^y_r} e^{iπ/2 S^x_r}`.
    UA,
    /// `U_B = Π_{r odd} e^{iπ S^y_r}`.
    UB,
    /// `U_B U_A`.
    UBUA,
    /// `e^{−iπ/6 Σ_r S^y_r} U_B U_A`.
    RotatedUBUA,
}

/// The unitary taking each model's original Hamiltonian to its
/// reflection-positive frame.
pub fn rp_transform(spec: &ModelSpec) -> RpTransform {
    match spec.kind {
        ModelKind::HeisenbergAf | ModelKind::Nematic => RpTransform::UB,
        ModelKind::NonlinearXy => match spec.sign {
            SignMode::Plus => RpTransform::UA,
            SignMode::Minus => RpTransform::UBUA,
        },
        ModelKind::OrbitalCompass2d => RpTransform::UBUA,
        ModelKind::Onetwenty3d => RpTransform::RotatedUBUA,
    }
}

fn exp_i(op: &CMat, angle: f64) -> CMat {
    hermitian_function(op, |x| (I * (angle * x)).exp())
}

impl RpTransform {
    /// The single-site unitary for a site of the given parity.
    pub fn site_unitary(self, spin: SpinMagnitude, parity: usize) -> CMat {
        let ops = build_spin_operators(spin);
        let half = std::f64::consts::FRAC_PI_2;
        let ua = || exp_i(&ops.sy, half) * exp_i(&ops.sx, half);
        let ub = || {
            if parity == 1 {
                exp_i(&ops.sy, std::f64::consts::PI)
            } else {
                CMat::identity(spin.dim(), spin.dim())
            }
        };
        match self {
            RpTransform::UA => ua(),
            RpTransform::UB => ub(),
            RpTransform::UBUA => ub() * ua(),
            RpTransform::RotatedUBUA => exp_i(&ops.sy, -std::f64::consts::FRAC_PI_6) * ub() * ua(),
        }
    }

    /// The full many-body unitary on `lattice`.
    pub fn unitary(self, spin: SpinMagnitude, lattice: &Lattice) -> Result<CMat> {
        checked_dim(spin.dim(), lattice.n_sites, DIMENSION_CAP)?;
        let even = self.site_unitary(spin, 0);
        let odd = self.site_unitary(spin, 1);
        let mut u = CMat::from_element(1, 1, c(1.0));
        for &p in &lattice.parity {
            u = kron(&u, if p == 1 { &odd } else { &even });
        }
        Ok(u)
    }
}

/// Report of a reflection-positivity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpReport {
    pub min_value: f64,
    pub max_imag: f64,
    pub trials: usize,
}

/// Checks `⟨A conj(θ(A))⟩ ≥ 0` for random operators `A` on the half
/// `x_0 < L/2` of a torus, with `θ` the reflection `x_0 ↦ L − 1 − x_0`
/// through the plane between sites. `β = 0` uses the normalized trace.
pub fn rp_check<R: rand::Rng + ?Sized>(
    h_rp: &CMat,
    geom: &TorusGeometry,
    spin: SpinMagnitude,
    beta: f64,
    trials: usize,
    rng: &mut R,
) -> Result<RpReport> {
    let n = geom.n_sites();
    let d = spin.dim();
    let dim = checked_dim(d, n, DIMENSION_CAP)?;
    if h_rp.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: h_rp.nrows(),
        });
    }
    let weight = hermitian_function(h_rp, |x| c((-beta * x).exp()));
    let z = crate::linalg::trace(&weight).re;
    let perm: Vec<usize> = (0..n)
        .map(|r| {
            let mut x = geom.coords(r);
            x[0] = geom.l - 1 - x[0];
            geom.site(&x)
        })
        .collect();
    let p = crate::linalg::site_permutation(&perm, d);
    let left: Vec<usize> = (0..n).filter(|&r| geom.coords(r)[0] < geom.l / 2).collect();
    let local_dim = d.pow(left.len() as u32);
    let mut report = RpReport {
        min_value: f64::INFINITY,
        max_imag: 0.0,
        trials,
    };
    for k in 0..trials {
        let a_local = if k == 0 {
            CMat::identity(local_dim, local_dim)
        } else {
            CMat::from_fn(local_dim, local_dim, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let a = crate::linalg::embed(&a_local, &left, n, d);
        let theta_a = &p * &a * p.transpose();
        let prod = &a * theta_a.map(|z| z.conj());
        let value = crate::linalg::hs_inner(&weight, &prod) / z;
        report.min_value = report.min_value.min(value.re);
        report.max_imag = report.max_imag.max(value.im.abs());
    }
    Ok(report)
}

/// Constants of the large-entropy bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBounds {
    pub d: usize,
    pub a_d: usize,
    pub b: f64,
    pub b_prime: f64,
    pub t: f64,
    pub a_p_t: f64,
    pub delta_raw: f64,
    /// `Δ`, present only when positive.
    pub delta: Option<f64>,
    pub delta_prime_raw: f64,
    /// `Δ′`, present only when positive.
    pub delta_prime: Option<f64>,
    pub kappa2_feasible: bool,
    pub b0_bound: f64,
    pub b_below_b0: bool,
}

/// `a_d = d 2^{d−1}`, the number of bonds in a `2 × ... × 2` block.
pub fn a_d(d: usize) -> usize {
    d << (d - 1)
}

pub fn entropy_bound_constants(
    d: usize,
    b: f64,
    b_prime: f64,
    t: f64,
    profile: &EntropyProfile,
) -> Result<EntropyBounds> {
    entropy_bound_constants_from_value(d, b, b_prime, t, profile.a_p(t))
}

/// As [`entropy_bound_constants`] with `A_p(t)` supplied directly.
pub fn entropy_bound_constants_from_value(
    d: usize,
    b: f64,
    b_prime: f64,
    t: f64,
    a_p_t: f64,
) -> Result<EntropyBounds> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    for (name, v) in [("b", b), ("b'", b_prime)] {
        if !(v > 0.0 && v < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "{name} = {v} must lie in (0, 1/2)"
            )));
        }
    }
    if !(a_p_t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "A_p(t) = {a_p_t} must be positive"
        )));
    }
    let ad = a_d(d);
    let a = ad as f64;
    let delta_raw = (1.0 + 1.0 / a - 1.0 / a_p_t).min(1.0 / a - b / a_p_t);
    let delta_prime_raw = 1.0 - (1.0 - b_prime / a) / a_p_t;
    let b0_bound = 1.0 / (1.0 + a);
    Ok(EntropyBounds {
        d,
        a_d: ad,
        b,
        b_prime,
        t,
        a_p_t,
        delta_raw,
        delta: (delta_raw > 0.0).then_some(delta_raw),
        delta_prime_raw,
        delta_prime: (delta_prime_raw > 0.0).then_some(delta_prime_raw),
        kappa2_feasible: (1.0 - (1.0 - b) / a) / a_p_t <= 1.0,
        b0_bound,
        b_below_b0: b < b0_bound,
    })
}

/// Bond and site disorder fractions of a pattern on the `2 × ... × 2`
/// block. `disordered[i]` refers to the `i`-th in-block bond in the order of
/// [`TorusGeometry::block_bonds_local`]. Returns `(f_b, f_s)`.
pub fn bond_pattern_fractions(d: usize, disordered: &[bool]) -> Result<(f64, f64)> {
    let geom = crate::torus::build_torus(d, 2, 2)?;
    let bonds = geom.block_bonds_local();
    if disordered.len() != bonds.len() {
        return Err(Error::DimensionMismatch {
            expected: bonds.len(),
            got: disordered.len(),
        });
    }
    let f_b = disordered.iter().filter(|&&x| x).count() as f64 / bonds.len() as f64;
    let vol = geom.block_volume();
    let mut all_disordered = vec![true; vol];
    for ((u, v, _), &dis) in bonds.iter().zip(disordered) {
        if !dis {
            all_disordered[*u] = false;
            all_disordered[*v] = false;
        }
    }
    let f_s = all_disordered.iter().filter(|&&x| x).count() as f64 / vol as f64;
    Ok((f_b, f_s))
}

/// Exhaustive check of `f_b ≥ f_s + 1/a_d` over all mixed bond patterns.
/// Returns `(patterns checked, smallest margin f_b − f_s − 1/a_d)`.
pub fn bond_pattern_check(d: usize) -> Result<(usize, f64)> {
    let n = a_d(d);
    if n > 24 {
        return Err(Error::InvalidArgument(format!(
            "2^{n} patterns is too many"
        )));
    }
    let mut checked = 0;
    let mut margin = f64::INFINITY;
    for mask in 1u32..((1u32 << n) - 1) {
        let pattern: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        let (f_b, f_s) = bond_pattern_fractions(d, &pattern)?;
        margin = margin.min(f_b - f_s - 1.0 / n as f64);
        checked += 1;
    }
    Ok((checked, margin))
}
