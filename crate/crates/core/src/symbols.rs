//! Sphere quadrature, lower and upper symbols, Berezin quantization, and
//! the per-site gap between quantum symbols and the classical Hamiltonian.
//!
//! Upper symbols are expanded in spherical harmonics `Y_lm` with `l ≤ 2S`.
//! The quantized harmonics `Q_lm = (2S+1)/(4π) ∫ Y_lm(Ω) |Ω⟩⟨Ω| dΩ` are
//! proportional to spherical tensor operators, hence mutually orthogonal in
//! the Hilbert-Schmidt inner product and a basis of all operators on
//! `C^{2S+1}`. Dividing the expansion coefficients of an operator in this
//! basis by `‖Q_lm‖²` yields its minimal-degree upper symbol.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, gauss_legendre, hs_inner, CMat, CVec, C64};
use crate::models::{classical_energy, local_terms, onetwenty_vector, Frame, ModelKind, ModelSpec};
use crate::su2kit::{
    coherent_vector, normalized, random_unit, ClassicalConfig, SphericalPoint, SpinMagnitude, Vec3,
};

/// Product quadrature on the unit sphere.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub degree: usize,
    pub nodes: Vec<SphericalPoint>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre in `cos θ` times a uniform grid in `φ`, exact for
/// spherical polynomials of total degree at most `degree`.
pub fn sphere_quadrature(degree: usize) -> SphereQuadrature {
    let n_theta = degree / 2 + 1;
    let n_phi = degree + 1;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    let dphi = 2.0 * PI / n_phi as f64;
    for (x, w) in gauss_legendre(n_theta) {
        let theta = x.clamp(-1.0, 1.0).acos();
        for k in 0..n_phi {
            nodes.push(SphericalPoint::new(theta, k as f64 * dphi));
            weights.push(w * dphi);
        }
    }
    SphereQuadrature {
        degree,
        nodes,
        weights,
    }
}

impl SphereQuadrature {
    pub fn integrate(&self, f: impl Fn(&SphericalPoint) -> C64) -> C64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| f(p) * *w)
            .sum()
    }
}

/// Index of `Y_lm` in flattened coefficient vectors.
pub fn lm_index(l: usize, m: i64) -> usize {
    l * l + (l as i64 + m) as usize
}

/// All `Y_lm(θ, φ)` for `l ≤ l_max`, orthonormal on the sphere with the
/// Condon-Shortley phase, flattened by [`lm_index`].
pub fn spherical_harmonics(l_max: usize, p: &SphericalPoint) -> Vec<C64> {
    let x = p.theta.cos();
    let sx = p.theta.sin();
    let n = l_max + 1;
    // Normalized associated Legendre values p[l][m] for m ≥ 0.
    let mut plm = vec![vec![0.0; n]; n];
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..n {
        if m > 0 {
            pmm *= -sx * ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        plm[m][m] = pmm;
        if m + 1 < n {
            plm[m + 1][m] = ((2 * m + 3) as f64).sqrt() * x * pmm;
        }
        for l in (m + 2)..n {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            plm[l][m] = a * (x * plm[l - 1][m] - b * plm[l - 2][m]);
        }
    }
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for l in 0..n {
        for m in 0..=l {
            let y = C64::from_polar(plm[l][m], m as f64 * p.phi);
            out[lm_index(l, m as i64)] = y;
            if m > 0 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                out[lm_index(l, -(m as i64))] = y.conj() * sign;
            }
        }
    }
    out
}

/// A finite spherical-harmonic expansion `Σ a_lm Y_lm`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolExpansion {
    pub l_max: usize,
    pub coefficients: Vec<C64>,
}

impl SymbolExpansion {
    pub fn zero(l_max: usize) -> Self {
        Self {
            l_max,
            coefficients: vec![C64::new(0.0, 0.0); (l_max + 1) * (l_max + 1)],
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            l_max: 0,
            coefficients: vec![c(value * (4.0 * PI).sqrt())],
        }
    }

    /// `coef · Y_lm`.
    pub fn single(l: usize, m: i64, coef: C64) -> Self {
        let mut out = Self::zero(l);
        out.coefficients[lm_index(l, m)] = coef;
        out
    }

    /// `cos θ = sqrt(4π/3) Y_10`.
    pub fn cos_theta() -> Self {
        Self::single(1, 0, c((4.0 * PI / 3.0).sqrt()))
    }

    pub fn evaluate(&self, p: &SphericalPoint) -> C64 {
        let y = spherical_harmonics(self.l_max, p);
        self.coefficients.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        let l_max = self.l_max.max(other.l_max);
        let mut out = Self::zero(l_max);
        for (i, v) in self.coefficients.iter().enumerate() {
            out.coefficients[i] += v;
        }
        for (i, v) in other.coefficients.iter().enumerate() {
            out.coefficients[i] += v;
        }
        out
    }

    /// Largest degree carrying a coefficient above `tol`.
    pub fn effective_degree(&self, tol: f64) -> usize {
        (0..=self.l_max)
            .rev()
            .find(|&l| {
                (-(l as i64)..=l as i64).any(|m| self.coefficients[lm_index(l, m)].norm() > tol)
            })
            .unwrap_or(0)
    }
}

/// Default quadrature degree for a spin.
pub fn default_degree(spin: SpinMagnitude) -> usize {
    2 * spin.two_s() as usize + 8
}

/// `(2S+1)/(4π) Σ_i w_i f(Ω_i) |Ω_i⟩⟨Ω_i|` on a given rule.
pub fn quantize_with(
    f: impl Fn(&SphericalPoint) -> C64,
    spin: SpinMagnitude,
    quad: &SphereQuadrature,
) -> CMat {
    let d = spin.dim();
    let pref = d as f64 / (4.0 * PI);
    let mut out = CMat::zeros(d, d);
    for (p, w) in quad.nodes.iter().zip(&quad.weights) {
        let v = coherent_vector(spin, *p).amplitudes;
        let fw = f(p) * (w * pref);
        out += (&v * v.adjoint()) * fw;
    }
    out
}

/// Berezin quantization of a symbol expansion.
pub fn quantize(f: &SymbolExpansion, spin: SpinMagnitude) -> CMat {
    let quad = sphere_quadrature(spin.two_s() as usize + f.l_max + 2);
    quantize_with(|p| f.evaluate(p), spin, &quad)
}

/// The operators `Q_lm` for `l ≤ 2S` and their squared Hilbert-Schmidt norms.
#[derive(Debug, Clone)]
pub struct QuantizationBasis {
    pub spin: SpinMagnitude,
    pub ops: Vec<CMat>,
    pub norms_sq: Vec<f64>,
}

impl QuantizationBasis {
    pub fn new(spin: SpinMagnitude) -> Self {
        let l_max = spin.two_s() as usize;
        let d = spin.dim();
        let quad = sphere_quadrature(2 * l_max + 2);
        let pref = d as f64 / (4.0 * PI);
        let count = (l_max + 1) * (l_max + 1);
        let mut ops = vec![CMat::zeros(d, d); count];
        for (p, w) in quad.nodes.iter().zip(&quad.weights) {
            let v = coherent_vector(spin, *p).amplitudes;
            let proj = &v * v.adjoint();
            for (op, y) in ops.iter_mut().zip(spherical_harmonics(l_max, p)) {
                *op += &proj * (y * (w * pref));
            }
        }
        let norms_sq = ops.iter().map(|q| hs_inner(q, q).re).collect();
        Self {
            spin,
            ops,
            norms_sq,
        }
    }

    pub fn l_max(&self) -> usize {
        self.spin.two_s() as usize
    }

    /// Matrix whose column `a` is `Q_a` flattened row-major (`i·d + j`).
    fn flattened(&self) -> CMat {
        let d = self.spin.dim();
        CMat::from_fn(d * d, self.ops.len(), |ij, a| self.ops[a][(ij / d, ij % d)])
    }
}

/// Minimal-degree upper symbol of a single-site operator.
pub fn upper_symbol(a: &CMat, spin: SpinMagnitude) -> Result<SymbolExpansion> {
    upper_symbol_with(a, &QuantizationBasis::new(spin))
}

pub fn upper_symbol_with(a: &CMat, basis: &QuantizationBasis) -> Result<SymbolExpansion> {
    let d = basis.spin.dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.nrows(),
        });
    }
    let coefficients = basis
        .ops
        .iter()
        .zip(&basis.norms_sq)
        .map(|(q, n)| hs_inner(q, a) / *n)
        .collect();
    Ok(SymbolExpansion {
        l_max: basis.l_max(),
        coefficients,
    })
}

/// Lower symbol `⟨Ω|A|Ω⟩` for the product coherent state over `points`.
pub fn lower_symbol(a: &CMat, points: &[SphericalPoint], spin: SpinMagnitude) -> Result<C64> {
    let vs: Vec<CVec> = points
        .iter()
        .map(|p| coherent_vector(spin, *p).amplitudes)
        .collect();
    let psi = crate::linalg::product_state(&vs);
    if a.nrows() != psi.len() || a.ncols() != psi.len() {
        return Err(Error::DimensionMismatch {
            expected: psi.len(),
            got: a.nrows(),
        });
    }
    Ok(psi.dotc(&(a * &psi)))
}

/// Product-rule upper symbol of a two-site operator:
/// `[h](Ω, Ω′) = Σ_{a,b} C_ab Y_a(Ω) Y_b(Ω′)` with `h = Σ C_ab Q_a ⊗ Q_b`.
#[derive(Debug, Clone)]
pub struct TwoSiteSymbol {
    pub l_max: usize,
    pub coefficients: CMat,
}

impl TwoSiteSymbol {
    pub fn new(h: &CMat, basis: &QuantizationBasis) -> Result<Self> {
        let d = basis.spin.dim();
        if h.nrows() != d * d || h.ncols() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: h.nrows(),
            });
        }
        // Reorder h[(i d + k), (j d + l)] into R[(i d + j), (k d + l)] so that
        // Tr((Q_a ⊗ Q_b)† h) becomes a bilinear form in flattened Q's.
        let r = CMat::from_fn(d * d, d * d, |ij, kl| {
            h[((ij / d) * d + kl / d, (ij % d) * d + kl % d)]
        });
        let v = basis.flattened();
        let mut coefficients = v.adjoint() * r * v.map(|z| z.conj());
        let n = basis.ops.len();
        for a in 0..n {
            for b in 0..n {
                coefficients[(a, b)] /= basis.norms_sq[a] * basis.norms_sq[b];
            }
        }
        Ok(Self {
            l_max: basis.l_max(),
            coefficients,
        })
    }

    pub fn evaluate(&self, a: &SphericalPoint, b: &SphericalPoint) -> C64 {
        let ya = CVec::from_vec(spherical_harmonics(self.l_max, a));
        let yb = CVec::from_vec(spherical_harmonics(self.l_max, b));
        ya.transpose().dot(&(&self.coefficients * yb).transpose())
    }
}

/// Precomputed lower and upper symbols of a model's bond operators.
#[derive(Debug, Clone)]
pub struct HamiltonianSymbols {
    pub spec: ModelSpec,
    pub frame: Frame,
    terms: Vec<(usize, usize, usize)>,
    ops: Vec<Arc<CMat>>,
    uppers: Vec<TwoSiteSymbol>,
}

impl HamiltonianSymbols {
    pub fn new(spec: &ModelSpec, frame: Frame) -> Result<Self> {
        let basis = QuantizationBasis::new(spec.spin);
        let mut by_ptr: HashMap<*const CMat, usize> = HashMap::new();
        let mut ops = Vec::new();
        let mut uppers = Vec::new();
        let mut terms = Vec::new();
        for t in local_terms(spec, frame) {
            let key = Arc::as_ptr(&t.op);
            let idx = match by_ptr.get(&key) {
                Some(&i) => i,
                None => {
                    uppers.push(TwoSiteSymbol::new(&t.op, &basis)?);
                    ops.push(Arc::clone(&t.op));
                    by_ptr.insert(key, ops.len() - 1);
                    ops.len() - 1
                }
            };
            terms.push((t.sites[0], t.sites[1], idx));
        }
        Ok(Self {
            spec: spec.clone(),
            frame,
            terms,
            ops,
            uppers,
        })
    }

    /// `(⟨h⟩_Ω, [h]_Ω)` for one bond operator.
    fn bond_pair(&self, idx: usize, a: &SphericalPoint, b: &SphericalPoint) -> (f64, f64) {
        let va = coherent_vector(self.spec.spin, *a).amplitudes;
        let vb = coherent_vector(self.spec.spin, *b).amplitudes;
        let psi = va.kronecker(&vb);
        let lower = psi.dotc(&(&*self.ops[idx] * &psi)).re;
        (lower, self.uppers[idx].evaluate(a, b).re)
    }

    /// `(⟨H⟩_Ω, [H]_Ω)` for a configuration.
    pub fn evaluate(&self, config: &ClassicalConfig) -> Result<(f64, f64)> {
        if config.len() != self.spec.n_sites() {
            return Err(Error::SiteMismatch {
                left: config.len(),
                right: self.spec.n_sites(),
            });
        }
        let pts = config.points();
        Ok(self.terms.iter().fold((0.0, 0.0), |acc, &(a, b, idx)| {
            let (lo, up) = self.bond_pair(idx, &pts[a], &pts[b]);
            (acc.0 + lo, acc.1 + up)
        }))
    }
}

/// `(lower, upper)` symbols of the model Hamiltonian at `config`, in the
/// reflection-positive frame.
pub fn hamiltonian_symbols(spec: &ModelSpec, config: &ClassicalConfig) -> Result<(f64, f64)> {
    HamiltonianSymbols::new(spec, Frame::Rp)?.evaluate(config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolGap {
    /// Per-site gap constant: sum over bonds of the sampled per-bond
    /// suprema, divided by the number of sites.
    pub xi: f64,
    /// Sampled `sup |[H]_Ω − H^∞(Ω)| / |Λ|` over whole configurations.
    pub upper_config_sup: f64,
    /// Sampled `sup |⟨H⟩_Ω − H^∞(Ω)| / |Λ|` over whole configurations.
    pub lower_config_sup: f64,
    pub kind: ModelKind,
    pub two_s: u32,
    pub samples: usize,
}

fn candidate_directions() -> Vec<Vec3> {
    let mut out = Vec::new();
    for k in 0..3 {
        for s in [1.0, -1.0] {
            let mut v = [0.0; 3];
            v[k] = s;
            out.push(v);
        }
    }
    for k in 1..=6 {
        out.push(onetwenty_vector(k));
    }
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                out.push(normalized(&[sx, sy, sz]));
            }
        }
    }
    out
}

/// Sampled estimate of the symbol gap constant `ξ` in the reflection-positive frame.
pub fn estimate_xi(spec: &ModelSpec, samples: usize, seed: u64) -> Result<SymbolGap> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let sym = HamiltonianSymbols::new(spec, Frame::Rp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_sites() as f64;
    let cands = candidate_directions();

    // Per-bond suprema over pairs of directions.
    let mut bond_sup = vec![0.0f64; sym.ops.len()];
    let mut dir_of = vec![0usize; sym.ops.len()];
    for t in local_terms(spec, Frame::Rp) {
        let idx = sym
            .terms
            .iter()
            .position(|x| (x.0, x.1) == (t.sites[0], t.sites[1]))
            .map(|i| sym.terms[i].2)
            .unwrap_or(0);
        dir_of[idx] = t.dir;
    }
    let check_pair = |a: &Vec3, b: &Vec3, bond_sup: &mut Vec<f64>| {
        let (pa, pb) = (
            SphericalPoint::from_cartesian(a),
            SphericalPoint::from_cartesian(b),
        );
        for (idx, sup) in bond_sup.iter_mut().enumerate() {
            let (lo, up) = sym.bond_pair(idx, &pa, &pb);
            let cl = spec.bond_energy(a, b, dir_of[idx]);
            *sup = sup.max((up - cl).abs()).max((lo - cl).abs());
        }
    };
    for a in &cands {
        for b in &cands {
            check_pair(a, b, &mut bond_sup);
        }
    }
    for _ in 0..samples {
        let a = random_unit(&mut rng);
        let b = random_unit(&mut rng);
        check_pair(&a, &b, &mut bond_sup);
    }
    let xi = sym
        .terms
        .iter()
        .map(|&(_, _, idx)| bond_sup[idx])
        .sum::<f64>()
        / n;

    let mut upper_config_sup = 0.0f64;
    let mut lower_config_sup = 0.0f64;
    let mut consider = |cfg: &ClassicalConfig| -> Result<()> {
        let (lo, up) = sym.evaluate(cfg)?;
        let cl = classical_energy(spec, cfg);
        upper_config_sup = upper_config_sup.max((up - cl).abs() / n);
        lower_config_sup = lower_config_sup.max((lo - cl).abs() / n);
        Ok(())
    };
    for v in &cands {
        consider(&ClassicalConfig::uniform(spec.n_sites(), *v))?;
    }
    for _ in 0..samples {
        consider(&ClassicalConfig::random(spec.n_sites(), &mut rng))?;
    }
    Ok(SymbolGap {
        xi,
        upper_config_sup,
        lower_config_sup,
        kind: spec.kind,
        two_s: spec.spin.two_s(),
        samples,
    })
}
