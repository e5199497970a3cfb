//! Exact finite-volume quantum computations.
//!
//! Everything here works from one dense eigendecomposition per Hamiltonian.
//! Thermal weights are evaluated in the eigenbasis with the ground energy
//! factored out, so logarithms of partition functions and coherent matrix
//! elements stay finite at large `β`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, checked_dim, hermitian_eigen, CMat, CVec, HermitianEigen, C64};
use crate::models::{build_quantum_hamiltonian, Frame, ModelSpec, DIMENSION_CAP};
use crate::stats::{batch_means, linear_fit, DEFAULT_BATCHES};
use crate::su2kit::{
    coherent_vector, config_distances, mat_vec, normalized, product_coherent_state, random_unit,
    ClassicalConfig, SphericalPoint, SpinMagnitude, Vec3,
};
use crate::symbols::{sphere_quadrature, HamiltonianSymbols, SphereQuadrature};
use crate::torus::{BlockEvent, SiteRegion, TorusGeometry};

/// A diagonalized Hamiltonian at inverse temperature `β`.
#[derive(Debug, Clone)]
pub struct GibbsEnsemble {
    pub eigen: Arc<HermitianEigen>,
    pub beta: f64,
    pub spin: SpinMagnitude,
    pub n_sites: usize,
    /// `log Tr e^{−βH}`.
    pub log_z: f64,
}

/// Diagonalizes `h` on `n_sites` spins of magnitude `spin`.
pub fn gibbs(h: &CMat, beta: f64, spin: SpinMagnitude, n_sites: usize) -> Result<GibbsEnsemble> {
    let dim = checked_dim(spin.dim(), n_sites, DIMENSION_CAP)?;
    if h.nrows() != dim || h.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: h.nrows(),
        });
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must be non-negative, got {beta}"
        )));
    }
    Ok(GibbsEnsemble::from_eigen(
        Arc::new(hermitian_eigen(h)),
        beta,
        spin,
        n_sites,
    ))
}

/// Builds and diagonalizes a model Hamiltonian in the requested frame.
pub fn gibbs_for_model(spec: &ModelSpec, frame: Frame, beta: f64) -> Result<GibbsEnsemble> {
    let h = build_quantum_hamiltonian(spec, frame)?;
    gibbs(&h, beta, spec.spin, spec.n_sites())
}

impl GibbsEnsemble {
    pub fn from_eigen(
        eigen: Arc<HermitianEigen>,
        beta: f64,
        spin: SpinMagnitude,
        n_sites: usize,
    ) -> Self {
        let e0 = eigen.values[0];
        let log_z = -beta * e0
            + eigen
                .values
                .iter()
                .map(|e| (-beta * (e - e0)).exp())
                .sum::<f64>()
                .ln();
        Self {
            eigen,
            beta,
            spin,
            n_sites,
            log_z,
        }
    }

    /// The same Hamiltonian at another temperature, without rediagonalizing.
    pub fn at_beta(&self, beta: f64) -> Self {
        Self::from_eigen(Arc::clone(&self.eigen), beta, self.spin, self.n_sites)
    }

    pub fn dim(&self) -> usize {
        self.eigen.values.len()
    }

    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    /// Boltzmann weights `e^{−β(E_k − E_0)}`.
    fn shifted_weights(&self) -> Vec<f64> {
        let e0 = self.eigen.values[0];
        self.eigen
            .values
            .iter()
            .map(|e| (-self.beta * (e - e0)).exp())
            .collect()
    }

    /// The density matrix `e^{−βH}/Z`.
    pub fn density_matrix(&self) -> CMat {
        self.eigen.apply(|e| c((-self.beta * e - self.log_z).exp()))
    }

    /// Components of a state in the eigenbasis.
    pub fn eigen_components(&self, psi: &CVec) -> CVec {
        self.eigen.vectors.adjoint() * psi
    }

    fn check_config(&self, config: &ClassicalConfig) -> Result<()> {
        if config.len() != self.n_sites {
            return Err(Error::SiteMismatch {
                left: config.len(),
                right: self.n_sites,
            });
        }
        Ok(())
    }

    /// `⟨Ω|e^{−βH}|Ω′⟩` for product coherent states.
    pub fn matrix_element(
        &self,
        omega: &ClassicalConfig,
        omega_prime: &ClassicalConfig,
    ) -> Result<C64> {
        let (shifted, log_scale) = self.scaled_matrix_element(omega, omega_prime)?;
        Ok(shifted * log_scale.exp())
    }

    /// `log |⟨Ω|e^{−βH}|Ω′⟩|`, evaluated without overflow.
    pub fn log_abs_matrix_element(
        &self,
        omega: &ClassicalConfig,
        omega_prime: &ClassicalConfig,
    ) -> Result<f64> {
        let (shifted, log_scale) = self.scaled_matrix_element(omega, omega_prime)?;
        Ok(shifted.norm().ln() + log_scale)
    }

    fn scaled_matrix_element(
        &self,
        omega: &ClassicalConfig,
        omega_prime: &ClassicalConfig,
    ) -> Result<(C64, f64)> {
        self.check_config(omega)?;
        self.check_config(omega_prime)?;
        let a = self.eigen_components(&product_coherent_state(self.spin, omega));
        let b = self.eigen_components(&product_coherent_state(self.spin, omega_prime));
        let w = self.shifted_weights();
        let s: C64 = a
            .iter()
            .zip(b.iter())
            .zip(&w)
            .map(|((x, y), wk)| x.conj() * y * *wk)
            .sum();
        Ok((s, -self.beta * self.eigen.values[0]))
    }

    /// `⟨Ω|ρ|Ω⟩` with `ρ = e^{−βH}/Z`, from precomputed eigen components.
    fn diagonal_density(&self, components: &CVec, weights: &[f64]) -> f64 {
        let e0 = self.eigen.values[0];
        let s: f64 = components
            .iter()
            .zip(weights)
            .map(|(x, w)| x.norm_sqr() * w)
            .sum();
        s * (-self.beta * e0 - self.log_z).exp()
    }
}

/// `⟨A⟩ = Tr(e^{−βH} A)/Tr(e^{−βH})`.
pub fn expectation(ens: &GibbsEnsemble, a: &CMat) -> Result<C64> {
    if a.nrows() != ens.dim() || a.ncols() != ens.dim() {
        return Err(Error::DimensionMismatch {
            expected: ens.dim(),
            got: a.nrows(),
        });
    }
    let v = &ens.eigen.vectors;
    let w = ens.shifted_weights();
    let total: f64 = w.iter().sum();
    let mut acc = C64::new(0.0, 0.0);
    for (k, wk) in w.iter().enumerate() {
        let col = v.column(k);
        acc += col.dotc(&(a * col)) * *wk;
    }
    Ok(acc / total)
}

/// Both sides of the diagonal coherent-state sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub log_diagonal: f64,
    pub lower_symbol: f64,
    pub upper_symbol: f64,
    /// `log⟨Ω|e^{−βH}|Ω⟩ + β⟨H⟩_Ω`, which is never negative.
    pub lower_slack: f64,
    /// `(log⟨Ω|e^{−βH}|Ω⟩ + β[H]_Ω)/(β|Λ|)`; zero at `β = 0`.
    pub kappa: f64,
}

pub fn sandwich_check(
    ens: &GibbsEnsemble,
    symbols: &HamiltonianSymbols,
    omega: &ClassicalConfig,
) -> Result<SandwichReport> {
    let log_diagonal = ens.log_abs_matrix_element(omega, omega)?;
    let (lower_symbol, upper_symbol) = symbols.evaluate(omega)?;
    let lower_slack = log_diagonal + ens.beta * lower_symbol;
    let kappa = if ens.beta > 0.0 {
        (log_diagonal + ens.beta * upper_symbol) / (ens.beta * ens.n_sites as f64)
    } else {
        0.0
    };
    Ok(SandwichReport {
        log_diagonal,
        lower_symbol,
        upper_symbol,
        lower_slack,
        kappa,
    })
}

/// `log|⟨Ω|e^{−βH}|Ω′⟩| + β[H]_Ω + η d(Ω, Ω′)` with the mixed distance.
pub fn full_bound_check(
    ens: &GibbsEnsemble,
    symbols: &HamiltonianSymbols,
    omega: &ClassicalConfig,
    omega_prime: &ClassicalConfig,
) -> Result<f64> {
    let log_el = ens.log_abs_matrix_element(omega, omega_prime)?;
    let (_, upper) = symbols.evaluate(omega)?;
    let dist = config_distances(ens.spin, omega, omega_prime)?;
    Ok(log_el + ens.beta * upper + dist.eta * dist.mixed)
}

/// Maximal diagonal excess `κ` per spin magnitude and its power-law fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionFit {
    pub spins: Vec<f64>,
    pub kappa: Vec<f64>,
    pub beta: f64,
    /// Least-squares slope of `log κ` against `log S`.
    pub exponent: f64,
    pub residual: f64,
    /// Smallest `c₃` with `κ(S) ≤ c₃/√S` on the sweep.
    pub c3: f64,
}

/// Directions used as deterministic probe configurations.
pub fn probe_directions() -> Vec<Vec3> {
    let mut out = Vec::new();
    for k in 0..3 {
        for s in [1.0, -1.0] {
            let mut v = [0.0; 3];
            v[k] = s;
            out.push(v);
        }
    }
    for (a, b) in [(0, 2), (0, 1), (1, 2)] {
        for s in [1.0, -1.0] {
            let mut v = [0.0; 3];
            v[a] = 1.0;
            v[b] = s;
            out.push(normalized(&v));
        }
    }
    out
}

/// Probe configurations: uniform directions, staggered pairs of them, and
/// random configurations drawn from a fixed seed.
pub fn probe_configs(n_sites: usize, random: usize, seed: u64) -> Vec<ClassicalConfig> {
    let dirs = probe_directions();
    let mut out: Vec<ClassicalConfig> = dirs
        .iter()
        .map(|v| ClassicalConfig::uniform(n_sites, *v))
        .collect();
    for a in &dirs {
        for b in &dirs {
            out.push(ClassicalConfig::new(
                (0..n_sites)
                    .map(|r| if r % 2 == 0 { *a } else { *b })
                    .collect(),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.extend((0..random).map(|_| ClassicalConfig::random(n_sites, &mut rng)));
    out
}

/// Largest diagonal excess `κ` over the probe configurations.
pub fn max_kappa(spec: &ModelSpec, beta: f64, random: usize, seed: u64) -> Result<f64> {
    let ens = gibbs_for_model(spec, Frame::Rp, beta)?;
    let symbols = HamiltonianSymbols::new(spec, Frame::Rp)?;
    let mut best = f64::NEG_INFINITY;
    for cfg in probe_configs(spec.n_sites(), random, seed) {
        best = best.max(sandwich_check(&ens, &symbols, &cfg)?.kappa);
    }
    Ok(best)
}

/// Sweeps `S`, records the maximal `κ`, and fits `κ ∝ S^exponent`.
pub fn kappa_fit(
    spec: &ModelSpec,
    spins: &[SpinMagnitude],
    beta: f64,
    random: usize,
    seed: u64,
) -> Result<CorrectionFit> {
    if beta <= 0.0 {
        return Err(Error::InvalidArgument("kappa fit needs beta > 0".into()));
    }
    let kappa = spins
        .par_iter()
        .map(|&s| max_kappa(&spec.with_spin(s), beta, random, seed))
        .collect::<Result<Vec<f64>>>()?;
    let s_values: Vec<f64> = spins.iter().map(|s| s.s()).collect();
    if kappa.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::Extrapolation(format!(
            "non-positive excess in sweep: {kappa:?}"
        )));
    }
    let lx: Vec<f64> = s_values.iter().map(|s| s.ln()).collect();
    let ly: Vec<f64> = kappa.iter().map(|k| k.ln()).collect();
    let fit = linear_fit(&lx, &ly);
    let c3 = s_values
        .iter()
        .zip(&kappa)
        .map(|(s, k)| k * s.sqrt())
        .fold(0.0, f64::max);
    Ok(CorrectionFit {
        spins: s_values,
        kappa,
        beta,
        exponent: fit.slope,
        residual: fit.rms,
        c3,
    })
}

/// Normalized Berezin–Lieb triple:
/// `∫ e^{−β⟨H⟩} ≤ Tr e^{−βH}/(2S+1)^N ≤ ∫ e^{−β[H]}` with `∫` the uniform
/// probability measure on `(S²)^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerezinLiebReport {
    pub beta: f64,
    pub classical_lower: f64,
    pub quantum_mid: f64,
    pub classical_upper: f64,
}

impl BerezinLiebReport {
    pub fn lower_slack(&self) -> f64 {
        self.quantum_mid - self.classical_lower
    }

    pub fn upper_slack(&self) -> f64 {
        self.classical_upper - self.quantum_mid
    }
}

/// Single-spin Berezin–Lieb triple for an arbitrary operator.
pub fn berezin_lieb_single(
    h: &CMat,
    spin: SpinMagnitude,
    beta: f64,
    degree: usize,
) -> Result<BerezinLiebReport> {
    let upper = crate::symbols::upper_symbol(h, spin)?;
    let ens = gibbs(h, beta, spin, 1)?;
    let quad = sphere_quadrature(degree);
    let mut lo = 0.0;
    let mut up = 0.0;
    for (p, w) in quad.nodes.iter().zip(&quad.weights) {
        let v = coherent_vector(spin, *p).amplitudes;
        let l = v.dotc(&(h * &v)).re;
        lo += w * (-beta * l).exp();
        up += w * (-beta * upper.evaluate(p).re).exp();
    }
    Ok(BerezinLiebReport {
        beta,
        classical_lower: lo / (4.0 * PI),
        quantum_mid: (ens.log_z - (spin.dim() as f64).ln()).exp(),
        classical_upper: up / (4.0 * PI),
    })
}

/// Berezin–Lieb triple for a two-site model, by product quadrature.
pub fn berezin_lieb_check(spec: &ModelSpec, beta: f64, degree: usize) -> Result<BerezinLiebReport> {
    if spec.n_sites() != 2 {
        return Err(Error::InvalidArgument(format!(
            "quadrature check supports two sites, got {}",
            spec.n_sites()
        )));
    }
    let symbols = HamiltonianSymbols::new(spec, Frame::Rp)?;
    let ens = gibbs_for_model(spec, Frame::Rp, beta)?;
    let quad = sphere_quadrature(degree);
    let n = quad.nodes.len();
    let (lo, up) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = (0.0, 0.0);
            for j in 0..n {
                let cfg = ClassicalConfig::from_points(&[quad.nodes[i], quad.nodes[j]]);
                let (l, u) = symbols.evaluate(&cfg).expect("two sites");
                let w = quad.weights[i] * quad.weights[j];
                acc.0 += w * (-beta * l).exp();
                acc.1 += w * (-beta * u).exp();
            }
            acc
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let norm = (4.0 * PI).powi(2);
    Ok(BerezinLiebReport {
        beta,
        classical_lower: lo / norm,
        quantum_mid: (ens.log_z - 2.0 * (spec.spin.dim() as f64).ln()).exp(),
        classical_upper: up / norm,
    })
}

/// Monte Carlo estimate of `Q̂_A = ((2S+1)/4π)^N ∫_A |Ω⟩⟨Ω| dΩ`.
#[derive(Debug, Clone)]
pub struct QHatEstimate {
    pub operator: CMat,
    /// Batch-means standard error of each entry (real and imaginary parts combined).
    pub radius: nalgebra::DMatrix<f64>,
    pub samples: usize,
    pub accepted: usize,
    pub tag: String,
}

impl QHatEstimate {
    /// Largest entry of `|Q̂ − target| / σ`, with entries of zero error
    /// compared against `abs_floor`.
    pub fn max_sigma_deviation(&self, target: &CMat, abs_floor: f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.operator.nrows() {
            for j in 0..self.operator.ncols() {
                let diff = (self.operator[(i, j)] - target[(i, j)]).norm();
                let sigma = self.radius[(i, j)].max(abs_floor);
                worst = worst.max(diff / sigma);
            }
        }
        worst
    }
}

/// Samples uniform configurations on `n_sites` spins and accumulates the
/// coherent projectors of those inside `event`.
pub fn q_hat(
    spin: SpinMagnitude,
    n_sites: usize,
    event: &(dyn Fn(&ClassicalConfig) -> bool + Sync),
    tag: &str,
    samples: usize,
    seed: u64,
) -> Result<QHatEstimate> {
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "q_hat needs at least 1000 samples, got {samples}"
        )));
    }
    let dim = checked_dim(spin.dim(), n_sites, DIMENSION_CAP)?;
    let batches = DEFAULT_BATCHES;
    let per_batch = samples / batches;
    let scale = dim as f64;
    let results: Vec<(CMat, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64 + 1);
            let mut acc = CMat::zeros(dim, dim);
            let mut hits = 0;
            for _ in 0..per_batch {
                let cfg = ClassicalConfig::random(n_sites, &mut rng);
                if event(&cfg) {
                    hits += 1;
                    let psi = product_coherent_state(spin, &cfg);
                    acc += &psi * psi.adjoint();
                }
            }
            (acc * c(scale / per_batch as f64), hits)
        })
        .collect();
    let accepted: usize = results.iter().map(|r| r.1).sum();
    if accepted == 0 {
        return Err(Error::ZeroMeasure {
            samples: per_batch * batches,
        });
    }
    let k = batches as f64;
    let mean = results.iter().fold(CMat::zeros(dim, dim), |a, r| a + &r.0) * c(1.0 / k);
    let radius = nalgebra::DMatrix::from_fn(dim, dim, |i, j| {
        let var: f64 = results
            .iter()
            .map(|r| (r.0[(i, j)] - mean[(i, j)]).norm_sqr())
            .sum::<f64>()
            / (k - 1.0);
        (var / k).sqrt()
    });
    Ok(QHatEstimate {
        operator: mean,
        radius,
        samples: per_batch * batches,
        accepted,
        tag: tag.to_string(),
    })
}

/// Exact single-site `Q̂` of a region, by quadrature in the region's own frame.
pub fn region_operator(region: &SiteRegion, spin: SpinMagnitude) -> CMat {
    let d = spin.dim();
    let n_u = spin.two_s() as usize + 2;
    let n_phi = 2 * spin.two_s() as usize + 2;
    let cap = |axis: &Vec3, lo: f64, hi: f64| -> CMat {
        // Orthonormal frame (e1, e2, axis).
        let a = normalized(axis);
        let helper = if a[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let e1 = normalized(&crate::su2kit::cross(&helper, &a));
        let e2 = crate::su2kit::cross(&a, &e1);
        let frame = [
            [e1[0], e2[0], a[0]],
            [e1[1], e2[1], a[1]],
            [e1[2], e2[2], a[2]],
        ];
        let mut out = CMat::zeros(d, d);
        for (u, wu) in crate::linalg::gauss_legendre_on(n_u, lo, hi) {
            let st = (1.0 - u * u).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = 2.0 * PI * k as f64 / n_phi as f64;
                let local = [st * phi.cos(), st * phi.sin(), u];
                let p = SphericalPoint::from_cartesian(&mat_vec(&frame, &local));
                let v = coherent_vector(spin, p).amplitudes;
                out += (&v * v.adjoint()) * c(wu * 2.0 * PI / n_phi as f64);
            }
        }
        out * c(d as f64 / (4.0 * PI))
    };
    match region {
        SiteRegion::Full => CMat::identity(d, d),
        SiteRegion::Cap { axis, cos_min } => {
            let lo = cos_min.clamp(-1.0, 1.0);
            cap(axis, lo, 1.0)
        }
        SiteRegion::DoubleCap { axis, cos_min } => {
            if *cos_min <= 0.0 {
                CMat::identity(d, d)
            } else {
                let lo = cos_min.min(1.0);
                cap(axis, lo, 1.0) + cap(axis, -1.0, -lo)
            }
        }
    }
}

/// Outcome of a chessboard comparison `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChessboardReport {
    pub lhs: f64,
    pub lhs_sigma: f64,
    pub rhs: f64,
    pub rhs_sigma: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    /// Combined one-sigma error of the margin.
    pub sigma: f64,
}

impl ChessboardReport {
    pub fn holds_within(&self, n_sigma: f64) -> bool {
        self.margin >= -n_sigma * self.sigma - 1e-12
    }
}

/// Batch-means estimate of `Tr(ρ Q̂_A)` by uniform sampling. Each batch
/// uses the self-normalized ratio `Σ 1_A f / Σ f` with `f = ⟨Ω|ρ|Ω⟩`,
/// whose exact mean `Σ f / n → 1` is known; the full event gives exactly one.
pub fn q_hat_expectation(
    ens: &GibbsEnsemble,
    event: &(dyn Fn(&ClassicalConfig) -> bool + Sync),
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let batches = DEFAULT_BATCHES;
    let per_batch = (samples / batches).max(1);
    let weights = ens.shifted_weights();
    let ratios: Vec<f64> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64 + 1);
            let (mut hit, mut all) = (0.0, 0.0);
            for _ in 0..per_batch {
                let cfg = ClassicalConfig::random(ens.n_sites, &mut rng);
                let comps = ens.eigen_components(&product_coherent_state(ens.spin, &cfg));
                let f = ens.diagonal_density(&comps, &weights);
                all += f;
                if event(&cfg) {
                    hit += f;
                }
            }
            hit / all
        })
        .collect();
    let bm = batch_means(&ratios, batches);
    Ok((bm.mean, bm.std_error))
}

/// Quantum chessboard estimate for block events placed at distinct blocks:
/// `⟨Π_j Q̂(ϑ_{t_j} A_j)⟩ ≤ Π_j ⟨Q̂(∩_t ϑ_t A_j)⟩^{(B/L)^d}`.
pub fn chessboard_check_quantum(
    ens: &GibbsEnsemble,
    geom: &TorusGeometry,
    events: &[(Vec<usize>, BlockEvent)],
    samples: usize,
    seed: u64,
) -> Result<ChessboardReport> {
    if ens.n_sites != geom.n_sites() {
        return Err(Error::SiteMismatch {
            left: ens.n_sites,
            right: geom.n_sites(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for (t, _) in events {
        if t.len() != geom.d || !seen.insert(geom.block_index(t)) {
            return Err(Error::InvalidArgument(
                "events must sit at distinct blocks of the factor torus".into(),
            ));
        }
    }
    let joint = |cfg: &ClassicalConfig| {
        events
            .iter()
            .all(|(t, a)| a.contains_reflected(geom, t, cfg))
    };
    let (lhs, lhs_sigma) = q_hat_expectation(ens, &joint, samples, seed)?;
    let alpha = 1.0 / geom.n_blocks() as f64;
    let mut rhs = 1.0;
    let mut rel_sq = 0.0;
    for (j, (_, a)) in events.iter().enumerate() {
        let dis = |cfg: &ClassicalConfig| a.contains_disseminated(geom, cfg);
        let (p, s) = q_hat_expectation(ens, &dis, samples, seed.wrapping_add(1000 + j as u64))?;
        rhs *= p.max(0.0).powf(alpha);
        if p > 0.0 {
            rel_sq += (alpha * s / p).powi(2);
        }
    }
    let rhs_sigma = rhs * rel_sq.sqrt();
    Ok(ChessboardReport {
        lhs,
        lhs_sigma,
        rhs,
        rhs_sigma,
        margin: rhs - lhs,
        sigma: lhs_sigma.hypot(rhs_sigma),
    })
}

/// A random polar cap with its opening drawn from `[cos_lo, cos_hi]`.
pub fn random_cap<R: rand::Rng + ?Sized>(rng: &mut R, cos_lo: f64, cos_hi: f64) -> SiteRegion {
    SiteRegion::Cap {
        axis: random_unit(rng),
        cos_min: rng.random_range(cos_lo..cos_hi),
    }
}

/// Quadrature used for lower-symbol traces.
pub fn trace_by_lower_symbols(ens: &GibbsEnsemble, quad: &SphereQuadrature) -> Result<f64> {
    if ens.n_sites != 1 {
        return Err(Error::InvalidArgument(
            "lower-symbol trace implemented for one site".into(),
        ));
    }
    let d = ens.spin.dim() as f64;
    let mut total = 0.0;
    for (p, w) in quad.nodes.iter().zip(&quad.weights) {
        let cfg = ClassicalConfig::from_points(&[*p]);
        total += w * ens.matrix_element(&cfg, &cfg)?.re;
    }
    Ok(total * d / (4.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Lattice;
    use crate::su2kit::build_spin_operators;
    use crate::torus::build_torus;
    use rand::Rng;

    fn spin(two_s: u32) -> SpinMagnitude {
        SpinMagnitude::new(two_s).unwrap()
    }

    fn zeeman(sp: SpinMagnitude) -> CMat {
        build_spin_operators(sp).sz.unscale(sp.s())
    }

    #[test]
    fn partition_function_examples() {
        let sp = spin(1);
        let h = zeeman(sp);
        let ens = gibbs(&h, 0.0, sp, 1).unwrap();
        assert!((ens.z() - 2.0).abs() < 1e-14);
        let ens = ens.at_beta(0.7);
        assert!((ens.z() - 2.0 * 0.7f64.cosh()).abs() < 1e-13);
        assert!((expectation(&ens, &CMat::identity(2, 2)).unwrap() - c(1.0)).norm() < 1e-14);
        assert!((expectation(&ens, &h).unwrap() - c(-(0.7f64).tanh())).norm() < 1e-13);
        let rho = ens.density_matrix();
        assert!((crate::linalg::trace(&rho) - c(1.0)).norm() < 1e-13);
        assert!(gibbs(&h, 1.0, sp, 2).is_err());
    }

    #[test]
    fn trace_via_lower_symbols() {
        for two_s in [1, 3, 6] {
            let sp = spin(two_s);
            let ens = gibbs(&zeeman(sp), 1.3, sp, 1).unwrap();
            let quad = sphere_quadrature(4 * two_s as usize + 8);
            assert!(
                (trace_by_lower_symbols(&ens, &quad).unwrap() - ens.z()).abs() < 1e-8 * ens.z()
            );
        }
    }

    #[test]
    fn single_spin_matrix_elements() {
        let sp = spin(1);
        let ens = gibbs(&zeeman(sp), 1.0, sp, 1).unwrap();
        let cfg = ClassicalConfig::from_points(&[SphericalPoint::new(PI / 2.0, 0.3)]);
        assert!((ens.matrix_element(&cfg, &cfg).unwrap().re - 1.0f64.cosh()).abs() < 1e-12);
        for two_s in [2, 5] {
            let sp = spin(two_s);
            let s = sp.s();
            let beta = 0.8;
            let ens = gibbs(&zeeman(sp), beta, sp, 1).unwrap();
            let theta = 1.1f64;
            let cfg = ClassicalConfig::from_points(&[SphericalPoint::new(theta, 2.0)]);
            let closed = ((theta / 2.0).cos().powi(2) * (-beta / (2.0 * s)).exp()
                + (theta / 2.0).sin().powi(2) * (beta / (2.0 * s)).exp())
            .powf(2.0 * s);
            assert!((ens.matrix_element(&cfg, &cfg).unwrap().re - closed).abs() < 1e-12 * closed);
        }
        let ens0 = ens.at_beta(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = ClassicalConfig::random(1, &mut rng);
        let b = ClassicalConfig::random(1, &mut rng);
        let expected = crate::su2kit::product_overlap(sp, &b, &a).unwrap();
        assert!((ens0.matrix_element(&a, &b).unwrap() - expected).norm() < 1e-13);
    }

    #[test]
    fn sandwich_lower_bound_and_kappa() {
        let geom = build_torus(2, 2, 1).unwrap();
        let spec = ModelSpec::orbital_compass(spin(2), Lattice::torus(&geom)).unwrap();
        let ens = gibbs_for_model(&spec, Frame::Rp, 1.0).unwrap();
        let symbols = HamiltonianSymbols::new(&spec, Frame::Rp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let beta = rng.random_range(0.0..1.0);
            let e = ens.at_beta(beta);
            let cfg = ClassicalConfig::random(4, &mut rng);
            let r = sandwich_check(&e, &symbols, &cfg).unwrap();
            assert!(r.lower_slack >= -1e-10, "{r:?}");
        }
        let r = sandwich_check(
            &ens.at_beta(0.0),
            &symbols,
            &ClassicalConfig::uniform(4, [0.0, 0.0, 1.0]),
        )
        .unwrap();
        assert!(r.lower_slack.abs() < 1e-12 && r.kappa == 0.0);
    }

    #[test]
    fn full_bound_at_zero_beta() {
        let spec = ModelSpec::orbital_compass(spin(3), Lattice::bond(2, 0)).unwrap();
        let ens = gibbs_for_model(&spec, Frame::Rp, 0.0).unwrap();
        let symbols = HamiltonianSymbols::new(&spec, Frame::Rp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a = ClassicalConfig::random(2, &mut rng);
            let b = ClassicalConfig::random(2, &mut rng);
            assert!(full_bound_check(&ens, &symbols, &a, &b).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn berezin_lieb_single_spin() {
        for two_s in [1, 2, 4] {
            let sp = spin(two_s);
            let s = sp.s();
            for beta in [0.0, 0.5, 2.0] {
                let r = berezin_lieb_single(&zeeman(sp), sp, beta, 40).unwrap();
                let sinhc = |x: f64| if x == 0.0 { 1.0 } else { x.sinh() / x };
                assert!((r.classical_lower - sinhc(beta)).abs() < 1e-10);
                assert!((r.classical_upper - sinhc(beta * (1.0 + 1.0 / s))).abs() < 1e-10);
                assert!(r.lower_slack() >= -1e-12 && r.upper_slack() >= -1e-12);
            }
        }
    }

    #[test]
    fn berezin_lieb_two_spins() {
        let spec = ModelSpec::heisenberg_af(spin(1), 0.5, 0.25, Lattice::bond(1, 0)).unwrap();
        let r0 = berezin_lieb_check(&spec, 0.0, 12).unwrap();
        assert!((r0.classical_lower - 1.0).abs() < 1e-12 && (r0.quantum_mid - 1.0).abs() < 1e-12);
        let r = berezin_lieb_check(&spec, 1.0, 24).unwrap();
        assert!(
            r.lower_slack() >= -1e-8 && r.upper_slack() >= -1e-8,
            "{r:?}"
        );
    }

    #[test]
    fn q_hat_identities() {
        let sp = spin(1);
        let full = q_hat(sp, 1, &|_| true, "full", 64_000, 2).unwrap();
        assert!(full.max_sigma_deviation(&CMat::identity(2, 2), 1e-3) < 4.0);
        let cap = SiteRegion::Cap {
            axis: [0.0, 0.0, 1.0],
            cos_min: 0.0,
        };
        let a = q_hat(
            sp,
            1,
            &|cfg: &ClassicalConfig| cap.contains(&cfg.spins[0]),
            "cap",
            64_000,
            2,
        )
        .unwrap();
        let ac = q_hat(
            sp,
            1,
            &|cfg: &ClassicalConfig| !cap.contains(&cfg.spins[0]),
            "cap-c",
            64_000,
            2,
        )
        .unwrap();
        let sum = &a.operator + &ac.operator;
        assert!((sum - &full.operator).norm() < 1e-12);
        let exact = region_operator(&cap, sp);
        assert!((exact[(1, 1)].re - 0.75).abs() < 1e-12 && (exact[(0, 0)].re - 0.25).abs() < 1e-12);
        assert!(a.max_sigma_deviation(&exact, 1e-3) < 4.0);
        assert!(matches!(
            q_hat(sp, 1, &|_| false, "empty", 2000, 1),
            Err(Error::ZeroMeasure { .. })
        ));
    }

    #[test]
    fn region_operators_are_consistent() {
        let sp = spin(3);
        let cap = SiteRegion::Cap {
            axis: normalized(&[1.0, -2.0, 0.5]),
            cos_min: 0.3,
        };
        let q = region_operator(&cap, sp);
        assert!((crate::linalg::trace(&q).re - 4.0 * cap.area_fraction()).abs() < 1e-12);
        let opposite = SiteRegion::Cap {
            axis: normalized(&[-1.0, 2.0, -0.5]),
            cos_min: -0.3,
        };
        let complement = region_operator(&opposite, sp);
        assert!((&q + &complement - CMat::identity(4, 4)).norm() < 1e-12);
        assert!(crate::linalg::hermiticity_residual(&q) < 1e-14);
    }

    #[test]
    fn quantum_chessboard_trivial_and_small() {
        let geom = build_torus(1, 4, 1).unwrap();
        let spec = ModelSpec::heisenberg_af(spin(1), 0.0, 0.0, Lattice::torus(&geom)).unwrap();
        let ens = gibbs_for_model(&spec, Frame::Rp, 1.0).unwrap();
        let full = vec![(vec![0], BlockEvent::Full), (vec![2], BlockEvent::Full)];
        let r = chessboard_check_quantum(&ens, &geom, &full, 3200, 1).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-9 && (r.rhs - 1.0).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let events = vec![
            (
                vec![0],
                BlockEvent::Product(vec![random_cap(&mut rng, -0.4, 0.2)]),
            ),
            (
                vec![1],
                BlockEvent::Product(vec![random_cap(&mut rng, -0.4, 0.2)]),
            ),
        ];
        let r = chessboard_check_quantum(&ens, &geom, &events, 20_000, 2).unwrap();
        assert!(r.holds_within(3.0), "{r:?}");
        assert!(chessboard_check_quantum(
            &ens,
            &geom,
            &[(vec![1], BlockEvent::Full), (vec![1], BlockEvent::Full)],
            3200,
            1
        )
        .is_err());
    }
}
