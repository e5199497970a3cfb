//! Spin-wave free energies of the classical orbital-compass model and the
//! deviation-variable identity of the 120-degree model.
//!
//! For `ŵ = (cos θ⋆, 0, sin θ⋆)` the dispersion is
//! `D̂_k(ŵ) = ŵ_z² |1 − e^{ik₁}|² + ŵ_x² |1 − e^{ik₂}|²`. Sums and integrals
//! over one momentum component are done in closed form: with
//! `c = 2q cosh μ`,
//! `Π_{j<L} (c − 2q cos(2πj/L)) = q^L (2 cosh(Lμ) − 2)` and
//! `(1/2π) ∫ log(c − 2q cos k) dk = log q + μ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical_mc::{McState, McSystem};
use crate::error::{Error, Result};
use crate::linalg::{gauss_legendre, gauss_legendre_on};
use crate::models::{classical_energy, onetwenty_rp_vector, Lattice, ModelSpec};
use crate::stats::{batch_means, DEFAULT_BATCHES};
use crate::su2kit::{dot, ClassicalConfig, SpinMagnitude, Vec3};
use crate::torus::{build_torus, SiteRegion};

/// `ŵ = (cos θ⋆, 0, sin θ⋆)`.
pub fn w_hat(theta_star: f64) -> Vec3 {
    [theta_star.cos(), 0.0, theta_star.sin()]
}

/// `D̂_k(ŵ)`.
pub fn dhat(k: [f64; 2], w: &Vec3) -> f64 {
    w[2] * w[2] * (2.0 - 2.0 * k[0].cos()) + w[0] * w[0] * (2.0 - 2.0 * k[1].cos())
}

/// How `F(λ, ŵ)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FMode {
    /// Brillouin-zone integral.
    Integral,
    /// Exact reciprocal-lattice sum on the `L × L` torus.
    Lattice(usize),
}

/// `acosh(1 + ε)` accurate for small `ε`.
fn acosh1p(eps: f64) -> f64 {
    (eps + (eps * (eps + 2.0)).sqrt()).ln_1p()
}

/// Splits `ŵ` into the outer (`p`) and inner (`q ≥ 1/2`) coefficients.
fn coefficients(w: &Vec3) -> (f64, f64) {
    let (a, b) = (w[2] * w[2], w[0] * w[0]);
    let norm = a + b;
    let (a, b) = (a / norm, b / norm);
    if b >= a {
        (a, b)
    } else {
        (b, a)
    }
}

/// `μ(k)` for the outer momentum `k`.
fn mu(lambda: f64, p: f64, q: f64, k: f64) -> f64 {
    acosh1p((lambda + p * (2.0 - 2.0 * k.cos())) / (2.0 * q))
}

/// Composite Gauss-Legendre rule on `[0, π]` graded geometrically towards 0.
fn graded_rule() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let levels = 48;
    let mut hi = PI;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        out.extend(gauss_legendre_on(12, lo, hi));
        hi = lo;
    }
    out.extend(gauss_legendre_on(12, 0.0, hi));
    out
}

/// `F(λ, ŵ) = ½ ∫ dk/(2π)² log(λ + D̂_k)` or its lattice analogue.
pub fn f_lambda(w: &Vec3, lambda: f64, mode: FMode) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive to regularize k = 0, got {lambda}"
        )));
    }
    let (p, q) = coefficients(w);
    match mode {
        FMode::Integral => {
            let integral: f64 = graded_rule()
                .iter()
                .map(|&(k, wk)| wk * mu(lambda, p, q, k))
                .sum();
            Ok(0.5 * q.ln() + integral / (2.0 * PI))
        }
        FMode::Lattice(l) => {
            if l == 0 {
                return Err(Error::InvalidArgument(
                    "lattice side must be positive".into(),
                ));
            }
            let lf = l as f64;
            let mut acc = 0.0;
            for j in 0..l {
                let m = mu(lambda, p, q, 2.0 * PI * j as f64 / lf);
                acc += 0.5 * (q.ln() + m) / lf + (-(-lf * m).exp()).ln_1p() / (lf * lf);
            }
            Ok(acc)
        }
    }
}

/// `F(ŵ)` extrapolated from a `λ` ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FInfinite {
    pub value: f64,
    /// `(λ, F(λ))` used in the fit.
    pub ladder: Vec<(f64, f64)>,
    /// Difference between fits on the lowest points and on a shifted window.
    pub stability: f64,
}

fn extrapolate(points: &[(f64, f64)]) -> f64 {
    // F(λ) ≈ F₀ + c₁√λ + c₂ λ log λ + c₃ λ.
    let n = points.len();
    let a = DMatrix::from_fn(n, 4, |i, j| {
        let l = points[i].0;
        match j {
            0 => 1.0,
            1 => l.sqrt(),
            2 => l * l.ln(),
            _ => l,
        }
    });
    let b = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let sol = a.svd(true, true).solve(&b, 1e-14).expect("svd solve");
    sol[0]
}

/// Default ladder `λ = 10^{−2}, 10^{−2.5}, …, 10^{−12}`.
pub fn default_lambda_ladder() -> Vec<f64> {
    (0..21).map(|j| 10f64.powf(-2.0 - 0.5 * j as f64)).collect()
}

pub fn f_infinite(w: &Vec3) -> Result<FInfinite> {
    f_infinite_with(w, &default_lambda_ladder())
}

/// Fits the eight smallest `λ` of the ladder and compares with the fit on
/// the window two steps higher; disagreement above `1e−5` is reported as
/// an extrapolation failure.
pub fn f_infinite_with(w: &Vec3, ladder: &[f64]) -> Result<FInfinite> {
    const WINDOW: usize = 8;
    if ladder.len() < WINDOW + 2 {
        return Err(Error::InvalidArgument(format!(
            "ladder needs at least {} values",
            WINDOW + 2
        )));
    }
    let mut pts: Vec<(f64, f64)> = ladder
        .iter()
        .map(|&l| f_lambda(w, l, FMode::Integral).map(|f| (l, f)))
        .collect::<Result<_>>()?;
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let value = extrapolate(&pts[..WINDOW]);
    let shifted = extrapolate(&pts[2..WINDOW + 2]);
    let stability = (value - shifted).abs();
    if !value.is_finite() || stability > 1e-5 {
        return Err(Error::Extrapolation(format!(
            "lambda extrapolation unstable: {value} vs {shifted}"
        )));
    }
    Ok(FInfinite {
        value,
        ladder: pts,
        stability,
    })
}

/// Scan of `F` over the quarter circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeReport {
    /// `(θ⋆ in degrees, F)`.
    pub grid: Vec<(f64, f64)>,
    /// Grid angles (degrees) attaining the minimum within `1e−6`.
    pub argmin: Vec<f64>,
    /// `min over interior grid points of F − min F`.
    pub gap: f64,
    /// `F` nondecreasing on `(0°, 45°]`.
    pub monotone_to_45: bool,
}

/// Evaluates `F` on a uniform grid of `θ⋆ ∈ [0°, 90°]`.
pub fn minimize_f(resolution_deg: f64) -> Result<MinimizeReport> {
    if !(resolution_deg > 0.0 && resolution_deg <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "resolution must lie in (0°, 1°], got {resolution_deg}"
        )));
    }
    let steps = (90.0 / resolution_deg).round() as usize;
    let grid: Vec<(f64, f64)> = (0..=steps)
        .into_par_iter()
        .map(|i| {
            let deg = 90.0 * i as f64 / steps as f64;
            f_infinite(&w_hat(deg.to_radians())).map(|f| (deg, f.value))
        })
        .collect::<Result<_>>()?;
    let min = grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    let argmin = grid
        .iter()
        .filter(|g| g.1 <= min + 1e-6)
        .map(|g| g.0)
        .collect();
    let gap = grid[1..steps]
        .iter()
        .map(|g| g.1 - min)
        .fold(f64::INFINITY, f64::min);
    let monotone_to_45 = grid
        .iter()
        .filter(|g| g.0 > 0.0 && g.0 <= 45.0 + 1e-9)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 - 1e-12);
    Ok(MinimizeReport {
        grid,
        argmin,
        gap,
        monotone_to_45,
    })
}

/// Options for the direct Monte Carlo estimate of `F_{L,Δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmcOptions {
    /// Gauss-Legendre nodes on `[0, β₀]` with `β₀ = 0.05/Δ²`.
    pub low_nodes: usize,
    /// Gauss-Legendre nodes in `log β′` on `[β₀, β]`.
    pub log_nodes: usize,
    pub thermalization: usize,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for FmcOptions {
    fn default() -> Self {
        Self {
            low_nodes: 4,
            log_nodes: 24,
            thermalization: 1500,
            sweeps: 3000,
            seed: 1,
        }
    }
}

/// Monte Carlo value of `F_{L,Δ}(ŵ)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmcEstimate {
    pub value: f64,
    pub sigma: f64,
    pub l: usize,
    pub delta: f64,
    pub beta: f64,
    pub theta_star: f64,
}

/// Checks `βΔ² > 1` and `βΔ³ < 1`.
pub fn check_regime(beta: f64, delta: f64) -> Result<()> {
    let (a, b) = (beta * delta * delta, beta * delta.powi(3));
    if a > 1.0 && b < 1.0 {
        Ok(())
    } else {
        Err(Error::Regime(format!(
            "need beta*Delta^2 > 1 and beta*Delta^3 < 1, got {a:.3} and {b:.3}"
        )))
    }
}

/// `F_{L,Δ}(ŵ) = −(1/L²) log ∫ (β e^{−β}/2π)^{L²} e^{−βH^∞} Π 1{Ω_r·ŵ ≥ cos Δ}`
/// for the classical orbital-compass model, by thermodynamic integration
/// of `g(β′) = ⟨H^∞⟩/L² + 1` from the exactly known `β′ = 0` value.
pub fn f_mc_direct(
    l: usize,
    delta: f64,
    beta: f64,
    theta_star: f64,
    opts: FmcOptions,
) -> Result<FmcEstimate> {
    check_regime(beta, delta)?;
    let geom = build_torus(2, l, 1)?;
    let spec = ModelSpec::orbital_compass(SpinMagnitude::new(1)?, Lattice::torus(&geom))?;
    let system = McSystem::from_spec(&spec);
    let n = geom.n_sites() as f64;
    let w = w_hat(theta_star);
    let regions = vec![
        SiteRegion::Cap {
            axis: w,
            cos_min: delta.cos()
        };
        geom.n_sites()
    ];
    let beta0 = (0.05 / (delta * delta)).min(beta);
    let mut nodes: Vec<(f64, f64)> = gauss_legendre_on(opts.low_nodes, 0.0, beta0);
    for (u, wu) in gauss_legendre(opts.log_nodes) {
        let (a, b) = (beta0.ln(), beta.ln());
        let x = 0.5 * (a + b) + 0.5 * (b - a) * u;
        let bb = x.exp();
        nodes.push((bb, 0.5 * (b - a) * wu * bb));
    }
    let parts = nodes
        .par_iter()
        .enumerate()
        .map(|(i, &(b, wt))| -> Result<(f64, f64)> {
            let seed = opts.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let mut st = McState::constrained(system.clone(), b, seed, regions.clone())?;
            st.thermalize(opts.thermalization);
            let g = st.run(opts.sweeps, |s, c| s.energy(c) / n + 1.0);
            if st.acceptance() < 1e-3 {
                return Err(Error::NonErgodic(st.acceptance()));
            }
            let bm = batch_means(&g, DEFAULT_BATCHES);
            Ok((wt * bm.mean, (wt * bm.std_error).powi(2)))
        })
        .collect::<Result<Vec<_>>>()?;
    let integral: f64 = parts.iter().map(|p| p.0).sum();
    let sigma = parts.iter().map(|p| p.1).sum::<f64>().sqrt();
    let cap_area = 2.0 * PI * (1.0 - delta.cos());
    let value = -(beta / (2.0 * PI)).ln() - cap_area.ln() + integral;
    Ok(FmcEstimate {
        value,
        sigma,
        l,
        delta,
        beta,
        theta_star,
    })
}

/// `F_MC(ŵ) − F_MC(ê_x)` with a combined standard error.
pub fn f_mc_difference(
    l: usize,
    delta: f64,
    beta: f64,
    theta_star: f64,
    opts: FmcOptions,
) -> Result<(f64, f64)> {
    let a = f_mc_direct(l, delta, beta, theta_star, opts)?;
    let b = f_mc_direct(
        l,
        delta,
        beta,
        0.0,
        FmcOptions {
            seed: opts.seed.wrapping_add(77),
            ..opts
        },
    )?;
    Ok((a.value - b.value, a.sigma.hypot(b.sigma)))
}

/// Gaussian bounds on `F_{L,Δ}(ŵ)` from the quadratic approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBracket {
    pub lower: f64,
    pub upper: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
}

/// For each `λ` on a ladder: `½ log 2 + F_L(λ) − ½λβΔ²` is a lower bound
/// and `½ log 2 + F_L(λ) − log P_λ(cone)/L²` an upper bound, where `P_λ`
/// is the `λ`-shifted Gaussian measure of the deviation variables. The
/// bracket keeps the best of each.
pub fn gaussian_bracket(
    l: usize,
    delta: f64,
    beta: f64,
    theta_star: f64,
    samples: usize,
    seed: u64,
) -> Result<GaussianBracket> {
    let w = w_hat(theta_star);
    let n = l * l;
    let idx = |x: usize, y: usize| (x % l) * l + (y % l);
    let mut best = GaussianBracket {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        lambda_lower: 0.0,
        lambda_upper: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in 0..13 {
        let lambda = 10f64.powf(1.0 - 0.5 * j as f64);
        let fl = f_lambda(&w, lambda, FMode::Lattice(l))?;
        let base = 0.5 * 2f64.ln() + fl;
        let lower = base - 0.5 * lambda * beta * delta * delta;
        if lower > best.lower {
            best.lower = lower;
            best.lambda_lower = lambda;
        }
        let mut m = DMatrix::<f64>::zeros(n, n);
        for x in 0..l {
            for y in 0..l {
                let r = idx(x, y);
                m[(r, r)] += lambda;
                for (nb, coef) in [(idx(x + 1, y), w[2] * w[2]), (idx(x, y + 1), w[0] * w[0])] {
                    m[(r, r)] += coef;
                    m[(nb, nb)] += coef;
                    m[(r, nb)] -= coef;
                    m[(nb, r)] -= coef;
                }
            }
        }
        let chol = (m * beta)
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("Gaussian covariance not positive".into()))?;
        let lt = chol.l().transpose();
        let zeta_sd = (0.5 / beta).sqrt();
        let mut hits = 0usize;
        for _ in 0..samples {
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let theta = lt.solve_upper_triangular(&z).expect("triangular");
            let inside = theta.iter().all(|t| {
                let g: f64 = StandardNormal.sample(&mut rng);
                let zeta = zeta_sd * g;
                zeta.abs() < 1.0
                    && t.cos() * (1.0 - zeta * zeta).sqrt() >= delta.cos()
                    && t.abs() < PI
            });
            hits += inside as usize;
        }
        if hits > 0 {
            let upper = base - (hits as f64 / samples as f64).ln() / n as f64;
            if upper < best.upper {
                best.upper = upper;
                best.lambda_upper = lambda;
            }
        }
    }
    Ok(best)
}

/// Which bound is imposed on `|Ω_r · ê_y|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZetaCap {
    /// `|ζ_r| ≤ Δ²`, the cap under which the identity is stated.
    DeltaSquared,
    /// `|ζ_r| ≤ Δ`, a looser cap for scaling studies.
    Delta,
}

impl ZetaCap {
    pub fn bound(self, delta: f64) -> f64 {
        match self {
            ZetaCap::DeltaSquared => delta * delta,
            ZetaCap::Delta => delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    /// `|H^∞(Ω) − H^∞(Ω′) − (3/2) Σ_r (Ω_r·ê_y)²|`.
    pub residual: f64,
    /// `residual / (Δ³ L³)`.
    pub c: f64,
    pub l: usize,
    pub delta: f64,
}

/// Removes the `y` components and renormalizes.
pub fn flatten_y(config: &ClassicalConfig) -> ClassicalConfig {
    ClassicalConfig::new(config.spins.iter().map(|s| [s[0], 0.0, s[2]]).collect())
}

/// Checks the deviation-variable identity of the 120-degree model on an
/// `L³` torus.
pub fn deviation_identity_check(
    config: &ClassicalConfig,
    l: usize,
    delta: f64,
    cap: ZetaCap,
) -> Result<DeviationReport> {
    let geom = build_torus(3, l, 1)?;
    if config.len() != geom.n_sites() {
        return Err(Error::SiteMismatch {
            left: config.len(),
            right: geom.n_sites(),
        });
    }
    let zmax = cap.bound(delta);
    if let Some(r) = config.spins.iter().position(|s| s[1].abs() > zmax + 1e-15) {
        return Err(Error::Hypothesis(format!(
            "site {r} has |Ω·e_y| above the cap {zmax}"
        )));
    }
    for b in geom.bonds() {
        let v = onetwenty_rp_vector(b.dir);
        if (dot(&config.spins[b.a], &v) - dot(&config.spins[b.b], &v)).abs() > delta + 1e-15 {
            return Err(Error::Hypothesis(format!(
                "bond ({}, {}) has a projection gap above {delta}",
                b.a, b.b
            )));
        }
    }
    let spec = ModelSpec::onetwenty(SpinMagnitude::new(1)?, Lattice::torus(&geom))?;
    let flat = flatten_y(config);
    let zeta_sq: f64 = config.spins.iter().map(|s| s[1] * s[1]).sum();
    let residual =
        (classical_energy(&spec, config) - classical_energy(&spec, &flat) - 1.5 * zeta_sq).abs();
    let l3 = (l * l * l) as f64;
    Ok(DeviationReport {
        residual,
        c: residual / (delta.powi(3) * l3),
        l,
        delta,
    })
}

/// A random configuration obeying the hypotheses: in-plane angles within
/// `Δ/4` of `θ⋆` and `|ζ_r|` up to the cap.
pub fn admissible_config<R: rand::Rng + ?Sized>(
    l: usize,
    delta: f64,
    theta_star: f64,
    cap: ZetaCap,
    rng: &mut R,
) -> ClassicalConfig {
    let zmax = cap.bound(delta);
    ClassicalConfig::new(
        (0..l * l * l)
            .map(|_| {
                let t = theta_star + rng.random_range(-0.25 * delta..=0.25 * delta);
                let z: f64 = rng.random_range(-zmax..=zmax);
                let s = (1.0 - z * z).sqrt();
                [s * t.cos(), z, s * t.sin()]
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalan() -> f64 {
        // Σ (−1)^n / (2n+1)², accelerated by pairing terms.
        (0..200_000)
            .map(|n| 1.0 / ((4 * n + 1) as f64).powi(2) - 1.0 / ((4 * n + 3) as f64).powi(2))
            .sum()
    }

    #[test]
    fn dhat_examples() {
        assert_eq!(dhat([0.0, 0.0], &w_hat(0.3)), 0.0);
        assert!((dhat([PI, PI], &[1.0, 0.0, 0.0]) - 4.0).abs() < 1e-15);
        let w = w_hat(0.4);
        let ws = [w[2], 0.0, w[0]];
        assert!((dhat([0.3, 1.1], &w) - dhat([1.1, 0.3], &ws)).abs() < 1e-15);
    }

    #[test]
    fn f_lambda_closed_form_and_lattice() {
        let f = f_lambda(&[1.0, 0.0, 0.0], 1.0, FMode::Integral).unwrap();
        assert!((f - 0.5 * ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-12);
        assert!((f - 0.4812118).abs() < 1e-7);
        let w = w_hat(0.6);
        let direct: f64 = {
            let l = 12;
            let mut acc = 0.0;
            for i in 0..l {
                for j in 0..l {
                    let k = [
                        2.0 * PI * i as f64 / l as f64,
                        2.0 * PI * j as f64 / l as f64,
                    ];
                    acc += (0.3 + dhat(k, &w)).ln();
                }
            }
            acc / (2.0 * (l * l) as f64)
        };
        assert!((f_lambda(&w, 0.3, FMode::Lattice(12)).unwrap() - direct).abs() < 1e-12);
        let diff = f_lambda(&w, 0.1, FMode::Lattice(64)).unwrap()
            - f_lambda(&w, 0.1, FMode::Integral).unwrap();
        assert!(diff.abs() < 1e-3);
        assert!(f_lambda(&w, 0.0, FMode::Integral).is_err());
    }

    #[test]
    fn f_lambda_monotone_in_lambda_and_l() {
        let w = w_hat(0.5);
        let vals: Vec<f64> = [1.0, 0.3, 0.1, 0.03, 0.01]
            .iter()
            .map(|&l| f_lambda(&w, l, FMode::Integral).unwrap())
            .collect();
        assert!(vals.windows(2).all(|p| p[1] < p[0]));
        let exact = f_lambda(&w, 0.05, FMode::Integral).unwrap();
        let errs: Vec<f64> = [32, 64, 128, 256, 512]
            .iter()
            .map(|&l| (f_lambda(&w, 0.05, FMode::Lattice(l)).unwrap() - exact).abs())
            .collect();
        assert!(errs.windows(2).all(|p| p[1] <= p[0] + 1e-15));
        assert!(errs[4] < 1e-6);
    }

    #[test]
    fn f_infinite_values() {
        assert!(f_infinite(&[1.0, 0.0, 0.0]).unwrap().value.abs() < 1e-3);
        assert!(f_infinite(&[0.0, 0.0, 1.0]).unwrap().value.abs() < 1e-3);
        let g = catalan();
        let target = 0.5 * (4.0 * g / PI - 2f64.ln());
        let f45 = f_infinite(&w_hat(PI / 4.0)).unwrap().value;
        assert!(
            (f45 - target).abs() < 5e-3 && (target - 0.2365).abs() < 1e-3,
            "{f45} vs {target}"
        );
        let a = f_infinite(&w_hat(0.3)).unwrap().value;
        let b = f_infinite(&w_hat(PI / 2.0 - 0.3)).unwrap().value;
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn minimizers_are_the_axes() {
        let r = minimize_f(1.0).unwrap();
        assert_eq!(r.argmin, vec![0.0, 90.0]);
        assert!(r.gap > 0.0);
        assert!(r.monotone_to_45);
        assert!(minimize_f(2.0).is_err());
    }

    #[test]
    fn regime_is_enforced() {
        assert!(check_regime(1e4, 1e4f64.powf(-5.0 / 12.0)).is_ok());
        assert!(matches!(
            f_mc_direct(4, 0.5, 1.0, 0.0, FmcOptions::default()),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn deviation_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let flat = ClassicalConfig::new(
            admissible_config(4, 0.05, 0.3, ZetaCap::DeltaSquared, &mut rng)
                .spins
                .iter()
                .map(|s| {
                    let n = (s[0] * s[0] + s[2] * s[2]).sqrt();
                    [s[0] / n, 0.0, s[2] / n]
                })
                .collect(),
        );
        assert!(
            deviation_identity_check(&flat, 4, 0.05, ZetaCap::DeltaSquared)
                .unwrap()
                .residual
                < 1e-10
        );
        let cfg = admissible_config(8, 0.05, 0.7, ZetaCap::DeltaSquared, &mut rng);
        assert!(
            deviation_identity_check(&cfg, 8, 0.05, ZetaCap::DeltaSquared)
                .unwrap()
                .c
                < 10.0
        );
        // Modulating along one axis only keeps the cubic term from cancelling
        // between the three bond directions.
        let staggered = |l: usize, delta: f64| {
            let geom = build_torus(3, l, 1).unwrap();
            ClassicalConfig::new(
                (0..geom.n_sites())
                    .map(|r| {
                        let even = geom.coords(r)[0] % 2 == 0;
                        let t = 0.4 + if even { 0.25 * delta } else { -0.25 * delta };
                        let z = if even { delta } else { 0.0 };
                        let s = (1.0 - z * z).sqrt();
                        [s * t.cos(), z, s * t.sin()]
                    })
                    .collect(),
            )
        };
        let r1 = deviation_identity_check(&staggered(6, 0.1), 6, 0.1, ZetaCap::Delta)
            .unwrap()
            .residual;
        let r2 = deviation_identity_check(&staggered(6, 0.05), 6, 0.05, ZetaCap::Delta)
            .unwrap()
            .residual;
        assert!((5.0..12.0).contains(&(r1 / r2)), "ratio {}", r1 / r2);
        let bad = ClassicalConfig::uniform(64, [0.0, 1.0, 0.0]);
        assert!(matches!(
            deviation_identity_check(&bad, 4, 0.05, ZetaCap::DeltaSquared),
            Err(Error::Hypothesis(_))
        ));
    }
}
