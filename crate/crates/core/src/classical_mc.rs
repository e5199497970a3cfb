//! Metropolis sampling of classical spin models on tori, block-event
//! classification, thermodynamic-integration estimates of disseminated
//! event probabilities, the classical chessboard comparison and β scans.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::gauss_legendre_on;
use crate::models::{onetwenty_vector, ModelKind, ModelSpec};
use crate::quantum_lab::ChessboardReport;
use crate::stats::{batch_means, BatchMeans, DEFAULT_BATCHES};
use crate::su2kit::{cross, dot, normalized, random_unit, ClassicalConfig, Vec3};
use crate::torus::{disseminated_site_regions, BlockEvent, Bond, SiteRegion, TorusGeometry};

type BondEnergy = Arc<dyn Fn(&Vec3, &Vec3, usize) -> f64 + Send + Sync>;

/// Sites, bonds and a bond energy: everything the sampler needs.
#[derive(Clone)]
pub struct McSystem {
    pub n_sites: usize,
    pub bonds: Vec<Bond>,
    energy: BondEnergy,
    /// For each site: `(bond index, other site, site is the bond's first end)`.
    incident: Vec<Vec<(usize, usize, bool)>>,
}

impl std::fmt::Debug for McSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("McSystem")
            .field("n_sites", &self.n_sites)
            .field("bonds", &self.bonds.len())
            .finish()
    }
}

impl McSystem {
    pub fn custom(
        n_sites: usize,
        bonds: Vec<Bond>,
        energy: impl Fn(&Vec3, &Vec3, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let mut incident = vec![Vec::new(); n_sites];
        for (k, b) in bonds.iter().enumerate() {
            incident[b.a].push((k, b.b, true));
            incident[b.b].push((k, b.a, false));
        }
        Self {
            n_sites,
            bonds,
            energy: Arc::new(energy),
            incident,
        }
    }

    /// The classical Hamiltonian of a model in its reflection-positive frame.
    pub fn from_spec(spec: &ModelSpec) -> Self {
        let s = spec.clone();
        Self::custom(
            spec.n_sites(),
            spec.lattice.bonds.clone(),
            move |a, b, dir| s.bond_energy(a, b, dir),
        )
    }

    pub fn energy(&self, config: &ClassicalConfig) -> f64 {
        self.bonds
            .iter()
            .map(|b| (self.energy)(&config.spins[b.a], &config.spins[b.b], b.dir))
            .sum()
    }

    fn local_energy(&self, spins: &[Vec3], site: usize, v: &Vec3) -> f64 {
        self.incident[site]
            .iter()
            .map(|&(k, other, first)| {
                let dir = self.bonds[k].dir;
                if first {
                    (self.energy)(v, &spins[other], dir)
                } else {
                    (self.energy)(&spins[other], v, dir)
                }
            })
            .sum()
    }
}

/// Hard constraint imposed on a chain.
#[derive(Debug, Clone)]
pub enum Constraint {
    None,
    /// One region per site.
    Sites(Vec<SiteRegion>),
    /// The disseminated block event `∩_t ϑ_t(A)`; only the block
    /// containing the updated site is rechecked.
    Disseminated {
        geom: TorusGeometry,
        event: BlockEvent,
    },
}

impl Constraint {
    fn allows(&self, config: &ClassicalConfig, site: usize) -> bool {
        match self {
            Constraint::None => true,
            Constraint::Sites(regions) => regions[site].contains(&config.spins[site]),
            Constraint::Disseminated { geom, event } => {
                let t = geom.block_coords(geom.block_of(site));
                event.contains_reflected(geom, &t, config)
            }
        }
    }

    fn satisfied(&self, config: &ClassicalConfig) -> bool {
        match self {
            Constraint::None => true,
            Constraint::Sites(regions) => regions
                .iter()
                .zip(&config.spins)
                .all(|(r, s)| r.contains(s)),
            Constraint::Disseminated { geom, event } => event.contains_disseminated(geom, config),
        }
    }
}

/// A uniform point of a spherical cap of half-angle `acos(cos_min)` about `axis`.
pub fn sample_cap<R: Rng + ?Sized>(rng: &mut R, axis: &Vec3, cos_min: f64) -> Vec3 {
    let a = normalized(axis);
    let u: f64 = rng.random();
    let cg = 1.0 - u * (1.0 - cos_min.clamp(-1.0, 1.0));
    let sg = (1.0 - cg * cg).max(0.0).sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    let helper = if a[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let e1 = normalized(&cross(&helper, &a));
    let e2 = cross(&a, &e1);
    normalized(&std::array::from_fn(|i| {
        cg * a[i] + sg * (phi.cos() * e1[i] + phi.sin() * e2[i])
    }))
}

/// A uniform point of a site region.
pub fn sample_region<R: Rng + ?Sized>(rng: &mut R, region: &SiteRegion) -> Vec3 {
    match region {
        SiteRegion::Full => random_unit(rng),
        SiteRegion::Cap { axis, cos_min } => sample_cap(rng, axis, *cos_min),
        SiteRegion::DoubleCap { axis, cos_min } => {
            if *cos_min <= 0.0 {
                return random_unit(rng);
            }
            let v = sample_cap(rng, axis, *cos_min);
            if rng.random::<bool>() {
                v
            } else {
                [-v[0], -v[1], -v[2]]
            }
        }
    }
}

/// Metropolis acceptance probability `min(1, e^{−βΔE})`.
pub fn acceptance_probability(beta: f64, delta_e: f64) -> f64 {
    if delta_e <= 0.0 {
        1.0
    } else {
        (-beta * delta_e).exp()
    }
}

/// Single-site Metropolis chain with uniform-cap proposals.
#[derive(Debug, Clone)]
pub struct McState {
    pub system: McSystem,
    pub config: ClassicalConfig,
    pub beta: f64,
    pub cone: f64,
    pub seed: u64,
    pub accepted: u64,
    pub proposed: u64,
    constraint: Constraint,
    rng: ChaCha8Rng,
}

impl McState {
    pub fn new(system: McSystem, beta: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = ClassicalConfig::random(system.n_sites, &mut rng);
        Self {
            system,
            config,
            beta,
            cone: PI,
            seed,
            accepted: 0,
            proposed: 0,
            constraint: Constraint::None,
            rng,
        }
    }

    /// A chain confined to per-site regions, started from a uniform point of them.
    pub fn constrained(
        system: McSystem,
        beta: f64,
        seed: u64,
        regions: Vec<SiteRegion>,
    ) -> Result<Self> {
        if regions.len() != system.n_sites {
            return Err(Error::SiteMismatch {
                left: regions.len(),
                right: system.n_sites,
            });
        }
        let mut state = Self::new(system, beta, seed);
        state.config = ClassicalConfig::new(
            regions
                .iter()
                .map(|r| sample_region(&mut state.rng, r))
                .collect(),
        );
        state.constraint = Constraint::Sites(regions);
        Ok(state)
    }

    /// A chain confined to an arbitrary disseminated event, started from `init`.
    pub fn with_event(
        system: McSystem,
        beta: f64,
        seed: u64,
        geom: TorusGeometry,
        event: BlockEvent,
        init: ClassicalConfig,
    ) -> Result<Self> {
        let constraint = Constraint::Disseminated { geom, event };
        if !constraint.satisfied(&init) {
            return Err(Error::Hypothesis(
                "initial configuration violates the constraint".into(),
            ));
        }
        let mut state = Self::new(system, beta, seed);
        state.config = init;
        state.constraint = constraint;
        Ok(state)
    }

    pub fn with_config(mut self, config: ClassicalConfig) -> Self {
        self.config = config;
        self
    }

    pub fn energy(&self) -> f64 {
        self.system.energy(&self.config)
    }

    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn propose(&mut self, site: usize) {
        let old = self.config.spins[site];
        let new = sample_cap(&mut self.rng, &old, self.cone.cos());
        self.proposed += 1;
        let de = self.system.local_energy(&self.config.spins, site, &new)
            - self.system.local_energy(&self.config.spins, site, &old);
        let u: f64 = self.rng.random();
        if u >= acceptance_probability(self.beta, de) {
            return;
        }
        self.config.spins[site] = new;
        if self.constraint.allows(&self.config, site) {
            self.accepted += 1;
        } else {
            self.config.spins[site] = old;
        }
    }

    /// One sweep: every site visited once in order.
    pub fn sweep(&mut self) {
        for site in 0..self.system.n_sites {
            self.propose(site);
        }
    }

    /// Sweeps while adapting the cone towards an acceptance rate near 0.4.
    /// Adaptation breaks detailed balance, so it is only used before measuring.
    pub fn thermalize(&mut self, sweeps: usize) {
        for _ in 0..sweeps {
            let (a0, p0) = (self.accepted, self.proposed);
            self.sweep();
            let rate = (self.accepted - a0) as f64 / (self.proposed - p0).max(1) as f64;
            let factor = if rate > 0.4 { 1.15 } else { 0.87 };
            self.cone = (self.cone * factor).clamp(1e-5, PI);
        }
        self.accepted = 0;
        self.proposed = 0;
    }

    /// Runs `sweeps` measuring sweeps, recording `observable` after each.
    pub fn run(
        &mut self,
        sweeps: usize,
        mut observable: impl FnMut(&McSystem, &ClassicalConfig) -> f64,
    ) -> Vec<f64> {
        (0..sweeps)
            .map(|_| {
                self.sweep();
                observable(&self.system, &self.config)
            })
            .collect()
    }
}

/// Output of [`mc_run`].
#[derive(Debug, Clone)]
pub struct McSamples {
    pub energies: Vec<f64>,
    /// Site average of `Ω_r^z` after every sweep.
    pub mean_z: Vec<f64>,
    pub acceptance: f64,
    pub final_config: ClassicalConfig,
}

/// Seeded Metropolis run on a model; the first tenth of the sweeps thermalize.
pub fn mc_run(spec: &ModelSpec, beta: f64, sweeps: usize, seed: u64) -> Result<McSamples> {
    if sweeps == 0 {
        return Err(Error::InvalidArgument("sweeps must be at least 1".into()));
    }
    let mut state = McState::new(McSystem::from_spec(spec), beta, seed);
    state.thermalize(sweeps / 10);
    let mut mean_z = Vec::with_capacity(sweeps);
    let energies = state.run(sweeps, |sys, cfg| {
        mean_z.push(cfg.spins.iter().map(|s| s[2]).sum::<f64>() / cfg.len() as f64);
        sys.energy(cfg)
    });
    Ok(McSamples {
        energies,
        mean_z,
        acceptance: state.acceptance(),
        final_config: state.config,
    })
}

/// Outcome of classifying one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockLabel {
    Good(usize),
    Bad,
}

/// A named good block event.
#[derive(Debug, Clone)]
pub struct GoodEvent {
    pub name: String,
    pub event: BlockEvent,
}

/// Label of a block: the unique good event it satisfies, or bad.
pub fn classify_block(spins: &[Vec3], events: &[GoodEvent]) -> Result<BlockLabel> {
    let mut found: Option<usize> = None;
    for (i, g) in events.iter().enumerate() {
        if g.event.contains(spins) {
            if let Some(j) = found {
                return Err(Error::OverlappingEvents(j, i));
            }
            found = Some(i);
        }
    }
    Ok(found.map_or(BlockLabel::Bad, BlockLabel::Good))
}

/// Spins of the `B`-block translate with lower corner `corner`, in block-local order.
pub fn translate_block_spins(
    geom: &TorusGeometry,
    corner: &[usize],
    config: &ClassicalConfig,
) -> Vec<Vec3> {
    (0..geom.block_volume())
        .map(|u| {
            let mut off = vec![0; geom.d];
            let mut rem = u;
            for k in (0..geom.d).rev() {
                off[k] = rem % geom.b;
                rem /= geom.b;
            }
            let x: Vec<usize> = corner
                .iter()
                .zip(&off)
                .map(|(c, o)| (c + o) % geom.l)
                .collect();
            config.spins[geom.site(&x)]
        })
        .collect()
}

/// Default thresholds used for the good events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventParams {
    /// Cone half-angle `κ` for orientation events.
    pub kappa: f64,
    /// Energetic threshold `b` on `𝔈_p` for the large-entropy models.
    pub b: f64,
}

impl Default for EventParams {
    fn default() -> Self {
        Self {
            kappa: 0.3,
            b: 0.15,
        }
    }
}

/// The model's good block events in the reflection-positive frame.
pub fn default_good_events(
    spec: &ModelSpec,
    geom: &TorusGeometry,
    params: EventParams,
) -> Vec<GoodEvent> {
    let vol = geom.block_volume();
    let ck = params.kappa.cos();
    let cap = |name: &str, axis: Vec3| GoodEvent {
        name: name.into(),
        event: BlockEvent::uniform(SiteRegion::Cap { axis, cos_min: ck }, vol),
    };
    let double = |name: &str, axis: Vec3| GoodEvent {
        name: name.into(),
        event: BlockEvent::uniform(SiteRegion::DoubleCap { axis, cos_min: ck }, vol),
    };
    match spec.kind {
        ModelKind::HeisenbergAf => {
            vec![cap("plus", [0.0, 0.0, 1.0]), cap("minus", [0.0, 0.0, -1.0])]
        }
        ModelKind::OrbitalCompass2d => {
            vec![double("x", [1.0, 0.0, 0.0]), double("z", [0.0, 0.0, 1.0])]
        }
        ModelKind::Onetwenty3d => (1..=6)
            .map(|k| cap(&format!("v{k}"), onetwenty_vector(k)))
            .collect(),
        ModelKind::NonlinearXy | ModelKind::Nematic => {
            let bonds = Arc::new(geom.block_bonds_local());
            let b = params.b;
            let (s1, s2) = (spec.clone(), spec.clone());
            let (b1, b2) = (Arc::clone(&bonds), bonds);
            vec![
                GoodEvent {
                    name: "ordered".into(),
                    event: BlockEvent::predicate("ordered", true, move |sp| {
                        b1.iter()
                            .all(|&(u, v, dir)| s1.bond_strength(&sp[u], &sp[v], dir) >= b)
                    }),
                },
                GoodEvent {
                    name: "disordered".into(),
                    event: BlockEvent::predicate("disordered", true, move |sp| {
                        b2.iter()
                            .all(|&(u, v, dir)| s2.bond_strength(&sp[u], &sp[v], dir) < b)
                    }),
                },
            ]
        }
    }
}

/// Labels of all blocks of the tiling.
pub fn classify_all(
    geom: &TorusGeometry,
    config: &ClassicalConfig,
    events: &[GoodEvent],
) -> Result<Vec<BlockLabel>> {
    (0..geom.n_blocks())
        .map(|k| {
            let corner: Vec<usize> = geom.block_coords(k).iter().map(|t| t * geom.b).collect();
            classify_block(&translate_block_spins(geom, &corner, config), events)
        })
        .collect()
}

/// Neighboring tiles carrying distinct good labels with no bad
/// intermediate translate between them.
pub fn incompatibility_violations(
    geom: &TorusGeometry,
    config: &ClassicalConfig,
    events: &[GoodEvent],
    labels: &[BlockLabel],
) -> Result<usize> {
    let mut violations = 0;
    for k in 0..geom.n_blocks() {
        let (BlockLabel::Good(i), t) = (labels[k], geom.block_coords(k)) else {
            continue;
        };
        for (nb, dir, forward) in geom.block_neighbors(k) {
            if !forward {
                continue;
            }
            let BlockLabel::Good(j) = labels[nb] else {
                continue;
            };
            if i == j {
                continue;
            }
            let mut separated = false;
            for offset in 1..geom.b {
                let mut corner: Vec<usize> = t.iter().map(|x| x * geom.b).collect();
                corner[dir] = (corner[dir] + offset) % geom.l;
                if classify_block(&translate_block_spins(geom, &corner, config), events)?
                    == BlockLabel::Bad
                {
                    separated = true;
                    break;
                }
            }
            if !separated {
                violations += 1;
            }
        }
    }
    Ok(violations)
}

/// Options for thermodynamic integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiOptions {
    /// Gauss-Legendre nodes on `[0, β]`.
    pub nodes: usize,
    pub thermalization: usize,
    pub sweeps: usize,
    pub seed: u64,
}

impl Default for TiOptions {
    fn default() -> Self {
        Self {
            nodes: 12,
            thermalization: 500,
            sweeps: 2000,
            seed: 1,
        }
    }
}

/// `log P(regions)` under the Gibbs measure at `β`, with its standard error:
/// `log P₀ − ∫₀^β (⟨H⟩_constrained − ⟨H⟩_free) dβ′`.
pub fn log_probability_of_regions(
    system: &McSystem,
    beta: f64,
    regions: &[SiteRegion],
    opts: TiOptions,
) -> Result<(f64, f64)> {
    let log_p0: f64 = regions.iter().map(|r| r.area_fraction().ln()).sum();
    if !log_p0.is_finite() {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    if beta == 0.0 || regions.iter().all(|r| *r == SiteRegion::Full) {
        return Ok((log_p0, 0.0));
    }
    let nodes = gauss_legendre_on(opts.nodes, 0.0, beta);
    let parts = nodes
        .par_iter()
        .enumerate()
        .map(|(i, &(b, w))| -> Result<(f64, f64)> {
            let seed = opts.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let mut free = McState::new(system.clone(), b, seed);
            free.thermalize(opts.thermalization);
            let ef = batch_means(&free.run(opts.sweeps, |s, c| s.energy(c)), DEFAULT_BATCHES);
            let mut con = McState::constrained(system.clone(), b, seed, regions.to_vec())?;
            con.thermalize(opts.thermalization);
            let ec = batch_means(&con.run(opts.sweeps, |s, c| s.energy(c)), DEFAULT_BATCHES);
            if con.acceptance() < 1e-3 {
                return Err(Error::NonErgodic(con.acceptance()));
            }
            Ok((
                w * (ec.mean - ef.mean),
                w * w * (ec.std_error.powi(2) + ef.std_error.powi(2)),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let integral: f64 = parts.iter().map(|p| p.0).sum();
    let var: f64 = parts.iter().map(|p| p.1).sum();
    Ok((log_p0 - integral, var.sqrt()))
}

/// Estimate of `𝔭_{L,β}(A) = P(∩_t ϑ_t(A))^{(B/L)^d}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrakPEstimate {
    pub beta: f64,
    /// `log P(∩_t ϑ_t(A))`.
    pub log_probability: f64,
    pub log_sigma: f64,
    /// `(B/L)^d`.
    pub exponent: f64,
    pub p_hat: f64,
    /// Two-sigma interval on `p_hat`.
    pub ci: (f64, f64),
}

fn frakp_from_log(beta: f64, log_p: f64, sigma: f64, exponent: f64) -> FrakPEstimate {
    let p = |x: f64| (exponent * x).exp();
    FrakPEstimate {
        beta,
        log_probability: log_p,
        log_sigma: sigma,
        exponent,
        p_hat: p(log_p),
        ci: (p(log_p - 2.0 * sigma), p(log_p + 2.0 * sigma)),
    }
}

/// Thermodynamic-integration estimate of `𝔭_{L,β}(A)` for a product block event.
pub fn estimate_frakp(
    spec: &ModelSpec,
    geom: &TorusGeometry,
    beta: f64,
    event: &BlockEvent,
    opts: TiOptions,
) -> Result<FrakPEstimate> {
    if spec.n_sites() != geom.n_sites() {
        return Err(Error::SiteMismatch {
            left: spec.n_sites(),
            right: geom.n_sites(),
        });
    }
    let regions = disseminated_site_regions(geom, event).ok_or_else(|| {
        Error::InvalidArgument("thermodynamic integration needs a product block event".into())
    })?;
    let (log_p, sigma) =
        log_probability_of_regions(&McSystem::from_spec(spec), beta, &regions, opts)?;
    Ok(frakp_from_log(
        beta,
        log_p,
        sigma,
        1.0 / geom.n_blocks() as f64,
    ))
}

/// Per-site regions of `∩_j ϑ_{t_j}(A_j)` for product events at distinct blocks.
pub fn placed_site_regions(
    geom: &TorusGeometry,
    events: &[(Vec<usize>, BlockEvent)],
) -> Result<Vec<SiteRegion>> {
    let mut out = vec![SiteRegion::Full; geom.n_sites()];
    let base = geom.block_sites(0);
    let mut seen = std::collections::HashSet::new();
    for (t, event) in events {
        if t.len() != geom.d || !seen.insert(geom.block_index(t)) {
            return Err(Error::InvalidArgument(
                "events must sit at distinct blocks of the factor torus".into(),
            ));
        }
        let local = event.site_regions(geom.block_volume()).ok_or_else(|| {
            Error::InvalidArgument("chessboard comparison needs product block events".into())
        })?;
        let flip = geom.t_parity(t) == 1;
        for (u, &s0) in base.iter().enumerate() {
            out[geom.theta_site(t, s0)] = if flip { local[u].sigma() } else { local[u] };
        }
    }
    Ok(out)
}

/// Classical chessboard comparison `P(∩_j ϑ_{t_j}(A_j)) ≤ Π_j 𝔭(A_j)`.
pub fn chessboard_check_classical(
    spec: &ModelSpec,
    geom: &TorusGeometry,
    beta: f64,
    events: &[(Vec<usize>, BlockEvent)],
    opts: TiOptions,
) -> Result<ChessboardReport> {
    let system = McSystem::from_spec(spec);
    let regions = placed_site_regions(geom, events)?;
    let (log_lhs, s_lhs) = log_probability_of_regions(&system, beta, &regions, opts)?;
    let mut log_rhs = 0.0;
    let mut var_rhs = 0.0;
    for (j, (_, a)) in events.iter().enumerate() {
        let o = TiOptions {
            seed: opts.seed.wrapping_add(7919 * (j as u64 + 1)),
            ..opts
        };
        let est = estimate_frakp(spec, geom, beta, a, o)?;
        log_rhs += est.exponent * est.log_probability;
        var_rhs += (est.exponent * est.log_sigma).powi(2);
    }
    let (lhs, rhs) = (log_lhs.exp(), log_rhs.exp());
    let (lhs_sigma, rhs_sigma) = (lhs * s_lhs, rhs * var_rhs.sqrt());
    Ok(ChessboardReport {
        lhs,
        lhs_sigma,
        rhs,
        rhs_sigma,
        margin: rhs - lhs,
        sigma: lhs_sigma.hypot(rhs_sigma),
    })
}

/// Block statistics at one inverse temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCensus {
    pub beta: f64,
    pub event_names: Vec<String>,
    pub good_fractions: Vec<f64>,
    pub bad_fraction: f64,
    /// `−H^∞/(number of bonds)`, averaged over measurements.
    pub energy_density: BatchMeans,
    /// Site average of `(Ω·ê_x)² + (Ω·ê_z)²`.
    pub order_xz: BatchMeans,
    pub incompatibility_violations: usize,
    pub measurements: usize,
    pub acceptance: f64,
}

impl BlockCensus {
    pub fn good_fraction(&self) -> f64 {
        self.good_fractions.iter().sum()
    }
}

/// Options of a β scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub thermalization: usize,
    pub sweeps: usize,
    /// Block census taken every this many sweeps.
    pub measure_every: usize,
    pub seed: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            thermalization: 500,
            sweeps: 2000,
            measure_every: 10,
            seed: 1,
        }
    }
}

/// A β scan: one census per grid point and the energy-jump statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub census: Vec<BlockCensus>,
    /// Largest consecutive change of the energy density divided by the
    /// median consecutive change.
    pub jump_statistic: f64,
}

/// `max |Δe| / median |Δe|` over consecutive grid points.
pub fn jump_statistic(values: &[f64]) -> f64 {
    let mut diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if diffs.is_empty() {
        return 0.0;
    }
    let max = diffs.iter().copied().fold(0.0, f64::max);
    diffs.sort_by(f64::total_cmp);
    let n = diffs.len();
    let median = if n % 2 == 1 {
        diffs[n / 2]
    } else {
        0.5 * (diffs[n / 2 - 1] + diffs[n / 2])
    };
    max / median
}

/// Anneals one chain through an ascending β grid, taking a block census at each point.
pub fn beta_scan(
    spec: &ModelSpec,
    geom: &TorusGeometry,
    betas: &[f64],
    events: &[GoodEvent],
    opts: ScanOptions,
) -> Result<ScanResult> {
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(
            "beta grid must be sorted ascending".into(),
        ));
    }
    if spec.n_sites() != geom.n_sites() {
        return Err(Error::SiteMismatch {
            left: spec.n_sites(),
            right: geom.n_sites(),
        });
    }
    let n_bonds = spec.lattice.bonds.len() as f64;
    let mut state = McState::new(
        McSystem::from_spec(spec),
        betas.first().copied().unwrap_or(0.0),
        opts.seed,
    );
    let mut census = Vec::with_capacity(betas.len());
    for &beta in betas {
        state.beta = beta;
        state.thermalize(opts.thermalization);
        let mut counts = vec![0usize; events.len()];
        let mut bad = 0usize;
        let mut energies = Vec::new();
        let mut orders = Vec::new();
        let mut violations = 0;
        let every = opts.measure_every.max(1);
        for sweep in 1..=opts.sweeps {
            state.sweep();
            if sweep % every != 0 {
                continue;
            }
            let labels = classify_all(geom, &state.config, events)?;
            for l in &labels {
                match l {
                    BlockLabel::Good(i) => counts[*i] += 1,
                    BlockLabel::Bad => bad += 1,
                }
            }
            violations += incompatibility_violations(geom, &state.config, events, &labels)?;
            energies.push(-state.energy() / n_bonds);
            orders.push(
                state
                    .config
                    .spins
                    .iter()
                    .map(|s| s[0] * s[0] + s[2] * s[2])
                    .sum::<f64>()
                    / state.config.len() as f64,
            );
        }
        let total = (counts.iter().sum::<usize>() + bad).max(1) as f64;
        census.push(BlockCensus {
            beta,
            event_names: events.iter().map(|e| e.name.clone()).collect(),
            good_fractions: counts.iter().map(|&c| c as f64 / total).collect(),
            bad_fraction: bad as f64 / total,
            energy_density: batch_means(&energies, DEFAULT_BATCHES),
            order_xz: batch_means(&orders, DEFAULT_BATCHES),
            incompatibility_violations: violations,
            measurements: energies.len(),
            acceptance: state.acceptance(),
        });
    }
    let e: Vec<f64> = census.iter().map(|c| c.energy_density.mean).collect();
    Ok(ScanResult {
        jump_statistic: jump_statistic(&e),
        census,
    })
}

/// Samples configurations and counts incompatibility violations across them.
pub fn incompatibility_scan(
    spec: &ModelSpec,
    geom: &TorusGeometry,
    beta: f64,
    events: &[GoodEvent],
    configs: usize,
    seed: u64,
) -> Result<usize> {
    let mut state = McState::new(McSystem::from_spec(spec), beta, seed);
    state.thermalize(200);
    let mut total = 0;
    for _ in 0..configs {
        state.sweep();
        let labels = classify_all(geom, &state.config, events)?;
        total += incompatibility_violations(geom, &state.config, events, &labels)?;
    }
    Ok(total)
}

/// Mean of `dot(Ω_a, Ω_b)` in a chain, used by oracles on small systems.
pub fn mean_pair_alignment(
    system: McSystem,
    beta: f64,
    a: usize,
    b: usize,
    sweeps: usize,
    seed: u64,
) -> BatchMeans {
    let mut state = McState::new(system, beta, seed);
    state.thermalize(sweeps / 10);
    batch_means(
        &state.run(sweeps, |_, c| dot(&c.spins[a], &c.spins[b])),
        DEFAULT_BATCHES,
    )
}

/// Probability that every site of a closed chain of `l` classical spins
/// with bond energy `−Ω^z_r Ω^z_{r+1}` lies in `Ω^z ≥ z_min`, by
/// Gauss-Legendre discretization of the transfer kernel `e^{βzz′}`. The
/// azimuths decouple, so only the `z` marginal (uniform on `[−1, 1]`) enters.
pub fn zz_chain_cap_probability(beta: f64, z_min: f64, l: usize) -> Result<f64> {
    if !(-1.0..1.0).contains(&z_min) || l == 0 {
        return Err(Error::InvalidArgument(format!(
            "need z_min in [-1, 1) and l > 0, got {z_min} and {l}"
        )));
    }
    let trace = |lo: f64| {
        let nodes: Vec<(f64, f64)> = (0..8)
            .flat_map(|i| {
                gauss_legendre_on(
                    16,
                    lo + (1.0 - lo) * i as f64 / 8.0,
                    lo + (1.0 - lo) * (i + 1) as f64 / 8.0,
                )
            })
            .collect();
        let n = nodes.len();
        let k = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            0.5 * (nodes[i].1 * nodes[j].1).sqrt() * (beta * nodes[i].0 * nodes[j].0).exp()
        });
        k.symmetric_eigenvalues()
            .iter()
            .map(|e| e.powi(l as i32))
            .sum::<f64>()
    };
    Ok(trace(z_min) / trace(-1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{entropy_profile, EntropyFamily, Lattice, SignMode};
    use crate::su2kit::SpinMagnitude;
    use crate::torus::build_torus;

    fn half() -> SpinMagnitude {
        SpinMagnitude::new(1).unwrap()
    }

    fn heisenberg_bond() -> McSystem {
        McSystem::custom(2, vec![Bond { a: 0, b: 1, dir: 0 }], |a, b, _| -dot(a, b))
    }

    #[test]
    fn uniform_measure_and_unit_norm() {
        let geom = build_torus(2, 4, 2).unwrap();
        let spec = ModelSpec::heisenberg_af(half(), 0.0, 0.0, Lattice::torus(&geom)).unwrap();
        let run = mc_run(&spec, 0.0, 4000, 3).unwrap();
        let bm = batch_means(&run.mean_z, 32);
        assert!(bm.mean.abs() < 3.0 * bm.std_error + 1e-3, "{bm:?}");
        assert!(run
            .final_config
            .spins
            .iter()
            .all(|s| (dot(s, s) - 1.0).abs() < 1e-12));
        assert_eq!(
            mc_run(&spec, 1.0, 10, 3).unwrap().energies,
            mc_run(&spec, 1.0, 10, 3).unwrap().energies
        );
    }

    #[test]
    fn langevin_oracle_for_a_bond() {
        for beta in [0.5, 2.0, 5.0] {
            let bm = mean_pair_alignment(heisenberg_bond(), beta, 0, 1, 200_000, 7);
            let exact = 1.0 / beta.tanh() - 1.0 / beta;
            assert!(
                (bm.mean - exact).abs() < 3.0 * bm.std_error + 1e-3,
                "beta {beta}: {bm:?} vs {exact}"
            );
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn detailed_balance_two_state_discretization() {
        // Two Ising-valued sites with energy −J s₁s₂; the proposal flips a
        // uniformly chosen site and accepts with the sampler's rule.
        let (beta, j) = (0.7, 1.3);
        let energy = |s: usize| -> f64 {
            let a = if s & 1 == 1 { 1.0 } else { -1.0 };
            let b = if s & 2 == 2 { 1.0 } else { -1.0 };
            -j * a * b
        };
        let mut p = [[0.0f64; 4]; 4];
        for s in 0..4 {
            for bit in [1usize, 2] {
                let t = s ^ bit;
                let a = acceptance_probability(beta, energy(t) - energy(s));
                p[s][t] += 0.5 * a;
                p[s][s] += 0.5 * (1.0 - a);
            }
        }
        let mut pi = [0.25f64; 4];
        for _ in 0..2000 {
            let mut next = [0.0; 4];
            for s in 0..4 {
                for t in 0..4 {
                    next[t] += pi[s] * p[s][t];
                }
            }
            pi = next;
        }
        let z: f64 = (0..4).map(|s| (-beta * energy(s)).exp()).sum();
        for s in 0..4 {
            assert!((pi[s] - (-beta * energy(s)).exp() / z).abs() < 1e-3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = 0usize;
        let mut counts = [0usize; 4];
        let n = 400_000;
        for _ in 0..n {
            let t = s ^ if rng.random::<bool>() { 1 } else { 2 };
            if rng.random::<f64>() < acceptance_probability(beta, energy(t) - energy(s)) {
                s = t;
            }
            counts[s] += 1;
        }
        for s in 0..4 {
            assert!((counts[s] as f64 / n as f64 - (-beta * energy(s)).exp() / z).abs() < 5e-3);
        }
    }

    #[test]
    fn cap_sampling_stays_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let axis = normalized(&[0.3, -0.4, 0.8]);
        let mut mean = 0.0;
        for _ in 0..20_000 {
            let v = sample_cap(&mut rng, &axis, 0.5);
            let c = dot(&v, &axis);
            assert!(c >= 0.5 - 1e-12);
            mean += c;
        }
        assert!((mean / 20_000.0 - 0.75).abs() < 0.01);
    }

    #[test]
    fn classification_examples() {
        let geom = build_torus(2, 4, 2).unwrap();
        let spec = ModelSpec::heisenberg_af(half(), 0.0, 0.0, Lattice::torus(&geom)).unwrap();
        let events = default_good_events(
            &spec,
            &geom,
            EventParams {
                kappa: 0.2,
                b: 0.15,
            },
        );
        let v = [0.05f64.sin(), 0.0, 0.05f64.cos()];
        assert_eq!(
            classify_block(&[v; 4], &events).unwrap(),
            BlockLabel::Good(0)
        );
        let spec4 = ModelSpec::orbital_compass(half(), Lattice::torus(&geom)).unwrap();
        let events4 = default_good_events(
            &spec4,
            &geom,
            EventParams {
                kappa: 0.3,
                b: 0.15,
            },
        );
        let d = normalized(&[1.0, 0.0, 1.0]);
        assert_eq!(classify_block(&[d; 4], &events4).unwrap(), BlockLabel::Bad);
        let overlapping = vec![events[0].clone(), events[0].clone()];
        assert!(matches!(
            classify_block(&[v; 4], &overlapping),
            Err(Error::OverlappingEvents(0, 1))
        ));
    }

    #[test]
    fn incompatibility_holds_on_samples() {
        let geom = build_torus(2, 8, 2).unwrap();
        let spec = ModelSpec::heisenberg_af(half(), 0.0, 0.0, Lattice::torus(&geom)).unwrap();
        let events = default_good_events(&spec, &geom, EventParams::default());
        assert_eq!(
            incompatibility_scan(&spec, &geom, 3.0, &events, 300, 4).unwrap(),
            0
        );
        let prof = entropy_profile(8, &EntropyFamily::PowerMean).unwrap();
        let spec2 =
            ModelSpec::nonlinear_xy(half(), prof, SignMode::Plus, Lattice::torus(&geom)).unwrap();
        let events2 = default_good_events(&spec2, &geom, EventParams::default());
        assert_eq!(
            incompatibility_scan(&spec2, &geom, 3.0, &events2, 300, 5).unwrap(),
            0
        );
    }

    #[test]
    fn zz_chain_oracle_limits() {
        let z = 0.4;
        let p0 = zz_chain_cap_probability(0.0, z, 3).unwrap();
        assert!((p0 - ((1.0 - z) / 2.0f64).powi(3)).abs() < 1e-13);
        assert!((zz_chain_cap_probability(2.0, -1.0, 4).unwrap() - 1.0).abs() < 1e-13);
        assert!(zz_chain_cap_probability(2.0, z, 4).unwrap() > p0 * (1.0 - z) / 2.0);
        assert!(zz_chain_cap_probability(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn frakp_at_zero_beta_and_full_event() {
        let geom = build_torus(2, 4, 2).unwrap();
        let spec = ModelSpec::heisenberg_af(half(), 0.0, 0.0, Lattice::torus(&geom)).unwrap();
        let kappa = 0.4f64;
        let g = BlockEvent::uniform(
            SiteRegion::Cap {
                axis: [0.0, 0.0, 1.0],
                cos_min: kappa.cos(),
            },
            4,
        );
        let est = estimate_frakp(&spec, &geom, 0.0, &g, TiOptions::default()).unwrap();
        assert!((est.p_hat - ((1.0 - kappa.cos()) / 2.0).powi(4)).abs() < 1e-14);
        let full =
            estimate_frakp(&spec, &geom, 2.0, &BlockEvent::Full, TiOptions::default()).unwrap();
        assert_eq!(full.p_hat, 1.0);
        let pred = BlockEvent::predicate("p", true, |_| true);
        assert!(estimate_frakp(&spec, &geom, 1.0, &pred, TiOptions::default()).is_err());
    }

    #[test]
    fn classical_chessboard_is_exact_at_zero_beta() {
        let geom = build_torus(2, 4, 2).unwrap();
        let spec = ModelSpec::heisenberg_af(half(), 0.0, 0.0, Lattice::torus(&geom)).unwrap();
        let a = BlockEvent::uniform(
            SiteRegion::Cap {
                axis: normalized(&[0.2, 0.5, 1.0]),
                cos_min: 0.1,
            },
            4,
        );
        let b = BlockEvent::uniform(
            SiteRegion::Cap {
                axis: normalized(&[1.0, -0.3, 0.0]),
                cos_min: -0.2,
            },
            4,
        );
        let r = chessboard_check_classical(
            &spec,
            &geom,
            0.0,
            &[(vec![0, 0], a), (vec![1, 1], b)],
            TiOptions::default(),
        )
        .unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-14 * r.rhs);
    }

    #[test]
    fn constrained_chain_respects_regions() {
        let geom = build_torus(1, 4, 1).unwrap();
        let spec = ModelSpec::heisenberg_af(half(), 0.0, 0.0, Lattice::torus(&geom)).unwrap();
        let region = SiteRegion::Cap {
            axis: [0.0, 0.0, 1.0],
            cos_min: 0.6,
        };
        let mut st =
            McState::constrained(McSystem::from_spec(&spec), 1.0, 3, vec![region; 4]).unwrap();
        st.thermalize(50);
        st.run(200, |_, c| {
            assert!(c.spins.iter().all(|s| region.contains(s)));
            0.0
        });
        let ev = BlockEvent::uniform(region, 1);
        let bad_init = ClassicalConfig::uniform(4, [0.0, 0.0, -1.0]);
        assert!(
            McState::with_event(McSystem::from_spec(&spec), 1.0, 1, geom, ev, bad_init).is_err()
        );
    }

    #[test]
    fn jump_statistic_and_scan_order() {
        assert!((jump_statistic(&[0.0, 0.1, 0.2, 1.2, 1.3]) - 10.0).abs() < 1e-12);
        let geom = build_torus(2, 4, 2).unwrap();
        let spec = ModelSpec::heisenberg_af(half(), 0.0, 0.0, Lattice::torus(&geom)).unwrap();
        let events = default_good_events(&spec, &geom, EventParams::default());
        assert!(beta_scan(&spec, &geom, &[2.0, 1.0], &events, ScanOptions::default()).is_err());
        let scan = beta_scan(
            &spec,
            &geom,
            &[0.1, 5.0],
            &events,
            ScanOptions {
                thermalization: 100,
                sweeps: 400,
                measure_every: 4,
                seed: 2,
            },
        )
        .unwrap();
        let c = &scan.census;
        assert!((c[0].good_fraction() + c[0].bad_fraction - 1.0).abs() < 1e-12);
        assert!(c[1].energy_density.mean > c[0].energy_density.mean);
    }

    #[test]
    fn anisotropic_bad_weight_decreases() {
        let geom = build_torus(2, 8, 2).unwrap();
        let spec = ModelSpec::heisenberg_af(half(), 0.5, 0.5, Lattice::torus(&geom)).unwrap();
        let events = default_good_events(&spec, &geom, EventParams::default());
        let scan = beta_scan(
            &spec,
            &geom,
            &[5.0, 10.0, 20.0, 40.0],
            &events,
            ScanOptions {
                thermalization: 300,
                sweeps: 1500,
                measure_every: 5,
                seed: 8,
            },
        )
        .unwrap();
        let bad: Vec<f64> = scan.census.iter().map(|c| c.bad_fraction).collect();
        assert!(bad.windows(2).all(|w| w[1] <= w[0] + 0.02), "{bad:?}");
    }
}
