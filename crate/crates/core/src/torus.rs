//! Periodic lattices, block tilings, block reflections and contour
//! enumeration on the factor torus.
//!
//! Sites of `T_L = (Z/LZ)^d` are indexed row-major with the first coordinate
//! most significant. Blocks `Λ_B + B t` are indexed the same way on the
//! factor torus `T_{L/B}`, and the sites inside a block are listed in the
//! row-major order of their offsets within the block.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::su2kit::{dot, ClassicalConfig, Vec3};

/// A bond `(r, r + e_dir, dir)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub dir: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGeometry {
    pub d: usize,
    pub l: usize,
    pub b: usize,
}

pub fn build_torus(d: usize, l: usize, b: usize) -> Result<TorusGeometry> {
    if d == 0 {
        return Err(Error::Geometry("dimension must be at least 1".into()));
    }
    if l == 0 || l % 2 != 0 {
        return Err(Error::Geometry(format!(
            "side L = {l} must be positive and even"
        )));
    }
    if b == 0 || l % b != 0 {
        return Err(Error::Geometry(format!(
            "block side B = {b} does not divide L = {l}"
        )));
    }
    if (l as f64).powi(d as i32) > 1e9 {
        return Err(Error::Geometry(format!("torus {l}^{d} is too large")));
    }
    Ok(TorusGeometry { d, l, b })
}

fn to_coords(mut idx: usize, side: usize, d: usize) -> Vec<usize> {
    let mut out = vec![0; d];
    for k in (0..d).rev() {
        out[k] = idx % side;
        idx /= side;
    }
    out
}

fn from_coords(coords: &[usize], side: usize) -> usize {
    coords.iter().fold(0, |acc, &x| acc * side + x)
}

impl TorusGeometry {
    pub fn n_sites(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Side of the factor torus `T_{L/B}`.
    pub fn factor_side(&self) -> usize {
        self.l / self.b
    }

    pub fn n_blocks(&self) -> usize {
        self.factor_side().pow(self.d as u32)
    }

    pub fn block_volume(&self) -> usize {
        self.b.pow(self.d as u32)
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        to_coords(site, self.l, self.d)
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        from_coords(coords, self.l)
    }

    pub fn parity(&self, site: usize) -> usize {
        self.coords(site).iter().sum::<usize>() % 2
    }

    /// `r ± e_dir` with periodic wrap.
    pub fn neighbor(&self, site: usize, dir: usize, forward: bool) -> usize {
        let mut x = self.coords(site);
        x[dir] = if forward {
            (x[dir] + 1) % self.l
        } else {
            (x[dir] + self.l - 1) % self.l
        };
        self.site(&x)
    }

    /// All bonds `(r, r + e_j)`, one per site and direction. On a side-2
    /// torus each geometric pair therefore appears twice, which is the
    /// periodic extension of the infinite-lattice sum.
    pub fn bonds(&self) -> Vec<Bond> {
        let mut out = Vec::with_capacity(self.n_sites() * self.d);
        for a in 0..self.n_sites() {
            for dir in 0..self.d {
                out.push(Bond {
                    a,
                    b: self.neighbor(a, dir, true),
                    dir,
                });
            }
        }
        out
    }

    /// Adjacency lists: for each site, `(neighbor, dir)` over both
    /// orientations, with multiplicity matching [`bonds`](Self::bonds).
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n_sites()];
        for bond in self.bonds() {
            adj[bond.a].push((bond.b, bond.dir));
            adj[bond.b].push((bond.a, bond.dir));
        }
        adj
    }

    pub fn block_coords(&self, block: usize) -> Vec<usize> {
        to_coords(block, self.factor_side(), self.d)
    }

    pub fn block_index(&self, t: &[usize]) -> usize {
        from_coords(t, self.factor_side())
    }

    pub fn block_of(&self, site: usize) -> usize {
        let x: Vec<usize> = self.coords(site).iter().map(|v| v / self.b).collect();
        self.block_index(&x)
    }

    /// Sites of block `t`, ordered by their offset inside the block.
    pub fn block_sites(&self, block: usize) -> Vec<usize> {
        let t = self.block_coords(block);
        (0..self.block_volume())
            .map(|u| {
                let off = to_coords(u, self.b, self.d);
                let x: Vec<usize> = t
                    .iter()
                    .zip(&off)
                    .map(|(ti, oi)| ti * self.b + oi)
                    .collect();
                self.site(&x)
            })
            .collect()
    }

    /// Bonds with both endpoints inside the block and not wrapping around
    /// it, as pairs of local (in-block) site positions.
    pub fn block_bonds_local(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.block_volume() {
            let off = to_coords(u, self.b, self.d);
            for dir in 0..self.d {
                if off[dir] + 1 < self.b {
                    let mut o2 = off.clone();
                    o2[dir] += 1;
                    out.push((u, from_coords(&o2, self.b), dir));
                }
            }
        }
        out
    }

    pub fn t_parity(&self, t: &[usize]) -> usize {
        t.iter().sum::<usize>() % 2
    }

    /// The site map `θ_t`: a composition of reflections through planes
    /// between sites in every direction with odd `t_i` and translations by
    /// `B t_i` in the other directions. It maps block 0 onto block `t`.
    pub fn theta_site(&self, t: &[usize], site: usize) -> usize {
        let x = self.coords(site);
        let (l, b) = (self.l as isize, self.b as isize);
        let y: Vec<usize> = x
            .iter()
            .zip(t)
            .map(|(&xi, &ti)| {
                let (xi, ti) = (xi as isize, ti as isize);
                let v = if ti % 2 == 1 {
                    (ti + 1) * b - 1 - xi
                } else {
                    xi + ti * b
                };
                v.rem_euclid(l) as usize
            })
            .collect();
        self.site(&y)
    }

    /// Site permutation of `θ_t` as a vector `perm[r] = θ_t(r)`.
    pub fn theta_permutation(&self, t: &[usize]) -> Vec<usize> {
        (0..self.n_sites()).map(|r| self.theta_site(t, r)).collect()
    }

    /// `θ_t` acting on configurations: the spin at `r` moves to `θ_t(r)`.
    pub fn theta_config(&self, t: &[usize], config: &ClassicalConfig) -> ClassicalConfig {
        let mut spins = config.spins.clone();
        for (r, s) in config.spins.iter().enumerate() {
            spins[self.theta_site(t, r)] = *s;
        }
        ClassicalConfig { spins }
    }

    /// `ϑ_t`: `θ_t` followed by the xz-plane flip `σ` when `t` has odd parity.
    pub fn vartheta_config(&self, t: &[usize], config: &ClassicalConfig) -> ClassicalConfig {
        let moved = self.theta_config(t, config);
        if self.t_parity(t) == 1 {
            moved.sigma()
        } else {
            moved
        }
    }

    /// Translation of a configuration by the lattice vector `shift`.
    pub fn translate_config(&self, shift: &[usize], config: &ClassicalConfig) -> ClassicalConfig {
        let mut spins = config.spins.clone();
        for (r, s) in config.spins.iter().enumerate() {
            let y: Vec<usize> = self
                .coords(r)
                .iter()
                .zip(shift)
                .map(|(x, v)| (x + v) % self.l)
                .collect();
            spins[self.site(&y)] = *s;
        }
        ClassicalConfig { spins }
    }

    /// Spins that block `t` presents to an event defined on block 0: the
    /// spin at `θ_t(u)` for each local position `u`, flipped by `σ` when
    /// `t` is odd. A configuration lies in `ϑ_t(A)` iff these lie in `A`.
    pub fn pulled_back_block(&self, t: &[usize], config: &ClassicalConfig) -> Vec<Vec3> {
        let flip = self.t_parity(t) == 1;
        self.block_sites(0)
            .into_iter()
            .map(|u| {
                let s = config.spins[self.theta_site(t, u)];
                if flip {
                    [s[0], -s[1], s[2]]
                } else {
                    s
                }
            })
            .collect()
    }

    /// Neighbors of a block on the factor torus: `(block, dir, forward)`.
    pub fn block_neighbors(&self, block: usize) -> Vec<(usize, usize, bool)> {
        let side = self.factor_side();
        let t = self.block_coords(block);
        let mut out = Vec::with_capacity(2 * self.d);
        for dir in 0..self.d {
            for forward in [true, false] {
                let mut u = t.clone();
                u[dir] = if forward {
                    (u[dir] + 1) % side
                } else {
                    (u[dir] + side - 1) % side
                };
                out.push((self.block_index(&u), dir, forward));
            }
        }
        out
    }
}

/// A region of the unit sphere for a single spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SiteRegion {
    Full,
    /// `Ω·axis ≥ cos_min`.
    Cap {
        axis: Vec3,
        cos_min: f64,
    },
    /// `|Ω·axis| ≥ cos_min`.
    DoubleCap {
        axis: Vec3,
        cos_min: f64,
    },
}

impl SiteRegion {
    pub fn contains(&self, v: &Vec3) -> bool {
        match self {
            SiteRegion::Full => true,
            SiteRegion::Cap { axis, cos_min } => dot(axis, v) >= *cos_min,
            SiteRegion::DoubleCap { axis, cos_min } => dot(axis, v).abs() >= *cos_min,
        }
    }

    /// Fraction of the sphere's area covered by the region.
    pub fn area_fraction(&self) -> f64 {
        match self {
            SiteRegion::Full => 1.0,
            SiteRegion::Cap { cos_min, .. } => (0.5 * (1.0 - cos_min.clamp(-1.0, 1.0))).max(0.0),
            SiteRegion::DoubleCap { cos_min, .. } => {
                if *cos_min <= 0.0 {
                    1.0
                } else {
                    (1.0 - cos_min.min(1.0)).max(0.0)
                }
            }
        }
    }

    pub fn sigma(&self) -> Self {
        let f = |a: &Vec3| [a[0], -a[1], a[2]];
        match self {
            SiteRegion::Full => SiteRegion::Full,
            SiteRegion::Cap { axis, cos_min } => SiteRegion::Cap {
                axis: f(axis),
                cos_min: *cos_min,
            },
            SiteRegion::DoubleCap { axis, cos_min } => SiteRegion::DoubleCap {
                axis: f(axis),
                cos_min: *cos_min,
            },
        }
    }
}

type Predicate = Arc<dyn Fn(&[Vec3]) -> bool + Send + Sync>;

/// A measurable condition on the spins of one `B`-block, given in the
/// block's local site order.
#[derive(Clone)]
pub enum BlockEvent {
    Full,
    /// Independent per-site constraints, one region per local site.
    Product(Vec<SiteRegion>),
    /// An arbitrary predicate with a descriptive name and a flag saying
    /// whether it is claimed to be invariant under `σ`.
    Predicate {
        name: String,
        sigma_invariant: bool,
        test: Predicate,
    },
    Complement(Box<BlockEvent>),
    Union(Vec<BlockEvent>),
    Intersection(Vec<BlockEvent>),
}

impl fmt::Debug for BlockEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockEvent::Full => write!(f, "Full"),
            BlockEvent::Product(r) => f.debug_tuple("Product").field(r).finish(),
            BlockEvent::Predicate { name, .. } => write!(f, "Predicate({name})"),
            BlockEvent::Complement(e) => f.debug_tuple("Complement").field(e).finish(),
            BlockEvent::Union(es) => f.debug_tuple("Union").field(es).finish(),
            BlockEvent::Intersection(es) => f.debug_tuple("Intersection").field(es).finish(),
        }
    }
}

impl BlockEvent {
    pub fn uniform(region: SiteRegion, block_volume: usize) -> Self {
        BlockEvent::Product(vec![region; block_volume])
    }

    pub fn predicate(
        name: impl Into<String>,
        sigma_invariant: bool,
        test: impl Fn(&[Vec3]) -> bool + Send + Sync + 'static,
    ) -> Self {
        BlockEvent::Predicate {
            name: name.into(),
            sigma_invariant,
            test: Arc::new(test),
        }
    }

    pub fn contains(&self, spins: &[Vec3]) -> bool {
        match self {
            BlockEvent::Full => true,
            BlockEvent::Product(regions) => regions.iter().zip(spins).all(|(r, s)| r.contains(s)),
            BlockEvent::Predicate { test, .. } => test(spins),
            BlockEvent::Complement(e) => !e.contains(spins),
            BlockEvent::Union(es) => es.iter().any(|e| e.contains(spins)),
            BlockEvent::Intersection(es) => es.iter().all(|e| e.contains(spins)),
        }
    }

    /// Probability under the uniform product measure when it is available
    /// in closed form.
    pub fn product_probability(&self) -> Option<f64> {
        match self {
            BlockEvent::Full => Some(1.0),
            BlockEvent::Product(regions) => {
                Some(regions.iter().map(SiteRegion::area_fraction).product())
            }
            BlockEvent::Complement(e) => e.product_probability().map(|p| 1.0 - p),
            _ => None,
        }
    }

    /// Per-site regions for product-type events.
    pub fn site_regions(&self, block_volume: usize) -> Option<Vec<SiteRegion>> {
        match self {
            BlockEvent::Full => Some(vec![SiteRegion::Full; block_volume]),
            BlockEvent::Product(r) => Some(r.clone()),
            _ => None,
        }
    }

    /// Whether the event is known to satisfy `σ(A) = A` by construction.
    pub fn declared_sigma_invariant(&self) -> bool {
        match self {
            BlockEvent::Full => true,
            BlockEvent::Product(r) => r.iter().all(|x| x.sigma() == *x),
            BlockEvent::Predicate {
                sigma_invariant, ..
            } => *sigma_invariant,
            BlockEvent::Complement(e) => e.declared_sigma_invariant(),
            BlockEvent::Union(es) | BlockEvent::Intersection(es) => {
                es.iter().all(BlockEvent::declared_sigma_invariant)
            }
        }
    }

    /// Membership in `ϑ_t(A)` for a full configuration.
    pub fn contains_reflected(
        &self,
        geom: &TorusGeometry,
        t: &[usize],
        config: &ClassicalConfig,
    ) -> bool {
        self.contains(&geom.pulled_back_block(t, config))
    }

    /// Membership in the disseminated event `∩_t ϑ_t(A)`.
    pub fn contains_disseminated(&self, geom: &TorusGeometry, config: &ClassicalConfig) -> bool {
        (0..geom.n_blocks()).all(|k| self.contains_reflected(geom, &geom.block_coords(k), config))
    }
}

/// Regions each site must satisfy for the disseminated product event
/// `∩_t ϑ_t(A)`, or `None` when `A` is not of product type.
pub fn disseminated_site_regions(
    geom: &TorusGeometry,
    event: &BlockEvent,
) -> Option<Vec<SiteRegion>> {
    let local = event.site_regions(geom.block_volume())?;
    let mut out = vec![SiteRegion::Full; geom.n_sites()];
    let base = geom.block_sites(0);
    for k in 0..geom.n_blocks() {
        let t = geom.block_coords(k);
        let flip = geom.t_parity(&t) == 1;
        for (u, &s0) in base.iter().enumerate() {
            let r = if flip { local[u].sigma() } else { local[u] };
            out[geom.theta_site(&t, s0)] = r;
        }
    }
    Some(out)
}

/// Samples `count` configurations and reports whether the predicate value
/// agrees on `x` and `σ(x)` for every sample.
pub fn sigma_invariance_by_sampling<R: rand::Rng + ?Sized>(
    event: &BlockEvent,
    block_volume: usize,
    count: usize,
    rng: &mut R,
    generator: impl Fn(&mut R) -> Vec3,
) -> bool {
    (0..count).all(|_| {
        let spins: Vec<Vec3> = (0..block_volume).map(|_| generator(rng)).collect();
        let flipped: Vec<Vec3> = spins.iter().map(|s| [s[0], -s[1], s[2]]).collect();
        event.contains(&spins) == event.contains(&flipped)
    })
}

/// A connected set of blocks with connected complement, together with its
/// boundary data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    /// Sorted block indices of `𝕐`.
    pub blocks: Vec<usize>,
    /// Boundary edges `(block in 𝕐, dir, forward)` whose far end is outside.
    pub boundary: Vec<(usize, usize, bool)>,
    /// `|∂_j 𝕐|` for each direction `j`.
    pub boundary_by_dir: Vec<usize>,
    /// `𝕐_j^ext`: blocks outside `𝕐` with a `j`-neighbor inside, per direction.
    pub exterior: Vec<Vec<usize>>,
}

impl ContourSet {
    pub fn boundary_size(&self) -> usize {
        self.boundary.len()
    }

    fn build(geom: &TorusGeometry, blocks: Vec<usize>) -> Self {
        let mut inside = vec![false; geom.n_blocks()];
        for &b in &blocks {
            inside[b] = true;
        }
        let mut boundary = Vec::new();
        let mut boundary_by_dir = vec![0; geom.d];
        let mut ext = vec![vec![false; geom.n_blocks()]; geom.d];
        for &b in &blocks {
            for (nb, dir, fwd) in geom.block_neighbors(b) {
                if !inside[nb] {
                    boundary.push((b, dir, fwd));
                    boundary_by_dir[dir] += 1;
                    ext[dir][nb] = true;
                }
            }
        }
        let exterior = ext
            .into_iter()
            .map(|m| {
                m.iter()
                    .enumerate()
                    .filter(|(_, &x)| x)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        ContourSet {
            blocks,
            boundary,
            boundary_by_dir,
            exterior,
        }
    }
}

/// Default cap on the factor-torus size for exhaustive enumeration.
pub fn default_contour_cap(d: usize) -> usize {
    4usize.pow(d as u32)
}

fn connected_on_factor(geom: &TorusGeometry, members: &[bool]) -> bool {
    let Some(start) = members.iter().position(|&m| m) else {
        return true;
    };
    let mut seen = vec![false; members.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for (w, _, _) in geom.block_neighbors(v) {
            if members[w] && !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == members.iter().filter(|&&m| m).count()
}

/// All `𝕐 ⊂ T_{L/B}` that are connected, have connected complement, contain
/// `t1` and avoid `t2`.
pub fn enumerate_contours(geom: &TorusGeometry, t1: usize, t2: usize) -> Result<Vec<ContourSet>> {
    enumerate_contours_with_cap(geom, t1, t2, default_contour_cap(geom.d))
}

pub fn enumerate_contours_with_cap(
    geom: &TorusGeometry,
    t1: usize,
    t2: usize,
    cap: usize,
) -> Result<Vec<ContourSet>> {
    let n = geom.n_blocks();
    if n > cap {
        return Err(Error::ContourCap { blocks: n, cap });
    }
    if t1 >= n || t2 >= n {
        return Err(Error::InvalidArgument(format!(
            "block index out of range for {n} blocks"
        )));
    }
    if t1 == t2 {
        return Err(Error::InvalidArgument("t1 and t2 must be distinct".into()));
    }
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            let mut nb: Vec<usize> = geom
                .block_neighbors(v)
                .into_iter()
                .map(|x| x.0)
                .filter(|&w| w != v)
                .collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect();

    // Each connected set containing t1 is produced exactly once: a candidate
    // is offered to a branch only through the first set member that sees it,
    // and once a sibling branch has declined it, it stays excluded.
    let mut found = Vec::new();
    let mut seen = vec![false; n];
    seen[t1] = true;
    seen[t2] = true;
    let mut ext = Vec::new();
    for &w in &neighbors[t1] {
        if !seen[w] {
            seen[w] = true;
            ext.push(w);
        }
    }
    let mut members = vec![false; n];
    members[t1] = true;
    grow(&neighbors, &mut members, ext, seen, &mut found);

    let mut out = Vec::new();
    for set in found {
        let complement: Vec<bool> = set.iter().map(|&m| !m).collect();
        if connected_on_factor(geom, &complement) {
            let blocks: Vec<usize> = (0..n).filter(|&i| set[i]).collect();
            out.push(ContourSet::build(geom, blocks));
        }
    }
    out.sort_by(|a, b| a.blocks.cmp(&b.blocks));
    Ok(out)
}

fn grow(
    neighbors: &[Vec<usize>],
    members: &mut Vec<bool>,
    mut ext: Vec<usize>,
    seen: Vec<bool>,
    found: &mut Vec<Vec<bool>>,
) {
    found.push(members.clone());
    while let Some(v) = ext.pop() {
        let mut next_ext = ext.clone();
        let mut next_seen = seen.clone();
        for &w in &neighbors[v] {
            if !next_seen[w] {
                next_seen[w] = true;
                next_ext.push(w);
            }
        }
        members[v] = true;
        grow(neighbors, members, next_ext, next_seen, found);
        members[v] = false;
    }
}

/// `Σ_𝕐 2 (4q)^{|∂𝕐|/(4d)}` over the enumerated contours.
pub fn peierls_sum(geom: &TorusGeometry, t1: usize, t2: usize, q: f64) -> Result<f64> {
    if !(0.0..=0.25).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "q = {q} must lie in [0, 1/4]"
        )));
    }
    let contours = enumerate_contours(geom, t1, t2)?;
    Ok(peierls_sum_over(&contours, geom.d, q))
}

pub fn peierls_sum_over(contours: &[ContourSet], d: usize, q: f64) -> f64 {
    let base = 4.0 * q;
    contours
        .iter()
        .map(|c| 2.0 * base.powf(c.boundary_size() as f64 / (4.0 * d as f64)))
        .sum()
}
