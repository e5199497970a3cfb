//! The named verification suites. Every suite expands its configuration
//! into independent tuples, evaluates them on the current rayon pool and
//! returns checks and tables in tuple order, so output is deterministic
//! regardless of the worker count.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use spinboard_core::classical_mc::{
    beta_scan, chessboard_check_classical, default_good_events, estimate_frakp,
    zz_chain_cap_probability, EventParams, ScanOptions, TiOptions,
};
use spinboard_core::linalg::{trace, CMat};
use spinboard_core::models::{
    bond_pattern_check, entropy_bound_constants, entropy_profile, EntropyFamily, Frame, Lattice,
    ModelSpec,
};
use spinboard_core::quantum_lab::{
    berezin_lieb_check, berezin_lieb_single, chessboard_check_quantum, gibbs_for_model, random_cap,
    sandwich_check,
};
use spinboard_core::spinwave::{
    admissible_config, deviation_identity_check, f_infinite, f_lambda, f_mc_difference,
    gaussian_bracket, minimize_f, w_hat, FMode, FmcOptions, ZetaCap,
};
use spinboard_core::stats::spearman;
use spinboard_core::su2kit::{build_spin_operators, coherent_vector, dot, overlap};
use spinboard_core::symbols::{
    default_degree, estimate_xi, lower_symbol, quantize, quantize_with, sphere_quadrature,
    upper_symbol_with, HamiltonianSymbols, QuantizationBasis, SymbolExpansion,
};
use spinboard_core::torus::{
    build_torus, enumerate_contours, peierls_sum, BlockEvent, SiteRegion, TorusGeometry,
};
use spinboard_core::{ClassicalConfig, SphericalPoint, SpinMagnitude, C64};

use crate::config::{ModelConfig, RunConfig};
use crate::error::CliError;
use crate::output::{Bound, Cell, Check, Table};

/// Tolerances after overrides and global scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub scale: f64,
    pub overrides: BTreeMap<String, f64>,
}

impl Tolerances {
    pub fn get(&self, name: &str, default: f64) -> f64 {
        self.threshold(name, default) * self.scale
    }

    /// Lower thresholds on diagnostics honour overrides but not the scale,
    /// which only loosens or tightens error magnitudes.
    pub fn threshold(&self, name: &str, default: f64) -> f64 {
        self.overrides.get(name).copied().unwrap_or(default)
    }
}

/// Checks tagged with the seed they used, plus tables.
#[derive(Debug, Default)]
pub struct SuiteOutput {
    pub checks: Vec<(u64, Check)>,
    pub tables: Vec<Table>,
}

type R<T> = Result<T, CliError>;

pub fn run_suite(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    match cfg.suite.as_str() {
        "coherent" => coherent(cfg, tol),
        "symbols" => symbols(cfg, tol),
        "sandwich" => sandwich(cfg, tol),
        "berezin" => berezin(cfg, tol),
        "chessboard-q" => chessboard_q(cfg, tol),
        "chessboard-c" => chessboard_c(cfg, tol),
        "frakp" => frakp(cfg, tol),
        "contours" => contours(cfg, tol),
        "entropy" => entropy(cfg, tol),
        "spinwave" => spinwave(cfg, tol),
        "scan" => scan(cfg, tol),
        other => Err(CliError::UnknownSuite(other.into())),
    }
}

fn first_seed(cfg: &RunConfig) -> u64 {
    cfg.seeds[0]
}

fn model_lattice(cfg: &RunConfig, model: &ModelConfig, b: usize) -> R<(TorusGeometry, Lattice)> {
    let d = model.required_dimension().unwrap_or(cfg.lattice.d);
    let geom = build_torus(d, cfg.lattice.l, b)?;
    Ok((geom, Lattice::torus(&geom)))
}

fn bond_lattice(model: &ModelConfig) -> Lattice {
    Lattice::bond(model.required_dimension().unwrap_or(1), 0)
}

fn coherent(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    let tuples: Vec<(SpinMagnitude, u64)> = cfg
        .spin_magnitudes()?
        .into_iter()
        .flat_map(|s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let rows: Vec<(SpinMagnitude, u64, f64, f64)> = tuples
        .par_iter()
        .map(|&(sp, seed)| {
            let ops = build_spin_operators(sp);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut eig, mut ovl) = (0.0f64, 0.0f64);
            for _ in 0..cfg.samples {
                let p = SphericalPoint::random(&mut rng);
                let q = SphericalPoint::random(&mut rng);
                let v = coherent_vector(sp, p);
                let n = p.cartesian();
                eig = eig.max((ops.dot(&n) * &v.amplitudes - v.amplitudes.scale(sp.s())).norm());
                let formula = ((1.0 + dot(&n, &q.cartesian())) / 2.0)
                    .max(0.0)
                    .powf(sp.s());
                let inner = coherent_vector(sp, q).amplitudes.dotc(&v.amplitudes);
                ovl = ovl
                    .max((overlap(sp, &p, &q).norm() - formula).abs())
                    .max((inner.norm() - formula).abs());
            }
            (sp, seed, eig, ovl)
        })
        .collect();
    let mut out = SuiteOutput::default();
    let mut table = Table::new(
        "coherent",
        &["S", "seed", "eigen_residual", "overlap_residual"],
    );
    for (sp, seed, eig, ovl) in rows {
        let inputs = json!({ "S": sp.s(), "samples": cfg.samples });
        out.checks.push((
            seed,
            Check::new(
                "coherent_eigen_residual",
                inputs.clone(),
                eig,
                Bound::AtMost(tol.get("coherent_eigen_residual", 1e-10)),
                None,
                true,
            ),
        ));
        out.checks.push((
            seed,
            Check::new(
                "coherent_overlap_residual",
                inputs,
                ovl,
                Bound::AtMost(tol.get("coherent_overlap_residual", 1e-12)),
                None,
                true,
            ),
        ));
        table.push(vec![sp.s().into(), seed.into(), eig.into(), ovl.into()]);
    }
    out.tables.push(table);
    Ok(out)
}

fn random_matrix(d: usize, hermitian: bool, rng: &mut ChaCha8Rng) -> CMat {
    let m = CMat::from_fn(d, d, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    if hermitian {
        (&m + m.adjoint()).scale(0.5)
    } else {
        m
    }
}

fn symbols(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    let seed = first_seed(cfg);
    let spins = cfg.spin_magnitudes()?;
    let rows: Vec<[f64; 4]> = spins
        .par_iter()
        .map(|&sp| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ sp.two_s() as u64);
            let d = sp.dim();
            let quad = sphere_quadrature(default_degree(sp));
            let resolution =
                (quantize_with(|_| C64::new(1.0, 0.0), sp, &quad) - CMat::identity(d, d)).norm();
            let basis = QuantizationBasis::new(sp);
            let (mut tr, mut rt) = (0.0f64, 0.0f64);
            for _ in 0..cfg.samples {
                let a = random_matrix(d, false, &mut rng);
                let integral = quad
                    .integrate(|p| lower_symbol(&a, &[*p], sp).expect("matching dimension"))
                    * (d as f64 / (4.0 * PI));
                tr = tr.max((integral - trace(&a)).norm());
                let h = random_matrix(d, true, &mut rng);
                rt = rt.max(
                    (quantize(
                        &upper_symbol_with(&h, &basis).expect("matching dimension"),
                        sp,
                    ) - &h)
                        .norm(),
                );
            }
            let two_s = sp.two_s() as usize;
            let high = (two_s + 1..=two_s + 3)
                .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
                .map(|(l, m)| {
                    quantize(&SymbolExpansion::single(l, m, C64::new(1.0, 0.0)), sp).norm()
                })
                .fold(0.0, f64::max);
            [resolution, tr, rt, high]
        })
        .collect();
    let mut out = SuiteOutput::default();
    let mut table = Table::new(
        "symbols",
        &[
            "S",
            "resolution_residual",
            "trace_residual",
            "round_trip_residual",
            "high_l_image",
        ],
    );
    for (sp, r) in spins.iter().zip(&rows) {
        let inputs = json!({ "S": sp.s(), "samples": cfg.samples });
        for (name, v, t) in [
            ("resolution_residual", r[0], 1e-8),
            ("trace_residual", r[1], 1e-8),
            ("round_trip_residual", r[2], 1e-9),
            ("high_l_image", r[3], 1e-9),
        ] {
            out.checks.push((
                seed,
                Check::new(
                    name,
                    inputs.clone(),
                    v,
                    Bound::AtMost(tol.get(name, t)),
                    None,
                    true,
                ),
            ));
        }
        table.push(vec![
            sp.s().into(),
            r[0].into(),
            r[1].into(),
            r[2].into(),
            r[3].into(),
        ]);
    }
    out.tables.push(table);

    let tuples: Vec<(ModelConfig, SpinMagnitude)> = cfg
        .models
        .iter()
        .flat_map(|m| {
            spins
                .iter()
                .filter(|s| s.two_s() <= 8)
                .map(move |&s| (m.clone(), s))
        })
        .collect();
    let gaps = tuples
        .par_iter()
        .map(|(m, sp)| -> R<_> {
            let (_, lattice) = model_lattice(cfg, m, 1)?;
            let spec = m.build(*sp, lattice)?;
            Ok(estimate_xi(&spec, cfg.samples.min(200), seed)?)
        })
        .collect::<R<Vec<_>>>()?;
    let mut xi_table = Table::new(
        "symbols-xi",
        &["model", "S", "xi", "upper_config_sup", "lower_config_sup"],
    );
    for ((m, sp), g) in tuples.iter().zip(&gaps) {
        let inputs = json!({ "model": m.label(), "S": sp.s() });
        out.checks.push((
            seed,
            Check::new(
                "xi_dominates_config_sup",
                inputs,
                g.xi - g.upper_config_sup.max(g.lower_config_sup),
                Bound::AtLeast(-tol.get("xi_dominates_config_sup", 1e-12)),
                None,
                true,
            ),
        ));
        xi_table.push(vec![
            m.label().into(),
            sp.s().into(),
            g.xi.into(),
            g.upper_config_sup.into(),
            g.lower_config_sup.into(),
        ]);
    }
    out.tables.push(xi_table);
    Ok(out)
}

fn sandwich(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    let spins = cfg.spin_magnitudes()?;
    let tuples: Vec<(ModelConfig, SpinMagnitude)> = cfg
        .models
        .iter()
        .flat_map(|m| spins.iter().map(move |&s| (m.clone(), s)))
        .collect();
    let results = tuples
        .par_iter()
        .map(|(m, sp)| -> R<Vec<(f64, u64, f64, f64)>> {
            let (_, lattice) = model_lattice(cfg, m, 1)?;
            let spec = m.build(*sp, lattice)?;
            let ens = gibbs_for_model(&spec, Frame::Rp, 1.0)?;
            let symbols = HamiltonianSymbols::new(&spec, Frame::Rp)?;
            let mut rows = Vec::new();
            for &beta in &cfg.betas {
                let e = ens.at_beta(beta);
                for &seed in &cfg.seeds {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let (mut slack, mut kappa) = (f64::INFINITY, f64::NEG_INFINITY);
                    for _ in 0..cfg.samples {
                        let r = sandwich_check(
                            &e,
                            &symbols,
                            &ClassicalConfig::random(spec.n_sites(), &mut rng),
                        )?;
                        slack = slack.min(r.lower_slack);
                        kappa = kappa.max(r.kappa);
                    }
                    rows.push((beta, seed, slack, kappa));
                }
            }
            Ok(rows)
        })
        .collect::<R<Vec<_>>>()?;
    let mut out = SuiteOutput::default();
    let mut table = Table::new(
        "sandwich",
        &["model", "S", "beta", "lower_slack", "kappa", "pass"],
    );
    let t = tol.get("lower_slack", 1e-10);
    for ((m, sp), rows) in tuples.iter().zip(results) {
        for (beta, seed, slack, kappa) in rows {
            let c = Check::new(
                "lower_slack",
                json!({ "model": m.label(), "S": sp.s(), "beta": beta, "samples": cfg.samples }),
                slack,
                Bound::AtLeast(-t),
                None,
                true,
            );
            table.push(vec![
                m.label().into(),
                sp.s().into(),
                beta.into(),
                slack.into(),
                kappa.into(),
                c.pass.into(),
            ]);
            out.checks.push((seed, c));
        }
    }
    out.tables.push(table);
    Ok(out)
}

fn berezin(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    let seed = first_seed(cfg);
    let spins = cfg.spin_magnitudes()?;
    let mut tuples = Vec::new();
    for m in std::iter::once(None).chain(cfg.models.iter().map(Some)) {
        for &sp in &spins {
            for &beta in &cfg.betas {
                tuples.push((m.cloned(), sp, beta));
            }
        }
    }
    let reports = tuples
        .par_iter()
        .map(|(m, sp, beta)| -> R<_> {
            match m {
                None => Ok(berezin_lieb_single(
                    &build_spin_operators(*sp).sz.unscale(sp.s()),
                    *sp,
                    *beta,
                    80,
                )?),
                Some(m) => {
                    let spec = m.build(*sp, bond_lattice(m))?;
                    Ok(berezin_lieb_check(
                        &spec,
                        *beta,
                        if *beta > 3.0 { 48 } else { 32 },
                    )?)
                }
            }
        })
        .collect::<R<Vec<_>>>()?;
    let mut out = SuiteOutput::default();
    let mut table = Table::new(
        "berezin",
        &[
            "model",
            "S",
            "beta",
            "classical_lower",
            "quantum_mid",
            "classical_upper",
            "pass",
        ],
    );
    let t = tol.get("berezin_lieb_slack", 1e-8);
    for ((m, sp, beta), r) in tuples.iter().zip(reports) {
        let label = m
            .as_ref()
            .map_or("single_spin_zeeman".to_string(), ModelConfig::label);
        let inputs = json!({ "model": label, "S": sp.s(), "beta": beta });
        let slack = (r.lower_slack() / r.quantum_mid).min(r.upper_slack() / r.quantum_mid);
        let c = Check::new(
            "berezin_lieb_slack",
            inputs.clone(),
            slack,
            Bound::AtLeast(-t),
            None,
            true,
        );
        let mut pass = c.pass;
        out.checks.push((seed, c));
        if m.is_none() && *beta > 0.0 {
            let exact = beta.sinh() / beta;
            let oc = Check::new(
                "berezin_lieb_closed_form",
                inputs,
                (r.classical_lower - exact).abs() / exact,
                Bound::AtMost(tol.get("berezin_lieb_closed_form", 1e-10)),
                None,
                true,
            );
            pass &= oc.pass;
            out.checks.push((seed, oc));
        }
        table.push(vec![
            label.into(),
            sp.s().into(),
            (*beta).into(),
            r.classical_lower.into(),
            r.quantum_mid.into(),
            r.classical_upper.into(),
            pass.into(),
        ]);
    }
    out.tables.push(table);
    Ok(out)
}

fn block_index(d: usize, first: usize) -> Vec<usize> {
    let mut t = vec![0; d];
    t[0] = first;
    t
}

fn chessboard_q(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    let spins = cfg.spin_magnitudes()?;
    let mut tuples = Vec::new();
    for m in &cfg.models {
        for &sp in &spins {
            for &beta in &cfg.betas {
                for &seed in &cfg.seeds {
                    tuples.push((m.clone(), sp, beta, seed));
                }
            }
        }
    }
    let reports = tuples
        .par_iter()
        .map(|(m, sp, beta, seed)| -> R<_> {
            let (geom, lattice) = model_lattice(cfg, m, cfg.lattice.b)?;
            let spec = m.build(*sp, lattice)?;
            let ens = gibbs_for_model(&spec, Frame::Rp, *beta)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let vol = geom.block_volume();
            let events = vec![
                (
                    block_index(geom.d, 0),
                    BlockEvent::Product(vec![random_cap(&mut rng, -0.5, 0.3); vol]),
                ),
                (
                    block_index(geom.d, 1),
                    BlockEvent::Product(vec![random_cap(&mut rng, -0.5, 0.3); vol]),
                ),
            ];
            Ok(chessboard_check_quantum(
                &ens,
                &geom,
                &events,
                cfg.samples,
                *seed,
            )?)
        })
        .collect::<R<Vec<_>>>()?;
    let mut out = SuiteOutput::default();
    let mut table = Table::new(
        "chessboard-q",
        &[
            "model",
            "S",
            "beta",
            "seed",
            "lhs",
            "lhs_sigma",
            "rhs",
            "rhs_sigma",
            "margin",
            "sigma",
            "pass",
        ],
    );
    for ((m, sp, beta, seed), r) in tuples.iter().zip(reports) {
        let z = sigma_ratio(r.margin, r.sigma);
        let c = Check::new(
            "chessboard_quantum_sigmas",
            json!({ "model": m.label(), "S": sp.s(), "beta": beta, "samples": cfg.samples }),
            z,
            Bound::AtLeast(-tol.get("chessboard_quantum_sigmas", 3.0)),
            Some(r.sigma),
            false,
        );
        table.push(vec![
            m.label().into(),
            sp.s().into(),
            (*beta).into(),
            (*seed).into(),
            r.lhs.into(),
            r.lhs_sigma.into(),
            r.rhs.into(),
            r.rhs_sigma.into(),
            r.margin.into(),
            r.sigma.into(),
            c.pass.into(),
        ]);
        out.checks.push((*seed, c));
    }
    out.tables.push(table);
    Ok(out)
}

fn sigma_ratio(margin: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        margin / sigma
    } else if margin >= 0.0 {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

fn chessboard_c(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    let mut tuples = Vec::new();
    for m in &cfg.models {
        for &beta in &cfg.betas {
            for &seed in &cfg.seeds {
                tuples.push((m.clone(), beta, seed));
            }
        }
    }
    let reports = tuples
        .par_iter()
        .map(|(m, beta, seed)| -> R<_> {
            let (geom, lattice) = model_lattice(cfg, m, cfg.lattice.b)?;
            let spec = m.build(SpinMagnitude::new(1)?, lattice)?;
            let vol = geom.block_volume();
            let a = BlockEvent::uniform(
                SiteRegion::Cap {
                    axis: [0.0, 0.0, 1.0],
                    cos_min: 0.3,
                },
                vol,
            );
            let b = BlockEvent::uniform(
                SiteRegion::Cap {
                    axis: [0.0, 0.0, -1.0],
                    cos_min: 0.1,
                },
                vol,
            );
            let events = vec![(block_index(geom.d, 0), a), (block_index(geom.d, 1), b)];
            Ok(chessboard_check_classical(
                &spec,
                &geom,
                *beta,
                &events,
                TiOptions {
                    sweeps: cfg.sweeps,
                    seed: *seed,
                    ..TiOptions::default()
                },
            )?)
        })
        .collect::<R<Vec<_>>>()?;
    let mut out = SuiteOutput::default();
    let mut table = Table::new(
        "chessboard-c",
        &[
            "model", "beta", "seed", "lhs", "rhs", "margin", "sigma", "pass",
        ],
    );
    for ((m, beta, seed), r) in tuples.iter().zip(reports) {
        let inputs = json!({ "model": m.label(), "beta": beta, "sweeps": cfg.sweeps });
        let c = if *beta == 0.0 {
            Check::new(
                "chessboard_classical_zero_beta",
                inputs,
                (r.lhs - r.rhs).abs() / r.rhs,
                Bound::AtMost(tol.get("chessboard_classical_zero_beta", 1e-12)),
                None,
                true,
            )
        } else {
            Check::new(
                "chessboard_classical_sigmas",
                inputs,
                sigma_ratio(r.margin, r.sigma),
                Bound::AtLeast(-tol.get("chessboard_classical_sigmas", 3.0)),
                Some(r.sigma),
                false,
            )
        };
        table.push(vec![
            m.label().into(),
            (*beta).into(),
            (*seed).into(),
            r.lhs.into(),
            r.rhs.into(),
            r.margin.into(),
            r.sigma.into(),
            c.pass.into(),
        ]);
        out.checks.push((*seed, c));
    }
    out.tables.push(table);
    Ok(out)
}

/// Cap half-angle used by the frakp suite.
const FRAKP_KAPPA: f64 = 0.9;

fn frakp(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    let mut tuples = Vec::new();
    for m in &cfg.models {
        for &beta in &cfg.betas {
            for &seed in &cfg.seeds {
                tuples.push((m.clone(), beta, seed));
            }
        }
    }
    let results = tuples
        .par_iter()
        .map(|(m, beta, seed)| -> R<_> {
            let (geom, lattice) = model_lattice(cfg, m, cfg.lattice.b)?;
            let spec = m.build(SpinMagnitude::new(1)?, lattice)?;
            let event = BlockEvent::uniform(
                SiteRegion::Cap {
                    axis: [0.0, 0.0, 1.0],
                    cos_min: FRAKP_KAPPA.cos(),
                },
                geom.block_volume(),
            );
            let est = estimate_frakp(
                &spec,
                &geom,
                *beta,
                &event,
                TiOptions {
                    sweeps: cfg.sweeps,
                    seed: *seed,
                    ..TiOptions::default()
                },
            )?;
            let zz_chain = geom.d == 1
                && matches!(m, ModelConfig::Heisenberg { j1, j2 } if *j1 == 0.0 && *j2 == 0.0);
            let oracle = if zz_chain {
                Some(zz_chain_cap_probability(*beta, FRAKP_KAPPA.cos(), geom.l)?.powf(est.exponent))
            } else {
                None
            };
            Ok((geom, est, oracle))
        })
        .collect::<R<Vec<_>>>()?;
    let mut out = SuiteOutput::default();
    let mut table = Table::new(
        "frakp",
        &[
            "model", "beta", "seed", "p_hat", "ci_low", "ci_high", "oracle",
        ],
    );
    for ((m, beta, seed), (geom, est, oracle)) in tuples.iter().zip(results) {
        let inputs = json!({ "model": m.label(), "beta": beta, "kappa": FRAKP_KAPPA, "d": geom.d, "L": geom.l, "B": geom.b });
        if *beta == 0.0 {
            let exact = ((1.0 - FRAKP_KAPPA.cos()) / 2.0).powi(geom.block_volume() as i32);
            out.checks.push((
                *seed,
                Check::new(
                    "frakp_zero_beta",
                    inputs.clone(),
                    (est.p_hat - exact).abs() / exact,
                    Bound::AtMost(tol.get("frakp_zero_beta", 1e-12)),
                    None,
                    true,
                ),
            ));
        } else if let Some(o) = oracle {
            out.checks.push((
                *seed,
                Check::new(
                    "frakp_transfer_oracle",
                    inputs.clone(),
                    (est.p_hat - o).abs() / o,
                    Bound::AtMost(tol.get("frakp_transfer_oracle", 0.02)),
                    Some(est.log_sigma),
                    false,
                ),
            ));
        }
        table.push(vec![
            m.label().into(),
            (*beta).into(),
            (*seed).into(),
            est.p_hat.into(),
            est.ci.0.into(),
            est.ci.1.into(),
            oracle.unwrap_or(f64::NAN).into(),
        ]);
    }
    out.tables.push(table);
    Ok(out)
}

fn flood_fill_connected(geom: &TorusGeometry, members: &[bool]) -> bool {
    let Some(first) = members.iter().position(|&m| m) else {
        return true;
    };
    let mut seen = vec![false; members.len()];
    seen[first] = true;
    let mut queue = VecDeque::from([first]);
    while let Some(v) = queue.pop_front() {
        for (w, _, _) in geom.block_neighbors(v) {
            if members[w] && !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    members.iter().zip(&seen).all(|(&m, &s)| !m || s)
}

const PEIERLS_Q: [f64; 6] = [0.0, 0.001, 0.01, 0.05, 0.1, 0.25];

fn contours(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    let seed = first_seed(cfg);
    let (d, b) = (cfg.lattice.d, cfg.lattice.b);
    let sides: Vec<usize> = (2..=cfg.lattice.l / b).collect();
    let mut out = SuiteOutput::default();
    let mut table = Table::new(
        "contours",
        &["factor_side", "t1", "t2", "contours", "q", "peierls_sum"],
    );
    for side in sides {
        let geom = build_torus(d, side * b, b)?;
        let n = geom.n_blocks();
        let per_t2 = (1..n)
            .into_par_iter()
            .map(|t2| -> R<_> {
                let cs = enumerate_contours(&geom, 0, t2)?;
                let mut defects = 0usize;
                for c in &cs {
                    let inside: Vec<bool> =
                        (0..n).map(|i| c.blocks.binary_search(&i).is_ok()).collect();
                    let outside: Vec<bool> = inside.iter().map(|x| !x).collect();
                    let ext = c.exterior.iter().map(Vec::len).max().unwrap_or(0);
                    let ok = inside[0]
                        && !inside[t2]
                        && flood_fill_connected(&geom, &inside)
                        && flood_fill_connected(&geom, &outside)
                        && c.boundary_size() == c.boundary_by_dir.iter().sum::<usize>()
                        && 2 * d * ext >= c.boundary_size();
                    defects += usize::from(!ok);
                }
                let sums = PEIERLS_Q
                    .iter()
                    .map(|&q| peierls_sum(&geom, 0, t2, q))
                    .collect::<Result<Vec<f64>, _>>()?;
                Ok((t2, cs.len(), defects, sums))
            })
            .collect::<R<Vec<_>>>()?;
        for (t2, count, defects, sums) in per_t2 {
            let inputs = json!({ "d": d, "factor_side": side, "t1": 0, "t2": t2 });
            out.checks.push((
                seed,
                Check::new(
                    "contour_defects",
                    inputs.clone(),
                    defects as f64,
                    Bound::AtMost(0.0),
                    None,
                    true,
                ),
            ));
            let drop = sums.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
            out.checks.push((
                seed,
                Check::new(
                    "peierls_monotone_drop",
                    inputs,
                    drop,
                    Bound::AtMost(tol.get("peierls_monotone_drop", 1e-15)),
                    None,
                    true,
                ),
            ));
            for (q, s) in PEIERLS_Q.iter().zip(&sums) {
                table.push(vec![
                    side.into(),
                    0usize.into(),
                    t2.into(),
                    count.into(),
                    (*q).into(),
                    (*s).into(),
                ]);
            }
        }
    }
    out.tables.push(table);
    Ok(out)
}

fn entropy(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    let seed = first_seed(cfg);
    let mut out = SuiteOutput::default();
    let mut table = Table::new(
        "entropy",
        &[
            "model",
            "p",
            "epsilon_p",
            "a_p_t",
            "delta_raw",
            "delta_prime_raw",
            "kappa2_feasible",
            "b_below_b0",
        ],
    );
    for m in &cfg.models {
        let p = match m {
            ModelConfig::Xy { p, .. } | ModelConfig::Nematic { p } => *p,
            _ => continue,
        };
        let profile = entropy_profile(p, &EntropyFamily::PowerMean)?;
        let bounds = entropy_bound_constants(cfg.lattice.d, 0.15, 0.1, 1.0, &profile)?;
        out.checks.push((
            seed,
            Check::new(
                "profile_normalization",
                json!({ "model": m.label(), "p": p }),
                (profile.e_p(1.0) - 1.0).abs(),
                Bound::AtMost(tol.get("profile_normalization", 1e-12)),
                None,
                true,
            ),
        ));
        table.push(vec![
            m.label().into(),
            p.into(),
            profile.epsilon_p.into(),
            bounds.a_p_t.into(),
            bounds.delta_raw.into(),
            bounds.delta_prime_raw.into(),
            bounds.kappa2_feasible.into(),
            bounds.b_below_b0.into(),
        ]);
    }
    for d in [2, 3] {
        let (patterns, margin) = bond_pattern_check(d)?;
        out.checks.push((
            seed,
            Check::new(
                "bond_pattern_margin",
                json!({ "d": d, "patterns": patterns }),
                margin,
                Bound::AtLeast(-tol.get("bond_pattern_margin", 1e-15)),
                None,
                true,
            ),
        ));
    }
    out.tables.push(table);
    Ok(out)
}

fn catalan() -> f64 {
    (0..200_000)
        .map(|n| 1.0 / ((4 * n + 1) as f64).powi(2) - 1.0 / ((4 * n + 3) as f64).powi(2))
        .sum()
}

fn spinwave(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    let seed = first_seed(cfg);
    let mut out = SuiteOutput::default();
    let scan = minimize_f(1.0)?;
    let mut table = Table::new(
        "spinwave",
        &[
            "theta_star_deg",
            "lambda",
            "L",
            "F_lambda",
            "F_extrapolated",
            "ci_halfwidth",
        ],
    );
    let rows = scan
        .grid
        .par_iter()
        .map(|&(deg, _)| -> R<Vec<Vec<Cell>>> {
            let w = w_hat(deg.to_radians());
            let fi = f_infinite(&w)?;
            let mut rows = Vec::new();
            for &(lambda, _) in fi.ladder.iter().rev() {
                for l in [256usize, 512] {
                    let f = f_lambda(&w, lambda, FMode::Lattice(l))?;
                    rows.push(vec![
                        deg.into(),
                        lambda.into(),
                        l.into(),
                        f.into(),
                        fi.value.into(),
                        fi.stability.into(),
                    ]);
                }
            }
            Ok(rows)
        })
        .collect::<R<Vec<_>>>()?;
    for r in rows.into_iter().flatten() {
        table.push(r);
    }
    out.tables.push(table);

    let fx = f_infinite(&[1.0, 0.0, 0.0])?.value;
    let f45 = f_infinite(&w_hat(PI / 4.0))?.value;
    let target = 0.5 * (4.0 * catalan() / PI - 2f64.ln());
    out.checks.push((
        seed,
        Check::new(
            "spinwave_axis_value",
            json!({ "theta_star_deg": 0 }),
            fx.abs(),
            Bound::AtMost(tol.get("spinwave_axis_value", 1e-3)),
            None,
            true,
        ),
    ));
    out.checks.push((
        seed,
        Check::new(
            "spinwave_diagonal_value",
            json!({ "theta_star_deg": 45, "target": target }),
            (f45 - target).abs(),
            Bound::AtMost(tol.get("spinwave_diagonal_value", 5e-3)),
            None,
            true,
        ),
    ));
    let axes = scan.argmin == vec![0.0, 90.0];
    out.checks.push((
        seed,
        Check::new(
            "spinwave_argmin_axes",
            json!({ "argmin": scan.argmin }),
            f64::from(u8::from(axes)),
            Bound::AtLeast(1.0),
            None,
            true,
        ),
    ));
    out.checks.push((
        seed,
        Check::new(
            "spinwave_interior_gap",
            json!({ "resolution_deg": 1.0 }),
            scan.gap,
            Bound::AtLeast(0.0),
            None,
            true,
        ),
    ));

    let l = cfg.lattice.l;
    let mut mc_table = Table::new(
        "spinwave-mc",
        &[
            "beta",
            "delta",
            "L",
            "seed",
            "dF_mc",
            "sigma",
            "dF_gaussian",
            "bracket_low",
            "bracket_high",
            "F_mc_45",
        ],
    );
    for &beta in &cfg.betas {
        let delta = beta.powf(-5.0 / 12.0);
        for &s in &cfg.seeds {
            let opts = FmcOptions {
                seed: s,
                sweeps: cfg.sweeps.max(100),
                thermalization: cfg.sweeps.max(100) / 2,
                ..FmcOptions::default()
            };
            let single = spinboard_core::spinwave::f_mc_direct(l, delta, beta, PI / 4.0, opts)?;
            let (diff, sigma) = f_mc_difference(l, delta, beta, PI / 4.0, opts)?;
            let bracket = gaussian_bracket(l, delta, beta, PI / 4.0, cfg.samples.max(200), s)?;
            let inputs = json!({ "beta": beta, "delta": delta, "L": l });
            let exact = f45 - fx;
            out.checks.push((
                s,
                Check::new(
                    "spinwave_mc_relative_error",
                    inputs.clone(),
                    (diff - exact).abs() / exact,
                    Bound::AtMost(tol.get("spinwave_mc_relative_error", 0.25)),
                    Some(sigma),
                    false,
                ),
            ));
            let outside = (bracket.lower - single.value).max(single.value - bracket.upper);
            out.checks.push((
                s,
                Check::new(
                    "spinwave_bracket_excess",
                    inputs,
                    outside,
                    Bound::AtMost(tol.get("spinwave_bracket_excess", 3.0 * single.sigma)),
                    Some(single.sigma),
                    false,
                ),
            ));
            mc_table.push(vec![
                beta.into(),
                delta.into(),
                l.into(),
                s.into(),
                diff.into(),
                sigma.into(),
                exact.into(),
                bracket.lower.into(),
                bracket.upper.into(),
                single.value.into(),
            ]);
        }
    }
    out.tables.push(mc_table);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev_table = Table::new("spinwave-deviation", &["delta", "L", "residual", "c"]);
    for delta in [0.1, 0.05, 0.025] {
        let cfg8 = admissible_config(8, delta, 0.7, ZetaCap::DeltaSquared, &mut rng);
        let r = deviation_identity_check(&cfg8, 8, delta, ZetaCap::DeltaSquared)?;
        out.checks.push((
            seed,
            Check::new(
                "deviation_identity_constant",
                json!({ "delta": delta, "L": 8 }),
                r.c,
                Bound::AtMost(tol.get("deviation_identity_constant", 10.0)),
                None,
                true,
            ),
        ));
        dev_table.push(vec![
            delta.into(),
            8usize.into(),
            r.residual.into(),
            r.c.into(),
        ]);
    }
    out.tables.push(dev_table);
    Ok(out)
}

fn scan(cfg: &RunConfig, tol: &Tolerances) -> R<SuiteOutput> {
    let seed = first_seed(cfg);
    let mut out = SuiteOutput::default();
    for m in &cfg.models {
        let (geom, lattice) = model_lattice(cfg, m, cfg.lattice.b)?;
        let spec: ModelSpec = m.build(SpinMagnitude::new(1)?, lattice)?;
        let events = default_good_events(&spec, &geom, EventParams::default());
        let betas: Vec<f64> = if !cfg.betas.is_empty() {
            cfg.betas.clone()
        } else {
            match m {
                ModelConfig::Heisenberg { .. } => {
                    (0..8).map(|i| 0.1 * 50f64.powf(i as f64 / 7.0)).collect()
                }
                ModelConfig::Xy { .. } | ModelConfig::Nematic { .. } => {
                    (0..40).map(|i| 1.0 + 5.0 * i as f64 / 39.0).collect()
                }
                _ => (0..10).map(|i| 50f64.powf(i as f64 / 9.0)).collect(),
            }
        };
        let opts = ScanOptions {
            sweeps: cfg.sweeps,
            seed,
            ..ScanOptions::default()
        };
        let result = beta_scan(&spec, &geom, &betas, &events, opts)?;
        let names: Vec<String> = events.iter().map(|e| e.name.clone()).collect();
        let mut header: Vec<String> = vec!["beta".into()];
        header.extend(names.iter().map(|n| format!("good_{n}")));
        header.extend(
            [
                "bad",
                "energy_density",
                "energy_sigma",
                "order_xz",
                "order_sigma",
                "incompatibility_violations",
                "acceptance",
            ]
            .map(String::from),
        );
        let label = m.label();
        let mut table = Table {
            name: format!("scan-{}", spec.kind.name()),
            header,
            rows: Vec::new(),
        };
        for c in &result.census {
            let mut row: Vec<Cell> = vec![c.beta.into()];
            row.extend(c.good_fractions.iter().map(|&f| Cell::from(f)));
            row.extend([
                c.bad_fraction.into(),
                c.energy_density.mean.into(),
                c.energy_density.std_error.into(),
                c.order_xz.mean.into(),
                c.order_xz.std_error.into(),
                c.incompatibility_violations.into(),
                c.acceptance.into(),
            ]);
            table.push(row);
        }
        out.tables.push(table);
        let violations: usize = result
            .census
            .iter()
            .map(|c| c.incompatibility_violations)
            .sum();
        out.checks.push((
            seed,
            Check::new(
                "scan_incompatibility_violations",
                json!({ "model": label }),
                violations as f64,
                Bound::AtMost(0.0),
                None,
                false,
            ),
        ));
        let first = &result.census[0];
        let last = result.census.last().expect("nonempty grid");
        let inputs = json!({ "model": label, "betas": betas.len(), "L": geom.l, "B": geom.b });
        let diagnostic = match m {
            ModelConfig::Heisenberg { .. } => Check::new(
                "scan_good_fraction_rise",
                inputs,
                last.good_fraction() - first.good_fraction(),
                Bound::AtLeast(tol.threshold("scan_good_fraction_rise", 0.5)),
                None,
                false,
            ),
            ModelConfig::Xy { .. } | ModelConfig::Nematic { .. } => Check::new(
                "scan_energy_jump",
                inputs,
                result.jump_statistic,
                Bound::AtLeast(tol.threshold("scan_energy_jump", 5.0)),
                None,
                false,
            ),
            _ => {
                let order: Vec<f64> = result.census.iter().map(|c| c.order_xz.mean).collect();
                Check::new(
                    "scan_order_spearman",
                    inputs,
                    spearman(&betas, &order),
                    Bound::AtLeast(tol.threshold("scan_order_spearman", 0.9)),
                    None,
                    false,
                )
            }
        };
        out.checks.push((seed, diagnostic));
    }
    Ok(out)
}
