//! Shared fixtures for the kernel benchmarks, kept here so every bench
//! target measures the same inputs.

use spinboard_core::models::{Lattice, ModelSpec};
use spinboard_core::torus::{build_torus, TorusGeometry};
use spinboard_core::{Result, SphericalPoint, SpinMagnitude};

/// A deterministic spread of points on the sphere (golden-angle spiral).
pub fn spiral_points(n: usize) -> Vec<SphericalPoint> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            SphericalPoint::new(
                (1.0 - 2.0 * (i as f64 + 0.5) / n as f64).acos(),
                golden * i as f64,
            )
        })
        .collect()
}

/// Heisenberg antiferromagnet on an `L^2` torus with unit blocks.
pub fn heisenberg_torus(spin: f64, l: usize) -> Result<(TorusGeometry, ModelSpec)> {
    let geom = build_torus(2, l, 1)?;
    let spec = ModelSpec::heisenberg_af(
        SpinMagnitude::from_spin(spin)?,
        0.5,
        0.25,
        Lattice::torus(&geom),
    )?;
    Ok((geom, spec))
}
