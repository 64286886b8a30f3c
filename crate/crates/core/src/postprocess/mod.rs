//! Derived cell fields, constitutive scatter, vertical slices and exports.

mod export;
mod locate;

use std::sync::Arc;

use crate::assembly::Assembler;
use crate::constitutive::ConstitutiveParams;
use crate::error::{Error, Result};
use crate::fem::VelocitySpace;
use crate::mesh::Triangulation;
use crate::tensor::{norm, Vec2};

pub use export::{read_scatter_csv, write_atomic, write_scatter_csv, write_slices_csv, write_vtk};
pub use locate::PointLocator;

/// Slice stations through the airfoil chord.
pub const SLICE_STATIONS: [f64; 3] = [0.2, 0.5, 0.8];
pub const SLICE_SAMPLES: usize = 400;

/// Cellwise vorticity `d_x v_y - d_y v_x`, constant on each cell.
pub fn compute_vorticity(vs: &VelocitySpace, v: &[f64]) -> Vec<f64> {
    (0..vs.mesh().num_cells())
        .map(|k| {
            let g = vs.gradient(v, k);
            g[1][0] - g[0][1]
        })
        .collect()
}

/// Sum over cells of the counter-clockwise circulation around each cell
/// boundary, integrated facet by facet. Equals the integral of the cellwise
/// vorticity for any cellwise-affine field.
pub fn facetwise_circulation(vs: &VelocitySpace, v: &[f64]) -> f64 {
    let mesh = vs.mesh();
    let mut total = 0.0;
    for k in 0..mesh.num_cells() {
        let p = mesh.cell_points(k);
        for i in 0..3 {
            let (a, b) = (p[i], p[(i + 1) % 3]);
            // midpoint rule is exact for an affine integrand
            let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let u = vs.eval(v, k, m);
            total += u[0] * (b[0] - a[0]) + u[1] * (b[1] - a[1]);
        }
    }
    total
}

pub fn integrate_cellwise(mesh: &Triangulation, f: &[f64]) -> f64 {
    f.iter()
        .enumerate()
        .map(|(k, v)| v * mesh.cell_area(k))
        .sum()
}

/// `max_K |div v_h|_K / max |v_h|`, with the speed maximum taken over cell
/// vertices (the velocity is affine on each cell). Zero for a zero field.
pub fn divergence_ratio(vs: &VelocitySpace, v: &[f64]) -> f64 {
    let mesh = vs.mesh();
    let mut div: f64 = 0.0;
    let mut speed: f64 = 0.0;
    for k in 0..mesh.num_cells() {
        div = div.max(vs.divergence(v, k).abs());
        for p in mesh.cell_points(k) {
            speed = speed.max(norm(vs.eval(v, k, p)));
        }
    }
    if speed == 0.0 {
        0.0
    } else {
        div / speed
    }
}

/// Share of `int omega^2` carried by the cells whose centroid satisfies
/// `inside`.
pub fn enstrophy_fraction<F: Fn(Vec2) -> bool>(
    mesh: &Triangulation,
    vorticity: &[f64],
    inside: F,
) -> f64 {
    let mut total = 0.0;
    let mut part = 0.0;
    for (k, w) in vorticity.iter().enumerate() {
        let e = mesh.cell_area(k) * w * w;
        total += e;
        if inside(mesh.cell_centroid(k)) {
            part += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        part / total
    }
}

/// Distance from `x` to the closest boundary facet carrying `marker`.
pub fn distance_to_marker(
    mesh: &Triangulation,
    marker: crate::mesh::BoundaryMarker,
    x: Vec2,
) -> f64 {
    let mut best = f64::INFINITY;
    for (i, f) in mesh.facets().iter().enumerate() {
        if !f.is_boundary() || f.marker != marker {
            continue;
        }
        let [a, b] = mesh.facet_points(i);
        let ab = [b[0] - a[0], b[1] - a[1]];
        let t = (((x[0] - a[0]) * ab[0] + (x[1] - a[1]) * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1]))
            .clamp(0.0, 1.0);
        let q = [a[0] + t * ab[0] - x[0], a[1] + t * ab[1] - x[1]];
        best = best.min(norm(q));
    }
    best
}

/// One cell of the constitutive scatter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub cell: usize,
    pub s_norm: f64,
    /// Norm of the lifted rate from the discrete constitutive equation.
    pub d_lifted: f64,
    /// Norm of the broken symmetric gradient.
    pub d_raw: f64,
}

pub fn constitutive_scatter(asm: &Assembler, x: &[f64]) -> Vec<ScatterPoint> {
    let disc = &asm.disc;
    let l = asm.layout();
    (0..disc.mesh.num_cells())
        .map(|k| ScatterPoint {
            cell: k,
            s_norm: disc.stress.get(&x[l.stress_range()], k).norm(),
            d_lifted: asm.lifted_strain(x, k).norm(),
            d_raw: disc
                .velocity
                .broken_sym_gradient(&x[l.velocity_range()], k)
                .norm(),
        })
        .collect()
}

/// Largest violation of `|D~| = alpha_g(|S|) |S|` over the scatter.
pub fn scatter_identity_defect(points: &[ScatterPoint], p: &ConstitutiveParams) -> f64 {
    points
        .iter()
        .map(|q| {
            (q.d_lifted - crate::constitutive::generalized_fluidity(q.s_norm, p) * q.s_norm).abs()
        })
        .fold(0.0, f64::max)
}

/// Cell data of a converged state.
#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    pub mesh: Arc<Triangulation>,
    pub params: ConstitutiveParams,
    /// Velocity at cell centroids.
    pub velocity: Vec<Vec2>,
    pub speed: Vec<f64>,
    pub vorticity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub stress_norm: Vec<f64>,
    pub strain_norm: Vec<f64>,
    pub raw_strain_norm: Vec<f64>,
}

impl FieldSnapshot {
    pub fn new(asm: &Assembler, x: &[f64]) -> Result<Self> {
        let disc = &asm.disc;
        let mesh = disc.mesh.clone();
        let l = asm.layout();
        let v = &x[l.velocity_range()];
        let velocity: Vec<Vec2> = (0..mesh.num_cells())
            .map(|k| disc.velocity.eval(v, k, mesh.cell_centroid(k)))
            .collect();
        let scatter = constitutive_scatter(asm, x);
        let snap = Self {
            params: asm.setup.params,
            speed: velocity.iter().map(|u| norm(*u)).collect(),
            velocity,
            vorticity: compute_vorticity(&disc.velocity, v),
            pressure: x[l.pressure_range()].to_vec(),
            stress_norm: scatter.iter().map(|q| q.s_norm).collect(),
            strain_norm: scatter.iter().map(|q| q.d_lifted).collect(),
            raw_strain_norm: scatter.iter().map(|q| q.d_raw).collect(),
            mesh,
        };
        for k in 0..snap.mesh.num_cells() {
            let vals = [
                snap.velocity[k][0],
                snap.velocity[k][1],
                snap.vorticity[k],
                snap.pressure[k],
                snap.stress_norm[k],
                snap.strain_norm[k],
                snap.raw_strain_norm[k],
            ];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { cell: k });
            }
        }
        Ok(snap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSample {
    pub y: f64,
    /// `None` where the point lies outside the mesh (inside the obstacle).
    pub value: Option<(f64, f64)>,
}

impl SliceSample {
    pub fn speed(&self) -> Option<f64> {
        self.value.map(|v| v.0)
    }

    pub fn vorticity(&self) -> Option<f64> {
        self.value.map(|v| v.1)
    }
}

/// `(y, |v|, |omega|)` along a vertical line.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceProfile {
    pub x: f64,
    pub samples: Vec<SliceSample>,
}

/// Samples `y_i = y0 + i (y1 - y0) / n` for `i < n`. Sample placement does
/// not depend on the state, and halving the spacing keeps the old points.
pub fn extract_slice(
    vs: &VelocitySpace,
    locator: &PointLocator,
    v: &[f64],
    x: f64,
    y_range: (f64, f64),
    n: usize,
) -> Result<SliceProfile> {
    let mesh = vs.mesh();
    let (lo, hi) = mesh.bounding_box();
    if !(x >= lo[0] && x <= hi[0]) || n == 0 || !(y_range.1 > y_range.0) {
        return Err(Error::OutsideDomain(format!(
            "slice x = {x} over y in [{}, {}] with {n} samples, domain x in [{}, {}]",
            y_range.0, y_range.1, lo[0], hi[0]
        )));
    }
    let dy = (y_range.1 - y_range.0) / n as f64;
    let samples = (0..n)
        .map(|i| {
            let y = y_range.0 + i as f64 * dy;
            let value = locator.locate(mesh, [x, y]).map(|k| {
                let u = vs.eval(v, k, [x, y]);
                let g = vs.gradient(v, k);
                (norm(u), (g[1][0] - g[0][1]).abs())
            });
            SliceSample { y, value }
        })
        .collect();
    Ok(SliceProfile { x, samples })
}

/// Relative L2 difference of the speed over samples present in both.
pub fn relative_profile_difference(a: &SliceProfile, b: &SliceProfile) -> Result<f64> {
    if a.samples.len() != b.samples.len() {
        return Err(Error::SizeMismatch(format!(
            "{} vs {} samples",
            a.samples.len(),
            b.samples.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, q) in a.samples.iter().zip(&b.samples) {
        if let (Some(u), Some(w)) = (p.speed(), q.speed()) {
            num += (u - w).powi(2);
            den += w * w;
        }
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests;
