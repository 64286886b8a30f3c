//! Residual and Newton Jacobian of the three-field LDG system.
//!
//! Unknowns are stored as one vector `x = [S | v | p]`: two stress components
//! per cell, two BDM dofs per facet, one pressure per cell. For a stress test
//! tensor `T`, velocity test function `w` and pressure test `q` the residual is
//!
//! ```text
//! (i)   (D_h(v), T) - <[[v (x) n]], {{T}}> - (alpha_g(|S|) S, T)
//! (ii)  (S, D_h(w)) - <{{S}}, [[w (x) n]]> + delta <h^-1 [[v (x) n]], [[w (x) n]]>
//!       - Re (v (x) v, grad_h w) + Re <(v.n) v_up, [[w]]> - (p, div w)
//!       + gamma (div v, div w) - Ga (f, w) + <p_N, w.n>_N
//! (iii) -(div v, q)
//! ```
//!
//! Facet terms run over interior and Dirichlet facets, where the boundary jump
//! is `(v - g) (x) n`. Natural facets carry only the prescribed pressure and
//! the upwind convective flux. Normal Dirichlet dofs are imposed strongly.

mod kernels;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::constitutive::{s_from_d_regularized, ConstitutiveParams};
use crate::error::{Error, Result};
use crate::fem::{PressureSpace, StressSpace, VelocitySpace, EDGE_GAUSS3, TRIANGLE_DEGREE4};
use crate::mesh::{BoundaryMarker, Triangulation};
use crate::sparse::{CscMatrix, CscPattern, SubmatrixMap};
use crate::tensor::{SymTensor2, Vec2};

use kernels::{boundary_kernel, cell_kernel, interior_kernel, Local};

pub type VectorField = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

pub fn vector_field<F: Fn(Vec2) -> Vec2 + Send + Sync + 'static>(f: F) -> VectorField {
    Arc::new(f)
}

#[derive(Clone)]
pub enum BoundaryCondition {
    /// Prescribed velocity.
    Dirichlet(VectorField),
    /// `(S - pI) n = -pressure n`.
    Traction { pressure: f64 },
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet(_) => f.write_str("Dirichlet(..)"),
            BoundaryCondition::Traction { pressure } => {
                write!(f, "Traction {{ pressure: {pressure} }}")
            }
        }
    }
}

#[derive(Clone)]
pub struct ProblemSetup {
    pub params: ConstitutiveParams,
    /// Jump penalty.
    pub delta: f64,
    /// Augmented Lagrangian weight.
    pub gamma: f64,
    pub boundary: BTreeMap<BoundaryMarker, BoundaryCondition>,
    pub force: Option<VectorField>,
    /// Upwind facet flux for the convective term.
    pub convective_flux: bool,
}

impl fmt::Debug for ProblemSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSetup")
            .field("params", &self.params)
            .field("delta", &self.delta)
            .field("gamma", &self.gamma)
            .field("boundary", &self.boundary)
            .field("force", &self.force.is_some())
            .field("convective_flux", &self.convective_flux)
            .finish()
    }
}

impl ProblemSetup {
    pub fn new(params: ConstitutiveParams) -> Self {
        Self {
            params,
            delta: 10.0,
            gamma: 1e4,
            boundary: BTreeMap::new(),
            force: None,
            convective_flux: true,
        }
    }

    pub fn with_condition(mut self, marker: BoundaryMarker, bc: BoundaryCondition) -> Self {
        self.boundary.insert(marker, bc);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Offsets of the three fields in the unknown vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub num_cells: usize,
    pub num_facets: usize,
}

impl DofLayout {
    pub fn stress(&self, cell: usize, c: usize) -> usize {
        2 * cell + c
    }
    pub fn velocity(&self, dof: usize) -> usize {
        2 * self.num_cells + dof
    }
    pub fn pressure(&self, cell: usize) -> usize {
        2 * self.num_cells + 2 * self.num_facets + cell
    }
    pub fn stress_range(&self) -> std::ops::Range<usize> {
        0..2 * self.num_cells
    }
    pub fn velocity_range(&self) -> std::ops::Range<usize> {
        2 * self.num_cells..2 * self.num_cells + 2 * self.num_facets
    }
    pub fn pressure_range(&self) -> std::ops::Range<usize> {
        self.top_len()..self.len()
    }
    /// Length of the stress-velocity block.
    pub fn top_len(&self) -> usize {
        2 * self.num_cells + 2 * self.num_facets
    }
    pub fn len(&self) -> usize {
        3 * self.num_cells + 2 * self.num_facets
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mesh plus the three discrete spaces.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Arc<Triangulation>,
    pub stress: StressSpace,
    pub velocity: VelocitySpace,
    pub pressure: PressureSpace,
    pub layout: DofLayout,
}

impl Discretization {
    pub fn new(mesh: Arc<Triangulation>) -> Self {
        let layout = DofLayout {
            num_cells: mesh.num_cells(),
            num_facets: mesh.num_facets(),
        };
        Self {
            stress: StressSpace::new(mesh.clone()),
            velocity: VelocitySpace::new(mesh.clone()),
            pressure: PressureSpace::new(mesh.clone()),
            mesh,
            layout,
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.layout.len()
    }
}

/// The triplet `(S_h, v_h, p_h)` stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub x: Vec<f64>,
    pub layout: DofLayout,
}

impl DiscreteState {
    pub fn zeros(layout: DofLayout) -> Self {
        Self {
            x: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn s(&self) -> &[f64] {
        &self.x[self.layout.stress_range()]
    }
    pub fn v(&self) -> &[f64] {
        &self.x[self.layout.velocity_range()]
    }
    pub fn p(&self) -> &[f64] {
        &self.x[self.layout.pressure_range()]
    }
    pub fn s_mut(&mut self) -> &mut [f64] {
        let r = self.layout.stress_range();
        &mut self.x[r]
    }
    pub fn v_mut(&mut self) -> &mut [f64] {
        let r = self.layout.velocity_range();
        &mut self.x[r]
    }
    pub fn p_mut(&mut self) -> &mut [f64] {
        let r = self.layout.pressure_range();
        &mut self.x[r]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FacetKind {
    Interior,
    Dirichlet,
    Natural(f64),
}

/// Boundary data resolved against a mesh.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub(crate) kind: Vec<FacetKind>,
    /// Dirichlet values at the facet quadrature points.
    pub(crate) g: Vec<[Vec2; 3]>,
    /// Strongly imposed velocity dofs (indices into `v`) and their values.
    pub constrained: Vec<(usize, f64)>,
    /// No natural boundary: the pressure is defined up to a constant.
    pub pressure_nullspace: bool,
}

impl BoundaryData {
    pub fn new(disc: &Discretization, setup: &ProblemSetup) -> Result<Self> {
        let mesh = &disc.mesh;
        for m in mesh.boundary_markers() {
            if !setup.boundary.contains_key(&m) {
                return Err(Error::MissingBoundaryCondition(m.to_string()));
            }
        }
        let nf = mesh.num_facets();
        let mut kind = vec![FacetKind::Interior; nf];
        let mut g = vec![[[0.0; 2]; 3]; nf];
        let mut moments: Vec<(usize, f64, f64)> = Vec::new();
        let mut flux = 0.0;
        let mut flux_scale = 0.0;
        let mut dirichlet_length = 0.0;
        for (i, f) in mesh.facets().iter().enumerate() {
            if !f.is_boundary() {
                continue;
            }
            match &setup.boundary[&f.marker] {
                BoundaryCondition::Traction { pressure } => kind[i] = FacetKind::Natural(*pressure),
                BoundaryCondition::Dirichlet(field) => {
                    kind[i] = FacetKind::Dirichlet;
                    let [a, b] = mesh.facet_points(i);
                    let (mut l0, mut l1) = (0.0, 0.0);
                    for (q, (x, t, w)) in EDGE_GAUSS3.points_on(a, b).enumerate() {
                        let gx = field(x);
                        if !(gx[0].is_finite() && gx[1].is_finite()) {
                            return Err(Error::InvalidParameter(format!(
                                "non-finite Dirichlet data at ({}, {})",
                                x[0], x[1]
                            )));
                        }
                        g[i][q] = gx;
                        let gn = gx[0] * f.normal[0] + gx[1] * f.normal[1];
                        l0 += w * gn;
                        l1 += w * gn * 3.0 * (2.0 * t - 1.0);
                        flux_scale += w * f.length * gx[0].hypot(gx[1]);
                    }
                    flux += f.length * l0;
                    dirichlet_length += f.length;
                    moments.push((i, l0, l1));
                }
            }
        }
        let pressure_nullspace = !kind.iter().any(|k| matches!(k, FacetKind::Natural(_)));
        if pressure_nullspace && !moments.is_empty() {
            if flux.abs() > 1e-8 * flux_scale.max(f64::MIN_POSITIVE) && flux.abs() > 1e-14 {
                return Err(Error::IncompatibleFlux { flux });
            }
            // remove the quadrature-level flux defect uniformly
            let shift = flux / dirichlet_length;
            for m in moments.iter_mut() {
                m.1 -= shift;
            }
        }
        let constrained = moments
            .iter()
            .flat_map(|&(i, l0, l1)| [(2 * i, l0), (2 * i + 1, l1)])
            .collect();
        Ok(Self {
            kind,
            g,
            constrained,
            pressure_nullspace,
        })
    }
}

/// Jacobian and right-hand side of one Newton step, in saddle-point form
/// `[[A, B^T], [B, 0]]` over `[S, v | p]`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CscMatrix,
    /// `-F(x)`.
    pub rhs: Vec<f64>,
    pub layout: DofLayout,
    pub pressure_nullspace: bool,
}

impl LinearSystem {
    pub fn top_len(&self) -> usize {
        self.layout.top_len()
    }
}

/// Precomputed sparsity and boundary data for one problem on one mesh.
pub struct Assembler {
    pub disc: Arc<Discretization>,
    pub setup: ProblemSetup,
    pub bdata: BoundaryData,
    pattern: Arc<CscPattern>,
    /// State-independent part of the residual (forcing, natural pressure).
    fixed: Vec<f64>,
    top_map: SubmatrixMap,
    b_map: SubmatrixMap,
    bt_map: SubmatrixMap,
}

const CHUNK: usize = 2048;

impl Assembler {
    pub fn new(disc: Arc<Discretization>, setup: ProblemSetup) -> Result<Self> {
        setup.validate()?;
        let bdata = BoundaryData::new(&disc, &setup)?;
        let pattern = Arc::new(build_pattern(&disc));
        let layout = disc.layout;
        let top_map = SubmatrixMap::new(&pattern, 0..layout.top_len(), 0..layout.top_len());
        let b_map = SubmatrixMap::new(&pattern, layout.pressure_range(), 0..layout.top_len());
        let bt_map = SubmatrixMap::new(&pattern, 0..layout.top_len(), layout.pressure_range());
        let mut out = Self {
            disc,
            setup,
            bdata,
            pattern,
            fixed: Vec::new(),
            top_map,
            b_map,
            bt_map,
        };
        out.fixed = out.fixed_residual();
        Ok(out)
    }

    /// Replaces the constitutive parameters, keeping mesh and boundary data.
    pub fn set_params(&mut self, params: ConstitutiveParams) -> Result<()> {
        params.validate()?;
        self.setup.params = params;
        self.fixed = self.fixed_residual();
        Ok(())
    }

    pub fn layout(&self) -> DofLayout {
        self.disc.layout
    }

    pub fn pattern(&self) -> &Arc<CscPattern> {
        &self.pattern
    }

    pub fn top_map(&self) -> &SubmatrixMap {
        &self.top_map
    }

    pub fn b_map(&self) -> &SubmatrixMap {
        &self.b_map
    }

    pub fn bt_map(&self) -> &SubmatrixMap {
        &self.bt_map
    }

    /// Writes the strongly imposed normal dofs into `x`.
    pub fn impose_dirichlet(&self, x: &mut [f64]) {
        let l = self.layout();
        for &(d, val) in &self.bdata.constrained {
            x[l.velocity(d)] = val;
        }
    }

    pub fn initial_state(&self) -> DiscreteState {
        let mut s = DiscreteState::zeros(self.layout());
        self.impose_dirichlet(&mut s.x);
        s
    }

    fn fixed_residual(&self) -> Vec<f64> {
        let l = self.layout();
        let mut r = vec![0.0; l.len()];
        let mesh = &self.disc.mesh;
        let vs = &self.disc.velocity;
        if let Some(f) = &self.setup.force {
            let ga = self.setup.params.ga;
            for k in 0..mesh.num_cells() {
                let b = vs.cell(k);
                for (x, w) in TRIANGLE_DEGREE4.points_on(&mesh.cell_points(k)) {
                    let fx = f(x);
                    let phi = b.eval(x);
                    for j in 0..6 {
                        r[l.velocity(b.dofs[j])] -=
                            ga * b.area * w * (fx[0] * phi[j][0] + fx[1] * phi[j][1]);
                    }
                }
            }
        }
        for (i, fc) in mesh.facets().iter().enumerate() {
            if let FacetKind::Natural(pn) = self.bdata.kind[i] {
                let b = vs.cell(fc.cells[0]);
                let [a, bb] = mesh.facet_points(i);
                for (x, _, w) in EDGE_GAUSS3.points_on(a, bb) {
                    let phi = b.eval(x);
                    for j in 0..6 {
                        r[l.velocity(b.dofs[j])] += pn
                            * w
                            * fc.length
                            * (phi[j][0] * fc.normal[0] + phi[j][1] * fc.normal[1]);
                    }
                }
            }
        }
        r
    }

    fn locals(&self, x: &[f64], jac: bool) -> Result<Vec<Vec<Local>>> {
        let nc = self.disc.mesh.num_cells();
        let nf = self.disc.mesh.num_facets();
        let total = nc + nf;
        let chunks: Vec<usize> = (0..total).step_by(CHUNK).collect();
        chunks
            .into_par_iter()
            .map(|start| {
                let end = (start + CHUNK).min(total);
                let mut out = Vec::with_capacity(end - start);
                for item in start..end {
                    let local = if item < nc {
                        cell_kernel(self, x, item, jac)?
                    } else {
                        let f = item - nc;
                        match self.bdata.kind[f] {
                            FacetKind::Interior => interior_kernel(self, x, f, jac),
                            _ => boundary_kernel(self, x, f, jac),
                        }
                    };
                    out.push(local);
                }
                Ok(out)
            })
            .collect()
    }

    /// Nonlinear residual `F(x)`. Constrained rows hold `x - g`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let l = self.layout();
        if x.len() != l.len() {
            return Err(Error::SizeMismatch(format!(
                "state has {} entries, expected {}",
                x.len(),
                l.len()
            )));
        }
        let mut r = self.fixed.clone();
        for chunk in self.locals(x, false)? {
            for loc in chunk {
                for (a, &i) in loc.idx.iter().enumerate() {
                    r[i] += loc.res[a];
                }
            }
        }
        for &(d, val) in &self.bdata.constrained {
            let i = l.velocity(d);
            r[i] = x[i] - val;
        }
        Ok(r)
    }

    /// Residual and exact Jacobian with boundary conditions applied.
    pub fn jacobian(&self, x: &[f64]) -> Result<LinearSystem> {
        let l = self.layout();
        if x.len() != l.len() {
            return Err(Error::SizeMismatch(format!(
                "state has {} entries, expected {}",
                x.len(),
                l.len()
            )));
        }
        let mut r = self.fixed.clone();
        let mut m = CscMatrix::zeros(self.pattern.clone());
        for chunk in self.locals(x, true)? {
            for loc in chunk {
                let n = loc.idx.len();
                for a in 0..n {
                    r[loc.idx[a]] += loc.res[a];
                }
                for b in 0..n {
                    let col = loc.idx[b];
                    for a in 0..n {
                        let v = loc.jac[a * n + b];
                        if v != 0.0 {
                            m.add(loc.idx[a], col, v);
                        }
                    }
                }
            }
        }
        for &(d, val) in &self.bdata.constrained {
            let i = l.velocity(d);
            r[i] = x[i] - val;
        }
        let mut sys = LinearSystem {
            matrix: m,
            rhs: r.iter().map(|v| -v).collect(),
            layout: l,
            pressure_nullspace: self.bdata.pressure_nullspace,
        };
        apply_boundary_conditions(&self.bdata, &mut sys);
        Ok(sys)
    }

    /// Lifted rate `D~_K` from the constitutive equation: the cell average of
    /// `D_h(v)` minus the facet-jump lifting, so that at a solution
    /// `D~_K = alpha_g(|S_K|) S_K` exactly.
    pub fn lifted_strain(&self, x: &[f64], cell: usize) -> SymTensor2 {
        kernels::lifted_strain(self, x, cell)
    }

    /// Solves the constitutive equation cellwise for `S` given `v`.
    pub fn local_stress_update(&self, x: &mut [f64]) -> Result<()> {
        let l = self.layout();
        let nc = self.disc.mesh.num_cells();
        let new: Vec<Result<SymTensor2>> = (0..nc)
            .into_par_iter()
            .map(|k| {
                let d = self.lifted_strain(x, k);
                s_from_d_regularized(d, &self.setup.params)
                    .map_err(|_| Error::NonFinite { cell: k })
            })
            .collect();
        for (k, s) in new.into_iter().enumerate() {
            let s = s?;
            x[l.stress(k, 0)] = s.xx;
            x[l.stress(k, 1)] = s.xy;
        }
        Ok(())
    }
}

/// Strong normal Dirichlet conditions: identity rows and zero columns on the
/// constrained dofs, with matching right-hand side.
pub fn apply_boundary_conditions(bdata: &BoundaryData, sys: &mut LinearSystem) {
    let l = sys.layout;
    let mut is_constrained = vec![false; l.len()];
    for &(d, _) in &bdata.constrained {
        is_constrained[l.velocity(d)] = true;
    }
    let pattern = sys.matrix.pattern.clone();
    for c in 0..l.len() {
        let (rows, range) = pattern.column(c);
        for (r, i) in rows.iter().zip(range) {
            if is_constrained[*r] || is_constrained[c] {
                sys.matrix.values[i] = if *r == c { 1.0 } else { 0.0 };
            }
        }
    }
}

fn build_pattern(disc: &Discretization) -> CscPattern {
    let mesh = &disc.mesh;
    let l = disc.layout;
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); l.len()];
    let mut add_block = |idx: &[usize]| {
        for &c in idx {
            cols[c].extend_from_slice(idx);
        }
    };
    for k in 0..mesh.num_cells() {
        add_block(&kernels::cell_indices(disc, k));
    }
    for (i, f) in mesh.facets().iter().enumerate() {
        if f.is_boundary() {
            add_block(&kernels::boundary_indices(disc, i));
        } else {
            add_block(&kernels::interior_indices(disc, i));
        }
    }
    // structural pressure diagonal, used when pinning the pressure
    for k in 0..mesh.num_cells() {
        cols[l.pressure(k)].push(l.pressure(k));
    }
    CscPattern::from_columns(l.len(), cols)
}
