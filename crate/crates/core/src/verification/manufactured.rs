use std::f64::consts::PI;

use crate::assembly::{vector_field, BoundaryCondition, ProblemSetup};
use crate::constitutive::{s_from_d_regularized, ConstitutiveParams};
use crate::error::{Error, Result};
use crate::mesh::BoundaryMarker;
use crate::tensor::{Mat2, SymTensor2, Vec2};

/// Taylor-Green vortex on the unit square, scaled by `amplitude`:
/// `v = (sin pi x cos pi y, -cos pi x sin pi y)`, `p = cos pi x cos pi y`.
/// The stress is the regularized constitutive inverse of `D(v)` and the body
/// force balances the momentum equation exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub params: ConstitutiveParams,
    pub amplitude: f64,
}

/// Step of the fourth-order central differences used for `div S`.
const FD_STEP: f64 = 1e-3;

impl ManufacturedCase {
    pub fn new(params: ConstitutiveParams, amplitude: f64) -> Result<Self> {
        params.validate()?;
        if !amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "amplitude must be finite, got {amplitude}"
            )));
        }
        Ok(Self { params, amplitude })
    }

    /// Linear Stokes flow with unit fluidity.
    pub fn stokes() -> Self {
        Self {
            params: ConstitutiveParams::new(1.0, 0.0, 1e-3, 0.0, 1.0),
            amplitude: 1.0,
        }
    }

    pub fn velocity(&self, x: Vec2) -> Vec2 {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        [self.amplitude * sx * cy, -self.amplitude * cx * sy]
    }

    /// `g[i][j] = d_j v_i`.
    pub fn velocity_gradient(&self, x: Vec2) -> Mat2 {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let a = self.amplitude * PI;
        [[a * cx * cy, -a * sx * sy], [a * sx * sy, -a * cx * cy]]
    }

    pub fn pressure(&self, x: Vec2) -> f64 {
        self.amplitude * (PI * x[0]).cos() * (PI * x[1]).cos()
    }

    pub fn rate(&self, x: Vec2) -> SymTensor2 {
        SymTensor2::dev_sym(&self.velocity_gradient(x))
    }

    pub fn stress(&self, x: Vec2) -> Result<SymTensor2> {
        s_from_d_regularized(self.rate(x), &self.params)
    }

    fn stress_divergence(&self, x: Vec2) -> Result<Vec2> {
        let h = FD_STEP;
        let d = |dir: usize| -> Result<[f64; 2]> {
            let at = |t: f64| {
                let mut y = x;
                y[dir] += t;
                self.stress(y).map(|s| s.components())
            };
            let (a, b, c, e) = (at(2.0 * h)?, at(h)?, at(-h)?, at(-2.0 * h)?);
            Ok([0, 1].map(|i| (-a[i] + 8.0 * b[i] - 8.0 * c[i] + e[i]) / (12.0 * h)))
        };
        let (dx, dy) = (d(0)?, d(1)?);
        // S = [[s_xx, s_xy], [s_xy, -s_xx]]
        Ok([dx[0] + dy[1], dx[1] - dy[0]])
    }

    /// `f = (-div S + Re (grad v) v + grad p) / Ga`.
    pub fn forcing(&self, x: Vec2) -> Result<Vec2> {
        let div_s = self.stress_divergence(x)?;
        let g = self.velocity_gradient(x);
        let v = self.velocity(x);
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let grad_p = [
            -self.amplitude * PI * sx * cy,
            -self.amplitude * PI * cx * sy,
        ];
        let re = self.params.re;
        let f = [0, 1].map(|i| {
            (-div_s[i] + re * (g[i][0] * v[0] + g[i][1] * v[1]) + grad_p[i]) / self.params.ga
        });
        if f.iter().all(|c| c.is_finite()) {
            Ok(f)
        } else {
            Err(Error::InvalidParameter(format!(
                "non-finite forcing at ({}, {})",
                x[0], x[1]
            )))
        }
    }

    /// Exact velocity on every boundary facet of an all-wall mesh, with the
    /// balancing body force.
    pub fn problem_setup(&self) -> ProblemSetup {
        let (a, b) = (*self, *self);
        let mut setup = ProblemSetup::new(self.params).with_condition(
            BoundaryMarker::Wall,
            BoundaryCondition::Dirichlet(vector_field(move |x| a.velocity(x))),
        );
        setup.force = Some(vector_field(move |x| b.forcing(x).unwrap_or([f64::NAN; 2])));
        setup
    }
}
