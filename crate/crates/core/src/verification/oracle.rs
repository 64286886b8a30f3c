use crate::constitutive::{generalized_fluidity, ConstitutiveParams};

/// Fully developed flow between walls at `y = +-h` driven by the pressure
/// gradient `-g`. The shear stress is `s(y) = -g y`, `|S| = sqrt(2) |s|`, and
/// `u'(y) = 2 alpha_g(|S|) s(y)` with `u(+-h) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelOracle {
    pub g: f64,
    pub h: f64,
    pub params: ConstitutiveParams,
}

const QUAD_TOL: f64 = 1e-13;

impl ChannelOracle {
    pub fn new(g: f64, h: f64, params: ConstitutiveParams) -> Self {
        Self { g, h, params }
    }

    pub fn shear_stress(&self, y: f64) -> f64 {
        -self.g * y
    }

    /// `u'(y)` from the constitutive relation.
    pub fn derivative(&self, y: f64) -> f64 {
        let s = self.shear_stress(y);
        2.0 * generalized_fluidity(2f64.sqrt() * s.abs(), &self.params) * s
    }

    fn integrand(&self, t: f64) -> f64 {
        -self.derivative(t)
    }

    /// Velocity by adaptive Simpson quadrature of `-u'` over `[|y|, h]`.
    pub fn exact(&self, y: f64) -> f64 {
        let a = y.abs().min(self.h);
        adaptive_simpson(&|t| self.integrand(t), a, self.h, QUAD_TOL)
    }

    /// Same integral with adaptive Gauss-Kronrod (7, 15).
    pub fn exact_gauss_kronrod(&self, y: f64) -> f64 {
        let a = y.abs().min(self.h);
        adaptive_gk15(&|t| self.integrand(t), a, self.h, QUAD_TOL)
    }

    /// Antiderivative in closed form, for cross-checking the quadratures.
    pub fn closed_form(&self, y: f64) -> f64 {
        let (g, h, p) = (self.g, self.h, &self.params);
        let r = |t: f64| (2.0 * g * g * t * t + p.eps * p.eps).sqrt();
        let viscous = p.alpha * g * (h * h - y * y);
        if g == 0.0 {
            return viscous;
        }
        viscous + p.eu / g * (r(h) - r(y))
    }

    /// `(y, u)` at `n` uniformly spaced points including both walls.
    pub fn tabulate(&self, n: usize) -> Vec<(f64, f64)> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let y = -self.h + 2.0 * self.h * i as f64 / (n - 1) as f64;
                (y, self.exact(y))
            })
            .collect()
    }

    /// Flow rate `int u dy` over the channel height.
    pub fn flow_rate(&self) -> f64 {
        2.0 * adaptive_gk15(&|y| self.exact(y), 0.0, self.h, 1e-11)
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
/// Gauss weights for the odd-indexed Kronrod nodes (the 7-point rule).
const G_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS[7] * fc;
    let mut g = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let s = f(c - h * GK_NODES[i]) + f(c + h * GK_NODES[i]);
        k += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

pub fn adaptive_gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if depth == 0 || err <= tol {
            return val;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    rec(f, a, b, tol, 50)
}
