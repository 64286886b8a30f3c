//! Fixed quadrature rules on the reference triangle and the unit interval.

use crate::tensor::Vec2;

/// Symmetric rule on a triangle. Points are barycentric coordinates and
/// weights sum to one, so a physical integral is `area * sum(w f)`.
#[derive(Debug, Clone, Copy)]
pub struct TriangleRule {
    pub barycentric: &'static [[f64; 3]],
    pub weights: &'static [f64],
    pub degree: usize,
}

/// Rule on `[0, 1]` with weights summing to one.
#[derive(Debug, Clone, Copy)]
pub struct EdgeRule {
    pub points: &'static [f64],
    pub weights: &'static [f64],
    pub degree: usize,
}

const A4: f64 = 0.445_948_490_915_964_886_32;
const B4: f64 = 0.091_576_213_509_770_743_46;
const WA4: f64 = 0.223_381_589_678_011_465_70;
const WB4: f64 = 0.109_951_743_655_321_867_64;

static TRI4_POINTS: [[f64; 3]; 6] = [
    [A4, A4, 1.0 - 2.0 * A4],
    [A4, 1.0 - 2.0 * A4, A4],
    [1.0 - 2.0 * A4, A4, A4],
    [B4, B4, 1.0 - 2.0 * B4],
    [B4, 1.0 - 2.0 * B4, B4],
    [1.0 - 2.0 * B4, B4, B4],
];
static TRI4_WEIGHTS: [f64; 6] = [WA4, WA4, WA4, WB4, WB4, WB4];

static TRI1_POINTS: [[f64; 3]; 1] = [[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
static TRI1_WEIGHTS: [f64; 1] = [1.0];

const G3: f64 = 0.387_298_334_620_741_688_5; // sqrt(3/5) / 2
static GAUSS3_POINTS: [f64; 3] = [0.5 - G3, 0.5, 0.5 + G3];
static GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Degree-4 six-point rule, used for every cell integral.
pub const TRIANGLE_DEGREE4: TriangleRule = TriangleRule {
    barycentric: &TRI4_POINTS,
    weights: &TRI4_WEIGHTS,
    degree: 4,
};

pub const TRIANGLE_CENTROID: TriangleRule = TriangleRule {
    barycentric: &TRI1_POINTS,
    weights: &TRI1_WEIGHTS,
    degree: 1,
};

/// Three-point Gauss rule (degree 5), used for every facet integral.
pub const EDGE_GAUSS3: EdgeRule = EdgeRule {
    points: &GAUSS3_POINTS,
    weights: &GAUSS3_WEIGHTS,
    degree: 5,
};

impl TriangleRule {
    /// Physical quadrature points on the triangle `p`.
    pub fn points_on(&self, p: &[Vec2; 3]) -> impl Iterator<Item = (Vec2, f64)> + '_ {
        let p = *p;
        self.barycentric
            .iter()
            .zip(self.weights)
            .map(move |(l, &w)| {
                (
                    [
                        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                    ],
                    w,
                )
            })
    }
}

impl EdgeRule {
    /// `(x, t, w)` on the segment `a -> b` with parameter `t` in `[0, 1]`.
    pub fn points_on(&self, a: Vec2, b: Vec2) -> impl Iterator<Item = (Vec2, f64, f64)> + '_ {
        self.points
            .iter()
            .zip(self.weights)
            .map(move |(&t, &w)| ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], t, w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom_integral(i: u32, j: u32) -> f64 {
        // integral of x^i y^j over the reference triangle = i! j! / (i + j + 2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(i) * fact(j) / fact(i + j + 2)
    }

    #[test]
    fn triangle_rules_exact_to_degree() {
        for rule in [TRIANGLE_DEGREE4, TRIANGLE_CENTROID] {
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for i in 0..=rule.degree as u32 {
                for j in 0..=(rule.degree as u32 - i) {
                    let q: f64 = rule
                        .barycentric
                        .iter()
                        .zip(rule.weights)
                        .map(|(l, w)| 0.5 * w * l[1].powi(i as i32) * l[2].powi(j as i32))
                        .sum();
                    assert!((q - binom_integral(i, j)).abs() < 1e-15, "x^{i} y^{j}");
                }
            }
        }
    }

    #[test]
    fn degree4_is_not_exact_at_degree6() {
        let q: f64 = TRIANGLE_DEGREE4
            .barycentric
            .iter()
            .zip(TRIANGLE_DEGREE4.weights)
            .map(|(l, w)| 0.5 * w * l[1].powi(6))
            .sum();
        assert!((q - binom_integral(6, 0)).abs() > 1e-8);
    }

    #[test]
    fn edge_rule_exact_to_degree() {
        for k in 0..=EDGE_GAUSS3.degree as i32 {
            let q: f64 = EDGE_GAUSS3
                .points
                .iter()
                .zip(EDGE_GAUSS3.weights)
                .map(|(t, w)| w * t.powi(k))
                .sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-15, "t^{k}");
        }
    }
}
