use crate::mesh::Triangulation;
use crate::tensor::Vec2;

/// Uniform-bin point locator over a triangulation.
#[derive(Debug, Clone)]
pub struct PointLocator {
    lo: Vec2,
    size: Vec2,
    n: [usize; 2],
    bins: Vec<Vec<usize>>,
}

/// Barycentric tolerance for points on shared edges.
const TOL: f64 = 1e-12;

impl PointLocator {
    pub fn new(mesh: &Triangulation) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let side = ((mesh.num_cells() as f64).sqrt().ceil() as usize).max(1);
        let n = [side, side];
        let size = [
            ((hi[0] - lo[0]) / n[0] as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / n[1] as f64).max(f64::MIN_POSITIVE),
        ];
        let mut out = Self {
            lo,
            size,
            n,
            bins: vec![Vec::new(); n[0] * n[1]],
        };
        for k in 0..mesh.num_cells() {
            let p = mesh.cell_points(k);
            let bmin = [
                p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min),
                p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min),
            ];
            let bmax = [
                p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max),
                p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max),
            ];
            let (i0, j0) = out.bin(bmin);
            let (i1, j1) = out.bin(bmax);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    out.bins[j * n[0] + i].push(k);
                }
            }
        }
        out
    }

    fn bin(&self, x: Vec2) -> (usize, usize) {
        let f = |d: usize| {
            let t = ((x[d] - self.lo[d]) / self.size[d]).floor();
            (t.max(0.0) as usize).min(self.n[d] - 1)
        };
        (f(0), f(1))
    }

    /// Lowest-index cell containing `x`, or `None` outside the mesh.
    pub fn locate(&self, mesh: &Triangulation, x: Vec2) -> Option<usize> {
        let (lo, hi) = mesh.bounding_box();
        let slack = TOL * (hi[0] - lo[0]).max(hi[1] - lo[1]);
        if x[0] < lo[0] - slack
            || x[0] > hi[0] + slack
            || x[1] < lo[1] - slack
            || x[1] > hi[1] + slack
        {
            return None;
        }
        let (i, j) = self.bin(x);
        self.bins[j * self.n[0] + i]
            .iter()
            .copied()
            .find(|&k| contains(mesh, k, x))
    }
}

fn contains(mesh: &Triangulation, k: usize, x: Vec2) -> bool {
    let [a, b, c] = mesh.cell_points(k);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
    let l0 = 1.0 - l1 - l2;
    l0 >= -TOL && l1 >= -TOL && l2 >= -TOL
}
