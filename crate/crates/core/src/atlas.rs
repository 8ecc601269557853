//! Patch atlases: chart boxes with midpoint quadrature grids, a smooth
//! partition of unity, and overlap correspondences with chart Jacobians.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bundle::{OverlapSamples, Point};
use crate::cohomology::{library, SimplicialComplex};
use crate::gerbe::CombinatorialCover;

/// Coordinate chart of a patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Chart {
    /// Stereographic coordinates of `R p` projected from the south pole,
    /// so the chart is centred at `R^T e_z`.
    Stereographic { rotation: [[f64; 3]; 3] },
    /// `(x, y) -> (x, y, 0)`.
    Plane,
    /// The one-point space.
    Point,
}

fn mat_vec(r: &[[f64; 3]; 3], p: &Point) -> Point {
    [0, 1, 2].map(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2])
}

fn mat_t_vec(r: &[[f64; 3]; 3], p: &Point) -> Point {
    [0, 1, 2].map(|i| r[0][i] * p[0] + r[1][i] * p[1] + r[2][i] * p[2])
}

pub const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
/// Half turn about the x axis; centres the chart at the south pole.
pub const SOUTH: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
/// Quarter turn about the y axis; centres the chart at `+e_x`.
pub const EAST: [[f64; 3]; 3] = [[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];

impl Chart {
    pub fn dim(&self) -> usize {
        match self {
            Chart::Stereographic { .. } | Chart::Plane => 2,
            Chart::Point => 0,
        }
    }

    /// Centre of the chart on the sphere.
    pub fn centre(&self) -> Point {
        match self {
            Chart::Stereographic { rotation } => mat_t_vec(rotation, &[0.0, 0.0, 1.0]),
            _ => [0.0; 3],
        }
    }

    pub fn to_point(&self, x: &[f64]) -> Point {
        match self {
            Chart::Stereographic { rotation } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let q = [2.0 * x[0], 2.0 * x[1], 1.0 - r2].map(|v| v / (1.0 + r2));
                mat_t_vec(rotation, &q)
            }
            Chart::Plane => [x[0], x[1], 0.0],
            Chart::Point => [0.0; 3],
        }
    }

    /// Chart coordinates of `p`, or `None` at the projection point.
    pub fn from_point(&self, p: &Point) -> Option<Vec<f64>> {
        match self {
            Chart::Stereographic { rotation } => {
                let q = mat_vec(rotation, p);
                let s = 1.0 + q[2];
                (s > 1e-12).then(|| vec![q[0] / s, q[1] / s])
            }
            Chart::Plane => Some(vec![p[0], p[1]]),
            Chart::Point => Some(vec![]),
        }
    }

    /// Riemannian volume density in chart coordinates.
    pub fn volume_factor(&self, x: &[f64]) -> f64 {
        match self {
            Chart::Stereographic { .. } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                4.0 / ((1.0 + r2) * (1.0 + r2))
            }
            _ => 1.0,
        }
    }
}

/// Smooth partition of unity subordinate to the patches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PartitionOfUnity {
    /// One patch, `phi = 1`.
    Single,
    /// Normalised bumps `exp(-1/(1 - t^2))`, `t` = angle to the centre over the cap radius.
    Caps { centres: Vec<Point>, radii: Vec<f64> },
}

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

fn angle(p: &Point, q: &Point) -> f64 {
    let d = (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]) / (norm(p) * norm(q));
    d.clamp(-1.0, 1.0).acos()
}

fn norm(p: &Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

impl PartitionOfUnity {
    pub fn weights(&self, p: &Point) -> Vec<f64> {
        match self {
            PartitionOfUnity::Single => vec![1.0],
            PartitionOfUnity::Caps { centres, radii } => {
                let raw: Vec<f64> = centres.iter().zip(radii).map(|(c, r)| bump(angle(p, c) / r)).collect();
                let total: f64 = raw.iter().sum();
                assert!(total > 0.0, "point {p:?} is not covered by the partition of unity");
                raw.into_iter().map(|v| v / total).collect()
            }
        }
    }
}

/// A chart box with a midpoint grid.
#[derive(Clone, Debug)]
pub struct Patch {
    pub chart: Chart,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
    pub nodes: Vec<Vec<f64>>,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub volume: Vec<f64>,
    pub pou: Vec<f64>,
}

impl Patch {
    fn build(chart: Chart, lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>) -> Self {
        let d = chart.dim();
        assert_eq!(lo.len(), d);
        let h: Vec<f64> = (0..d).map(|k| (hi[k] - lo[k]) / shape[k] as f64).collect();
        let count: usize = shape.iter().product();
        let cell: f64 = h.iter().product();
        let mut nodes = Vec::with_capacity(count);
        for idx in 0..count {
            let multi = unravel(idx, &shape);
            nodes.push((0..d).map(|k| lo[k] + (multi[k] as f64 + 0.5) * h[k]).collect::<Vec<_>>());
        }
        let points = nodes.iter().map(|x| chart.to_point(x)).collect();
        let volume = nodes.iter().map(|x| chart.volume_factor(x)).collect();
        Self { chart, lo, hi, shape, nodes, points, weights: vec![cell; count], volume, pou: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| (self.hi[k] - self.lo[k]) / self.shape[k] as f64).collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(k, &v)| v >= self.lo[k] && v <= self.hi[k])
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        ravel(multi, &self.shape)
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        unravel(idx, &self.shape)
    }
}

/// Row-major (last axis fastest) flattening.
pub fn ravel(multi: &[usize], shape: &[usize]) -> usize {
    multi.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

pub fn unravel(mut idx: usize, shape: &[usize]) -> Vec<usize> {
    let mut out = vec![0; shape.len()];
    for k in (0..shape.len()).rev() {
        out[k] = idx % shape[k];
        idx /= shape[k];
    }
    out
}

/// A node of patch `a` seen from patch `b`.
#[derive(Clone, Debug)]
pub struct OverlapEntry {
    pub node: usize,
    pub coords: Vec<f64>,
    /// `jacobian[i][k] = d x_b^i / d x_a^k`.
    pub jacobian: Vec<Vec<f64>>,
}

/// Step for numerical derivatives of smooth maps given only pointwise.
pub const DIFF_STEP: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct Atlas {
    pub name: String,
    pub patches: Vec<Patch>,
    pub pou: PartitionOfUnity,
    /// Nerve of the supports of the partition of unity.
    pub nerve: SimplicialComplex,
    /// Keyed by ordered pairs `(a, b)`, `a != b`.
    pub overlaps: BTreeMap<(usize, usize), Vec<OverlapEntry>>,
}

impl Atlas {
    fn assemble(name: &str, patches: Vec<Patch>, pou: PartitionOfUnity, nerve: SimplicialComplex) -> Self {
        let mut atlas = Self { name: name.into(), patches, pou, nerve, overlaps: BTreeMap::new() };
        let np = atlas.patches.len();
        for a in 0..np {
            let weights: Vec<Vec<f64>> = atlas.patches[a].points.iter().map(|p| atlas.pou.weights(p)).collect();
            atlas.patches[a].pou = weights.iter().map(|w| w[a]).collect();
            for b in 0..np {
                if a == b {
                    continue;
                }
                let mut entries = Vec::new();
                for (i, p) in atlas.patches[a].points.iter().enumerate() {
                    if weights[i][a] <= 0.0 || weights[i][b] <= 0.0 {
                        continue;
                    }
                    let pb = &atlas.patches[b];
                    let Some(coords) = pb.chart.from_point(p) else { continue };
                    if !pb.contains(&coords) {
                        continue;
                    }
                    let jacobian = atlas.transition_jacobian(a, b, &atlas.patches[a].nodes[i]);
                    entries.push(OverlapEntry { node: i, coords, jacobian });
                }
                atlas.overlaps.insert((a, b), entries);
            }
        }
        atlas
    }

    /// `d x_b / d x_a` at chart-`a` coordinates `x`, by central differences.
    pub fn transition_jacobian(&self, a: usize, b: usize, x: &[f64]) -> Vec<Vec<f64>> {
        let (ca, cb) = (&self.patches[a].chart, &self.patches[b].chart);
        let d = ca.dim();
        let mut j = vec![vec![0.0; d]; d];
        for k in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += DIFF_STEP;
            xm[k] -= DIFF_STEP;
            let yp = cb.from_point(&ca.to_point(&xp)).expect("overlap point inside chart b");
            let ym = cb.from_point(&ca.to_point(&xm)).expect("overlap point inside chart b");
            for i in 0..d {
                j[i][k] = (yp[i] - ym[i]) / (2.0 * DIFF_STEP);
            }
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.patches[0].dim()
    }

    pub fn cover(&self) -> CombinatorialCover {
        CombinatorialCover::new(self.nerve.clone())
    }

    pub fn resolution(&self) -> usize {
        self.patches[0].shape.first().copied().unwrap_or(1)
    }

    /// Largest deviation of `sum_a phi_a` from 1 over all overlap nodes.
    pub fn pou_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (&(a, _), entries) in &self.overlaps {
            for e in entries {
                let s: f64 = self.pou.weights(&self.patches[a].points[e.node]).iter().sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }

    /// Global sample points on every edge and triangle of the nerve,
    /// taken from nodes of the lowest-indexed patch where all weights are positive.
    pub fn overlap_samples(&self) -> OverlapSamples {
        let mut out = OverlapSamples::default();
        for k in 1..=2 {
            for s in self.nerve.simplices(k) {
                let a = s[0];
                let pts: Vec<Point> = self.patches[a]
                    .points
                    .iter()
                    .filter(|p| {
                        let w = self.pou.weights(p);
                        s.iter().all(|&b| w[b] > 0.0)
                            && s.iter().all(|&b| {
                                self.patches[b].chart.from_point(p).is_some_and(|x| self.patches[b].contains(&x))
                            })
                    })
                    .copied()
                    .collect();
                out.points.insert(s.clone(), pts);
            }
        }
        out
    }

    /// Two stereographic patches centred at the poles.
    pub fn sphere_two_patch(resolution: usize) -> Self {
        let patches = [IDENTITY, SOUTH].map(|r| sphere_patch(r, resolution)).to_vec();
        let pou = PartitionOfUnity::Caps {
            centres: vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]],
            radii: vec![CAP_RADIUS, CAP_RADIUS],
        };
        Self::assemble("sphere-2", patches, pou, library::simplex(1))
    }

    /// Poles plus a patch centred at `+e_x`; the three supports meet.
    pub fn sphere_three_patch(resolution: usize) -> Self {
        let patches = [IDENTITY, SOUTH, EAST].map(|r| sphere_patch(r, resolution)).to_vec();
        let pou = PartitionOfUnity::Caps {
            centres: vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]],
            radii: vec![CAP_RADIUS, CAP_RADIUS, EAST_CAP_RADIUS],
        };
        Self::assemble("sphere-3", patches, pou, library::simplex(2))
    }

    pub fn single_point() -> Self {
        let patch = Patch::build(Chart::Point, vec![], vec![], vec![]);
        Self::assemble("point", vec![patch], PartitionOfUnity::Single, library::simplex(0))
    }

    /// `[0, 1]^2` in the plane.
    pub fn unit_square(resolution: usize) -> Self {
        let patch = Patch::build(Chart::Plane, vec![0.0, 0.0], vec![1.0, 1.0], vec![resolution; 2]);
        Self::assemble("unit-square", vec![patch], PartitionOfUnity::Single, library::simplex(0))
    }

    pub fn by_name(name: &str, resolution: usize) -> Option<Self> {
        match name {
            "sphere-2" => Some(Self::sphere_two_patch(resolution)),
            "sphere-3" => Some(Self::sphere_three_patch(resolution)),
            "point" => Some(Self::single_point()),
            "unit-square" => Some(Self::unit_square(resolution)),
            _ => None,
        }
    }
}

/// Half-width of the stereographic boxes.
pub const SPHERE_BOX: f64 = 1.6;
/// Cap radii (radians); the caps sit inside the inscribed disc of the box.
pub const CAP_RADIUS: f64 = 115.0 * std::f64::consts::PI / 180.0;
pub const EAST_CAP_RADIUS: f64 = 100.0 * std::f64::consts::PI / 180.0;

fn sphere_patch(rotation: [[f64; 3]; 3], resolution: usize) -> Patch {
    Patch::build(Chart::Stereographic { rotation }, vec![-SPHERE_BOX; 2], vec![SPHERE_BOX; 2], vec![resolution; 2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_round_trip() {
        for r in [IDENTITY, SOUTH, EAST] {
            let c = Chart::Stereographic { rotation: r };
            let x = vec![0.3, -1.2];
            let y = c.from_point(&c.to_point(&x)).unwrap();
            assert!((x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14);
        }
        assert_eq!(Chart::Stereographic { rotation: EAST }.centre(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn south_chart_is_inversion() {
        // w = 1/z between the polar charts
        let n = Chart::Stereographic { rotation: IDENTITY };
        let s = Chart::Stereographic { rotation: SOUTH };
        let z = [0.7, 0.4];
        let w = s.from_point(&n.to_point(&z)).unwrap();
        let r2 = z[0] * z[0] + z[1] * z[1];
        assert!((w[0] - z[0] / r2).abs() < 1e-14 && (w[1] + z[1] / r2).abs() < 1e-14);
    }

    #[test]
    fn sphere_area_and_pou() {
        // measured midpoint floors at 64 x 64: ~3e-6 (two caps), ~1.5e-5 (three caps)
        for (atlas, tol) in [(Atlas::sphere_two_patch(64), 1e-5), (Atlas::sphere_three_patch(64), 5e-5)] {
            let area: f64 = atlas
                .patches
                .iter()
                .flat_map(|p| (0..p.node_count()).map(move |i| p.pou[i] * p.weights[i] * p.volume[i]))
                .sum();
            assert!((area - 4.0 * std::f64::consts::PI).abs() < tol, "area {area}");
            assert!(atlas.pou_defect() < 1e-10);
        }
        assert!(!Atlas::sphere_three_patch(16).overlaps[&(0, 2)].is_empty());
    }

    #[test]
    fn jacobian_is_orientation_preserving() {
        let atlas = Atlas::sphere_two_patch(16);
        for e in &atlas.overlaps[&(0, 1)] {
            let j = &e.jacobian;
            assert!(j[0][0] * j[1][1] - j[0][1] * j[1][0] > 0.0);
        }
    }

    #[test]
    fn ravel_round_trip() {
        let shape = [3, 4, 5];
        for i in 0..60 {
            assert_eq!(ravel(&unravel(i, &shape), &shape), i);
        }
    }
}
