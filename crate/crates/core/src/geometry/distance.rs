use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::chart::ConformalChart;
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Neighbourhood used by the shortest-path metric.
///
/// `Eight` links axis and diagonal neighbours and overestimates Euclidean
/// distance by up to `1/cos(22.5°) ≈ 1.0824`. `Sixteen` adds the knight moves
/// `(±1, ±2)`, `(±2, ±1)` and caps the overestimate at `1/cos(13.3°) ≈ 1.0275`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Stencil {
    Eight,
    #[default]
    Sixteen,
}

impl Stencil {
    fn offsets(self) -> &'static [(isize, isize)] {
        const EIGHT: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        const SIXTEEN: [(isize, isize); 16] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
            (1, 2),
            (2, 1),
            (-1, 2),
            (-2, 1),
            (1, -2),
            (2, -1),
            (-1, -2),
            (-2, -1),
        ];
        match self {
            Stencil::Eight => &EIGHT,
            Stencil::Sixteen => &SIXTEEN,
        }
    }
}

/// Graph distance from a source set to every node.
#[derive(Debug, Clone)]
pub struct DistanceField {
    chart: ConformalChart,
    dist: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    d: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties broken by node index for determinism
        other.d.total_cmp(&self.d).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl DistanceField {
    /// Multi-source Dijkstra. Each source carries an initial offset, which is
    /// how the closed-form tip stub enters on truncated cylindrical charts.
    /// Edge weight: mean of `e^u` at the end points times the chart length of
    /// the edge.
    pub fn compute(u: &ScalarField, sources: &[((usize, usize), f64)], stencil: Stencil) -> Self {
        let c = *u.chart();
        let scale: Vec<f64> = u.values().iter().map(|v| v.exp()).collect();
        let mut dist = vec![f64::INFINITY; c.len()];
        let mut done = vec![false; c.len()];
        let mut heap = BinaryHeap::new();
        for &((i, j), d0) in sources {
            let idx = c.index(i, j);
            if d0 < dist[idx] {
                dist[idx] = d0;
                heap.push(Entry { d: d0, idx });
            }
        }
        let offsets = stencil.offsets();
        let lengths: Vec<f64> =
            offsets.iter().map(|&(di, dj)| (di as f64 * c.hx()).hypot(dj as f64 * c.hy())).collect();
        while let Some(Entry { d, idx }) = heap.pop() {
            if done[idx] {
                continue;
            }
            done[idx] = true;
            let (i, j) = c.node(idx);
            for (&(di, dj), &len) in offsets.iter().zip(&lengths) {
                let Some((ni, nj)) = c.offset(i, j, di, dj) else { continue };
                let nidx = c.index(ni, nj);
                if done[nidx] {
                    continue;
                }
                let nd = d + 0.5 * (scale[idx] + scale[nidx]) * len;
                if nd < dist[nidx] {
                    dist[nidx] = nd;
                    heap.push(Entry { d: nd, idx: nidx });
                }
            }
        }
        Self { chart: c, dist }
    }

    pub fn from_node(u: &ScalarField, from: (usize, usize), stencil: Stencil) -> Self {
        Self::compute(u, &[(from, 0.0)], stencil)
    }

    pub fn chart(&self) -> &ConformalChart {
        &self.chart
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.dist[self.chart.index(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.dist
    }
}

/// Shortest-path distance from a node set to a target node.
pub fn geodesic_distance(u: &ScalarField, from: &[(usize, usize)], to: (usize, usize)) -> Result<f64> {
    let sources: Vec<_> = from.iter().map(|&n| (n, 0.0)).collect();
    let d = DistanceField::compute(u, &sources, Stencil::default()).at(to.0, to.1);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Disconnected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{cigar_dist_from_tip, CigarModel};
    use proptest::prelude::*;

    fn flat(n: usize) -> ScalarField {
        let c = ConformalChart::planar([0.0, 2.0], [0.0, 2.0], n, n).unwrap();
        ScalarField::constant(c, 0.0).unwrap()
    }

    #[test]
    fn axis_and_diagonal_distances_on_flat_chart() {
        let u = flat(21);
        let h = u.chart().hx();
        let d = geodesic_distance(&u, &[(5, 5)], (15, 5)).unwrap();
        assert!((d - 1.0).abs() <= h);
        let diag = geodesic_distance(&u, &[(5, 5)], (15, 15)).unwrap();
        assert!((diag - 2f64.sqrt()).abs() < 1e-12);
        let u8 = DistanceField::from_node(&u, (5, 5), Stencil::Eight);
        assert!((u8.at(15, 15) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_source_is_disconnected() {
        let u = flat(9);
        assert!(matches!(geodesic_distance(&u, &[], (1, 1)), Err(Error::Disconnected)));
    }

    #[test]
    fn metrication_bounds() {
        let u = flat(41);
        let h = u.chart().hx();
        for stencil in [Stencil::Eight, Stencil::Sixteen] {
            let cap = if stencil == Stencil::Eight { 1.0824 } else { 1.0276 };
            let d = DistanceField::from_node(&u, (0, 0), stencil);
            for j in 1..41 {
                for i in 1..41 {
                    let e = (i as f64 * h).hypot(j as f64 * h);
                    let r = d.at(i, j) / e;
                    assert!((1.0 - 1e-12..=cap).contains(&r), "{stencil:?} ({i},{j}) ratio {r}");
                }
            }
        }
    }

    #[test]
    fn cigar_tip_to_unit_circle() {
        // planar chart around the tip: distance to the circle |z| = 1
        let m = CigarModel::unit(4.0);
        let n = 161;
        let c = ConformalChart::planar([-2.0, 2.0], [-2.0, 2.0], n, n).unwrap();
        let u = ScalarField::from_fn(c, |x, y| m.u(0.0, [x, y])).unwrap();
        let tip = c.tip_node().unwrap();
        let d = geodesic_distance(&u, &[tip], (tip.0 + 40, tip.1)).unwrap();
        let exact = cigar_dist_from_tip(0.0);
        assert!((d - exact).abs() <= (2.0 * c.hx()).max(0.09 * exact));
    }

    proptest! {
        #[test]
        fn symmetric_and_triangle(a in 0usize..144, b in 0usize..144, m in 0usize..144, seed in 0.0f64..3.0) {
            let c = ConformalChart::cylindrical([-1.0, 1.0], 12, 12).unwrap();
            let u = ScalarField::from_fn(c, |x, y| 0.3 * (seed + 2.0 * x).sin() * y.cos()).unwrap();
            let na = c.node(a);
            let nb = c.node(b);
            let nm = c.node(m);
            let dab = geodesic_distance(&u, &[na], nb).unwrap();
            let dba = geodesic_distance(&u, &[nb], na).unwrap();
            prop_assert!((dab - dba).abs() <= 1e-12 * (1.0 + dab));
            let dam = geodesic_distance(&u, &[na], nm).unwrap();
            let dmb = geodesic_distance(&u, &[nm], nb).unwrap();
            prop_assert!(dab <= dam + dmb + 1e-12);
        }
    }
}
