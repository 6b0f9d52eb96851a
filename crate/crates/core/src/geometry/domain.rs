use std::collections::VecDeque;

use crate::chart::ConformalChart;
use crate::error::{Error, Result};
use crate::field::ScalarField;

use super::distance::{DistanceField, Stencil};

/// A region of a chart: a node mask together with a level function that is
/// `≤ 0` exactly on the mask. Boundaries are reconstructed from the level
/// function, so domains built from a smooth level set (geodesic balls,
/// star-shaped regions) get sub-cell boundaries while plain masks fall back
/// to the `½` contour of the indicator.
#[derive(Debug, Clone)]
pub struct Domain {
    chart: ConformalChart,
    mask: Vec<bool>,
    level: Vec<f64>,
    simply_connected: bool,
    truncated: bool,
}

impl Domain {
    pub fn from_mask(chart: ConformalChart, mask: Vec<bool>) -> Result<Self> {
        let level = mask.iter().map(|&m| if m { -0.5 } else { 0.5 }).collect();
        Self::build(chart, mask, level)
    }

    /// Domain `{level ≤ 0}`.
    pub fn from_level_set(chart: ConformalChart, level: Vec<f64>) -> Result<Self> {
        if level.len() != chart.len() {
            return Err(Error::InvalidDomain("level set does not match the chart".into()));
        }
        let mask = level.iter().map(|&v| v <= 0.0).collect();
        Self::build(chart, mask, level)
    }

    pub fn from_fn(chart: ConformalChart, mut level: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut vals = Vec::with_capacity(chart.len());
        for j in 0..chart.ny() {
            for i in 0..chart.nx() {
                let [x, y] = chart.coord(i, j);
                vals.push(level(x, y));
            }
        }
        Self::from_level_set(chart, vals)
    }

    pub fn whole(chart: ConformalChart) -> Self {
        Self::from_mask(chart, vec![true; chart.len()]).expect("chart has nodes")
    }

    fn build(chart: ConformalChart, mask: Vec<bool>, level: Vec<f64>) -> Result<Self> {
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidDomain("empty mask".into()));
        }
        let truncated = (0..chart.len()).any(|k| {
            let (i, j) = chart.node(k);
            mask[k] && chart.is_edge(i, j)
        });
        let simply_connected = simply_connected(&chart, &mask);
        Ok(Self { chart, mask, level, simply_connected, truncated })
    }

    pub fn chart(&self) -> &ConformalChart {
        &self.chart
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn level(&self) -> &[f64] {
        &self.level
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[self.chart.index(i, j)]
    }

    pub fn node_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_simply_connected(&self) -> bool {
        self.simply_connected
    }

    /// The mask reaches a non-periodic chart edge, so part of the region may
    /// lie outside the chart.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// Mask grown by one cell in every direction (8-neighbourhood).
    pub fn dilated_mask(&self) -> Vec<bool> {
        let c = &self.chart;
        let mut out = self.mask.clone();
        for k in 0..c.len() {
            if !self.mask[k] {
                continue;
            }
            let (i, j) = c.node(k);
            for dj in -1..=1 {
                for di in -1..=1 {
                    if let Some((ni, nj)) = c.offset(i, j, di, dj) {
                        out[c.index(ni, nj)] = true;
                    }
                }
            }
        }
        out
    }
}

fn components(chart: &ConformalChart, select: &[bool], diagonal: bool) -> usize {
    let mut seen = vec![false; chart.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    let steps: &[(isize, isize)] = if diagonal {
        &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
    } else {
        &[(1, 0), (-1, 0), (0, 1), (0, -1)]
    };
    for start in 0..chart.len() {
        if !select[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = chart.node(k);
            for &(di, dj) in steps {
                if let Some((ni, nj)) = chart.offset(i, j, di, dj) {
                    let n = chart.index(ni, nj);
                    if select[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    count
}

/// One 8-connected piece whose 4-connected complement is a single piece.
/// A band wrapping a cylinder leaves two complement pieces and fails; a
/// domain covering a whole chart counts only when no axis is periodic.
fn simply_connected(chart: &ConformalChart, mask: &[bool]) -> bool {
    if components(chart, mask, true) != 1 {
        return false;
    }
    let complement: Vec<bool> = mask.iter().map(|&m| !m).collect();
    match components(chart, &complement, false) {
        0 => !chart.periodic_x() && !chart.periodic_y(),
        1 => true,
        _ => false,
    }
}

/// Geodesic ball `{d(center, ·) ≤ r}` with a sub-cell boundary from the
/// interpolated distance function.
pub fn geodesic_ball(u: &ScalarField, center: (usize, usize), r: f64) -> Result<Domain> {
    geodesic_ball_with(u, &[(center, 0.0)], r, Stencil::default())
}

pub fn geodesic_ball_with(
    u: &ScalarField,
    sources: &[((usize, usize), f64)],
    r: f64,
    stencil: Stencil,
) -> Result<Domain> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {r}")));
    }
    let d = DistanceField::compute(u, sources, stencil);
    let level = d.values().iter().map(|&v| (v - r).min(r)).collect();
    Domain::from_level_set(*u.chart(), level)
}
