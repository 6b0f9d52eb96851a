//! Coordinate rectangles carrying a flat conformal background.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    /// `|dz|²` on a rectangle of the plane.
    Planar,
    /// `dℓ² + dθ²` with `θ` periodic of period `2π`.
    Cylindrical,
    /// Flat torus: both axes periodic. Used for closed flat test problems.
    PlanarPeriodic,
}

impl ChartKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChartKind::Planar => "planar",
            ChartKind::Cylindrical => "cylindrical",
            ChartKind::PlanarPeriodic => "planar_periodic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "planar" => Some(ChartKind::Planar),
            "cylindrical" => Some(ChartKind::Cylindrical),
            "planar_periodic" => Some(ChartKind::PlanarPeriodic),
            _ => None,
        }
    }
}

/// Node-centred grid on `[x0, x1] × [y0, y1]`.
///
/// Non-periodic axes include both end points; periodic axes omit the
/// duplicate end node so that `h = extent / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalChart {
    kind: ChartKind,
    bounds: [f64; 4],
    nx: usize,
    ny: usize,
}

impl ConformalChart {
    pub fn new(kind: ChartKind, bounds: [f64; 4], nx: usize, ny: usize) -> Result<Self> {
        let [x0, x1, y0, y1] = bounds;
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(Error::InvalidChart(format!("need at least {MIN_NODES} nodes per axis, got {nx} x {ny}")));
        }
        if !(x1 > x0 && y1 > y0) || bounds.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidChart(format!("degenerate bounds {bounds:?}")));
        }
        if kind == ChartKind::Cylindrical && ((y1 - y0) - TAU).abs() > 1e-12 {
            return Err(Error::InvalidChart("cylindrical charts need a θ-extent of exactly 2π".into()));
        }
        Ok(Self { kind, bounds, nx, ny })
    }

    pub fn planar(x: [f64; 2], y: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        Self::new(ChartKind::Planar, [x[0], x[1], y[0], y[1]], nx, ny)
    }

    pub fn cylindrical(ell: [f64; 2], n_ell: usize, n_theta: usize) -> Result<Self> {
        Self::new(ChartKind::Cylindrical, [ell[0], ell[1], 0.0, TAU], n_ell, n_theta)
    }

    pub fn planar_periodic(x: [f64; 2], y: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        Self::new(ChartKind::PlanarPeriodic, [x[0], x[1], y[0], y[1]], nx, ny)
    }

    pub fn kind(&self) -> ChartKind {
        self.kind
    }

    pub fn bounds(&self) -> [f64; 4] {
        self.bounds
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn periodic_x(&self) -> bool {
        self.kind == ChartKind::PlanarPeriodic
    }

    pub fn periodic_y(&self) -> bool {
        matches!(self.kind, ChartKind::Cylindrical | ChartKind::PlanarPeriodic)
    }

    pub fn hx(&self) -> f64 {
        let [x0, x1, _, _] = self.bounds;
        if self.periodic_x() {
            (x1 - x0) / self.nx as f64
        } else {
            (x1 - x0) / (self.nx - 1) as f64
        }
    }

    pub fn hy(&self) -> f64 {
        let [_, _, y0, y1] = self.bounds;
        if self.periodic_y() {
            (y1 - y0) / self.ny as f64
        } else {
            (y1 - y0) / (self.ny - 1) as f64
        }
    }

    pub fn h_min(&self) -> f64 {
        self.hx().min(self.hy())
    }

    pub fn x(&self, i: usize) -> f64 {
        self.bounds[0] + i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.bounds[2] + j as f64 * self.hy()
    }

    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x(i), self.y(j)]
    }

    /// Position in the plane of the node: identity for planar charts,
    /// `e^{ℓ+iθ}` for cylindrical ones.
    pub fn planar_position(&self, i: usize, j: usize) -> [f64; 2] {
        match self.kind {
            ChartKind::Cylindrical => {
                let r = self.x(i).exp();
                let th = self.y(j);
                [r * th.cos(), r * th.sin()]
            }
            _ => self.coord(i, j),
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    /// Neighbour at integer offset, honouring periodic wrap.
    #[inline]
    pub fn offset(&self, i: usize, j: usize, di: isize, dj: isize) -> Option<(usize, usize)> {
        let wrap = |k: usize, d: isize, n: usize, periodic: bool| -> Option<usize> {
            let m = k as isize + d;
            if periodic {
                Some(m.rem_euclid(n as isize) as usize)
            } else if m < 0 || m >= n as isize {
                None
            } else {
                Some(m as usize)
            }
        };
        Some((wrap(i, di, self.nx, self.periodic_x())?, wrap(j, dj, self.ny, self.periodic_y())?))
    }

    /// Node on a non-periodic edge of the chart.
    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        (!self.periodic_x() && (i == 0 || i + 1 == self.nx)) || (!self.periodic_y() && (j == 0 || j + 1 == self.ny))
    }

    /// Nodes at least `band` cells away from every non-periodic edge.
    pub fn is_interior(&self, i: usize, j: usize, band: usize) -> bool {
        let ok_x = self.periodic_x() || (i >= band && i + band < self.nx);
        let ok_y = self.periodic_y() || (j >= band && j + band < self.ny);
        ok_x && ok_y
    }

    /// Grid node sitting at the planar origin, if the chart has one.
    pub fn tip_node(&self) -> Option<(usize, usize)> {
        if self.kind != ChartKind::Planar {
            return None;
        }
        let i = (-self.bounds[0] / self.hx()).round();
        let j = (-self.bounds[2] / self.hy()).round();
        if i < 0.0 || j < 0.0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        let [x, y] = self.coord(i, j);
        (x.abs() < 1e-9 * self.hx() && y.abs() < 1e-9 * self.hy()).then_some((i, j))
    }

    /// Nearest node to a chart coordinate (clamped to the chart).
    pub fn nearest_node(&self, p: [f64; 2]) -> (usize, usize) {
        let fi = ((p[0] - self.bounds[0]) / self.hx()).round();
        let fj = ((p[1] - self.bounds[2]) / self.hy()).round();
        let clamp = |f: f64, n: usize, periodic: bool| -> usize {
            if periodic {
                (f as isize).rem_euclid(n as isize) as usize
            } else {
                f.clamp(0.0, (n - 1) as f64) as usize
            }
        };
        (clamp(fi, self.nx, self.periodic_x()), clamp(fj, self.ny, self.periodic_y()))
    }
}
