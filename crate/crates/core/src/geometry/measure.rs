use crate::field::ScalarField;

use super::domain::Domain;

/// Corner order: (0,0), (1,0), (1,1), (0,1) in cell-local coordinates.
const CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

struct Cell {
    phi: [f64; 4],
    u: [f64; 4],
    hx: f64,
    hy: f64,
}

impl Cell {
    fn u_at(&self, p: [f64; 2]) -> f64 {
        let [s, t] = p;
        (1.0 - s) * (1.0 - t) * self.u[0] + s * (1.0 - t) * self.u[1] + s * t * self.u[2] + (1.0 - s) * t * self.u[3]
    }

    fn inside(&self, k: usize) -> bool {
        self.phi[k] <= 0.0
    }

    /// Zero crossing on edge `k` (corner `k` to corner `k+1`).
    fn crossing(&self, k: usize) -> [f64; 2] {
        let (a, b) = (k, (k + 1) % 4);
        let t = self.phi[a] / (self.phi[a] - self.phi[b]);
        let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
        let [pa, pb] = [CORNERS[a], CORNERS[b]];
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    }

    fn is_saddle(&self) -> bool {
        let s: [bool; 4] = std::array::from_fn(|k| self.inside(k));
        s[0] == s[2] && s[1] == s[3] && s[0] != s[1]
    }

    fn centre_inside(&self) -> bool {
        self.phi.iter().sum::<f64>() <= 0.0
    }

    /// Inside polygons in local coordinates.
    fn polygons(&self) -> Vec<Vec<[f64; 2]>> {
        if self.is_saddle() && !self.centre_inside() {
            // the two inside corners are separate triangles
            return (0..4)
                .filter(|&k| self.inside(k))
                .map(|k| vec![self.crossing((k + 3) % 4), CORNERS[k], self.crossing(k)])
                .collect();
        }
        let mut poly = Vec::with_capacity(6);
        for k in 0..4 {
            let next = (k + 1) % 4;
            if self.inside(k) {
                poly.push(CORNERS[k]);
            }
            if self.inside(k) != self.inside(next) {
                poly.push(self.crossing(k));
            }
        }
        if poly.len() < 3 {
            return Vec::new();
        }
        vec![poly]
    }

    /// Boundary segments in local coordinates.
    fn segments(&self) -> Vec<[[f64; 2]; 2]> {
        let cut: Vec<usize> = (0..4).filter(|&k| self.inside(k) != self.inside((k + 1) % 4)).collect();
        match cut.len() {
            2 => vec![[self.crossing(cut[0]), self.crossing(cut[1])]],
            4 => {
                // wrap the corners that end up isolated
                let isolate_inside = !self.centre_inside();
                (0..4)
                    .filter(|&k| self.inside(k) == isolate_inside)
                    .map(|k| [self.crossing((k + 3) % 4), self.crossing(k)])
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    fn area(&self) -> f64 {
        let mut total = 0.0;
        for poly in self.polygons() {
            let p0 = poly[0];
            for w in poly[1..].windows(2) {
                let (p1, p2) = (w[0], w[1]);
                let a = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
                let c = [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0];
                total += a.abs() * (2.0 * self.u_at(c)).exp();
            }
        }
        total * self.hx * self.hy
    }

    fn length(&self) -> f64 {
        self.segments()
            .into_iter()
            .map(|[a, b]| {
                let flat = ((b[0] - a[0]) * self.hx).hypot((b[1] - a[1]) * self.hy);
                let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                flat * self.u_at(m).exp()
            })
            .sum()
    }
}

fn for_each_cell(u: &ScalarField, domain: &Domain, mut f: impl FnMut(&Cell)) {
    let c = u.chart();
    assert_eq!(c, domain.chart(), "field and domain live on different charts");
    let cx = if c.periodic_x() { c.nx() } else { c.nx() - 1 };
    let cy = if c.periodic_y() { c.ny() } else { c.ny() - 1 };
    let level = domain.level();
    let vals = u.values();
    for j in 0..cy {
        for i in 0..cx {
            let nodes = [(0, 0), (1, 0), (1, 1), (0, 1)].map(|(di, dj)| {
                let (ni, nj) = c.offset(i, j, di, dj).expect("cell corner inside chart");
                c.index(ni, nj)
            });
            let phi = nodes.map(|k| level[k]);
            if phi.iter().all(|&p| p > 0.0) {
                continue;
            }
            f(&Cell { phi, u: nodes.map(|k| vals[k]), hx: c.hx(), hy: c.hy() });
        }
    }
}

fn single_node(u: &ScalarField, domain: &Domain) -> Option<f64> {
    if domain.node_count() != 1 {
        return None;
    }
    let k = domain.mask().iter().position(|&m| m)?;
    Some(u.values()[k])
}

/// Riemannian area of the domain under `e^{2u}` times the chart background.
pub fn area(u: &ScalarField, domain: &Domain) -> f64 {
    let c = u.chart();
    if let Some(v) = single_node(u, domain) {
        return c.hx() * c.hy() * (2.0 * v).exp();
    }
    let mut total = 0.0;
    for_each_cell(u, domain, |cell| total += cell.area());
    total
}

/// Riemannian length of the reconstructed domain boundary. Parts of the
/// boundary lying on a non-periodic chart edge are not counted.
pub fn boundary_length(u: &ScalarField, domain: &Domain) -> f64 {
    let c = u.chart();
    if let Some(v) = single_node(u, domain) {
        return 2.0 * (c.hx() + c.hy()) * v.exp();
    }
    let mut total = 0.0;
    for_each_cell(u, domain, |cell| total += cell.length());
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::ConformalChart;
    use std::f64::consts::PI;

    fn flat(n: usize) -> ScalarField {
        let c = ConformalChart::planar([-1.0, 1.0], [-1.0, 1.0], n, n).unwrap();
        ScalarField::constant(c, 0.0).unwrap()
    }

    #[test]
    fn whole_chart_area() {
        let u = flat(11);
        let d = Domain::whole(*u.chart());
        assert!((area(&u, &d) - 4.0).abs() < 1e-12);
        assert!(boundary_length(&u, &d).abs() < 1e-12);
    }

    #[test]
    fn scaled_metric_scales_area_and_length() {
        let c = ConformalChart::planar([-1.0, 1.0], [-1.0, 1.0], 41, 41).unwrap();
        let u = ScalarField::constant(c, 0.5).unwrap();
        let d = Domain::from_fn(c, |x, y| x.hypot(y) - 0.5).unwrap();
        let u0 = ScalarField::constant(c, 0.0).unwrap();
        let e = 0.5f64.exp();
        assert!((area(&u, &d) - e * e * area(&u0, &d)).abs() < 1e-12);
        assert!((boundary_length(&u, &d) - e * boundary_length(&u0, &d)).abs() < 1e-12);
    }

    #[test]
    fn level_set_disc_converges() {
        let mut prev = f64::INFINITY;
        for n in [21, 41, 81] {
            let u = flat(n);
            let d = Domain::from_fn(*u.chart(), |x, y| x.hypot(y) - 0.6).unwrap();
            let ea = (area(&u, &d) - PI * 0.36).abs();
            let el = (boundary_length(&u, &d) - 2.0 * PI * 0.6).abs();
            assert!(ea < 1e-2 && el < 1e-2, "n={n} area err {ea} length err {el}");
            assert!(ea < prev);
            prev = ea;
        }
    }

    #[test]
    fn single_node_domain() {
        let u = flat(11);
        let c = *u.chart();
        let mut mask = vec![false; c.len()];
        mask[c.index(5, 5)] = true;
        let d = Domain::from_mask(c, mask).unwrap();
        assert!((area(&u, &d) - 0.04).abs() < 1e-15);
        assert!((boundary_length(&u, &d) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn saddle_decider() {
        let cell = |phi| Cell { phi, u: [0.0; 4], hx: 1.0, hy: 1.0 };
        let joined = cell([-1.0, 0.5, -1.0, 0.5]);
        assert_eq!(joined.polygons().len(), 1);
        assert!((joined.area() - (1.0 - 2.0 * 0.5 * (1.0 / 3.0) * (1.0 / 3.0))).abs() < 1e-12);
        let split = cell([-0.5, 1.0, -0.5, 1.0]);
        assert_eq!(split.polygons().len(), 2);
        assert!((split.area() - 2.0 * 0.5 * (1.0 / 3.0) * (1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(joined.segments().len(), 2);
        assert_eq!(split.segments().len(), 2);
    }

    #[test]
    fn periodic_band_area() {
        let c = ConformalChart::cylindrical([-2.0, 2.0], 41, 16).unwrap();
        let u = ScalarField::constant(c, 0.0).unwrap();
        let d = Domain::from_fn(c, |x, _| x.abs() - 0.55).unwrap();
        assert!((area(&u, &d) - 1.1 * 2.0 * PI).abs() < 1e-9);
        assert!((boundary_length(&u, &d) - 4.0 * PI).abs() < 1e-9);
    }
}
