//! Grid-sampled scalar fields and their text snapshot format.
//!
//! A snapshot is a small header followed by the values row-major, one grid
//! row (fixed `j`) per line, printed with 17 significant digits so that a
//! write/read cycle reproduces every bit:
//!
//! ```text
//! ricci2d-field 1
//! kind cylindrical
//! bounds -4.0000000000000000e0 8.0000000000000000e0 0.0000000000000000e0 6.2831853071795862e0
//! nx 49
//! ny 8
//! time 0.0000000000000000e0
//! <nx values>
//! ...
//! ```

use std::io::{BufRead, Write};

use crate::chart::{ChartKind, ConformalChart};
use crate::error::{Error, Result};

const MAGIC: &str = "ricci2d-field 1";

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    chart: ConformalChart,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(chart: ConformalChart, values: Vec<f64>) -> Result<Self> {
        if values.len() != chart.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, chart has {} nodes",
                values.len(),
                chart.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = chart.node(k);
            return Err(Error::NonFinite { i, j });
        }
        Ok(Self { chart, values })
    }

    /// Sample `f(x, y)` at every node (chart coordinates).
    pub fn from_fn(chart: ConformalChart, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(chart.len());
        for j in 0..chart.ny() {
            for i in 0..chart.nx() {
                let [x, y] = chart.coord(i, j);
                values.push(f(x, y));
            }
        }
        Self::new(chart, values)
    }

    pub fn constant(chart: ConformalChart, c: f64) -> Result<Self> {
        Self::new(chart, vec![c; chart.len()])
    }

    /// Skips the finiteness scan; callers guarantee finite values.
    pub(crate) fn from_raw(chart: ConformalChart, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), chart.len());
        Self { chart, values }
    }

    pub fn chart(&self) -> &ConformalChart {
        &self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.chart.index(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.chart, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Bilinear interpolation at a chart coordinate; `None` outside the chart.
    pub fn interpolate(&self, p: [f64; 2]) -> Option<f64> {
        let c = &self.chart;
        let [x0, _, y0, _] = c.bounds();
        let fx = (p[0] - x0) / c.hx();
        let fy = (p[1] - y0) / c.hy();
        let locate = |f: f64, n: usize, periodic: bool| -> Option<(usize, usize, f64)> {
            if periodic {
                let f = f.rem_euclid(n as f64);
                let k = (f.floor() as usize).min(n - 1);
                Some((k, (k + 1) % n, f - k as f64))
            } else {
                if f < -1e-9 || f > (n - 1) as f64 + 1e-9 {
                    return None;
                }
                let k = (f.floor().max(0.0) as usize).min(n - 2);
                Some((k, k + 1, (f - k as f64).clamp(0.0, 1.0)))
            }
        };
        let (i0, i1, a) = locate(fx, c.nx(), c.periodic_x())?;
        let (j0, j1, b) = locate(fy, c.ny(), c.periodic_y())?;
        Some(
            (1.0 - a) * (1.0 - b) * self.at(i0, j0)
                + a * (1.0 - b) * self.at(i1, j0)
                + (1.0 - a) * b * self.at(i0, j1)
                + a * b * self.at(i1, j1),
        )
    }

    pub fn write_snapshot<W: Write>(&self, time: f64, mut w: W) -> std::io::Result<()> {
        let c = &self.chart;
        let [x0, x1, y0, y1] = c.bounds();
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "kind {}", c.kind().as_str())?;
        writeln!(w, "bounds {} {} {} {}", fmt17(x0), fmt17(x1), fmt17(y0), fmt17(y1))?;
        writeln!(w, "nx {}", c.nx())?;
        writeln!(w, "ny {}", c.ny())?;
        writeln!(w, "time {}", fmt17(time))?;
        let mut line = String::new();
        for j in 0..c.ny() {
            line.clear();
            for i in 0..c.nx() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&fmt17(self.at(i, j)));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Parse a snapshot, returning the field and its time stamp.
    pub fn read_snapshot<R: BufRead>(r: R) -> Result<(Self, f64)> {
        let mut lines = r.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n + 1, l)),
                Some((n, Err(e))) => Err(Error::Snapshot { line: n + 1, message: e.to_string() }),
                None => Err(Error::Snapshot { line: 0, message: format!("missing {what}") }),
            }
        };
        let bad = |line: usize, message: String| Error::Snapshot { line, message };

        let (n, magic) = next("header")?;
        if magic.trim() != MAGIC {
            return Err(bad(n, format!("expected '{MAGIC}'")));
        }
        let mut keyed = |key: &str| -> Result<(usize, String)> {
            let (n, l) = next(key)?;
            let rest = l
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| bad(n, format!("expected '{key}'")))?;
            Ok((n, rest.trim().to_string()))
        };
        let (n, kind) = keyed("kind")?;
        let kind = ChartKind::parse(&kind).ok_or_else(|| bad(n, format!("unknown chart kind '{kind}'")))?;
        let (n, b) = keyed("bounds")?;
        let b: Vec<f64> =
            b.split_whitespace().map(|s| s.parse::<f64>().map_err(|e| bad(n, e.to_string()))).collect::<Result<_>>()?;
        if b.len() != 4 {
            return Err(bad(n, "bounds needs four numbers".into()));
        }
        let (n, nx) = keyed("nx")?;
        let nx: usize = nx.parse().map_err(|_| bad(n, "bad nx".into()))?;
        let (n, ny) = keyed("ny")?;
        let ny: usize = ny.parse().map_err(|_| bad(n, "bad ny".into()))?;
        let (n, t) = keyed("time")?;
        let time: f64 = t.parse().map_err(|_| bad(n, "bad time".into()))?;
        let chart = ConformalChart::new(kind, [b[0], b[1], b[2], b[3]], nx, ny)?;

        let mut values = Vec::with_capacity(chart.len());
        for _ in 0..ny {
            let (n, l) = next("row")?;
            let row_start = values.len();
            for tok in l.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|e| bad(n, e.to_string()))?);
            }
            if values.len() - row_start != nx {
                return Err(bad(n, format!("expected {nx} values")));
            }
        }
        Ok((Self::new(chart, values)?, time))
    }
}

/// 17 significant digits: enough for an exact round trip of any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_nan() {
        let c = ConformalChart::planar([0.0, 1.0], [0.0, 1.0], 8, 8).unwrap();
        let mut v = vec![0.0; 64];
        v[10] = f64::NAN;
        assert!(matches!(ScalarField::new(c, v), Err(Error::NonFinite { i: 2, j: 1 })));
    }

    #[test]
    fn bilinear_reproduces_linear_functions() {
        let c = ConformalChart::cylindrical([-1.0, 2.0], 13, 16).unwrap();
        let f = ScalarField::from_fn(c, |x, _| 3.0 * x - 1.0).unwrap();
        let v = f.interpolate([0.37, 6.2]).unwrap();
        assert!((v - (3.0 * 0.37 - 1.0)).abs() < 1e-13);
        assert!(f.interpolate([2.5, 0.0]).is_none());
    }

    #[test]
    fn truncated_snapshot_is_an_error() {
        let c = ConformalChart::planar([0.0, 1.0], [0.0, 1.0], 8, 8).unwrap();
        let f = ScalarField::constant(c, 1.5).unwrap();
        let mut buf = Vec::new();
        f.write_snapshot(0.25, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(ScalarField::read_snapshot(cut.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn snapshot_round_trip_is_bit_exact(
            vals in proptest::collection::vec(-1e6f64..1e6, 80),
            t in 0.0f64..10.0,
            scale in 1e-8f64..1e8,
        ) {
            let c = ConformalChart::cylindrical([-4.0, 8.0], 10, 8).unwrap();
            let vals: Vec<f64> = vals.iter().map(|v| v * scale).collect();
            let f = ScalarField::new(c, vals).unwrap();
            let mut buf = Vec::new();
            f.write_snapshot(t, &mut buf).unwrap();
            let (g, t2) = ScalarField::read_snapshot(buf.as_slice()).unwrap();
            prop_assert_eq!(t.to_bits(), t2.to_bits());
            prop_assert_eq!(g.chart(), f.chart());
            for (a, b) in f.values().iter().zip(g.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
