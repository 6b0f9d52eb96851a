//! Backward Euler by damped Newton.
//!
//! Unknowns are the free nodes. The step solves
//! `G(w) = e^{2w}(w − u) − dt Δ_h w = 0`, whose Jacobian
//! `diag(e^{2w}(1 + 2(w − u))) − dt L_h` is block tridiagonal along `x`.
//! Convergence is judged on `F = w − u − dt e^{−2w} Δ_h w`.

use nalgebra::{DMatrix, DVector};

use super::{FlowState, Role, StepControl};
use crate::chart::ConformalChart;
use crate::error::{Error, Result};

pub(super) fn backward_euler(state: &FlowState, dt: f64, roles: &[Role], ctl: &StepControl) -> Result<Vec<f64>> {
    let c = *state.chart();
    let u = state.u().values();
    let t_new = state.t() + dt;
    let mut w = u.to_vec();
    let mut free = Vec::new();
    for (k, role) in roles.iter().enumerate() {
        match role {
            Role::Free => free.push(k),
            Role::Frozen => {}
            Role::Exact(r) => {
                let (i, j) = c.node(k);
                w[k] = r.eval(&c, i, j, t_new);
            }
        }
    }
    if free.is_empty() {
        return Ok(w);
    }
    let solver = LinearSolver::new(&c, roles);

    let mut f = residual(&c, u, &w, dt, &free);
    let mut norm = inf_norm(&f);
    let tol = |w: &[f64]| ctl.newton_tol + roundoff_floor(&c, u, w, dt, &free);
    for _ in 0..ctl.max_newton {
        if norm < tol(&w) {
            return Ok(w);
        }
        let diag: Vec<f64> = free.iter().map(|&k| (2.0 * w[k]).exp() * (1.0 + 2.0 * (w[k] - u[k]))).collect();
        let rhs: Vec<f64> = free.iter().zip(&f).map(|(&k, &fk)| -(2.0 * w[k]).exp() * fk).collect();
        let delta = solver.solve(&c, &diag, dt, &rhs)?;

        let mut lambda = 1.0;
        loop {
            let mut trial = w.clone();
            for (&k, &d) in free.iter().zip(&delta) {
                trial[k] += lambda * d;
            }
            let ft = residual(&c, u, &trial, dt, &free);
            let nt = inf_norm(&ft);
            if nt.is_finite() && (nt < (1.0 - 1e-4 * lambda) * norm || lambda < 1e-3) {
                w = trial;
                f = ft;
                norm = nt;
                break;
            }
            lambda *= 0.5;
        }
        if !norm.is_finite() {
            return Err(Error::StepBlowUp { t: t_new });
        }
    }
    if norm < tol(&w) {
        Ok(w)
    } else {
        Err(Error::NewtonFailure { t: t_new, residual: norm, iterations: ctl.max_newton })
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

fn lap(c: &ConformalChart, w: &[f64], k: usize) -> f64 {
    let (i, j) = c.node(k);
    let at = |di, dj| {
        let (a, b) = c.offset(i, j, di, dj).expect("free nodes are interior");
        w[c.index(a, b)]
    };
    let wk = w[k];
    (at(-1, 0) - 2.0 * wk + at(1, 0)) / (c.hx() * c.hx()) + (at(0, -1) - 2.0 * wk + at(0, 1)) / (c.hy() * c.hy())
}

fn residual(c: &ConformalChart, u: &[f64], w: &[f64], dt: f64, free: &[usize]) -> Vec<f64> {
    free.iter().map(|&k| w[k] - u[k] - dt * (-2.0 * w[k]).exp() * lap(c, w, k)).collect()
}

/// Size of the rounding noise in `F`: where `e^{−2w}` is huge the
/// Laplacian term amplifies the last bits of `w`.
fn roundoff_floor(c: &ConformalChart, u: &[f64], w: &[f64], dt: f64, free: &[usize]) -> f64 {
    let stencil = 4.0 / (c.hx() * c.hx()) + 4.0 / (c.hy() * c.hy());
    free.iter()
        .map(|&k| {
            8.0 * f64::EPSILON * (w[k].abs() + u[k].abs() + dt * (-2.0 * w[k]).exp() * stencil * w[k].abs().max(1.0))
        })
        .fold(0.0, f64::max)
}

/// Solves `(diag − dt L_h) δ = rhs` on the free nodes.
enum LinearSolver {
    /// Free nodes form full lines `i = i0..i1` of `m` nodes each.
    Blocks {
        lines: usize,
        m: usize,
    },
    Cg {
        free: Vec<usize>,
    },
}

impl LinearSolver {
    fn new(c: &ConformalChart, roles: &[Role]) -> Self {
        let free: Vec<usize> = (0..roles.len()).filter(|&k| roles[k] == Role::Free).collect();
        if !c.periodic_x() {
            let (i0, i1) = (1, c.nx() - 1);
            let (j0, j1) = if c.periodic_y() { (0, c.ny()) } else { (1, c.ny() - 1) };
            let m = j1 - j0;
            let expected = (i1 - i0) * m;
            let rect = free.len() == expected
                && free.iter().all(|&k| {
                    let (i, j) = c.node(k);
                    (i0..i1).contains(&i) && (j0..j1).contains(&j)
                });
            if rect {
                return LinearSolver::Blocks { lines: i1 - i0, m };
            }
        }
        LinearSolver::Cg { free }
    }

    fn solve(&self, c: &ConformalChart, diag: &[f64], dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            LinearSolver::Blocks { lines, m } => block_thomas(c, *lines, *m, diag, dt, rhs),
            LinearSolver::Cg { free } => conjugate_gradient(c, free, diag, dt, rhs),
        }
    }
}

/// Free nodes are ordered `j`-major (`k = j*nx + i`); the block solver works
/// line by line in `i`, so it gathers and scatters through `pos`.
fn block_thomas(c: &ConformalChart, lines: usize, m: usize, diag: &[f64], dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let ni = lines;
    // position of (line a, row b) in the free-node ordering
    let pos = |a: usize, b: usize| b * ni + a;
    let ax = -dt / (c.hx() * c.hx());
    let ay = -dt / (c.hy() * c.hy());
    let centre = -2.0 * (ax + ay);
    let periodic_y = c.periodic_y();

    let block = |a: usize| -> DMatrix<f64> {
        let mut d = DMatrix::zeros(m, m);
        for b in 0..m {
            d[(b, b)] = diag[pos(a, b)] + centre;
            if b + 1 < m {
                d[(b, b + 1)] = ay;
                d[(b + 1, b)] = ay;
            } else if periodic_y {
                d[(b, 0)] += ay;
                d[(0, b)] += ay;
            }
        }
        d
    };
    let rhs_line = |a: usize| DVector::from_iterator(m, (0..m).map(|b| rhs[pos(a, b)]));

    let mut inv: Vec<DMatrix<f64>> = Vec::with_capacity(ni);
    let mut y: Vec<DVector<f64>> = Vec::with_capacity(ni);
    for a in 0..ni {
        let mut s = block(a);
        let mut ya = rhs_line(a);
        if a > 0 {
            let prev = &inv[a - 1];
            s -= prev * (ax * ax);
            ya -= prev * &y[a - 1] * ax;
        }
        let si = s.try_inverse().ok_or(Error::SingularSystem)?;
        inv.push(si);
        y.push(ya);
    }
    let mut x: Vec<DVector<f64>> = vec![DVector::zeros(m); ni];
    for a in (0..ni).rev() {
        let mut r = y[a].clone();
        if a + 1 < ni {
            r -= &x[a + 1] * ax;
        }
        x[a] = &inv[a] * r;
    }
    let mut out = vec![0.0; ni * m];
    for a in 0..ni {
        for b in 0..m {
            out[pos(a, b)] = x[a][b];
        }
    }
    Ok(out)
}

fn conjugate_gradient(c: &ConformalChart, free: &[usize], diag: &[f64], dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = free.len();
    let mut slot = vec![usize::MAX; c.len()];
    for (s, &k) in free.iter().enumerate() {
        slot[k] = s;
    }
    let (ihx2, ihy2) = (1.0 / (c.hx() * c.hx()), 1.0 / (c.hy() * c.hy()));
    let apply = |x: &[f64], out: &mut [f64]| {
        for (s, &k) in free.iter().enumerate() {
            let (i, j) = c.node(k);
            let mut acc = (diag[s] + 2.0 * dt * (ihx2 + ihy2)) * x[s];
            for (di, dj, w) in [(-1, 0, ihx2), (1, 0, ihx2), (0, -1, ihy2), (0, 1, ihy2)] {
                if let Some((a, b)) = c.offset(i, j, di, dj) {
                    let q = slot[c.index(a, b)];
                    if q != usize::MAX {
                        acc -= dt * w * x[q];
                    }
                }
            }
            out[s] = acc;
        }
    };
    let precond: Vec<f64> = diag.iter().map(|&d| 1.0 / (d + 2.0 * dt * (ihx2 + ihy2))).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&precond).map(|(a, p)| a * p).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let target = 1e-14 * dot(rhs, rhs).sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..(10 * n).max(100) {
        if dot(&r, &r).sqrt() <= target {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularSystem);
        }
        let alpha = rz / pap;
        for s in 0..n {
            x[s] += alpha * p[s];
            r[s] -= alpha * ap[s];
        }
        for s in 0..n {
            z[s] = r[s] * precond[s];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for s in 0..n {
            p[s] = z[s] + beta * p[s];
        }
    }
    if dot(&r, &r).sqrt() <= 1e-8 * dot(rhs, rhs).sqrt() {
        Ok(x)
    } else {
        Err(Error::SingularSystem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{BoundaryCondition, ExactReference, StepControl};
    use crate::ScalarField;

    fn dense_reference(c: &ConformalChart, free: &[usize], diag: &[f64], dt: f64, rhs: &[f64]) -> Vec<f64> {
        let n = free.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut slot = vec![usize::MAX; c.len()];
        for (s, &k) in free.iter().enumerate() {
            slot[k] = s;
        }
        for (s, &k) in free.iter().enumerate() {
            let (i, j) = c.node(k);
            a[(s, s)] += diag[s];
            for (di, dj, h) in [(-1, 0, c.hx()), (1, 0, c.hx()), (0, -1, c.hy()), (0, 1, c.hy())] {
                a[(s, s)] += dt / (h * h);
                if let Some((p, q)) = c.offset(i, j, di, dj) {
                    let o = slot[c.index(p, q)];
                    if o != usize::MAX {
                        a[(s, o)] -= dt / (h * h);
                    }
                }
            }
        }
        let x = a.lu().solve(&DVector::from_column_slice(rhs)).unwrap();
        x.iter().copied().collect()
    }

    fn check_against_dense(c: ConformalChart, bc: BoundaryCondition) {
        let u = ScalarField::constant(c, 0.0).unwrap();
        let s = FlowState::new(0.0, u, bc).unwrap();
        let roles = s.roles();
        let free: Vec<usize> = (0..roles.len()).filter(|&k| roles[k] == Role::Free).collect();
        let diag: Vec<f64> = (0..free.len()).map(|s| 1.0 + 0.1 * (s % 7) as f64).collect();
        let rhs: Vec<f64> = (0..free.len()).map(|s| ((s * 37 % 11) as f64 - 5.0) * 0.1).collect();
        let dt = 0.01;
        let got = LinearSolver::new(&c, &roles).solve(&c, &diag, dt, &rhs).unwrap();
        let want = dense_reference(&c, &free, &diag, dt, &rhs);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
    }

    #[test]
    fn block_solver_matches_dense_planar() {
        let c = ConformalChart::planar([0.0, 1.0], [0.0, 2.0], 9, 12).unwrap();
        check_against_dense(c, BoundaryCondition::frozen());
    }

    #[test]
    fn block_solver_matches_dense_cylinder() {
        let c = ConformalChart::cylindrical([-1.0, 1.0], 10, 8).unwrap();
        check_against_dense(c, BoundaryCondition::exact(ExactReference::Constant { value: 0.0 }));
    }

    #[test]
    fn cg_matches_dense_torus() {
        let c = ConformalChart::planar_periodic([0.0, 1.0], [0.0, 1.0], 9, 8).unwrap();
        check_against_dense(c, BoundaryCondition::periodic_only());
    }

    #[test]
    fn newton_residual_below_tolerance() {
        let c = ConformalChart::planar_periodic([0.0, 1.0], [0.0, 1.0], 16, 16).unwrap();
        let u =
            ScalarField::from_fn(c, |x, y| 0.3 * (std::f64::consts::TAU * x).sin() * (std::f64::consts::TAU * y).cos())
                .unwrap();
        let s = FlowState::new(0.0, u, BoundaryCondition::periodic_only()).unwrap();
        let ctl = StepControl::implicit(0.01);
        let roles = s.roles();
        let w = backward_euler(&s, 0.01, &roles, &ctl).unwrap();
        let free: Vec<usize> = (0..c.len()).collect();
        let f = residual(&c, s.u().values(), &w, 0.01, &free);
        assert!(inf_norm(&f) < ctl.newton_tol);
    }
}
