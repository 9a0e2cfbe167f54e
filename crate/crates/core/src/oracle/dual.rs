//! Independent solver for the dual of the flipping LP.
//!
//! Minimizes the convex piecewise-linear function
//!
//! ```text
//! φ(w) = Σ_k (δ |w_k| - C*_k w_k) + (1/n) Σ_i max(0, w·F_i - η_i)
//! ```
//!
//! whose pieces are separated by the hyperplanes `w_k = 0` and `w·F_i = η_i`. Subgradient
//! descent with restarts locates the basin; an exact walk along the edges of the hyperplane
//! arrangement (with exact line searches between vertices) finishes at an optimal vertex.
//! The LP optimum equals `-min φ`.

use super::LpInstance;

const MAX_RESTARTS: usize = 4;
const SUBGRADIENT_STEPS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Row duals in `[upper_0, lower_0, ...]` order, as in [`super::LpSolution::dual`].
    pub z: Vec<f64>,
    /// `w_k = z_lower,k - z_upper,k`.
    pub w: Vec<f64>,
    /// Dual objective `-φ(w)`; equals the primal optimum when both are solved exactly.
    pub value: f64,
    /// `φ` decreases without bound: the primal is infeasible.
    pub unbounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Plane {
    Axis(usize),
    Hinge(usize),
}

struct Dual<'a> {
    inst: &'a LpInstance,
    n: f64,
}

impl Dual<'_> {
    fn k(&self) -> usize {
        self.inst.k()
    }

    fn normal(&self, p: Plane) -> Vec<f64> {
        match p {
            Plane::Axis(k) => (0..self.k()).map(|j| f64::from(u8::from(j == k))).collect(),
            Plane::Hinge(i) => self.inst.f(i).to_vec(),
        }
    }

    fn rhs(&self, p: Plane) -> f64 {
        match p {
            Plane::Axis(_) => 0.0,
            Plane::Hinge(i) => self.inst.eta()[i],
        }
    }

    fn weight(&self, p: Plane) -> f64 {
        match p {
            Plane::Axis(_) => self.inst.delta(),
            Plane::Hinge(_) => 1.0 / self.n,
        }
    }

    fn phi(&self, w: &[f64]) -> f64 {
        let inst = self.inst;
        let lin: f64 = (0..self.k())
            .map(|k| inst.delta() * w[k].abs() - inst.c_star()[k] * w[k])
            .sum();
        let hinge: f64 = (0..inst.n())
            .map(|i| (dot(w, inst.f(i)) - inst.eta()[i]).max(0.0))
            .sum();
        lin + hinge / self.n
    }

    fn subgradient(&self, w: &[f64]) -> Vec<f64> {
        let inst = self.inst;
        let mut g: Vec<f64> = (0..self.k())
            .map(|k| {
                let s = if w[k] > 0.0 {
                    1.0
                } else if w[k] < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                inst.delta() * s - inst.c_star()[k]
            })
            .collect();
        for i in 0..inst.n() {
            if dot(w, inst.f(i)) > inst.eta()[i] {
                for (gk, fk) in g.iter_mut().zip(inst.f(i)) {
                    *gk += fk / self.n;
                }
            }
        }
        g
    }

    /// Best point seen by normalized subgradient steps from `start`.
    fn descend(&self, start: &[f64], scale: f64) -> (Vec<f64>, f64) {
        let mut best = (start.to_vec(), self.phi(start));
        let mut step0 = scale;
        for _ in 0..MAX_RESTARTS {
            let mut w = best.0.clone();
            for t in 0..SUBGRADIENT_STEPS {
                let g = self.subgradient(&w);
                let norm = dot(&g, &g).sqrt();
                if norm == 0.0 {
                    break;
                }
                let step = step0 / ((t + 1) as f64).sqrt() / norm;
                for (wk, gk) in w.iter_mut().zip(&g) {
                    *wk -= step * gk;
                }
                let v = self.phi(&w);
                if v < best.1 {
                    best = (w.clone(), v);
                }
            }
            step0 *= 0.25;
        }
        best
    }

    fn tol(&self, p: Plane, w: &[f64]) -> f64 {
        let nrm = dot(&self.normal(p), &self.normal(p)).sqrt();
        1e-12 * (1.0 + self.rhs(p).abs() + nrm * dot(w, w).sqrt())
    }

    fn residual(&self, p: Plane, w: &[f64]) -> f64 {
        dot(&self.normal(p), w) - self.rhs(p)
    }

    fn planes(&self) -> impl Iterator<Item = Plane> + '_ {
        (0..self.k())
            .map(Plane::Axis)
            .chain((0..self.inst.n()).filter(|&i| self.inst.f(i).iter().any(|v| *v != 0.0)).map(Plane::Hinge))
    }

    /// One-sided derivative of φ at vertex `v` (active planes `active`) along `d`.
    fn directional(&self, v: &[f64], active: &[Plane], d: &[f64]) -> f64 {
        let mut total = 0.0;
        for p in self.planes() {
            let nd = dot(&self.normal(p), d);
            if nd == 0.0 {
                continue;
            }
            let on = active.contains(&p) || self.residual(p, v).abs() <= self.tol(p, v);
            let r = self.residual(p, v);
            let slope = match p {
                Plane::Axis(_) if on => nd.abs(),
                Plane::Axis(_) => r.signum() * nd,
                Plane::Hinge(_) if on => nd.max(0.0),
                Plane::Hinge(_) if r > 0.0 => nd,
                Plane::Hinge(_) => 0.0,
            };
            total += self.weight(p) * slope;
        }
        total - dot(self.inst.c_star(), d)
    }

    /// Exact minimization of φ along `v + t d`, `t >= 0`, given the slope at `0+`.
    /// Returns the step and the plane that stops it, or `None` for an unbounded ray.
    fn line_search(&self, v: &[f64], active: &[Plane], d: &[f64], slope0: f64) -> Option<(f64, Plane)> {
        let mut breaks: Vec<(f64, f64, Plane)> = Vec::new();
        for p in self.planes() {
            if active.contains(&p) {
                continue;
            }
            let nd = dot(&self.normal(p), d);
            if nd == 0.0 {
                continue;
            }
            let r = self.residual(p, v);
            if r.abs() <= self.tol(p, v) {
                continue;
            }
            let t = -r / nd;
            if t > 0.0 {
                breaks.push((t, self.weight(p) * nd.abs(), p));
            }
        }
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut slope = slope0;
        for (t, jump, p) in breaks {
            slope += jump;
            if slope >= -1e-15 {
                return Some((t, p));
            }
        }
        None
    }

    fn vertex(&self, active: &[Plane]) -> Option<Vec<f64>> {
        let rows: Vec<Vec<f64>> = active.iter().map(|&p| self.normal(p)).collect();
        let rhs: Vec<f64> = active.iter().map(|&p| self.rhs(p)).collect();
        solve_square(&rows, &rhs)
    }

    /// Walk vertex to vertex along descending edges until none descends.
    fn walk(&self, mut active: Vec<Plane>) -> Result<(Vec<f64>, f64), ()> {
        let k = self.k();
        let Some(mut v) = self.vertex(&active) else {
            return Ok((vec![0.0; k], self.phi(&vec![0.0; k])));
        };
        let mut value = self.phi(&v);
        let limit = 20 * (self.inst.n() + k) + 100;
        for _ in 0..limit {
            let rows: Vec<Vec<f64>> = active.iter().map(|&p| self.normal(p)).collect();
            let Some(inv) = invert(&rows) else { break };
            let mut best: Option<(f64, usize, Vec<f64>, f64)> = None;
            for h in 0..k {
                for sign in [1.0, -1.0] {
                    let d: Vec<f64> = (0..k).map(|r| sign * inv[r][h]).collect();
                    let slope = self.directional(&v, &active, &d);
                    let norm = dot(&d, &d).sqrt();
                    let rate = slope / norm;
                    if rate < -1e-13 && best.as_ref().is_none_or(|b| rate < b.0) {
                        best = Some((rate, h, d, slope));
                    }
                }
            }
            let Some((_, h, d, slope)) = best else { break };
            let Some((_, plane)) = self.line_search(&v, &active, &d, slope) else {
                return Err(());
            };
            let mut next = active.clone();
            next[h] = plane;
            let Some(w) = self.vertex(&next) else { break };
            let val = self.phi(&w);
            if val > value - 1e-15 * value.abs().max(1.0) {
                break;
            }
            active = next;
            v = w;
            value = val;
        }
        Ok((v, value))
    }

    /// A vertex near `w`: greedily pick nearby planes with independent normals.
    fn snap(&self, w: &[f64]) -> Vec<Plane> {
        let k = self.k();
        let mut planes: Vec<(f64, Plane)> = self
            .planes()
            .map(|p| {
                let nrm = dot(&self.normal(p), &self.normal(p)).sqrt();
                (self.residual(p, w).abs() / nrm, p)
            })
            .collect();
        planes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut chosen: Vec<Plane> = Vec::with_capacity(k);
        for (_, p) in planes {
            let mut trial = chosen.clone();
            trial.push(p);
            if rank(&trial.iter().map(|&q| self.normal(q)).collect::<Vec<_>>()) == trial.len() {
                chosen = trial;
                if chosen.len() == k {
                    break;
                }
            }
        }
        chosen
    }
}

/// Minimize the dual of `inst`.
pub fn solve_dual(inst: &LpInstance) -> DualSolution {
    let d = Dual {
        inst,
        n: inst.n() as f64,
    };
    let k = inst.k();
    let unbounded = || DualSolution {
        z: vec![0.0; 2 * k],
        w: vec![0.0; k],
        value: f64::INFINITY,
        unbounded: true,
    };

    let scale = 1.0
        + (0..inst.n())
            .map(|i| inst.eta()[i].abs() / dot(inst.f(i), inst.f(i)).sqrt().max(1e-12))
            .fold(0.0, f64::max)
            .min(1e6);
    let (mut w, mut value) = d.descend(&vec![0.0; k], scale);
    for _ in 0..MAX_RESTARTS {
        let start = d.snap(&w);
        if start.len() < k {
            break;
        }
        let Ok((v, val)) = d.walk(start) else {
            return unbounded();
        };
        let improved = val < value - 1e-15 * value.abs().max(1.0);
        if val <= value {
            w = v;
            value = val;
        }
        // Restart the subgradient from the vertex; stop once it finds nothing better.
        let (w2, v2) = d.descend(&w, 1e-3 * (1.0 + dot(&w, &w).sqrt()));
        if v2 < value - 1e-12 * value.abs().max(1.0) {
            w = w2;
            value = v2;
        } else if !improved {
            break;
        }
    }
    // A huge optimum norm means the walk is chasing an unbounded ray.
    if !value.is_finite() || dot(&w, &w).sqrt() > 1e12 {
        return unbounded();
    }
    let z = w.iter().flat_map(|&wk| [(-wk).max(0.0), wk.max(0.0)]).collect();
    DualSolution {
        z,
        w,
        value: -value,
        unbounded: false,
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn solve_square(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let inv = invert(rows)?;
    Some(inv.iter().map(|r| dot(r, rhs)).collect())
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(rows: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let m = rows.len();
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..m)
        .map(|r| (0..m).map(|c| f64::from(u8::from(r == c))).collect())
        .collect();
    let scale = rows
        .iter()
        .flatten()
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(1e-300);
    for col in 0..m {
        let piv = (col..m).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for c in 0..m {
            a[col][c] /= p;
            inv[col][c] /= p;
        }
        for r in 0..m {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col];
                for c in 0..m {
                    a[r][c] -= f * a[col][c];
                    inv[r][c] -= f * inv[col][c];
                }
            }
        }
    }
    Some(inv)
}

fn rank(rows: &[Vec<f64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let mut a = rows.to_vec();
    let cols = a[0].len();
    let scale = rows
        .iter()
        .flatten()
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(1e-300);
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..a.len()).max_by(|&p, &q| a[p][c].abs().total_cmp(&a[q][c].abs())) else {
            break;
        };
        if a[piv][c].abs() <= 1e-9 * scale {
            continue;
        }
        a.swap(r, piv);
        for i in 0..a.len() {
            if i != r {
                let f = a[i][c] / a[r][c];
                for j in 0..cols {
                    a[i][j] -= f * a[r][j];
                }
            }
        }
        r += 1;
        if r == a.len() {
            break;
        }
    }
    r
}
