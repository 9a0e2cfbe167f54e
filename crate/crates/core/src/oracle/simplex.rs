//! Dense bounded-variable primal simplex for
//!
//! ```text
//! min c·x   s.t.   A x <= b,   0 <= x <= u
//! ```
//!
//! with few rows and many columns. The basis inverse is kept as a dense `m × m` matrix and
//! refactored periodically; nonbasic variables sit at either bound.

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const STALL_BEFORE_BLAND: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Outcome {
    Optimal {
        x: Vec<f64>,
        /// Row duals `y <= 0` of the original `<=` rows.
        duals: Vec<f64>,
    },
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Structural(usize),
    Slack(usize),
    Artificial(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum At {
    Basic,
    Lower,
    Upper,
}

struct Tableau<'a> {
    m: usize,
    /// Row-major `m × n` constraint matrix (rows already sign-normalized by `row_sign`).
    a: &'a [Vec<f64>],
    row_sign: Vec<f64>,
    rhs: Vec<f64>,
    kinds: Vec<Kind>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<At>,
    x: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
}

impl Tableau<'_> {
    #[inline]
    fn column_entry(&self, var: usize, row: usize) -> f64 {
        match self.kinds[var] {
            Kind::Structural(j) => self.row_sign[row] * self.a[row][j],
            Kind::Slack(r) => {
                if r == row {
                    self.row_sign[row]
                } else {
                    0.0
                }
            }
            Kind::Artificial(r) => f64::from(u8::from(r == row)),
        }
    }

    fn column(&self, var: usize) -> Vec<f64> {
        (0..self.m).map(|r| self.column_entry(var, r)).collect()
    }

    fn duals(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for (i, &bv) in self.basis.iter().enumerate() {
            let cb = self.cost[bv];
            if cb != 0.0 {
                for (r, yr) in y.iter_mut().enumerate() {
                    *yr += cb * self.binv[i][r];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, var: usize, y: &[f64]) -> f64 {
        match self.kinds[var] {
            Kind::Structural(j) => {
                let mut d = self.cost[var];
                for r in 0..self.m {
                    d -= y[r] * self.row_sign[r] * self.a[r][j];
                }
                d
            }
            Kind::Slack(r) => self.cost[var] - y[r] * self.row_sign[r],
            Kind::Artificial(r) => self.cost[var] - y[r],
        }
    }

    /// Rebuild `B^-1` from scratch and recompute basic values.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut mat: Vec<Vec<f64>> = (0..m)
            .map(|r| self.basis.iter().map(|&v| self.column_entry(v, r)).collect())
            .collect();
        let mut inv: Vec<Vec<f64>> = (0..m)
            .map(|r| (0..m).map(|c| f64::from(u8::from(r == c))).collect())
            .collect();
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&p, &q| mat[p][col].abs().total_cmp(&mat[q][col].abs()))
                .expect("non-empty range");
            if mat[piv][col].abs() < PIVOT_TOL {
                return false;
            }
            mat.swap(col, piv);
            inv.swap(col, piv);
            let p = mat[col][col];
            for c in 0..m {
                mat[col][c] /= p;
                inv[col][c] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = mat[r][col];
                    if f != 0.0 {
                        for c in 0..m {
                            mat[r][c] -= f * mat[col][c];
                            inv[r][c] -= f * inv[col][c];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.recompute_basic();
        true
    }

    fn recompute_basic(&mut self) {
        let mut resid = self.rhs.clone();
        for v in 0..self.kinds.len() {
            if self.state[v] != At::Basic && self.x[v] != 0.0 {
                for (r, res) in resid.iter_mut().enumerate() {
                    *res -= self.column_entry(v, r) * self.x[v];
                }
            }
        }
        for i in 0..self.m {
            let val: f64 = (0..self.m).map(|r| self.binv[i][r] * resid[r]).sum();
            self.x[self.basis[i]] = val;
        }
    }

    /// Run simplex iterations on the current cost vector.
    fn optimize(&mut self, max_iter: usize) -> bool {
        let mut stall = 0usize;
        let mut last_obj = f64::INFINITY;
        for iter in 0..max_iter {
            if iter > 0 && iter % REFACTOR_EVERY == 0 && !self.refactor() {
                return false;
            }
            let y = self.duals();
            let bland = stall >= STALL_BEFORE_BLAND;
            let mut entering: Option<(usize, f64)> = None;
            for v in 0..self.kinds.len() {
                let dir = match self.state[v] {
                    At::Basic => continue,
                    At::Lower if self.upper[v] > 0.0 => 1.0,
                    At::Upper => -1.0,
                    At::Lower => continue,
                };
                let d = self.reduced_cost(v, &y);
                let gain = -dir * d;
                if gain > COST_TOL {
                    if bland {
                        entering = Some((v, dir));
                        break;
                    }
                    if entering.is_none_or(|(_, g)| gain > g) {
                        entering = Some((v, gain));
                    }
                }
            }
            let Some((var, tag)) = entering else {
                return true;
            };
            let dir = if bland {
                tag
            } else if self.state[var] == At::Lower {
                1.0
            } else {
                -1.0
            };

            let col = self.column(var);
            let alpha: Vec<f64> = (0..self.m)
                .map(|i| (0..self.m).map(|r| self.binv[i][r] * col[r]).sum())
                .collect();

            // Ratio test; ties go to the smallest variable index.
            let mut theta = self.upper[var];
            let mut leave: Option<(usize, At)> = None;
            for i in 0..self.m {
                let rate = dir * alpha[i];
                let bv = self.basis[i];
                let (limit, bound) = if rate > PIVOT_TOL {
                    (self.x[bv].max(0.0) / rate, At::Lower)
                } else if rate < -PIVOT_TOL && self.upper[bv].is_finite() {
                    ((self.upper[bv] - self.x[bv]).max(0.0) / -rate, At::Upper)
                } else {
                    continue;
                };
                let better = limit < theta
                    || (limit == theta
                        && leave.is_some_and(|(li, _)| self.basis[li] > bv));
                if better {
                    theta = limit;
                    leave = Some((i, bound));
                }
            }
            if !theta.is_finite() {
                // Unbounded ray; cannot happen with bounded structural variables.
                return false;
            }

            self.x[var] += dir * theta;
            for i in 0..self.m {
                let bv = self.basis[i];
                self.x[bv] -= theta * dir * alpha[i];
            }
            match leave {
                None => {
                    self.state[var] = if dir > 0.0 { At::Upper } else { At::Lower };
                    self.x[var] = if dir > 0.0 { self.upper[var] } else { 0.0 };
                }
                Some((r, bound)) => {
                    let out = self.basis[r];
                    self.state[out] = bound;
                    self.x[out] = if bound == At::Upper { self.upper[out] } else { 0.0 };
                    self.state[var] = At::Basic;
                    self.basis[r] = var;
                    let p = alpha[r];
                    for c in 0..self.m {
                        self.binv[r][c] /= p;
                    }
                    for i in 0..self.m {
                        if i != r && alpha[i] != 0.0 {
                            let f = alpha[i];
                            for c in 0..self.m {
                                self.binv[i][c] -= f * self.binv[r][c];
                            }
                        }
                    }
                }
            }

            let obj: f64 = (0..self.kinds.len()).map(|v| self.cost[v] * self.x[v]).sum();
            if obj < last_obj - 1e-14 * last_obj.abs().max(1.0) {
                stall = 0;
                last_obj = obj;
            } else {
                stall += 1;
            }
        }
        false
    }
}

/// Solve `min c·x  s.t.  a x <= b,  0 <= x <= upper`.
pub(crate) fn solve(c: &[f64], a: &[Vec<f64>], b: &[f64], upper: &[f64]) -> Outcome {
    let n = c.len();
    let m = a.len();
    let row_sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let rhs: Vec<f64> = b.iter().zip(&row_sign).map(|(v, s)| v * s).collect();

    let mut kinds: Vec<Kind> = (0..n).map(Kind::Structural).collect();
    kinds.extend((0..m).map(Kind::Slack));
    let mut basis = Vec::with_capacity(m);
    let mut artificial = Vec::new();
    for r in 0..m {
        if row_sign[r] > 0.0 {
            basis.push(n + r);
        } else {
            artificial.push(kinds.len());
            basis.push(kinds.len());
            kinds.push(Kind::Artificial(r));
        }
    }
    let total = kinds.len();
    let mut upper: Vec<f64> = upper.to_vec();
    upper.extend(std::iter::repeat_n(f64::INFINITY, total - n));
    let mut state = vec![At::Lower; total];
    for &v in &basis {
        state[v] = At::Basic;
    }
    let mut t = Tableau {
        m,
        a,
        row_sign,
        rhs,
        kinds,
        upper,
        cost: vec![0.0; total],
        state,
        x: vec![0.0; total],
        basis,
        binv: Vec::new(),
    };
    if !t.refactor() {
        return Outcome::IterationLimit;
    }
    let max_iter = 50 * (total + 10);

    if !artificial.is_empty() {
        for &v in &artificial {
            t.cost[v] = 1.0;
        }
        if !t.optimize(max_iter) {
            return Outcome::IterationLimit;
        }
        let infeas: f64 = artificial.iter().map(|&v| t.x[v]).sum();
        let scale = 1.0 + t.rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if infeas > FEAS_TOL * scale {
            return Outcome::Infeasible;
        }
        for &v in &artificial {
            t.cost[v] = 0.0;
            t.upper[v] = 0.0;
            if t.state[v] != At::Basic {
                t.x[v] = 0.0;
            }
        }
    }
    t.cost[..n].copy_from_slice(c);
    if !t.optimize(max_iter) || !t.refactor() {
        return Outcome::IterationLimit;
    }
    let y = t.duals();
    let duals = y.iter().zip(&t.row_sign).map(|(v, s)| v * s).collect();
    let x = t.x[..n]
        .iter()
        .zip(&t.upper[..n])
        .map(|(&v, &u)| v.clamp(0.0, u))
        .collect();
    Outcome::Optimal { x, duals }
}
