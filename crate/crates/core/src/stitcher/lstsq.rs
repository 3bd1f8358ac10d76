use crate::error::{Error, Result};

/// Streaming sufficient statistics for a linear least-squares fit `Y ≈ X·W + b`.
#[derive(Clone, Debug)]
pub struct NormalEquations {
    n: usize,
    m: usize,
    count: usize,
    sum_x: Vec<f64>,
    sum_y: Vec<f64>,
    /// `n × n`, row-major
    xtx: Vec<f64>,
    /// `n × m`, row-major
    xty: Vec<f64>,
}

/// Solution in `[n, m]` row-major plus bias `[m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstsqSolution {
    pub n: usize,
    pub m: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl NormalEquations {
    pub fn new(n: usize, m: usize) -> Self {
        NormalEquations {
            n,
            m,
            count: 0,
            sum_x: vec![0.0; n],
            sum_y: vec![0.0; m],
            xtx: vec![0.0; n * n],
            xty: vec![0.0; n * m],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add_row(&mut self, x: &[f32], y: &[f32]) {
        debug_assert_eq!((x.len(), y.len()), (self.n, self.m));
        self.count += 1;
        for (i, &xi) in x.iter().enumerate() {
            let xi = xi as f64;
            self.sum_x[i] += xi;
            // upper triangle only; mirrored in solve
            let row = &mut self.xtx[i * self.n..(i + 1) * self.n];
            for (j, &xj) in x.iter().enumerate().skip(i) {
                row[j] += xi * xj as f64;
            }
            let row = &mut self.xty[i * self.m..(i + 1) * self.m];
            for (r, &yj) in row.iter_mut().zip(y) {
                *r += xi * yj as f64;
            }
        }
        for (s, &yj) in self.sum_y.iter_mut().zip(y) {
            *s += yj as f64;
        }
    }

    /// Minimizes `‖XW + b − Y‖² + λ‖W‖²` through the mean-centred normal equations.
    pub fn solve(&self, lambda: f64) -> Result<LstsqSolution> {
        let (n, m) = (self.n, self.m);
        if self.count == 0 {
            return Err(Error::Invalid("least squares needs at least one sample".into()));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Invalid(format!("ridge λ must be ≥ 0, got {lambda}")));
        }
        let s = self.count as f64;
        let mx: Vec<f64> = self.sum_x.iter().map(|v| v / s).collect();
        let my: Vec<f64> = self.sum_y.iter().map(|v| v / s).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.xtx[i * n + j] - s * mx[i] * mx[j];
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
            a[i * n + i] += lambda;
        }
        let mut rhs: Vec<f64> = (0..n * m).map(|k| self.xty[k] - s * mx[k / m] * my[k % m]).collect();
        let l = cholesky(&mut a, n).ok_or_else(|| {
            Error::Singular(if lambda == 0.0 {
                "centred XᵀX is rank deficient; use a ridge λ > 0".into()
            } else {
                format!("centred XᵀX + {lambda}·I is not positive definite; increase λ")
            })
        })?;
        for col in 0..m {
            solve_in_place(l, n, &mut rhs, m, col);
        }
        let bias = (0..m)
            .map(|j| my[j] - (0..n).map(|i| mx[i] * rhs[i * m + j]).sum::<f64>())
            .collect();
        Ok(LstsqSolution {
            n,
            m,
            weight: rhs,
            bias,
        })
    }
}

/// In-place lower Cholesky factor of a symmetric `n × n` matrix, or `None` when
/// a pivot is not safely positive.
fn cholesky(a: &mut [f64], n: usize) -> Option<&[f64]> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 1e-12 * scale) {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    Some(a)
}

/// Solves `L Lᵀ x = b` for column `col` of a row-major `n × m` right-hand side.
fn solve_in_place(l: &[f64], n: usize, b: &mut [f64], m: usize, col: usize) {
    for i in 0..n {
        let mut v = b[i * m + col];
        for k in 0..i {
            v -= l[i * n + k] * b[k * m + col];
        }
        b[i * m + col] = v / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i * m + col];
        for k in i + 1..n {
            v -= l[k * n + i] * b[k * m + col];
        }
        b[i * m + col] = v / l[i * n + i];
    }
}

/// Fits rows of `x` (`[S, n]`) to rows of `y` (`[S, m]`).
pub fn solve_stitch_least_squares(x: &[f32], y: &[f32], n: usize, m: usize, lambda: f64) -> Result<LstsqSolution> {
    if n == 0 || m == 0 || x.len() % n != 0 || y.len() % m != 0 || x.len() / n != y.len() / m {
        return Err(Error::Invalid(format!(
            "activation buffers of {} and {} values do not form [S, {n}] and [S, {m}]",
            x.len(),
            y.len()
        )));
    }
    let mut ne = NormalEquations::new(n, m);
    for (xr, yr) in x.chunks(n).zip(y.chunks(m)) {
        ne.add_row(xr, yr);
    }
    ne.solve(lambda)
}
