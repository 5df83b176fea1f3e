//! Fixed-size dense matrices for the small linear blocks of the plant.
//!
//! Sizes never exceed 8, so everything lives on the stack and the
//! matrix exponential uses Taylor series with scaling and squaring.

pub type Mat<const N: usize> = [[f64; N]; N];
pub type Vector<const N: usize> = [f64; N];

pub fn zeros<const N: usize>() -> Mat<N> {
    [[0.0; N]; N]
}

pub fn identity<const N: usize>() -> Mat<N> {
    let mut m = zeros::<N>();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn matmul<const N: usize>(a: &Mat<N>, b: &Mat<N>) -> Mat<N> {
    let mut out = zeros::<N>();
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..N {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn matvec<const N: usize>(a: &Mat<N>, x: &Vector<N>) -> Vector<N> {
    let mut out = [0.0; N];
    for (o, row) in out.iter_mut().zip(a.iter()) {
        *o = row.iter().zip(x.iter()).map(|(r, v)| r * v).sum();
    }
    out
}

pub fn dot<const N: usize>(a: &Vector<N>, b: &Vector<N>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn norm_inf<const N: usize>(a: &Mat<N>) -> f64 {
    a.iter()
        .map(|row| row.iter().map(|v| libm::fabs(*v)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm<const N: usize>(a: &Mat<N>) -> Mat<N> {
    let norm = norm_inf(a);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let mut scaled = *a;
    for row in scaled.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    // ||A|| <= 1/4: 18 terms puts the remainder far below f64 epsilon.
    let mut result = identity::<N>();
    let mut term = identity::<N>();
    for k in 1..=18 {
        term = matmul(&term, &scaled);
        let inv_k = 1.0 / k as f64;
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v *= inv_k;
            }
        }
        for (r, t) in result.iter_mut().zip(term.iter()) {
            for (rv, tv) in r.iter_mut().zip(t.iter()) {
                *rv += tv;
            }
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` for a numerically singular matrix.
pub fn solve<const N: usize>(a: &Mat<N>, b: &Vector<N>) -> Option<Vector<N>> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| {
            libm::fabs(m[i][col])
                .partial_cmp(&libm::fabs(m[j][col]))
                .unwrap_or(core::cmp::Ordering::Equal)
        })?;
        if libm::fabs(m[pivot][col]) < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in (col + 1)..N {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..N {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = ((row + 1)..N).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Some(x)
}

/// Single-input single-output continuous-time state-space model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousSs<const N: usize> {
    pub a: Mat<N>,
    pub b: Vector<N>,
    pub c: Vector<N>,
    pub d: f64,
}

/// Discrete-time counterpart of [`ContinuousSs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteSs<const N: usize> {
    pub a: Mat<N>,
    pub b: Vector<N>,
    pub c: Vector<N>,
    pub d: f64,
}

impl<const N: usize> ContinuousSs<N> {
    /// Controllable-canonical realization of `num(s)/den(s)`.
    ///
    /// `den` is monic of degree `N` given in ascending powers without the
    /// leading 1 (`den[k]` multiplies `s^k`). `num` has length `N + 1` in
    /// ascending powers; a nonzero `num[N]` yields a direct feedthrough.
    pub fn controllable_canonical(num: &[f64], den: &Vector<N>) -> Self {
        let mut a = zeros::<N>();
        for i in 0..N.saturating_sub(1) {
            a[i][i + 1] = 1.0;
        }
        for k in 0..N {
            a[N - 1][k] = -den[k];
        }
        let mut b = [0.0; N];
        b[N - 1] = 1.0;
        let d = num.get(N).copied().unwrap_or(0.0);
        let mut c = [0.0; N];
        for k in 0..N {
            c[k] = num.get(k).copied().unwrap_or(0.0) - d * den[k];
        }
        Self { a, b, c, d }
    }

    /// Transfer function value `C (sI - A)^-1 B + D` at real `s`.
    pub fn eval_real(&self, s: f64) -> Option<f64> {
        let mut m = self.a;
        for (i, row) in m.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = -*v;
            }
            row[i] += s;
        }
        let x = solve(&m, &self.b)?;
        Some(dot(&self.c, &x) + self.d)
    }
}

impl<const N: usize> DiscreteSs<N> {
    /// DC gain `C (I - A)^-1 B + D`, i.e. the transfer function at `z = 1`.
    pub fn dc_gain(&self) -> Option<f64> {
        let mut m = self.a;
        for (i, row) in m.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = -*v;
            }
            row[i] += 1.0;
        }
        let x = solve(&m, &self.b)?;
        Some(dot(&self.c, &x) + self.d)
    }

    pub fn output(&self, x: &Vector<N>, u: f64) -> f64 {
        dot(&self.c, x) + self.d * u
    }

    pub fn advance(&self, x: &Vector<N>, u: f64) -> Vector<N> {
        let mut next = matvec(&self.a, x);
        for (n, b) in next.iter_mut().zip(self.b.iter()) {
            *n += b * u;
        }
        next
    }
}

/// Exact zero-order-hold discretization of `(A, B)`.
///
/// `M` must equal `N + 1`; the augmented matrix `[[A, B], [0, 0]] * h` is
/// exponentiated and split into `(Ad, Bd)`.
pub fn zoh<const N: usize, const M: usize>(a: &Mat<N>, b: &Vector<N>, h: f64) -> (Mat<N>, Vector<N>) {
    assert_eq!(M, N + 1, "augmented dimension must be N + 1");
    let mut aug = zeros::<M>();
    for i in 0..N {
        for j in 0..N {
            aug[i][j] = a[i][j] * h;
        }
        aug[i][N] = b[i] * h;
    }
    let e = expm(&aug);
    let mut ad = zeros::<N>();
    let mut bd = [0.0; N];
    for i in 0..N {
        ad[i][..N].copy_from_slice(&e[i][..N]);
        bd[i] = e[i][N];
    }
    (ad, bd)
}

impl<const N: usize> ContinuousSs<N> {
    pub fn discretize_zoh<const M: usize>(&self, h: f64) -> DiscreteSs<N> {
        let (a, b) = zoh::<N, M>(&self.a, &self.b, h);
        DiscreteSs { a, b, c: self.c, d: self.d }
    }
}
