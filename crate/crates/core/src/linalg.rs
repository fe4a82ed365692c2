//! Dense linear algebra for small structured generators.
//!
//! Everything in this crate works on matrices of size `(n+1)*d` at most
//! (obligor count `n`, chain dimension `d`), so the kernels favor clarity and
//! reproducibility: row-major storage, partial-pivot LU, and the
//! scaling-and-squaring Padé(13) matrix exponential. A fixed-step RK4
//! integrator for `Y' = M Y` is kept alongside as an independent cross-check
//! path for the exponential.
//!
//! The binomial block transform `V` (blocks `C(n-j, n-i) (-1)^{i-j} I`)
//! conjugates the joint block-bidiagonal generator of the obligor model into
//! block-diagonal form; `binomial_block_exp` assembles the full exponential
//! from the `n+1` small diagonal-block exponentials.

use crate::error::{Error, Result};
use num_complex::Complex64;

// ---------------------------------------------------------------------------
// Real matrices
// ---------------------------------------------------------------------------

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dimension("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Error::Dimension("matrix needs at least one column".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        let m = Matrix {
            rows: rows.len(),
            cols,
            data,
        };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &x) in entries.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::Validation("matrix has non-finite entries".into()))
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must match");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimensions must match");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = NeumaierSum::new();
            for j in 0..self.cols {
                acc.add(self.get(i, j) * v[j]);
            }
            out[i] = acc.value();
        }
        out
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum::<f64>())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Writes `block` at block position (bi, bj) of a block-partitioned
    /// matrix whose blocks are all `block.rows() x block.cols()`.
    pub fn set_block(&mut self, bi: usize, bj: usize, block: &Matrix) {
        let (br, bc) = (block.rows, block.cols);
        for i in 0..br {
            for j in 0..bc {
                self.set(bi * br + i, bj * bc + j, block.get(i, j));
            }
        }
    }

    pub fn block(&self, bi: usize, bj: usize, br: usize, bc: usize) -> Matrix {
        Matrix::from_fn(br, bc, |i, j| self.get(bi * br + i, bj * bc + j))
    }

    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        LuDecomposition::new(self)?.solve(rhs)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve(&Matrix::identity(self.rows))
    }

    pub fn determinant(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::Dimension("determinant of non-square matrix".into()));
        }
        match LuDecomposition::new(self) {
            Ok(lu) => Ok(lu.determinant()),
            Err(Error::Internal(_)) => Ok(0.0),
            Err(e) => Err(e),
        }
    }
}

// ---------------------------------------------------------------------------
// LU with partial pivoting
// ---------------------------------------------------------------------------

struct LuDecomposition {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl LuDecomposition {
    fn new(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension("LU of non-square matrix".into()));
        }
        let n = m.rows;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_val = lu.get(col, col).abs();
            for r in (col + 1)..n {
                let v = lu.get(r, col).abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = r;
                }
            }
            if pivot_val == 0.0 {
                return Err(Error::Internal("singular matrix in LU".into()));
            }
            if pivot_row != col {
                for j in 0..n {
                    let tmp = lu.get(col, j);
                    lu.set(col, j, lu.get(pivot_row, j));
                    lu.set(pivot_row, j, tmp);
                }
                perm.swap(col, pivot_row);
                sign = -sign;
            }
            let pivot = lu.get(col, col);
            for r in (col + 1)..n {
                let factor = lu.get(r, col) / pivot;
                lu.set(r, col, factor);
                for j in (col + 1)..n {
                    let v = lu.get(r, j) - factor * lu.get(col, j);
                    lu.set(r, j, v);
                }
            }
        }
        Ok(LuDecomposition { lu, perm, sign })
    }

    fn determinant(&self) -> f64 {
        let n = self.lu.rows;
        let mut det = self.sign;
        for i in 0..n {
            det *= self.lu.get(i, i);
        }
        det
    }

    fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        let n = self.lu.rows;
        if rhs.rows != n {
            return Err(Error::Dimension("rhs rows must match matrix".into()));
        }
        let m = rhs.cols;
        let mut x = Matrix::zeros(n, m);
        // Forward substitution on the permuted rhs.
        for c in 0..m {
            for i in 0..n {
                let mut v = rhs.get(self.perm[i], c);
                for k in 0..i {
                    v -= self.lu.get(i, k) * x.get(k, c);
                }
                x.set(i, c, v);
            }
            for i in (0..n).rev() {
                let mut v = x.get(i, c);
                for k in (i + 1)..n {
                    v -= self.lu.get(i, k) * x.get(k, c);
                }
                x.set(i, c, v / self.lu.get(i, i));
            }
        }
        Ok(x)
    }

    /// 1-norm condition estimate (exact inverse norm at these sizes).
    fn condition_1(&self, original: &Matrix) -> Result<f64> {
        let inv = self.solve(&Matrix::identity(self.lu.rows))?;
        Ok(original.norm_1() * inv.norm_1())
    }
}

/// 1-norm condition number `kappa_1 = ||M||_1 ||M^(-1)||_1`.
pub fn condition_estimate(m: &Matrix) -> Result<f64> {
    LuDecomposition::new(m)?.condition_1(m)
}

// ---------------------------------------------------------------------------
// Compensated summation
// ---------------------------------------------------------------------------

/// Neumaier compensated accumulator; used for the alternating binomial sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated accumulator over vectors of fixed length.
#[derive(Debug, Clone)]
pub struct VecAccumulator {
    terms: Vec<NeumaierSum>,
}

impl VecAccumulator {
    pub fn new(len: usize) -> Self {
        VecAccumulator {
            terms: vec![NeumaierSum::new(); len],
        }
    }

    pub fn add_scaled(&mut self, coeff: f64, v: &[f64]) {
        assert_eq!(self.terms.len(), v.len());
        for (acc, &x) in self.terms.iter_mut().zip(v) {
            acc.add(coeff * x);
        }
    }

    pub fn add_scaled_at(&mut self, index: usize, value: f64) {
        self.terms[index].add(value);
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.terms.iter().map(NeumaierSum::value).collect()
    }
}

// ---------------------------------------------------------------------------
// Matrix exponential: Padé(13) scaling and squaring
// ---------------------------------------------------------------------------

/// Padé(13) numerator coefficients (Higham 2005).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which a single Padé(13) evaluation is accurate.
const THETA13: f64 = 5.371920351148152;

/// Computes `exp(m * t)` by scaling and squaring with a diagonal Padé(13)
/// approximant. Relative accuracy is at the level of double-precision
/// rounding for the matrix sizes used in this crate; `exp(m * 0) = I`
/// exactly.
pub fn mat_exp(m: &Matrix, t: f64) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !t.is_finite() {
        return Err(Error::Validation("time must be finite".into()));
    }
    m.check_finite()?;
    let n = m.rows();
    if n == 1 {
        let mut out = Matrix::zeros(1, 1);
        out.set(0, 0, (m.get(0, 0) * t).exp());
        return Ok(out);
    }
    let a = m.scale(t);
    let norm = a.norm_1();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let a_scaled = a.scale(0.5f64.powi(squarings as i32));
    let mut result = pade13(&a_scaled)?;
    for _ in 0..squarings {
        result = result.mul(&result);
    }
    Ok(result)
}

fn pade13(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let eye = Matrix::identity(n);
    let a2 = a.mul(a);
    let a4 = a2.mul(&a2);
    let a6 = a2.mul(&a4);

    let w1 = a6
        .scale(PADE13[13])
        .add(&a4.scale(PADE13[11]))
        .add(&a2.scale(PADE13[9]));
    let w2 = w1
        .mul(&a6)
        .add(&a6.scale(PADE13[7]))
        .add(&a4.scale(PADE13[5]))
        .add(&a2.scale(PADE13[3]))
        .add(&eye.scale(PADE13[1]));
    let u = a.mul(&w2);

    let v1 = a6
        .scale(PADE13[12])
        .add(&a4.scale(PADE13[10]))
        .add(&a2.scale(PADE13[8]));
    let v = v1
        .mul(&a6)
        .add(&a6.scale(PADE13[6]))
        .add(&a4.scale(PADE13[4]))
        .add(&a2.scale(PADE13[2]))
        .add(&eye.scale(PADE13[0]));

    let numer = v.add(&u);
    let denom = v.sub(&u);
    denom.solve(&numer)
}

/// Independent cross-check path for the exponential: classical fixed-step
/// RK4 on `Y' = M Y`, `Y(0) = I`, evaluated at time `t` with `steps` steps.
/// Global error is `O((||M|| t / steps)^4)`; callers pick `steps` from the
/// accuracy they need. Kept as a second algebraic route so the Padé kernel
/// never certifies itself.
pub fn mat_exp_rk4(m: &Matrix, t: f64, steps: usize) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Dimension("RK4 exponential needs a square matrix".into()));
    }
    if steps == 0 {
        return Err(Error::Validation("steps must be positive".into()));
    }
    let n = m.rows();
    let h = t / steps as f64;
    let mut y = Matrix::identity(n);
    for _ in 0..steps {
        let k1 = m.mul(&y);
        let k2 = m.mul(&y.add(&k1.scale(h / 2.0)));
        let k3 = m.mul(&y.add(&k2.scale(h / 2.0)));
        let k4 = m.mul(&y.add(&k3.scale(h)));
        let incr = k1
            .add(&k2.scale(2.0))
            .add(&k3.scale(2.0))
            .add(&k4)
            .scale(h / 6.0);
        y = y.add(&incr);
    }
    Ok(y)
}

/// Step count giving roughly `tol` global error in `mat_exp_rk4`.
pub fn rk4_steps_for(m: &Matrix, t: f64, tol: f64) -> usize {
    let scale = (m.norm_1() * t.abs()).max(1e-12);
    // global error ~ scale * (scale/steps)^4 / 120
    let steps = scale * (scale.powi(4) / (120.0 * tol)).powf(0.25);
    (steps.ceil() as usize).clamp(50, 400_000)
}

/// `exp(G t) v` for a generator `G` given through its action, by
/// uniformization: with `P = I + G / rate` (entrywise nonnegative when
/// `rate` dominates every diagonal), `exp(G t) v = sum_k w_k P^k v` with
/// Poisson(rate t) weights `w_k`. For probability vectors every term is
/// nonnegative, so the series is cancellation-free; it stops once the
/// weights have accumulated `1 - tol`. This is the large-system route:
/// only matrix-vector products with `G` are needed.
pub fn generator_exp_action(
    apply: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    uniform_rate: f64,
    t: f64,
    v: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Validation("time must be finite and >= 0".into()));
    }
    let mu = uniform_rate * t;
    if mu == 0.0 {
        return Ok(v.to_vec());
    }
    if mu > 700.0 {
        return Err(Error::Capacity(format!(
            "uniformization rate * t = {mu} too large; Poisson weights underflow"
        )));
    }
    let mut weight = (-mu).exp();
    let mut accumulated = weight;
    let mut power = v.to_vec();
    let mut result: Vec<f64> = power.iter().map(|x| x * weight).collect();
    let mut k = 0u64;
    while accumulated < 1.0 - tol {
        k += 1;
        if k > 1_000_000 {
            return Err(Error::Internal(
                "uniformization series failed to converge".into(),
            ));
        }
        let gv = apply(&power);
        for (p, g) in power.iter_mut().zip(gv) {
            *p += g / uniform_rate;
        }
        weight *= mu / k as f64;
        accumulated += weight;
        for (r, p) in result.iter_mut().zip(&power) {
            *r += weight * p;
        }
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// Complex matrices
// ---------------------------------------------------------------------------

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real(m: &Matrix) -> Self {
        ComplexMatrix {
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = ComplexMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::Validation("matrix has non-finite entries".into()))
        }
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn scale(&self, s: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn max_abs_diff_real(&self, other: &Matrix) -> f64 {
        self.max_abs_diff(&ComplexMatrix::from_real(other))
    }
}

/// Complex matrix exponential via the real block embedding
/// `[[Re, -Im], [Im, Re]]`, reusing the tested real Padé kernel.
pub fn mat_exp_complex(m: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension(
            "matrix exponential needs a square matrix".into(),
        ));
    }
    m.check_finite()?;
    let n = m.rows();
    let embedded = Matrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        let z = m.get(ii, jj);
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            (1, 0) => z.im,
            _ => unreachable!(),
        }
    });
    let e = mat_exp(&embedded, t)?;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        Complex64::new(e.get(i, j), e.get(n + i, j))
    }))
}

// ---------------------------------------------------------------------------
// Kronecker product
// ---------------------------------------------------------------------------

/// Kronecker product with index convention
/// `(i_a * rows(b) + i_b, j_a * cols(b) + j_b)`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = (a.rows(), a.cols());
    let (br, bc) = (b.rows(), b.cols());
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for ia in 0..ar {
        for ja in 0..ac {
            let aij = a.get(ia, ja);
            if aij == 0.0 {
                continue;
            }
            for ib in 0..br {
                for jb in 0..bc {
                    out.set(ia * br + ib, ja * bc + jb, aij * b.get(ib, jb));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Binomial coefficients and the block transform
// ---------------------------------------------------------------------------

/// Binomial coefficient as f64: exact integer arithmetic for `n <= 60`,
/// log-space (via `ln_gamma`, accurate to ~1e-13 relative) beyond.
pub fn binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Ok(0.0);
    }
    if n <= 60 {
        let k = k.min(n - k);
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        return Ok(c as f64);
    }
    let ln = statrs::function::gamma::ln_gamma((n + 1) as f64)
        - statrs::function::gamma::ln_gamma((k + 1) as f64)
        - statrs::function::gamma::ln_gamma((n - k + 1) as f64);
    let v = ln.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Capacity(format!(
            "binomial({n},{k}) overflows f64"
        )))
    }
}

/// The block change of basis that diagonalizes the joint obligor generator:
/// `v` has blocks `C(n-j, n-i) (-1)^{i-j} I_d`, `vinv` the unsigned ones.
#[derive(Debug, Clone)]
pub struct BinomialTransformPair {
    pub n: usize,
    pub d: usize,
    pub v: Matrix,
    pub vinv: Matrix,
}

pub fn binomial_transform(n: usize, d: usize) -> Result<BinomialTransformPair> {
    if n < 1 || d < 1 {
        return Err(Error::Validation(
            "binomial transform needs n >= 1 and d >= 1".into(),
        ));
    }
    let size = (n + 1) * d;
    let mut v = Matrix::zeros(size, size);
    let mut vinv = Matrix::zeros(size, size);
    for i in 0..=n {
        for j in 0..=i {
            let c = binomial((n - j) as u64, (n - i) as u64)?;
            let sign = if (i - j) % 2 == 0 { 1.0 } else { -1.0 };
            for r in 0..d {
                v.set(i * d + r, j * d + r, sign * c);
                vinv.set(i * d + r, j * d + r, c);
            }
        }
    }
    Ok(BinomialTransformPair { n, d, v, vinv })
}

/// Assembles the exponential of the joint obligor generator from the small
/// diagonal-block exponentials `small_exps[k] = exp(Q_{(n-k)lambda} t)`,
/// `k = 0..=n`. Block `(i, j)` of the result is
/// `C(n-j, n-i) * sum_{k=j}^{i} (-1)^{i-k} C(i-j, i-k) small_exps[k]`,
/// zero above the diagonal.
pub fn binomial_block_exp(small_exps: &[Matrix]) -> Result<Matrix> {
    if small_exps.is_empty() {
        return Err(Error::Validation("need at least one block".into()));
    }
    let n = small_exps.len() - 1;
    let d = small_exps[0].rows();
    for e in small_exps {
        if e.rows() != d || e.cols() != d {
            return Err(Error::Dimension("blocks must be square of equal size".into()));
        }
    }
    let size = (n + 1) * d;
    let mut out = Matrix::zeros(size, size);
    let mut block = vec![NeumaierSum::new(); d * d];
    for i in 0..=n {
        for j in 0..=i {
            let outer = binomial((n - j) as u64, (n - i) as u64)?;
            for s in block.iter_mut() {
                *s = NeumaierSum::new();
            }
            for k in j..=i {
                let sign = if (i - k) % 2 == 0 { 1.0 } else { -1.0 };
                let coeff = sign * binomial((i - j) as u64, (i - k) as u64)?;
                for (s, &x) in block.iter_mut().zip(small_exps[k].data()) {
                    s.add(coeff * x);
                }
            }
            for r in 0..d {
                for c in 0..d {
                    out.set(i * d + r, j * d + c, outer * block[r * d + c].value());
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
