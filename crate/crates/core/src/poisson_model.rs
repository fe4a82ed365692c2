//! The Markov-modulated Poisson process.
//!
//! `N` jumps with intensity `lambda' X_t`; conditionally on the chain it is
//! Poisson with the integrated intensity. The stacked block vector
//! `Pi^n(t) = (pi^0(t), ..., pi^n(t))` of joint masses solves
//! `d Pi / dt = BQ_n Pi` for the block lower-bidiagonal truncated generator
//!
//! ```text
//!   BQ_n = I (x) (Q - diag(lambda)) + J (x) diag(lambda),
//! ```
//!
//! with `J` the shift on count levels. Unlike the obligor model, the
//! diagonal blocks are all equal, so no block diagonalization exists and the
//! exponential is taken on the full truncated matrix. Truncation levels are
//! certified by a Chernoff-style tail bound for a dominating
//! `Poisson(max_i lambda_i * t)` variable. The characteristic function has
//! the genuinely simple closed form
//! `exp(((e^{iu} - 1) diag(lambda) + Q) t) x(0)`.

use crate::binomial_model::{self, validate_simplex, JointState, ObligorModel};
use crate::chain::{subgenerator, GeneratorMatrix, RateVector};
use crate::error::{Error, Result};
use crate::linalg::{kron, mat_exp, mat_exp_complex, ComplexMatrix, Matrix};
use num_complex::Complex64;

/// Hard cap on the truncation level; reaching it means the tail target is
/// unattainable at desk scale.
pub const MAX_TRUNCATION_LEVEL: usize = 2048;

const MASS_CLAMP: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Markov-modulated Poisson model with an automatic-truncation policy.
#[derive(Debug, Clone)]
pub struct PoissonModel {
    q: GeneratorMatrix,
    lambda: RateVector,
    x0: Vec<f64>,
    truncation_epsilon: f64,
}

impl PoissonModel {
    pub fn new(
        q: GeneratorMatrix,
        lambda: RateVector,
        x0: Vec<f64>,
        truncation_epsilon: f64,
    ) -> Result<Self> {
        if lambda.dim() != q.dim() {
            return Err(Error::Dimension(format!(
                "lambda has length {}, chain dimension is {}",
                lambda.dim(),
                q.dim()
            )));
        }
        validate_simplex(&x0, q.dim())?;
        if !(truncation_epsilon > 0.0 && truncation_epsilon <= 1e-3) {
            return Err(Error::Validation(format!(
                "truncation epsilon must lie in (0, 1e-3], got {truncation_epsilon}"
            )));
        }
        Ok(PoissonModel {
            q,
            lambda,
            x0,
            truncation_epsilon,
        })
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.q
    }

    pub fn rates(&self) -> &RateVector {
        &self.lambda
    }

    pub fn initial_law(&self) -> &[f64] {
        &self.x0
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn truncation_epsilon(&self) -> f64 {
        self.truncation_epsilon
    }
}

/// Joint masses `P(N_t = k, X_t = e_j)` for `k <= n_max`, together with the
/// certified bound on the discarded tail `P(N_t > n_max)`.
#[derive(Debug, Clone)]
pub struct TruncatedCountLaw {
    n_max: usize,
    d: usize,
    blocks: Vec<Vec<f64>>,
    tail_bound: f64,
}

impl TruncatedCountLaw {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// The chain-vector block for count `k`.
    pub fn block(&self, k: usize) -> &[f64] {
        &self.blocks[k]
    }

    pub fn count_masses(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.iter().sum()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.blocks.iter().flatten().sum()
    }

    pub fn chain_marginal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        for b in &self.blocks {
            for (j, &v) in b.iter().enumerate() {
                x[j] += v;
            }
        }
        x
    }
}

/// Conditional joint law over counts `start_count ..= start_count + m` given
/// a `(count, state)` condition; counts beyond the window carry the
/// (unreported) leaked mass.
#[derive(Debug, Clone)]
pub struct ConditionalCountLaw {
    pub start_count: usize,
    d: usize,
    blocks: Vec<Vec<f64>>,
}

impl ConditionalCountLaw {
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Block for absolute count `start_count + r`.
    pub fn increment_block(&self, r: usize) -> &[f64] {
        &self.blocks[r]
    }

    pub fn increments(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn count_masses(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.iter().sum()).collect()
    }
}

// ---------------------------------------------------------------------------
// Truncated generator and transient law
// ---------------------------------------------------------------------------

/// The `(n+1) d` truncated generator
/// `I (x) Q_lambda + J (x) diag(lambda)`.
pub fn qn_matrix(model: &PoissonModel, n: usize) -> Matrix {
    let eye = Matrix::identity(n + 1);
    let shift = Matrix::from_fn(n + 1, n + 1, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
    let ql = subgenerator(&model.q, &model.lambda, 1);
    kron(&eye, &ql).add(&kron(&shift, &model.lambda.as_diag()))
}

/// Chernoff-style bound on `P(Poisson(mu) > n)`:
/// `exp(-mu) (e mu / (n+1))^{n+1}` when `n + 1 > mu`, else 1.
pub fn poisson_tail_bound(mu: f64, n: usize) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let k = (n + 1) as f64;
    if k <= mu {
        return 1.0;
    }
    (-mu + k - k * (k / mu).ln()).exp()
}

/// Smallest truncation level whose dominating-Poisson tail bound is below
/// the model's epsilon at horizon `t`.
pub fn truncation_level(model: &PoissonModel, t: f64) -> Result<usize> {
    let mu = model.lambda.max() * t;
    let mut n = mu.ceil() as usize;
    while poisson_tail_bound(mu, n) > model.truncation_epsilon {
        n += 1;
        if n > MAX_TRUNCATION_LEVEL {
            return Err(Error::Capacity(format!(
                "truncation level exceeds {MAX_TRUNCATION_LEVEL} for rate {mu}; \
                 raise truncation_epsilon (currently {})",
                model.truncation_epsilon
            )));
        }
    }
    Ok(n)
}

/// `Pi^n(t) = exp(BQ_n t) (e_0 (x) x(0))` with the automatically chosen
/// `n = n_max` and the certified tail bound attached.
pub fn transient_counts(model: &PoissonModel, t: f64) -> Result<TruncatedCountLaw> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Validation(format!("time must be finite and >= 0, got {t}")));
    }
    let n_max = truncation_level(model, t)?;
    let d = model.dim();
    let big = mat_exp(&qn_matrix(model, n_max), t)?;
    let mut init = vec![0.0; (n_max + 1) * d];
    init[..d].copy_from_slice(&model.x0);
    let stacked = big.matvec(&init);
    let tail_bound = poisson_tail_bound(model.lambda.max() * t, n_max);
    collect_blocks(stacked, n_max, d, tail_bound)
}

fn collect_blocks(
    stacked: Vec<f64>,
    n_max: usize,
    d: usize,
    tail_bound: f64,
) -> Result<TruncatedCountLaw> {
    let mut blocks = Vec::with_capacity(n_max + 1);
    for k in 0..=n_max {
        let mut b = stacked[k * d..(k + 1) * d].to_vec();
        for (j, v) in b.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -MASS_CLAMP {
                    return Err(Error::NumericalCheck(format!(
                        "negative mass {v} at (count {k}, state {j})"
                    )));
                }
                *v = 0.0;
            }
        }
        blocks.push(b);
    }
    let law = TruncatedCountLaw {
        n_max,
        d,
        blocks,
        tail_bound,
    };
    let total = law.total_mass();
    if total > 1.0 + MASS_CLAMP || total + tail_bound < 1.0 - 1e-12 - MASS_CLAMP {
        return Err(Error::NumericalCheck(format!(
            "truncated mass {total} with tail bound {tail_bound} does not bracket 1"
        )));
    }
    Ok(law)
}

// ---------------------------------------------------------------------------
// The pi^1 integral cross-check
// ---------------------------------------------------------------------------

/// Evaluates `pi^1(t) = int_0^t exp(Q_lambda (t-s)) diag(lambda)
/// exp(Q_lambda s) ds x(0)` by adaptive quadrature and returns the maximum
/// absolute deviation from the `k = 1` block of [`transient_counts`]. This
/// is the variation-of-constants solution of
/// `d pi^1/dt = diag(lambda) pi^0 + Q_lambda pi^1`.
pub fn pi1_integral_check(model: &PoissonModel, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Validation("integral check needs t > 0".into()));
    }
    let ql = subgenerator(&model.q, &model.lambda, 1);
    let diag = model.lambda.as_diag();
    let integrand = |s: f64| -> Result<Vec<f64>> {
        let left = mat_exp(&ql, t - s)?;
        let right = mat_exp(&ql, s)?.matvec(&model.x0);
        Ok(left.mul(&diag).matvec(&right))
    };
    let pi1 = adaptive_simpson(&integrand, 0.0, t, 1e-10)?;
    let law = transient_counts(model, t)?;
    if law.n_max() < 1 {
        return Ok(pi1.iter().fold(0.0, |m, x| m.max(x.abs())));
    }
    let dev = pi1
        .iter()
        .zip(law.block(1))
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(dev)
}

fn simpson_slice(fa: &[f64], fm: &[f64], fb: &[f64], h: f64) -> Vec<f64> {
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((&a, &m), &b)| h / 6.0 * (a + 4.0 * m + b))
        .collect()
}

fn adaptive_simpson(
    f: &impl Fn(f64) -> Result<Vec<f64>>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let fa = f(a)?;
    let fm = f(0.5 * (a + b))?;
    let fb = f(b)?;
    let whole = simpson_slice(&fa, &fm, &fb, b - a);
    simpson_recurse(f, a, b, &fa, &fm, &fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &impl Fn(f64) -> Result<Vec<f64>>,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: Vec<f64>,
    tol: f64,
    depth: u32,
) -> Result<Vec<f64>> {
    let m = 0.5 * (a + b);
    let fl = f(0.5 * (a + m))?;
    let fr = f(0.5 * (m + b))?;
    let left = simpson_slice(fa, &fl, fm, m - a);
    let right = simpson_slice(fm, &fr, fb, b - m);
    let err = left
        .iter()
        .zip(&right)
        .zip(&whole)
        .fold(0.0f64, |e, ((&l, &r), &w)| e.max((l + r - w).abs()));
    if err <= 15.0 * tol || depth == 0 {
        // Richardson-corrected combination.
        return Ok(left
            .iter()
            .zip(&right)
            .zip(&whole)
            .map(|((&l, &r), &w)| l + r + (l + r - w) / 15.0)
            .collect());
    }
    let lhalf = simpson_recurse(f, a, m, fa, &fl, fm, left, tol / 2.0, depth - 1)?;
    let rhalf = simpson_recurse(f, m, b, fm, &fr, fb, right, tol / 2.0, depth - 1)?;
    Ok(lhalf.iter().zip(&rhalf).map(|(l, r)| l + r).collect())
}

// ---------------------------------------------------------------------------
// Characteristic function
// ---------------------------------------------------------------------------

/// `phi(t, u) = exp(((e^{iu} - 1) diag(lambda) + Q) t) x(0)`.
pub fn char_function_poisson(model: &PoissonModel, t: f64, u: f64) -> Result<Vec<Complex64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Validation(format!("time must be finite and >= 0, got {t}")));
    }
    let e = mat_exp_complex(&modulated_generator(model, u), t)?;
    let x0: Vec<Complex64> = model.x0.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Ok(e.matvec(&x0))
}

/// Scalar characteristic function of `N_t`.
pub fn char_function_poisson_scalar(model: &PoissonModel, t: f64, u: f64) -> Result<Complex64> {
    Ok(char_function_poisson(model, t, u)?.into_iter().sum())
}

/// `(e^{iu} - 1) diag(lambda) + Q`.
pub fn modulated_generator(model: &PoissonModel, u: f64) -> ComplexMatrix {
    let d = model.dim();
    let phase = Complex64::new(u.cos() - 1.0, u.sin());
    ComplexMatrix::from_fn(d, d, |i, j| {
        let mut z = Complex64::new(model.q.matrix().get(i, j), 0.0);
        if i == j {
            z += phase * model.lambda.get(i);
        }
        z
    })
}

/// Deviation of the `n`-obligor characteristic function with rates
/// `lambda / n` from the Poisson one, for each `n` in `n_list`. The
/// deviations shrink as `n` grows; that is the binomial-to-Poisson limit.
pub fn binomial_limit_check(
    model: &PoissonModel,
    t: f64,
    u: f64,
    n_list: &[usize],
) -> Result<Vec<f64>> {
    let target = char_function_poisson(model, t, u)?;
    let mut deviations = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(Error::Validation("obligor counts must be >= 1".into()));
        }
        let approx = ObligorModel::new(
            n,
            model.q.clone(),
            model.lambda.scaled(1.0 / n as f64)?,
            model.x0.clone(),
        )?;
        let phi = binomial_model::char_function(&approx, t, u)?;
        let dev = phi
            .iter()
            .zip(&target)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        deviations.push(dev);
    }
    Ok(deviations)
}

// ---------------------------------------------------------------------------
// Conditional laws
// ---------------------------------------------------------------------------

/// Law of `(N_{s+elapsed}, X_{s+elapsed})` over counts
/// `k0 ..= k0 + m` given `(N_s, X_s) = (k0, j0)`, computed on the truncated
/// system of level `k0 + m` with the condition embedded at block `k0`. By
/// the Markov additive structure the law depends on `k0` only through a
/// shift.
pub fn conditional_counts_poisson(
    model: &PoissonModel,
    elapsed: f64,
    state: JointState,
    m: usize,
) -> Result<ConditionalCountLaw> {
    let d = model.dim();
    if state.chain_state >= d {
        return Err(Error::Validation(format!(
            "conditioning chain state {} out of range for d = {d}",
            state.chain_state
        )));
    }
    let mut basis = vec![0.0; d];
    basis[state.chain_state] = 1.0;
    conditional_counts_from_vector(model, elapsed, state.count, &basis, m)
}

/// Conditional count-and-chain law given count `k0` and a chain law `x`
/// (a basis vector when the chain is observed, the filter posterior when
/// it is not).
pub(crate) fn conditional_counts_from_vector(
    model: &PoissonModel,
    elapsed: f64,
    k0: usize,
    x: &[f64],
    m: usize,
) -> Result<ConditionalCountLaw> {
    if !(elapsed.is_finite() && elapsed >= 0.0) {
        return Err(Error::Validation(format!(
            "elapsed time must be finite and >= 0, got {elapsed}"
        )));
    }
    let d = model.dim();
    if x.len() != d {
        return Err(Error::Dimension(format!(
            "chain vector has length {}, expected {d}",
            x.len()
        )));
    }
    let level = k0 + m;
    if level > MAX_TRUNCATION_LEVEL {
        return Err(Error::Capacity(format!(
            "conditional window reaches level {level} > {MAX_TRUNCATION_LEVEL}"
        )));
    }
    let big = mat_exp(&qn_matrix(model, level), elapsed)?;
    let mut init = vec![0.0; (level + 1) * d];
    init[k0 * d..(k0 + 1) * d].copy_from_slice(x);
    let stacked = big.matvec(&init);
    let mut blocks = Vec::with_capacity(m + 1);
    for k in k0..=level {
        let mut b = stacked[k * d..(k + 1) * d].to_vec();
        for v in b.iter_mut() {
            if *v < 0.0 && *v > -MASS_CLAMP {
                *v = 0.0;
            }
        }
        blocks.push(b);
    }
    Ok(ConditionalCountLaw {
        start_count: k0,
        d,
        blocks,
    })
}

// ---------------------------------------------------------------------------
// Backward ODE verification
// ---------------------------------------------------------------------------

/// Residuals of the backward system for
/// `Phi(t, n) = exp(((e^{iu}-1) diag(lambda) + Q) t) e^{iun}`:
/// the ODE `dPhi/dt = Phi(t, n+1) diag(lambda) + Phi(t, n) (Q - diag(lambda))`
/// by central differences with step `h`, and the shift identity
/// `Phi(t, n+1) = Phi(t, n) e^{iu}`.
#[derive(Debug, Clone, Copy)]
pub struct BackwardPhiCheck {
    pub ode_residual: f64,
    pub shift_deviation: f64,
}

pub fn backward_phi_check(
    model: &PoissonModel,
    t: f64,
    u: f64,
    n: usize,
    h: f64,
) -> Result<BackwardPhiCheck> {
    if !(t > h && h > 0.0) {
        return Err(Error::Validation("backward check needs t > h > 0".into()));
    }
    let z = Complex64::new(u.cos(), u.sin());
    let phi_at = |time: f64, level: usize| -> Result<ComplexMatrix> {
        let e = mat_exp_complex(&modulated_generator(model, u), time)?;
        Ok(e.scale(phase_power(z, level)))
    };
    let phi = phi_at(t, n)?;
    let phi_next = phi_at(t, n + 1)?;
    let phi_plus = phi_at(t + h, n)?;
    let phi_minus = phi_at(t - h, n)?;

    let d = model.dim();
    let ql = subgenerator(&model.q, &model.lambda, 1);
    let mut ode_residual = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let dt = (phi_plus.get(i, j) - phi_minus.get(i, j)) / (2.0 * h);
            // (Phi(t,n+1) diag(lambda))[i,j] = Phi(t,n+1)[i,j] lambda_j
            let mut rhs = phi_next.get(i, j) * model.lambda.get(j);
            for k in 0..d {
                rhs += phi.get(i, k) * ql.get(k, j);
            }
            ode_residual = ode_residual.max((dt - rhs).norm());
        }
    }
    let shift_deviation = phi_next.max_abs_diff(&phi.scale(z));
    Ok(BackwardPhiCheck {
        ode_residual,
        shift_deviation,
    })
}

/// `z^n` by sequential multiplication, so consecutive powers differ by
/// exactly one complex multiply.
fn phase_power(z: Complex64, n: usize) -> Complex64 {
    (0..n).fold(Complex64::new(1.0, 0.0), |acc, _| acc * z)
}

// ---------------------------------------------------------------------------
