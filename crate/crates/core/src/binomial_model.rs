//! The Markov-modulated multiple-obligor model.
//!
//! `n` obligors share the chain-driven default intensity `lambda' X_t`, so
//! the default count `N_t` jumps with rate `lambda' X_t (n - N_t)`. The
//! joint indicator process `zeta_t = nu_t (x) X_t` is Markov with the block
//! lower-bidiagonal generator
//!
//! ```text
//!   BQ = A (x) diag(lambda) + I (x) Q,
//! ```
//!
//! whose diagonal blocks are the subgenerators `Q_{(n-i)lambda}` and whose
//! subdiagonal blocks are `(n-i) diag(lambda)`. Everything computable about
//! `(N_t, X_t)` reduces to exponentials of the `n+1` small subgenerators:
//! the transient law, conditional laws, the characteristic function and the
//! moment generating function. Each closed form here has a second, direct
//! route through `exp(BQ t)` used by the verification suite.

use crate::chain::{subgenerator, GeneratorMatrix, RateVector};
use crate::error::{Error, Result};
use crate::linalg::{self, binomial, kron, mat_exp, Matrix, VecAccumulator};
use num_complex::Complex64;

/// Above this obligor count the alternating closed forms are demoted to
/// test-only status and the `exp(BQ t)` route is authoritative.
pub const CLOSED_FORM_MAX_N: usize = 40;

/// Tiny negative mass tolerated (and clipped) in assembled laws.
const MASS_CLAMP: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Full obligor-pool model: count, chain generator, intensities, initial law.
#[derive(Debug, Clone)]
pub struct ObligorModel {
    n: usize,
    q: GeneratorMatrix,
    lambda: RateVector,
    x0: Vec<f64>,
}

impl ObligorModel {
    pub fn new(n: usize, q: GeneratorMatrix, lambda: RateVector, x0: Vec<f64>) -> Result<Self> {
        if n < 1 {
            return Err(Error::Validation("obligor count must be >= 1".into()));
        }
        if lambda.dim() != q.dim() {
            return Err(Error::Dimension(format!(
                "lambda has length {}, chain dimension is {}",
                lambda.dim(),
                q.dim()
            )));
        }
        validate_simplex(&x0, q.dim())?;
        Ok(ObligorModel { n, q, lambda, x0 })
    }

    pub fn obligors(&self) -> usize {
        self.n
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

    /// Same pool with the chain generator scaled by `alpha`.
    pub fn with_scaled_generator(&self, alpha: f64) -> Result<ObligorModel> {
        Ok(ObligorModel {
            n: self.n,
            q: self.q.scaled(alpha)?,
            lambda: self.lambda.clone(),
            x0: self.x0.clone(),
        })
    }

    /// Same pool with intensities scaled by `c`.
    pub fn with_scaled_rates(&self, c: f64) -> Result<ObligorModel> {
        Ok(ObligorModel {
            n: self.n,
            q: self.q.clone(),
            lambda: self.lambda.scaled(c)?,
            x0: self.x0.clone(),
        })
    }
}

pub(crate) fn validate_simplex(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::Dimension(format!(
            "probability vector has length {}, expected {d}",
            x.len()
        )));
    }
    for (i, &p) in x.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Validation(format!(
                "probability entry [{i}] = {p} must be finite and >= 0"
            )));
        }
    }
    let total: f64 = x.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!(
            "probability vector sums to {total}, expected 1"
        )));
    }
    Ok(())
}

/// A joint `(count, chain-state)` condition, e.g. the observed state at the
/// conditioning time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointState {
    pub count: usize,
    pub chain_state: usize,
}

/// Probability vector over the `(count, state)` lattice with the
/// count-major layout `index(k, j) = k d + j`, mirroring `nu (x) X`.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    n: usize,
    d: usize,
    zeta: Vec<f64>,
}

impl JointDistribution {
    pub fn new(n: usize, d: usize, mut zeta: Vec<f64>) -> Result<Self> {
        if zeta.len() != (n + 1) * d {
            return Err(Error::Dimension(format!(
                "joint law has {} entries, expected {}",
                zeta.len(),
                (n + 1) * d
            )));
        }
        for (i, z) in zeta.iter_mut().enumerate() {
            if *z < 0.0 {
                if *z < -MASS_CLAMP {
                    return Err(Error::NumericalCheck(format!(
                        "joint mass [{i}] = {z} is negative beyond tolerance"
                    )));
                }
                *z = 0.0;
            }
        }
        let total: f64 = zeta.iter().sum();
        if (total - 1.0).abs() > MASS_CLAMP {
            return Err(Error::NumericalCheck(format!(
                "joint law sums to {total}, expected 1"
            )));
        }
        Ok(JointDistribution { n, d, zeta })
    }

    pub fn counts(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[f64] {
        &self.zeta
    }

    /// `P(N = k, X = e_j)`.
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.zeta[k * self.d + j]
    }

    /// The chain-vector block for count `k`.
    pub fn block(&self, k: usize) -> &[f64] {
        &self.zeta[k * self.d..(k + 1) * self.d]
    }

    pub fn count_marginals(&self) -> CountDistribution {
        let masses = (0..=self.n)
            .map(|k| self.block(k).iter().sum())
            .collect();
        CountDistribution { masses }
    }

    pub fn chain_marginal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        for k in 0..=self.n {
            for j in 0..self.d {
                x[j] += self.get(k, j);
            }
        }
        x
    }
}

/// Probability masses over `{0, ..., n}` counts.
#[derive(Debug, Clone)]
pub struct CountDistribution {
    masses: Vec<f64>,
}

impl CountDistribution {
    pub fn new(mut masses: Vec<f64>) -> Result<Self> {
        for (i, m) in masses.iter_mut().enumerate() {
            if *m < 0.0 {
                if *m < -MASS_CLAMP {
                    return Err(Error::NumericalCheck(format!(
                        "count mass [{i}] = {m} is negative beyond tolerance"
                    )));
                }
                *m = 0.0;
            }
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_CLAMP {
            return Err(Error::NumericalCheck(format!(
                "count law sums to {total}, expected 1"
            )));
        }
        Ok(CountDistribution { masses })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn get(&self, k: usize) -> f64 {
        self.masses[k]
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn max_abs_diff(&self, other: &CountDistribution) -> f64 {
        self.masses
            .iter()
            .zip(&other.masses)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// The `(n+1) x (n+1)` pure-count generator: diagonal `-(n-k)`, subdiagonal
/// `n-k+1`, zero elsewhere (column sums vanish). The count law conditional
/// on the intensity path is `exp(Lambda_t A) e_0`.
pub fn count_generator(n: usize) -> Matrix {
    Matrix::from_fn(n + 1, n + 1, |i, j| {
        if i == j {
            -((n - i) as f64)
        } else if i == j + 1 {
            (n - j) as f64
        } else {
            0.0
        }
    })
}

/// The joint generator `BQ = A (x) diag(lambda) + I (x) Q` of size
/// `(n+1) d`, assembled literally from the Kronecker definition.
pub fn big_generator(model: &ObligorModel) -> Matrix {
    let a = count_generator(model.n);
    let eye = Matrix::identity(model.n + 1);
    kron(&a, &model.lambda.as_diag()).add(&kron(&eye, model.q.matrix()))
}

/// `e_k (x) x`: block `k` of the joint vector carries `x`.
pub(crate) fn embed_block(n: usize, d: usize, k: usize, x: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; (n + 1) * d];
    v[k * d..(k + 1) * d].copy_from_slice(x);
    v
}

/// `BQ v` computed from the block bidiagonal structure without forming
/// the matrix: block `i` of the result is
/// `Q_{(n-i)lambda} v_i + (n-i+1) diag(lambda) v_{i-1}`.
fn big_generator_action(model: &ObligorModel, v: &[f64]) -> Vec<f64> {
    let (n, d) = (model.n, model.dim());
    let q = model.q.matrix();
    let mut out = vec![0.0; (n + 1) * d];
    for i in 0..=n {
        let vi = &v[i * d..(i + 1) * d];
        let mut wi = q.matvec(vi);
        let survivors = (n - i) as f64;
        for j in 0..d {
            wi[j] -= survivors * model.lambda.get(j) * vi[j];
            if i > 0 {
                wi[j] += (survivors + 1.0) * model.lambda.get(j) * v[(i - 1) * d + j];
            }
        }
        out[i * d..(i + 1) * d].copy_from_slice(&wi);
    }
    out
}

/// `exp(BQ t) v` by uniformization on the block structure; the route for
/// pools too large for the dense exponential or the alternating closed
/// forms.
fn exp_big_action(model: &ObligorModel, t: f64, v: &[f64]) -> Result<Vec<f64>> {
    let d = model.dim();
    let n = model.n as f64;
    let rate = (0..d)
        .map(|j| model.q.exit_rate(j) + n * model.lambda.get(j))
        .fold(0.0, f64::max);
    linalg::generator_exp_action(
        &mut |x| big_generator_action(model, x),
        rate,
        t,
        v,
        1e-13,
    )
}

// ---------------------------------------------------------------------------
// Transient law
// ---------------------------------------------------------------------------

/// Transient joint law of `(N_t, X_t)`. Uses the alternating binomial
/// closed form up to [`CLOSED_FORM_MAX_N`] obligors; beyond that the
/// alternating sums lose all precision, so the `exp(BQ t)` action
/// (uniformization) is authoritative.
pub fn transient_marginals(model: &ObligorModel, t: f64) -> Result<JointDistribution> {
    if model.n <= CLOSED_FORM_MAX_N {
        transient_marginals_closed_form(model, t)
    } else {
        check_time(t)?;
        let init = embed_block(model.n, model.dim(), 0, &model.x0);
        let zeta = exp_big_action(model, t, &init)?;
        JointDistribution::new(model.n, model.dim(), zeta)
    }
}

/// Block `i` of the transient law:
/// `pi^i(t) = C(n,i) sum_{k=0}^{i} (-1)^{i-k} C(i,k) exp(Q_{(n-k)lambda} t) x(0)`,
/// accumulated in the given order with compensated summation.
pub fn transient_marginals_closed_form(model: &ObligorModel, t: f64) -> Result<JointDistribution> {
    check_time(t)?;
    let (n, d) = (model.n, model.dim());
    let propagated: Vec<Vec<f64>> = (0..=n)
        .map(|k| {
            mat_exp(&subgenerator(&model.q, &model.lambda, (n - k) as u32), t)
                .map(|e| e.matvec(&model.x0))
        })
        .collect::<Result<_>>()?;
    let mut zeta = Vec::with_capacity((n + 1) * d);
    for i in 0..=n {
        let outer = binomial(n as u64, i as u64)?;
        let mut acc = VecAccumulator::new(d);
        for (k, w) in propagated.iter().enumerate().take(i + 1) {
            let sign = if (i - k) % 2 == 0 { 1.0 } else { -1.0 };
            acc.add_scaled(sign * binomial(i as u64, k as u64)?, w);
        }
        zeta.extend(acc.into_vec().into_iter().map(|x| x * outer));
    }
    JointDistribution::new(n, d, zeta)
}

/// The direct route `exp(BQ t) (e_0 (x) x(0))`.
pub fn transient_marginals_via_exp(model: &ObligorModel, t: f64) -> Result<JointDistribution> {
    check_time(t)?;
    let big = mat_exp(&big_generator(model), t)?;
    let zeta = big.matvec(&embed_block(model.n, model.dim(), 0, &model.x0));
    JointDistribution::new(model.n, model.dim(), zeta)
}

/// `exp(BQ t)` assembled from the `n+1` subgenerator exponentials through
/// the binomial block transform; upper blocks are exactly zero.
pub fn exp_big_generator_closed_form(model: &ObligorModel, t: f64) -> Result<Matrix> {
    check_time(t)?;
    let n = model.n;
    let small: Vec<Matrix> = (0..=n)
        .map(|k| mat_exp(&subgenerator(&model.q, &model.lambda, (n - k) as u32), t))
        .collect::<Result<_>>()?;
    linalg::binomial_block_exp(&small)
}

/// Single-obligor default probability
/// `P(Y_t = 1) = 1 - 1' exp(Q_lambda t) x(0)`.
pub fn default_prob_single(model: &ObligorModel, t: f64) -> Result<f64> {
    if model.n != 1 {
        return Err(Error::Validation(format!(
            "single-obligor default probability needs n = 1, got n = {}",
            model.n
        )));
    }
    check_time(t)?;
    let ql = subgenerator(&model.q, &model.lambda, 1);
    let surv: f64 = mat_exp(&ql, t)?.matvec(&model.x0).iter().sum();
    Ok((1.0 - surv).clamp(0.0, 1.0))
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("time must be finite and >= 0, got {t}")))
    }
}

// ---------------------------------------------------------------------------
// Conditional laws
// ---------------------------------------------------------------------------

/// Law of `(N_{s+elapsed}, X_{s+elapsed})` given `(N_s, X_s) = state`. All
/// conditional quantities are time-homogeneous, so only the elapsed time
/// enters.
pub fn conditional_joint(
    model: &ObligorModel,
    elapsed: f64,
    state: JointState,
) -> Result<JointDistribution> {
    if model.n <= CLOSED_FORM_MAX_N {
        conditional_joint_closed_form(model, elapsed, state)
    } else {
        conditional_joint_via_exp(model, elapsed, state)
    }
}

/// The double binomial sum over subgenerator exponentials: block `k >= k0`
/// is `C(n-k0, k-k0) sum_{i=k0}^{k} (-1)^{k-i} C(k-k0, k-i)
/// exp(Q_{(n-i)lambda} elapsed) e_{j0}`.
pub fn conditional_joint_closed_form(
    model: &ObligorModel,
    elapsed: f64,
    state: JointState,
) -> Result<JointDistribution> {
    check_conditional_args(model, elapsed, state)?;
    let (n, d) = (model.n, model.dim());
    let (k0, j0) = (state.count, state.chain_state);
    let mut basis = vec![0.0; d];
    basis[j0] = 1.0;
    let propagated: Vec<Vec<f64>> = (k0..=n)
        .map(|i| {
            mat_exp(&subgenerator(&model.q, &model.lambda, (n - i) as u32), elapsed)
                .map(|e| e.matvec(&basis))
        })
        .collect::<Result<_>>()?;
    let mut zeta = vec![0.0; (n + 1) * d];
    for k in k0..=n {
        let outer = binomial((n - k0) as u64, (k - k0) as u64)?;
        let mut acc = VecAccumulator::new(d);
        for i in k0..=k {
            let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
            acc.add_scaled(
                sign * binomial((k - k0) as u64, (k - i) as u64)?,
                &propagated[i - k0],
            );
        }
        for (j, v) in acc.into_vec().into_iter().enumerate() {
            zeta[k * d + j] = outer * v;
        }
    }
    JointDistribution::new(n, d, zeta)
}

/// The direct route: column `k0 d + j0` of `exp(BQ elapsed)`.
pub fn conditional_joint_via_exp(
    model: &ObligorModel,
    elapsed: f64,
    state: JointState,
) -> Result<JointDistribution> {
    check_conditional_args(model, elapsed, state)?;
    let d = model.dim();
    let big = mat_exp(&big_generator(model), elapsed)?;
    let mut e = vec![0.0; (model.n + 1) * d];
    e[state.count * d + state.chain_state] = 1.0;
    JointDistribution::new(model.n, d, big.matvec(&e))
}

/// Conditional count law `P(N_{s+elapsed} = k | state)`, the chain
/// marginalization of [`conditional_joint`].
pub fn conditional_count_probs(
    model: &ObligorModel,
    elapsed: f64,
    state: JointState,
) -> Result<CountDistribution> {
    Ok(conditional_joint(model, elapsed, state)?.count_marginals())
}

fn check_conditional_args(model: &ObligorModel, elapsed: f64, state: JointState) -> Result<()> {
    check_time(elapsed)?;
    if state.count > model.n {
        return Err(Error::Validation(format!(
            "conditioning count {} exceeds obligor count {}",
            state.count, model.n
        )));
    }
    if state.chain_state >= model.dim() {
        return Err(Error::Validation(format!(
            "conditioning chain state {} out of range for d = {}",
            state.chain_state,
            model.dim()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Characteristic and moment generating functions
// ---------------------------------------------------------------------------

/// `phi(t, u) = E[exp(i u N_t) X_t]`, the chain-vector characteristic
/// function:
/// `sum_k C(n,k) e^{iuk} (1 - e^{iu})^{n-k} exp(Q_{(n-k)lambda} t) x(0)`.
pub fn char_function(model: &ObligorModel, t: f64, u: f64) -> Result<Vec<Complex64>> {
    check_time(t)?;
    let (n, d) = (model.n, model.dim());
    let z = Complex64::new(u.cos(), u.sin());
    let w = Complex64::new(1.0, 0.0) - z;
    let mut re = VecAccumulator::new(d);
    let mut im = VecAccumulator::new(d);
    let mut zk = Complex64::new(1.0, 0.0);
    for k in 0..=n {
        let coeff = binomial(n as u64, k as u64)? * zk * w.powu((n - k) as u32);
        let prop = mat_exp(&subgenerator(&model.q, &model.lambda, (n - k) as u32), t)?
            .matvec(&model.x0);
        for (j, &x) in prop.iter().enumerate() {
            re.add_scaled_at(j, coeff.re * x);
            im.add_scaled_at(j, coeff.im * x);
        }
        zk *= z;
    }
    let re = re.into_vec();
    let im = im.into_vec();
    Ok(re
        .into_iter()
        .zip(im)
        .map(|(a, b)| Complex64::new(a, b))
        .collect())
}

/// Scalar characteristic function of `N_t`: `1' phi(t, u)`.
pub fn char_function_scalar(model: &ObligorModel, t: f64, u: f64) -> Result<Complex64> {
    Ok(char_function(model, t, u)?.into_iter().sum())
}

/// `psi(t, v) = E[exp(-v N_t) X_t]`, evaluated as the binomial mixture
/// `sum_k C(n,k) p^k (1-p)^{n-k} exp(Q_{k lambda} t) x(0)` with
/// `p = 1 - e^{-v}`.
pub fn mgf(model: &ObligorModel, t: f64, v: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    if !(v >= 0.0) {
        return Err(Error::Validation(format!("mgf argument must be >= 0, got {v}")));
    }
    let (n, d) = (model.n, model.dim());
    let p = 1.0 - (-v).exp();
    let mut acc = VecAccumulator::new(d);
    for k in 0..=n {
        let weight =
            binomial(n as u64, k as u64)? * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        if weight == 0.0 {
            continue;
        }
        let prop =
            mat_exp(&subgenerator(&model.q, &model.lambda, k as u32), t)?.matvec(&model.x0);
        acc.add_scaled(weight, &prop);
    }
    Ok(acc.into_vec())
}

/// Conditional characteristic function given `(N_s, X_s) = state`:
/// the chain vector
/// `sum_{j=k0}^{n} C(n-k0, j-k0) (1-e^{iu})^{n-j} e^{iuj}
/// exp(Q_{(n-j)lambda} elapsed) e_{j0}` and its scalar `1'` contraction.
pub fn conditional_char_function(
    model: &ObligorModel,
    elapsed: f64,
    state: JointState,
    u: f64,
) -> Result<(Complex64, Vec<Complex64>)> {
    check_conditional_args(model, elapsed, state)?;
    let mut basis = vec![0.0; model.dim()];
    basis[state.chain_state] = 1.0;
    conditional_char_from_vector(model, elapsed, state.count, &basis, u)
}

/// Conditional characteristic function driven by an arbitrary chain law
/// `x` at the conditioning time (basis vector for full observation, filter
/// posterior otherwise).
pub(crate) fn conditional_char_from_vector(
    model: &ObligorModel,
    elapsed: f64,
    k0: usize,
    x: &[f64],
    u: f64,
) -> Result<(Complex64, Vec<Complex64>)> {
    let (n, d) = (model.n, model.dim());
    let z = Complex64::new(u.cos(), u.sin());
    let w = Complex64::new(1.0, 0.0) - z;
    let mut vec_re = VecAccumulator::new(d);
    let mut vec_im = VecAccumulator::new(d);
    for j in k0..=n {
        let coeff =
            binomial((n - k0) as u64, (j - k0) as u64)? * w.powu((n - j) as u32) * z.powu(j as u32);
        let prop =
            mat_exp(&subgenerator(&model.q, &model.lambda, (n - j) as u32), elapsed)?.matvec(x);
        for (r, &v) in prop.iter().enumerate() {
            vec_re.add_scaled_at(r, coeff.re * v);
            vec_im.add_scaled_at(r, coeff.im * v);
        }
    }
    let re = vec_re.into_vec();
    let im = vec_im.into_vec();
    let vector: Vec<Complex64> = re
        .into_iter()
        .zip(im)
        .map(|(a, b)| Complex64::new(a, b))
        .collect();
    let scalar = vector.iter().sum();
    Ok((scalar, vector))
}

/// Central finite-difference residual of the characteristic-function PDE
/// `d phi/dt = (Q + n (e^{iu}-1) diag(lambda)) phi
///            + i (e^{iu}-1) diag(lambda) d phi/du`,
/// with steps `dt_step` in time and `du_step` in frequency. Returns the
/// maximum componentwise modulus of (lhs - rhs).
pub fn pde_residual(
    model: &ObligorModel,
    t: f64,
    u: f64,
    dt_step: f64,
    du_step: f64,
) -> Result<f64> {
    if !(t > dt_step && dt_step > 0.0 && du_step > 0.0) {
        return Err(Error::Validation(
            "pde residual needs t > dt_step > 0 and du_step > 0".into(),
        ));
    }
    let d = model.dim();
    let phi = char_function(model, t, u)?;
    let phi_tp = char_function(model, t + dt_step, u)?;
    let phi_tm = char_function(model, t - dt_step, u)?;
    let phi_up = char_function(model, t, u + du_step)?;
    let phi_um = char_function(model, t, u - du_step)?;
    let zm1 = Complex64::new(u.cos() - 1.0, u.sin());
    let iunit = Complex64::new(0.0, 1.0);
    let q = model.q.matrix();
    let mut worst = 0.0f64;
    for r in 0..d {
        let dphi_dt = (phi_tp[r] - phi_tm[r]) / (2.0 * dt_step);
        let dphi_du = (phi_up[r] - phi_um[r]) / (2.0 * du_step);
        let mut drift = Complex64::new(0.0, 0.0);
        for c in 0..d {
            drift += q.get(r, c) * phi[c];
        }
        drift += (model.n as f64) * zm1 * model.lambda.get(r) * phi[r];
        let transport = iunit * zm1 * model.lambda.get(r) * dphi_du;
        worst = worst.max((dphi_dt - drift - transport).norm());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
