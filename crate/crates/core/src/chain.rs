//! Background chain: generator validation, invariant distribution, the
//! adjugate identity, subgenerators and exact path simulation.
//!
//! Generators use the column convention throughout: `q[(i, j)]` for `i != j`
//! is the jump intensity from state `j` to state `i`, so every column sums
//! to zero and the marginal law evolves as `exp(Q t) x(0)` on column
//! probability vectors.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;
use rand::Rng;

const COLUMN_SUM_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// A validated irreducible chain generator (column convention).
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    d: usize,
    q: Matrix,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &Matrix {
        &self.q
    }

    /// Jump intensity from state `from` to state `to`.
    pub fn rate(&self, to: usize, from: usize) -> f64 {
        self.q.get(to, from)
    }

    /// Total exit rate of state `j`.
    pub fn exit_rate(&self, j: usize) -> f64 {
        -self.q.get(j, j)
    }

    /// The generator scaled by `alpha > 0`; scaling preserves validity.
    pub fn scaled(&self, alpha: f64) -> Result<GeneratorMatrix> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Validation(format!(
                "generator scale must be positive and finite, got {alpha}"
            )));
        }
        Ok(GeneratorMatrix {
            d: self.d,
            q: self.q.scale(alpha),
        })
    }
}

/// Per-state counting intensities, entrywise nonnegative.
#[derive(Debug, Clone)]
pub struct RateVector {
    lambda: Vec<f64>,
    all_positive: bool,
}

impl RateVector {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::Dimension("rate vector must be nonempty".into()));
        }
        for (i, &x) in lambda.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Validation(format!(
                    "rate lambda[{i}] = {x} must be finite and >= 0"
                )));
            }
        }
        let all_positive = lambda.iter().all(|&x| x > 0.0);
        Ok(RateVector {
            lambda,
            all_positive,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.lambda
    }

    pub fn get(&self, i: usize) -> f64 {
        self.lambda[i]
    }

    pub fn all_positive(&self) -> bool {
        self.all_positive
    }

    pub fn max(&self) -> f64 {
        self.lambda.iter().fold(0.0, |m, &x| m.max(x))
    }

    pub fn as_diag(&self) -> Matrix {
        Matrix::diag(&self.lambda)
    }

    pub fn scaled(&self, c: f64) -> Result<RateVector> {
        RateVector::new(self.lambda.iter().map(|x| x * c).collect())
    }

    /// `lambda . v`
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.lambda.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// The unique probability vector with `Q pi = 0`.
#[derive(Debug, Clone)]
pub struct InvariantDistribution {
    pi: Vec<f64>,
}

impl InvariantDistribution {
    pub fn entries(&self) -> &[f64] {
        &self.pi
    }

    pub fn get(&self, i: usize) -> f64 {
        self.pi[i]
    }
}

/// A realized chain trajectory on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct ChainPath {
    pub initial: usize,
    /// Transition times with destination states, strictly increasing.
    pub transitions: Vec<(f64, usize)>,
    pub horizon: f64,
}

impl ChainPath {
    pub fn state_at(&self, t: f64) -> usize {
        let mut state = self.initial;
        for &(time, dest) in &self.transitions {
            if time > t {
                break;
            }
            state = dest;
        }
        state
    }

    /// Fraction of `[0, horizon]` spent in each state.
    pub fn occupation_fractions(&self, d: usize) -> Vec<f64> {
        let mut occ = vec![0.0; d];
        let mut state = self.initial;
        let mut last = 0.0;
        for &(time, dest) in &self.transitions {
            occ[state] += time - last;
            state = dest;
            last = time;
        }
        occ[state] += self.horizon - last;
        for o in occ.iter_mut() {
            *o /= self.horizon;
        }
        occ
    }

    /// `int_0^t lambda(X_s) ds`, the chain-driven integrated intensity.
    pub fn integrated_rate(&self, lambda: &RateVector, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut state = self.initial;
        let mut last = 0.0;
        for &(time, dest) in &self.transitions {
            if time >= t {
                break;
            }
            acc += lambda.get(state) * (time - last);
            state = dest;
            last = time;
        }
        acc + lambda.get(state) * (t - last)
    }

    /// Jump times divided by `alpha`: the path of the accelerated chain
    /// `X_{alpha t}` when `self` was simulated under the base generator.
    pub fn compress(&self, alpha: f64) -> ChainPath {
        ChainPath {
            initial: self.initial,
            transitions: self
                .transitions
                .iter()
                .map(|&(t, s)| (t / alpha, s))
                .collect(),
            horizon: self.horizon / alpha,
        }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Validates a square matrix as an irreducible column-convention generator.
pub fn validate_generator(q: Matrix) -> Result<GeneratorMatrix> {
    if !q.is_square() {
        return Err(Error::Dimension(format!(
            "generator must be square, got {}x{}",
            q.rows(),
            q.cols()
        )));
    }
    q.check_finite()?;
    let d = q.rows();
    for j in 0..d {
        for i in 0..d {
            if i != j && q.get(i, j) < 0.0 {
                return Err(Error::NegativeOffDiagonal {
                    row: i,
                    col: j,
                    value: q.get(i, j),
                });
            }
        }
    }
    for (j, sum) in q.column_sums().into_iter().enumerate() {
        if sum.abs() > COLUMN_SUM_TOL * q.norm_1().max(1.0) {
            return Err(Error::ColumnSumNonzero { col: j, sum });
        }
    }
    if !strongly_connected(&q) {
        return Err(Error::ReducibleChain(
            "the off-diagonal support graph is not strongly connected".into(),
        ));
    }
    Ok(GeneratorMatrix { d, q })
}

/// Strong connectivity of the support graph (edge j -> i iff q[(i,j)] > 0),
/// via forward and backward reachability from state 0.
fn strongly_connected(q: &Matrix) -> bool {
    let d = q.rows();
    if d == 1 {
        return true;
    }
    let reach = |transposed: bool| -> usize {
        let mut seen = vec![false; d];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(j) = stack.pop() {
            for i in 0..d {
                let rate = if transposed { q.get(j, i) } else { q.get(i, j) };
                if i != j && rate > 0.0 && !seen[i] {
                    seen[i] = true;
                    count += 1;
                    stack.push(i);
                }
            }
        }
        count
    };
    reach(false) == d && reach(true) == d
}

/// Solves for the invariant distribution by replacing the last row of `Q`
/// with the all-ones row and solving against the last basis vector.
pub fn invariant_distribution(g: &GeneratorMatrix) -> Result<InvariantDistribution> {
    let d = g.dim();
    let mut sys = g.matrix().clone();
    for j in 0..d {
        sys.set(d - 1, j, 1.0);
    }
    let mut rhs = Matrix::zeros(d, 1);
    rhs.set(d - 1, 0, 1.0);
    let sol = sys
        .solve(&rhs)
        .map_err(|e| Error::Internal(format!("invariant system unexpectedly singular: {e}")))?;
    let mut pi: Vec<f64> = (0..d).map(|i| sol.get(i, 0)).collect();
    let total: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= total;
    }
    Ok(InvariantDistribution { pi })
}

/// Replaces the last row of `Q` with the all-ones row.
fn replaced_system(g: &GeneratorMatrix) -> Matrix {
    let d = g.dim();
    let mut m = g.matrix().clone();
    for j in 0..d {
        m.set(d - 1, j, 1.0);
    }
    m
}

/// Returns the adjugate-type matrix `C` with `C Q = det(Q) I = 0` together
/// with the scalar `q = det(Q-hat)`, and verifies the rank-one identity
/// `C = q pi 1^T` before returning.
pub fn adjugate_identity(g: &GeneratorMatrix) -> Result<(Matrix, f64)> {
    let c = adjugate(g.matrix())?;
    let q_scalar = replaced_system(g).determinant()?;
    let pi = invariant_distribution(g)?;
    let d = g.dim();
    let rank_one = Matrix::from_fn(d, d, |i, _| q_scalar * pi.get(i));
    let scale = q_scalar.abs().max(1.0);
    let dev = c.max_abs_diff(&rank_one);
    if dev > 1e-8 * scale {
        return Err(Error::NumericalCheck(format!(
            "adjugate identity violated: |C - q pi 1^T| = {dev}"
        )));
    }
    let cq = c.mul(g.matrix());
    if cq.max_abs() > 1e-8 * scale * g.matrix().norm_1().max(1.0) {
        return Err(Error::NumericalCheck(format!(
            "C Q should vanish, got max |C Q| = {}",
            cq.max_abs()
        )));
    }
    Ok((c, q_scalar))
}

/// Adjugate via LU determinants of the (d-1)x(d-1) minors;
/// `adj(M)[(i, j)] = (-1)^{i+j} det(M with row j and column i removed)`.
fn adjugate(m: &Matrix) -> Result<Matrix> {
    let d = m.rows();
    if d == 1 {
        // Empty-minor convention: adj([x]) = [1].
        return Ok(Matrix::identity(1));
    }
    let mut adj = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let minor = Matrix::from_fn(d - 1, d - 1, |r, c| {
                let rr = if r < j { r } else { r + 1 };
                let cc = if c < i { c } else { c + 1 };
                m.get(rr, cc)
            });
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj.set(i, j, sign * minor.determinant()?);
        }
    }
    Ok(adj)
}

/// `Q_{k lambda} = Q - k diag(lambda)`.
pub fn subgenerator(g: &GeneratorMatrix, lambda: &RateVector, k: u32) -> Matrix {
    let d = g.dim();
    assert_eq!(d, lambda.dim(), "rate vector must match chain dimension");
    Matrix::from_fn(d, d, |i, j| {
        let mut v = g.matrix().get(i, j);
        if i == j {
            v -= k as f64 * lambda.get(i);
        }
        v
    })
}

/// Result of the survival-stability diagnostic for `Q_lambda`.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub condition_estimate: f64,
    /// `(t, ||exp(Q_lambda t)||_inf)` along the grid.
    pub norms: Vec<(f64, f64)>,
    pub strictly_decreasing: bool,
    pub final_norm: f64,
}

/// Confirms that `Q_lambda` is invertible and that `exp(Q_lambda t)` decays
/// along `t_grid`. Requires every intensity strictly positive; that is the
/// hypothesis making the survival-weighted generator stable.
pub fn stability_check(
    g: &GeneratorMatrix,
    lambda: &RateVector,
    t_grid: &[f64],
) -> Result<StabilityReport> {
    if !lambda.all_positive() {
        let zero_at = lambda
            .entries()
            .iter()
            .position(|&x| x == 0.0)
            .unwrap_or(0);
        return Err(Error::PositivityRequired(format!(
            "stability of Q - diag(lambda) needs lambda_i > 0 for all i; lambda[{zero_at}] = 0"
        )));
    }
    if t_grid.is_empty() {
        return Err(Error::Validation("stability grid must be nonempty".into()));
    }
    let ql = subgenerator(g, lambda, 1);
    let condition_estimate = linalg::condition_estimate(&ql)?;
    let mut norms = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if t <= 0.0 {
            return Err(Error::Validation("stability grid times must be positive".into()));
        }
        norms.push((t, linalg::mat_exp(&ql, t)?.norm_inf()));
    }
    let strictly_decreasing = norms.windows(2).all(|w| w[1].1 < w[0].1);
    let final_norm = norms.last().unwrap().1;
    Ok(StabilityReport {
        condition_estimate,
        norms,
        strictly_decreasing,
        final_norm,
    })
}

/// Exact continuous-time simulation: exponential holding times with rate
/// `|q_jj|`, jumps to `i != j` with probability `q_ij / |q_jj|`.
/// Deterministic given the seed.
pub fn simulate_chain(
    g: &GeneratorMatrix,
    x0: usize,
    horizon: f64,
    seed: u64,
) -> Result<ChainPath> {
    if x0 >= g.dim() {
        return Err(Error::Validation(format!(
            "initial state {x0} out of range for d = {}",
            g.dim()
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::Validation("horizon must be positive".into()));
    }
    let mut rng = rng::rng_from_seed(seed);
    let mut state = x0;
    let mut t = 0.0;
    let mut transitions = Vec::new();
    loop {
        let exit = g.exit_rate(state);
        if exit <= 0.0 {
            if g.dim() == 1 {
                break; // trivial chain: no transitions ever
            }
            return Err(Error::Internal(format!(
                "state {state} is absorbing in a validated generator"
            )));
        }
        t += exp_draw(&mut rng, exit);
        if t >= horizon {
            break;
        }
        state = draw_destination(&mut rng, g, state);
        transitions.push((t, state));
    }
    Ok(ChainPath {
        initial: x0,
        transitions,
        horizon,
    })
}

/// One exponential holding time with the given rate.
pub(crate) fn exp_draw<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

pub(crate) fn draw_destination<R: Rng>(rng: &mut R, g: &GeneratorMatrix, from: usize) -> usize {
    let exit = g.exit_rate(from);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = from;
    for i in 0..g.dim() {
        if i == from {
            continue;
        }
        let r = g.rate(i, from);
        if r <= 0.0 {
            continue;
        }
        acc += r / exit;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn canonical_q() -> GeneratorMatrix {
        validate_generator(
            Matrix::from_rows(&[vec![-1.0, 2.0], vec![1.0, -2.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn validate_accepts_canonical() {
        let g = canonical_q();
        assert_eq!(g.dim(), 2);
    }

    #[test]
    fn validate_rejects_absorbing_state() {
        let q = Matrix::from_rows(&[vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            validate_generator(q),
            Err(Error::ReducibleChain(_))
        ));
    }

    #[test]
    fn validate_rejects_bad_column_sum() {
        let q = Matrix::from_rows(&[vec![-1.0, 2.0], vec![2.0, -2.0]]).unwrap();
        match validate_generator(q) {
            Err(Error::ColumnSumNonzero { col, sum }) => {
                assert_eq!(col, 0);
                assert!((sum - 1.0).abs() < 1e-14);
            }
            other => panic!("expected column-sum error, got {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_negative_off_diagonal() {
        let q = Matrix::from_rows(&[vec![1.0, -2.0], vec![-1.0, 2.0]]).unwrap();
        assert!(matches!(
            validate_generator(q),
            Err(Error::NegativeOffDiagonal { .. })
        ));
    }

    #[test]
    fn invariant_distribution_canonical() {
        let pi = invariant_distribution(&canonical_q()).unwrap();
        assert!((pi.get(0) - 2.0 / 3.0).abs() < 1e-14);
        assert!((pi.get(1) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn invariant_distribution_trivial_and_symmetric() {
        let g1 = validate_generator(Matrix::zeros(1, 1)).unwrap();
        assert_eq!(invariant_distribution(&g1).unwrap().entries(), &[1.0]);

        let q3 = Matrix::from_rows(&[
            vec![-2.0, 1.0, 1.0],
            vec![1.0, -2.0, 1.0],
            vec![1.0, 1.0, -2.0],
        ])
        .unwrap();
        let g3 = validate_generator(q3).unwrap();
        let pi = invariant_distribution(&g3).unwrap();
        for i in 0..3 {
            assert!((pi.get(i) - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn invariant_residual_is_tiny() {
        let g = canonical_q();
        let pi = invariant_distribution(&g).unwrap();
        let res = g.matrix().matvec(pi.entries());
        assert!(res.iter().all(|r| r.abs() < 1e-10));
        let total: f64 = pi.entries().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adjugate_identity_canonical() {
        let (c, q) = adjugate_identity(&canonical_q()).unwrap();
        let expected =
            Matrix::from_rows(&[vec![-2.0, -2.0], vec![-1.0, -1.0]]).unwrap();
        assert!(c.max_abs_diff(&expected) < 1e-12);
        assert!((q + 3.0).abs() < 1e-12);
    }

    #[test]
    fn adjugate_identity_scalar_chain() {
        let g = validate_generator(Matrix::zeros(1, 1)).unwrap();
        let (c, q) = adjugate_identity(&g).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
        assert!((q - 1.0).abs() < 1e-14);
    }

    /// Recursive Laplace cofactor expansion, the independent oracle for the
    /// adjugate path that ships in the library.
    fn det_laplace(m: &Matrix) -> f64 {
        let d = m.rows();
        if d == 1 {
            return m.get(0, 0);
        }
        let mut det = 0.0;
        for j in 0..d {
            let minor = Matrix::from_fn(d - 1, d - 1, |r, c| {
                m.get(r + 1, if c < j { c } else { c + 1 })
            });
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * m.get(0, j) * det_laplace(&minor);
        }
        det
    }

    fn adjugate_laplace(m: &Matrix) -> Matrix {
        let d = m.rows();
        Matrix::from_fn(d, d, |i, j| {
            let minor = Matrix::from_fn(d - 1, d - 1, |r, c| {
                let rr = if r < j { r } else { r + 1 };
                let cc = if c < i { c } else { c + 1 };
                m.get(rr, cc)
            });
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * det_laplace(&minor)
        })
    }

    #[test]
    fn adjugate_matches_cofactor_expansion_oracle() {
        // Deterministic pseudo-random 4x4 generator.
        let mut seedval = 0x1234_5678_u64;
        let mut next = || {
            seedval ^= seedval << 13;
            seedval ^= seedval >> 7;
            seedval ^= seedval << 17;
            0.1 + ((seedval >> 11) as f64 / (1u64 << 53) as f64) * 1.9
        };
        let d = 4;
        let mut q = Matrix::zeros(d, d);
        for j in 0..d {
            let mut s = 0.0;
            for i in 0..d {
                if i != j {
                    let r = next();
                    q.set(i, j, r);
                    s += r;
                }
            }
            q.set(j, j, -s);
        }
        let g = validate_generator(q.clone()).unwrap();
        let (c, _) = adjugate_identity(&g).unwrap();
        let oracle = adjugate_laplace(&q);
        assert!(c.max_abs_diff(&oracle) < 1e-9);
    }

    #[test]
    fn subgenerator_values() {
        let g = canonical_q();
        let lam = RateVector::new(vec![1.0, 3.0]).unwrap();
        assert!(subgenerator(&g, &lam, 0).max_abs_diff(g.matrix()) == 0.0);
        let q1 = subgenerator(&g, &lam, 1);
        let expected = Matrix::from_rows(&[vec![-2.0, 2.0], vec![1.0, -5.0]]).unwrap();
        assert!(q1.max_abs_diff(&expected) == 0.0);
        let q2 = subgenerator(&g, &lam, 2);
        let expected2 = Matrix::from_rows(&[vec![-3.0, 2.0], vec![1.0, -8.0]]).unwrap();
        assert!(q2.max_abs_diff(&expected2) == 0.0);
    }

    #[test]
    fn stability_check_canonical() {
        let g = canonical_q();
        let lam = RateVector::new(vec![1.0, 3.0]).unwrap();
        let report = stability_check(&g, &lam, &[1.0, 5.0, 10.0]).unwrap();
        assert!(report.strictly_decreasing);
        assert!(report.final_norm < 1e-3);
        assert!(report.condition_estimate.is_finite());
    }

    #[test]
    fn stability_check_requires_positive_rates() {
        let g = canonical_q();
        let lam = RateVector::new(vec![0.0, 3.0]).unwrap();
        assert!(matches!(
            stability_check(&g, &lam, &[1.0]),
            Err(Error::PositivityRequired(_))
        ));
    }

    #[test]
    fn stability_check_scalar_case() {
        let g = validate_generator(Matrix::zeros(1, 1)).unwrap();
        let lam = RateVector::new(vec![2.0]).unwrap();
        let report = stability_check(&g, &lam, &[1.0]).unwrap();
        assert!((report.norms[0].1 - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn survival_norm_is_nonincreasing() {
        let g = canonical_q();
        let lam = RateVector::new(vec![1.0, 3.0]).unwrap();
        let ql = subgenerator(&g, &lam, 1);
        let mut prev = f64::INFINITY;
        for k in 1..=20 {
            let t = 0.25 * k as f64;
            let surv: f64 = linalg::mat_exp(&ql, t)
                .unwrap()
                .matvec(&[1.0, 0.0])
                .iter()
                .sum();
            assert!(surv <= prev + 1e-12);
            prev = surv;
        }
    }

    #[test]
    fn simulate_trivial_chain_has_no_transitions() {
        let g = validate_generator(Matrix::zeros(1, 1)).unwrap();
        let path = simulate_chain(&g, 0, 10.0, 99).unwrap();
        assert!(path.transitions.is_empty());
        assert_eq!(path.state_at(5.0), 0);
    }

    #[test]
    fn simulate_is_deterministic_per_seed() {
        let g = canonical_q();
        let a = simulate_chain(&g, 0, 50.0, 12345).unwrap();
        let b = simulate_chain(&g, 0, 50.0, 12345).unwrap();
        assert_eq!(a.transitions, b.transitions);
        let c = simulate_chain(&g, 0, 50.0, 54321).unwrap();
        assert_ne!(a.transitions, c.transitions);
    }

    #[test]
    fn occupation_fractions_match_invariant_law() {
        let g = canonical_q();
        let path = simulate_chain(&g, 0, 1e4, 2024).unwrap();
        let occ = path.occupation_fractions(2);
        assert!(
            (occ[0] - 2.0 / 3.0).abs() < 0.01,
            "occupation {} should be near 2/3",
            occ[0]
        );
    }

    #[test]
    fn integrated_rate_is_piecewise_linear() {
        let path = ChainPath {
            initial: 0,
            transitions: vec![(1.0, 1), (3.0, 0)],
            horizon: 5.0,
        };
        let lam = RateVector::new(vec![1.0, 3.0]).unwrap();
        assert!((path.integrated_rate(&lam, 0.5) - 0.5).abs() < 1e-14);
        assert!((path.integrated_rate(&lam, 2.0) - (1.0 + 3.0)).abs() < 1e-14);
        assert!((path.integrated_rate(&lam, 4.0) - (1.0 + 6.0 + 1.0)).abs() < 1e-14);
    }
}
