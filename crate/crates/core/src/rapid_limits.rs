//! Rapid-switching diagnostics: what happens as the chain generator is
//! inflated to `alpha Q` with `alpha -> infinity`.
//!
//! Every limit is governed by the averaged intensity
//! `lambda_inf = lambda' pi`:
//!
//! * `(alpha Q - diag(lambda))^{-1} -> -pi 1' / lambda_inf`,
//! * `exp((alpha Q - k diag(lambda)) t) -> e^{-k lambda_inf t} pi 1'`,
//! * the joint obligor law collapses to a product of a binomial count law
//!   with success probability `1 - e^{-lambda_inf t}` and the invariant
//!   chain law.
//!
//! The checks here quantify the convergence on a finite `alpha` grid: the
//! deviation norms must fall and their log-log slope against `alpha` is
//! fitted by least squares (first-order decay shows up as slope -1). The
//! time-change check validates by simulation that running the chain with
//! `alpha Q` is the same as compressing a path of `Q` by `alpha`.

use crate::binomial_model::{self, JointState, ObligorModel};
use crate::chain::{invariant_distribution, subgenerator, GeneratorMatrix, RateVector};
use crate::error::{Error, Result};
use crate::linalg::{binomial, mat_exp, Matrix};
use crate::montecarlo::{self, stats};
use crate::rng::{child_seed, rng_from_seed};
use crate::Model;
use rand::Rng;
use rayon::prelude::*;

/// Accepted band for the fitted log-log decay slope.
pub const SLOPE_BAND: (f64, f64) = (-1.5, -0.5);

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

/// Deviations from a rapid-switching limit along an `alpha` grid.
#[derive(Debug, Clone)]
pub struct LimitReport {
    /// Which limit was checked (used as the CSV identity column).
    pub identity: String,
    pub alphas: Vec<f64>,
    pub deviations: Vec<f64>,
    pub fitted_slope: f64,
    pub slope_in_band: bool,
    pub decreasing: bool,
}

impl LimitReport {
    fn assemble(identity: &str, alphas: &[f64], deviations: Vec<f64>) -> Self {
        let fitted_slope = fit_decay_slope(alphas, &deviations);
        let decreasing = deviations.windows(2).all(|w| w[1] < w[0]);
        LimitReport {
            identity: identity.to_string(),
            alphas: alphas.to_vec(),
            deviations,
            fitted_slope,
            slope_in_band: (SLOPE_BAND.0..=SLOPE_BAND.1).contains(&fitted_slope),
            decreasing,
        }
    }
}

/// Least-squares slope of `ln(deviation)` against `ln(alpha)`.
pub fn fit_decay_slope(alphas: &[f64], deviations: &[f64]) -> f64 {
    assert_eq!(alphas.len(), deviations.len());
    let n = alphas.len() as f64;
    let xs: Vec<f64> = alphas.iter().map(|a| a.ln()).collect();
    let ys: Vec<f64> = deviations.iter().map(|d| d.max(1e-300).ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    sxy / sxx
}

fn validate_alpha_grid(alpha_grid: &[f64]) -> Result<()> {
    if alpha_grid.len() < 2 {
        return Err(Error::Validation("alpha grid needs at least two points".into()));
    }
    for w in alpha_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Validation("alpha grid must be strictly increasing".into()));
        }
    }
    if alpha_grid[0] <= 0.0 {
        return Err(Error::Validation("alpha values must be positive".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Scalar and matrix limits
// ---------------------------------------------------------------------------

/// The averaged intensity `lambda_inf = lambda' pi`.
pub fn lambda_infinity(g: &GeneratorMatrix, lambda: &RateVector) -> Result<f64> {
    if lambda.dim() != g.dim() {
        return Err(Error::Dimension("rate vector must match chain dimension".into()));
    }
    let pi = invariant_distribution(g)?;
    Ok(lambda.dot(pi.entries()))
}

/// The limiting resolvent `-pi 1' / lambda_inf`.
pub fn resolvent_limit(g: &GeneratorMatrix, lambda: &RateVector) -> Result<Matrix> {
    let pi = invariant_distribution(g)?;
    let linf = lambda_infinity(g, lambda)?;
    let d = g.dim();
    Ok(Matrix::from_fn(d, d, |i, _| -pi.get(i) / linf))
}

/// Checks `(alpha Q - diag(lambda))^{-1} -> -pi 1' / lambda_inf` along the
/// grid (entrywise max norm).
pub fn resolvent_limit_check(
    g: &GeneratorMatrix,
    lambda: &RateVector,
    alpha_grid: &[f64],
) -> Result<LimitReport> {
    if !lambda.all_positive() {
        return Err(Error::PositivityRequired(
            "the resolvent limit needs lambda_i > 0 for all i".into(),
        ));
    }
    validate_alpha_grid(alpha_grid)?;
    let limit = resolvent_limit(g, lambda)?;
    let mut deviations = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let m = subgenerator(&g.scaled(alpha)?, lambda, 1);
        let inv = m
            .inverse()
            .map_err(|e| Error::Internal(format!("alpha Q - diag(lambda) singular: {e}")))?;
        deviations.push(inv.max_abs_diff(&limit));
    }
    Ok(LimitReport::assemble("resolvent", alpha_grid, deviations))
}

/// Checks `exp((alpha Q - k diag(lambda)) t) -> e^{-k lambda_inf t} pi 1'`
/// along the grid; `k = 0` is the plain ergodic limit.
pub fn exp_limit_check(
    g: &GeneratorMatrix,
    lambda: &RateVector,
    k: u32,
    t: f64,
    alpha_grid: &[f64],
) -> Result<LimitReport> {
    if !(t > 0.0) {
        return Err(Error::Validation("exp limit check needs t > 0".into()));
    }
    validate_alpha_grid(alpha_grid)?;
    let pi = invariant_distribution(g)?;
    let linf = lambda_infinity(g, lambda)?;
    let d = g.dim();
    let scale = (-(k as f64) * linf * t).exp();
    let limit = Matrix::from_fn(d, d, |i, _| scale * pi.get(i));
    let mut deviations = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let m = subgenerator(&g.scaled(alpha)?, lambda, k);
        deviations.push(mat_exp(&m, t)?.max_abs_diff(&limit));
    }
    Ok(LimitReport::assemble("exp", alpha_grid, deviations))
}

/// The limiting blocks of the joint obligor semigroup: scalar masses
/// `f_inf[(i, j)] = C(n-j, n-i) e^{-(n-i) lambda_inf t}
/// (1 - e^{-lambda_inf t})^{i-j}` for `i >= j`; each block of the limit
/// matrix is this mass times `pi 1'`. Column `j` holds the
/// `Bin(n-j, e^{-lambda_inf t})` masses (indexed by survivors `n-i`).
pub fn limit_blocks_f(n: usize, lambda_inf: f64, t: f64) -> Result<Matrix> {
    if !(t >= 0.0 && lambda_inf >= 0.0) {
        return Err(Error::Validation("limit blocks need t >= 0 and lambda_inf >= 0".into()));
    }
    let decay = (-lambda_inf * t).exp();
    let mut f = Matrix::zeros(n + 1, n + 1);
    for j in 0..=n {
        for i in j..=n {
            let mass = binomial((n - j) as u64, (n - i) as u64)?
                * decay.powi((n - i) as i32)
                * (1.0 - decay).powi((i - j) as i32);
            f.set(i, j, mass);
        }
    }
    Ok(f)
}

/// The limiting conditional joint law given `(N_s, X_s) = state`: count
/// `i >= k0` carries `Bin(n - k0, 1 - e^{-lambda_inf elapsed})` mass at
/// `i - k0`, and the chain factor is `pi` regardless of the conditioning
/// state.
pub fn limit_conditional_law(
    model: &ObligorModel,
    elapsed: f64,
    state: JointState,
) -> Result<Vec<f64>> {
    let (n, d) = (model.obligors(), model.dim());
    let pi = invariant_distribution(model.generator())?;
    let linf = lambda_infinity(model.generator(), model.rates())?;
    let f = limit_blocks_f(n, linf, elapsed)?;
    let mut law = vec![0.0; (n + 1) * d];
    for i in state.count..=n {
        let mass = f.get(i, state.count);
        for j in 0..d {
            law[i * d + j] = mass * pi.get(j);
        }
    }
    Ok(law)
}

/// Total variation between the exact conditional law under `alpha Q` and
/// the limiting product law, along the grid.
pub fn limit_conditional_check(
    model: &ObligorModel,
    alpha_grid: &[f64],
    elapsed: f64,
    state: JointState,
) -> Result<LimitReport> {
    if !model.rates().all_positive() {
        return Err(Error::PositivityRequired(
            "the conditional limit needs lambda_i > 0 for all i".into(),
        ));
    }
    validate_alpha_grid(alpha_grid)?;
    let limit = limit_conditional_law(model, elapsed, state)?;
    let mut deviations = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let scaled = model.with_scaled_generator(alpha)?;
        let law = binomial_model::conditional_joint(&scaled, elapsed, state)?;
        deviations.push(total_variation(law.entries(), &limit));
    }
    Ok(LimitReport::assemble(
        "conditional",
        alpha_grid,
        deviations,
    ))
}

/// Total variation distance `0.5 sum |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

// ---------------------------------------------------------------------------
// Time-change simulation check
// ---------------------------------------------------------------------------

/// Outcome of the two-construction simulation check at a fixed `alpha`.
#[derive(Debug, Clone)]
pub struct TimechangeReport {
    pub alpha: f64,
    pub replications: usize,
    /// Two-sample p-value: direct `alpha Q` simulation against the
    /// time-compressed construction.
    pub p_two_sample: f64,
    /// Goodness-of-fit p-value of the direct histogram against the
    /// limiting `Bin(n, 1 - e^{-lambda_inf t})` law.
    pub p_binomial_limit: f64,
    pub histogram_direct: Vec<u64>,
    pub histogram_compressed: Vec<u64>,
}

/// Simulates the end count `N_horizon` two ways with coupled seeds —
/// directly under the generator `alpha Q`, and by compressing a path of
/// `Q` by `alpha` before laying the counting process on top — and compares
/// the two histograms plus the limiting binomial law.
pub fn timechange_simulation_check(
    model: &ObligorModel,
    alpha: f64,
    horizon: f64,
    replications: usize,
    seed: u64,
) -> Result<TimechangeReport> {
    if !(alpha > 0.0 && horizon > 0.0) {
        return Err(Error::Validation("alpha and horizon must be positive".into()));
    }
    if replications < 1000 {
        return Err(Error::Validation("need at least 1000 replications".into()));
    }
    let n = model.obligors();
    let direct_model = Model::Binomial(model.with_scaled_generator(alpha)?);

    const BLOCK: usize = 4096;
    let n_blocks = replications.div_ceil(BLOCK);
    let partials: Vec<Result<(Vec<u64>, Vec<u64>)>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(replications);
            let mut direct = vec![0u64; n + 1];
            let mut compressed = vec![0u64; n + 1];
            for r in lo..hi {
                let rep_seed = child_seed(seed, r as u64);
                let path = montecarlo::simulate_joint(&direct_model, horizon, rep_seed)?;
                direct[path.count_at(horizon)] += 1;

                let count = simulate_compressed(model, alpha, horizon, rep_seed)?;
                compressed[count] += 1;
            }
            Ok((direct, compressed))
        })
        .collect();
    let mut histogram_direct = vec![0u64; n + 1];
    let mut histogram_compressed = vec![0u64; n + 1];
    for p in partials {
        let (d, c) = p?;
        for (acc, v) in histogram_direct.iter_mut().zip(d) {
            *acc += v;
        }
        for (acc, v) in histogram_compressed.iter_mut().zip(c) {
            *acc += v;
        }
    }

    let p_two_sample = stats::chi_square_two_sample(&histogram_direct, &histogram_compressed)?;
    let linf = lambda_infinity(model.generator(), model.rates())?;
    let p_success = 1.0 - (-linf * horizon).exp();
    let bin: Vec<f64> = (0..=n)
        .map(|k| {
            Ok(binomial(n as u64, k as u64)?
                * p_success.powi(k as i32)
                * (1.0 - p_success).powi((n - k) as i32))
        })
        .collect::<Result<_>>()?;
    let p_binomial_limit = stats::chi_square_gof(&histogram_direct, &bin)?;

    Ok(TimechangeReport {
        alpha,
        replications,
        p_two_sample,
        p_binomial_limit,
        histogram_direct,
        histogram_compressed,
    })
}

/// One replication of the time-compressed construction: simulate the chain
/// under the base generator up to `alpha * horizon` (its own stream),
/// compress the clock by `alpha`, then lay the count jumps on top of the
/// frozen intensity path with the replication's primary stream. One Exp(1)
/// draw per jump, inverted across the constant intensity pieces; for
/// `d = 1` this consumes randomness exactly like the direct construction.
fn simulate_compressed(
    model: &ObligorModel,
    alpha: f64,
    horizon: f64,
    rep_seed: u64,
) -> Result<usize> {
    let init = {
        let mut rng = rng_from_seed(child_seed(rep_seed, 3));
        montecarlo::draw_initial(&mut rng, model.initial_law())
    };
    let base_path = crate::chain::simulate_chain(
        model.generator(),
        init,
        alpha * horizon,
        child_seed(rep_seed, 4),
    )?;
    let path = base_path.compress(alpha);

    let lambda = model.rates();
    let n = model.obligors();
    let mut rng = rng_from_seed(rep_seed);
    let mut t = 0.0;
    let mut count = 0usize;
    let mut piece = 0usize;
    let mut state = path.initial;
    'events: while count < n {
        let rate = lambda.get(state) * (n - count) as f64;
        if rate <= 0.0 {
            // Zero intensity in this state: coast to the next chain change.
            match path.transitions.get(piece) {
                Some(&(s, dest)) if s < horizon => {
                    t = s;
                    state = dest;
                    piece += 1;
                    continue 'events;
                }
                _ => break 'events,
            }
        }
        let u: f64 = rng.gen();
        let mut budget = -(1.0 - u).ln();
        loop {
            let piece_end = path
                .transitions
                .get(piece)
                .map(|&(s, _)| s)
                .unwrap_or(f64::INFINITY)
                .min(horizon);
            let r = lambda.get(state) * (n - count) as f64;
            if r > 0.0 && budget < (piece_end - t) * r {
                t += budget / r;
                count += 1;
                continue 'events;
            }
            if r > 0.0 {
                budget -= (piece_end - t) * r;
            }
            if piece_end >= horizon {
                break 'events;
            }
            t = piece_end;
            state = path.transitions[piece].1;
            piece += 1;
        }
    }
    Ok(count)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::validate_generator;

    fn canonical() -> (GeneratorMatrix, RateVector) {
        let g = validate_generator(
            Matrix::from_rows(&[vec![-1.0, 2.0], vec![1.0, -2.0]]).unwrap(),
        )
        .unwrap();
        let lambda = RateVector::new(vec![1.0, 3.0]).unwrap();
        (g, lambda)
    }

    fn canonical_model(n: usize) -> ObligorModel {
        let (g, lambda) = canonical();
        ObligorModel::new(n, g, lambda, vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn lambda_infinity_values() {
        let (g, lambda) = canonical();
        assert!((lambda_infinity(&g, &lambda).unwrap() - 5.0 / 3.0).abs() < 1e-14);

        let g1 = validate_generator(Matrix::zeros(1, 1)).unwrap();
        let l1 = RateVector::new(vec![2.5]).unwrap();
        assert!((lambda_infinity(&g1, &l1).unwrap() - 2.5).abs() < 1e-15);

        let equal = RateVector::new(vec![0.7, 0.7]).unwrap();
        assert!((lambda_infinity(&g, &equal).unwrap() - 0.7).abs() < 1e-14);
    }

    #[test]
    fn lambda_infinity_bracketed_by_rates() {
        let (g, lambda) = canonical();
        let linf = lambda_infinity(&g, &lambda).unwrap();
        assert!(linf >= 1.0 && linf <= 3.0);
    }

    #[test]
    fn resolvent_limit_canonical_value() {
        let (g, lambda) = canonical();
        let limit = resolvent_limit(&g, &lambda).unwrap();
        let expected = Matrix::from_rows(&[
            vec![-0.4, -0.4],
            vec![-0.2, -0.2],
        ])
        .unwrap();
        assert!(limit.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn resolvent_limit_matches_adjugate_route() {
        // Lemma route: C(Q) / (-sum_i lambda_i C(Q)_ii) equals the limit.
        let (g, lambda) = canonical();
        let (c, _) = crate::chain::adjugate_identity(&g).unwrap();
        let denom: f64 = -(0..2).map(|i| lambda.get(i) * c.get(i, i)).sum::<f64>();
        let via_adjugate = c.scale(1.0 / denom);
        let limit = resolvent_limit(&g, &lambda).unwrap();
        assert!(via_adjugate.max_abs_diff(&limit) < 1e-12);
    }

    #[test]
    fn resolvent_deviations_decay_first_order() {
        let (g, lambda) = canonical();
        let grid = [10.0, 100.0, 1000.0];
        let report = resolvent_limit_check(&g, &lambda, &grid).unwrap();
        assert!(report.decreasing);
        assert!(report.slope_in_band, "slope {}", report.fitted_slope);
        // Consecutive ratios track the grid step under first-order decay.
        for w in report.deviations.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.0 && ratio < 33.0, "ratio {ratio}");
        }
    }

    #[test]
    fn resolvent_scalar_chain_exact_for_every_alpha() {
        let g = validate_generator(Matrix::zeros(1, 1)).unwrap();
        let lambda = RateVector::new(vec![2.0]).unwrap();
        let report = resolvent_limit_check(&g, &lambda, &[1.0, 10.0]).unwrap();
        for d in report.deviations {
            assert!(d < 1e-15);
        }
    }

    #[test]
    fn exp_limit_deviations_decay() {
        let (g, lambda) = canonical();
        let grid = [10.0, 100.0, 1000.0];
        let report = exp_limit_check(&g, &lambda, 1, 1.0, &grid).unwrap();
        assert!(report.decreasing);
        assert!(report.slope_in_band, "slope {}", report.fitted_slope);
        assert!(report.deviations[2] < 1e-2 * report.deviations[0]);

        // k = 0: ordinary mixing toward pi 1'.
        let ergodic = exp_limit_check(&g, &lambda, 0, 1.0, &grid).unwrap();
        assert!(ergodic.deviations[2] < 1e-8);
    }

    #[test]
    fn exp_limit_scalar_chain_exact() {
        let g = validate_generator(Matrix::zeros(1, 1)).unwrap();
        let lambda = RateVector::new(vec![2.0]).unwrap();
        let report = exp_limit_check(&g, &lambda, 1, 1.0, &[1.0, 5.0]).unwrap();
        for d in report.deviations {
            assert!(d < 1e-15);
        }
    }

    #[test]
    fn limit_blocks_are_binomial_masses() {
        // t = 0: identity blocks.
        let f0 = limit_blocks_f(3, 5.0 / 3.0, 0.0).unwrap();
        assert!(f0.max_abs_diff(&Matrix::identity(4)) < 1e-15);

        // lambda_inf t = ln 2, first column: Bin(3, 1/2).
        let t = 2.0f64.ln() / (5.0 / 3.0);
        let f = limit_blocks_f(3, 5.0 / 3.0, t).unwrap();
        let expected = [1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0];
        for (i, &e) in expected.iter().enumerate() {
            assert!((f.get(i, 0) - e).abs() < 1e-14);
        }
        // Columns sum to one.
        for s in f.column_sums() {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn limit_blocks_match_large_alpha_evaluation() {
        let m = canonical_model(2);
        let t = 1.0;
        let linf = 5.0 / 3.0;
        let f_inf = limit_blocks_f(2, linf, t).unwrap();
        let pi = [2.0 / 3.0, 1.0 / 3.0];
        let scaled = m.with_scaled_generator(1e4).unwrap();
        let big = binomial_model::exp_big_generator_closed_form(&scaled, t).unwrap();
        for bi in 0..=2 {
            for bj in 0..=bi {
                for r in 0..2 {
                    for c in 0..2 {
                        let finite = big.get(bi * 2 + r, bj * 2 + c);
                        let limit = f_inf.get(bi, bj) * pi[r];
                        assert!(
                            (finite - limit).abs() < 1e-3,
                            "block ({bi},{bj}) entry ({r},{c})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn conditional_limit_product_form() {
        let m = canonical_model(3);
        let state = JointState { count: 1, chain_state: 0 };
        let law = limit_conditional_law(&m, 0.9, state).unwrap();
        // Chain marginal is pi regardless of the conditioning state.
        let mut chain = [0.0; 2];
        for i in 0..=3 {
            for j in 0..2 {
                chain[j] += law[i * 2 + j];
            }
        }
        assert!((chain[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((chain[1] - 1.0 / 3.0).abs() < 1e-12);
        // Count marginal: shifted binomial.
        let linf = 5.0 / 3.0;
        let p = 1.0 - (-linf * 0.9f64).exp();
        for i in 1..=3usize {
            let count_mass: f64 = (0..2).map(|j| law[i * 2 + j]).sum();
            let expect = binomial(2, (i - 1) as u64).unwrap()
                * p.powi((i - 1) as i32)
                * (1.0 - p).powi((3 - i) as i32);
            assert!((count_mass - expect).abs() < 1e-12);
        }
        // The conditioning chain state is irrelevant in the limit.
        let other = limit_conditional_law(
            &m,
            0.9,
            JointState { count: 1, chain_state: 1 },
        )
        .unwrap();
        for (a, b) in law.iter().zip(&other) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn conditional_laws_converge_in_total_variation() {
        let m = canonical_model(3);
        let state = JointState { count: 1, chain_state: 0 };
        let grid = [10.0, 100.0, 1000.0];
        let report = limit_conditional_check(&m, &grid, 1.0, state).unwrap();
        assert!(report.decreasing);
        assert!(report.deviations[2] < 1e-2, "TV at alpha=1e3: {}", report.deviations[2]);
        assert!(report.slope_in_band, "slope {}", report.fitted_slope);
    }

    #[test]
    fn timechange_constructions_agree_at_alpha_one() {
        let m = canonical_model(3);
        let report = timechange_simulation_check(&m, 1.0, 1.0, 100_000, 42).unwrap();
        assert!(
            report.p_two_sample > 0.01,
            "two-sample p {}",
            report.p_two_sample
        );
    }

    #[test]
    fn timechange_scalar_chain_paths_coincide() {
        // d = 1: the two constructions are identical draw by draw, so the
        // histograms match exactly.
        let g = validate_generator(Matrix::zeros(1, 1)).unwrap();
        let lambda = RateVector::new(vec![2.0]).unwrap();
        let m = ObligorModel::new(3, g, lambda, vec![1.0]).unwrap();
        let report = timechange_simulation_check(&m, 2.5, 1.0, 5000, 7).unwrap();
        assert_eq!(report.histogram_direct, report.histogram_compressed);
    }

    #[test]
    fn timechange_matches_binomial_limit_at_large_alpha() {
        let m = canonical_model(3);
        let report = timechange_simulation_check(&m, 1000.0, 1.0, 10_000, 11).unwrap();
        assert!(
            report.p_binomial_limit > 0.01,
            "binomial-limit GOF p {}",
            report.p_binomial_limit
        );
    }

    #[test]
    fn slope_fit_recovers_synthetic_order() {
        let alphas = [10.0, 100.0, 1000.0, 10000.0];
        let deviations: Vec<f64> = alphas.iter().map(|a| 3.0 / a).collect();
        let slope = fit_decay_slope(&alphas, &deviations);
        assert!((slope + 1.0).abs() < 1e-12);
    }
}
