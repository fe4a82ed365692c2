//! Hidden-chain filtering from the counting process's own history.
//!
//! Only the jump times of `N` are observed. The chain posterior
//! `xhat_t = E[X_t | F^N_t]` follows a Bayes reweighting
//! `diag(lambda) xhat / (lambda' xhat)` at each observed jump and the
//! nonlinear ODE
//!
//! ```text
//!   dxhat/dt = Q xhat - f(N_t) (diag(lambda) xhat - xhat (lambda' xhat))
//! ```
//!
//! between jumps (`f(N) = n - N` for the obligor pool, `1` for the Poisson
//! case). Once an obligor pool is fully defaulted the quadratic term is
//! gone and the filter switches to the exact propagator `exp(Q dt)`.
//! Filtered predictions propagate `nu_s (x) xhat_s` through the same joint
//! generators as the fully observed conditionals.

use crate::binomial_model::{self, embed_block, JointDistribution};
use crate::chain::RateVector;
use crate::error::{Error, Result};
use crate::linalg::{mat_exp, mat_exp_complex};
use crate::poisson_model::{self, ConditionalCountLaw};
use crate::Model;
use num_complex::Complex64;
use std::io::{BufRead, Write};
use std::path::Path;

/// Default cap on the between-jump integration step.
pub const DEFAULT_MAX_STEP: f64 = 0.01;

/// Substeps per between-event gap; the effective step is
/// `min(DEFAULT_MAX_STEP, gap / GAP_SUBSTEPS)`.
pub const GAP_SUBSTEPS: f64 = 100.0;

const NEGATIVITY_TOL: f64 = 1e-12;
const MAX_HALVINGS: u32 = 40;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Filter state: observed count and chain posterior at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub time: f64,
    pub count: usize,
    pub xhat: Vec<f64>,
}

impl FilterState {
    pub fn new(time: f64, count: usize, xhat: Vec<f64>) -> Result<Self> {
        binomial_model::validate_simplex(&xhat, xhat.len())?;
        Ok(FilterState { time, count, xhat })
    }
}

/// Which counting process produced an observation record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationTag {
    Binomial { n: usize },
    Poisson,
}

/// Observed jump times of `N` on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct ObservationRecord {
    jump_times: Vec<f64>,
    horizon: f64,
    tag: ObservationTag,
}

impl ObservationRecord {
    pub fn new(jump_times: Vec<f64>, horizon: f64, tag: ObservationTag) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Validation("horizon must be positive and finite".into()));
        }
        for w in jump_times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Validation(format!(
                    "jump times must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let (Some(&first), Some(&last)) = (jump_times.first(), jump_times.last()) {
            if first <= 0.0 || last > horizon {
                return Err(Error::Validation(
                    "jump times must lie in (0, horizon]".into(),
                ));
            }
        }
        if let ObservationTag::Binomial { n } = tag {
            if jump_times.len() > n {
                return Err(Error::Validation(format!(
                    "{} observed jumps exceed the obligor count {n}",
                    jump_times.len()
                )));
            }
        }
        Ok(ObservationRecord {
            jump_times,
            horizon,
            tag,
        })
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn tag(&self) -> ObservationTag {
        self.tag
    }

    /// Reads a record from CSV with a single `jump_time` column.
    pub fn from_csv_reader(
        reader: impl BufRead,
        horizon: f64,
        tag: ObservationTag,
    ) -> Result<Self> {
        let mut times = Vec::new();
        let mut lines = reader.lines();
        match lines.next() {
            Some(header) => {
                let header = header?;
                if header.trim() != "jump_time" {
                    return Err(Error::Validation(format!(
                        "expected header 'jump_time', got '{}'",
                        header.trim()
                    )));
                }
            }
            None => return Err(Error::Validation("empty observation file".into())),
        }
        for line in lines {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let t: f64 = trimmed.parse().map_err(|_| {
                Error::Validation(format!("cannot parse jump time '{trimmed}'"))
            })?;
            times.push(t);
        }
        ObservationRecord::new(times, horizon, tag)
    }

    pub fn from_csv_path(path: &Path, horizon: f64, tag: ObservationTag) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file), horizon, tag)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "jump_time")?;
        for t in &self.jump_times {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }
}

/// A filtered prediction: a joint law for the obligor pool, a truncated
/// conditional window for the Poisson case.
#[derive(Debug, Clone)]
pub enum FilteredPrediction {
    Binomial(JointDistribution),
    Poisson(ConditionalCountLaw),
}

impl FilteredPrediction {
    /// Count masses, indexed by absolute count starting at zero for the
    /// binomial variant and at the conditioning count for the Poisson one.
    pub fn count_masses(&self) -> Vec<f64> {
        match self {
            FilteredPrediction::Binomial(j) => j.count_marginals().masses().to_vec(),
            FilteredPrediction::Poisson(c) => c.count_masses(),
        }
    }
}

// ---------------------------------------------------------------------------
// Filter dynamics
// ---------------------------------------------------------------------------

/// Bayes reweighting at an observed jump:
/// `xhat <- diag(lambda) xhat / (lambda' xhat)`. Scale-invariant in
/// `lambda`; errors if the filtered intensity vanishes, since a jump was
/// then observed that the filter deems impossible.
pub fn jump_update(xhat: &[f64], lambda: &RateVector) -> Result<Vec<f64>> {
    if xhat.len() != lambda.dim() {
        return Err(Error::Dimension(format!(
            "posterior has length {}, rates have {}",
            xhat.len(),
            lambda.dim()
        )));
    }
    let total = lambda.dot(xhat);
    if total <= 0.0 {
        return Err(Error::DegenerateObservation(
            "jump observed while the filtered intensity lambda' xhat is zero".into(),
        ));
    }
    Ok(xhat
        .iter()
        .enumerate()
        .map(|(i, &x)| lambda.get(i) * x / total)
        .collect())
}

fn flow_field(model: &Model, count: usize, x: &[f64]) -> Vec<f64> {
    let q = model.generator().matrix();
    let lambda = model.rates();
    let f = model.count_factor(count);
    let lx = lambda.dot(x);
    let qx = q.matvec(x);
    (0..x.len())
        .map(|i| qx[i] - f * (lambda.get(i) * x[i] - x[i] * lx))
        .collect()
}

fn renormalize(x: &mut [f64]) {
    let total: f64 = x.iter().sum();
    for v in x.iter_mut() {
        *v /= total;
    }
}

/// One explicit fourth-order step of the between-jump posterior ODE over
/// `dt`, renormalized; a step that drives a component negative beyond
/// tolerance is halved automatically. In the fully defaulted regime
/// (`f(N) = 0`) the exact linear propagator `exp(Q dt)` is used instead.
pub fn flow_between_jumps(state: &FilterState, model: &Model, dt: f64) -> Result<FilterState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Validation("time step must be positive and finite".into()));
    }
    if model.count_factor(state.count) == 0.0 {
        let mut xhat = mat_exp(model.generator().matrix(), dt)?.matvec(&state.xhat);
        renormalize(&mut xhat);
        return Ok(FilterState {
            time: state.time + dt,
            count: state.count,
            xhat,
        });
    }
    let xhat = flow_step(model, state.count, &state.xhat, dt, 0)?;
    Ok(FilterState {
        time: state.time + dt,
        count: state.count,
        xhat,
    })
}

fn flow_step(
    model: &Model,
    count: usize,
    x: &[f64],
    dt: f64,
    depth: u32,
) -> Result<Vec<f64>> {
    let k1 = flow_field(model, count, x);
    let probe = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, v)| b + h * v).collect()
    };
    let k2 = flow_field(model, count, &probe(x, &k1, dt / 2.0));
    let k3 = flow_field(model, count, &probe(x, &k2, dt / 2.0));
    let k4 = flow_field(model, count, &probe(x, &k3, dt));
    let mut next: Vec<f64> = (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if next.iter().any(|&v| v < -NEGATIVITY_TOL) {
        if depth >= MAX_HALVINGS {
            return Err(Error::StepSizeUnderflow(format!(
                "posterior stays negative after {MAX_HALVINGS} halvings at dt = {dt}"
            )));
        }
        let mid = flow_step(model, count, x, dt / 2.0, depth + 1)?;
        return flow_step(model, count, &mid, dt / 2.0, depth + 1);
    }
    for v in next.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    renormalize(&mut next);
    Ok(next)
}

/// Runs the filter over an observation record, alternating ODE flow and
/// jump updates, and returns the trajectory sampled at the grid times plus
/// a snapshot right after each observed jump.
pub fn run_filter(
    model: &Model,
    observations: &ObservationRecord,
    grid: &[f64],
) -> Result<Vec<FilterState>> {
    match (model, observations.tag()) {
        (Model::Binomial(m), ObservationTag::Binomial { n }) if m.obligors() == n => {}
        (Model::Poisson(_), ObservationTag::Poisson) => {}
        _ => {
            return Err(Error::Validation(
                "observation record tag does not match the model".into(),
            ))
        }
    }
    for &g in grid {
        if !(0.0..=observations.horizon()).contains(&g) {
            return Err(Error::Validation(format!(
                "grid time {g} outside [0, {}]",
                observations.horizon()
            )));
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Event {
        Jump(f64),
        Record(f64),
    }
    let time_of = |e: &Event| match e {
        Event::Jump(t) | Event::Record(t) => *t,
    };
    let mut events: Vec<Event> = observations
        .jump_times()
        .iter()
        .map(|&t| Event::Jump(t))
        .chain(grid.iter().map(|&t| Event::Record(t)))
        .collect();
    // Jumps first at ties: the posterior is cadlag, a sample at the jump
    // time sees the post-jump state.
    events.sort_by(|a, b| {
        time_of(a)
            .partial_cmp(&time_of(b))
            .unwrap()
            .then_with(|| match (a, b) {
                (Event::Jump(_), Event::Record(_)) => std::cmp::Ordering::Less,
                (Event::Record(_), Event::Jump(_)) => std::cmp::Ordering::Greater,
                _ => std::cmp::Ordering::Equal,
            })
    });

    let mut state = FilterState {
        time: 0.0,
        count: 0,
        xhat: model.initial_law().to_vec(),
    };
    let mut output = Vec::new();
    for event in events {
        let target = time_of(&event);
        advance_to(model, &mut state, target)?;
        match event {
            Event::Jump(_) => {
                state.xhat = jump_update(&state.xhat, model.rates())?;
                state.count += 1;
                output.push(state.clone());
            }
            Event::Record(_) => output.push(state.clone()),
        }
    }
    Ok(output)
}

fn advance_to(model: &Model, state: &mut FilterState, target: f64) -> Result<()> {
    let gap = target - state.time;
    if gap <= 0.0 {
        return Ok(());
    }
    let step = DEFAULT_MAX_STEP.min(gap / GAP_SUBSTEPS);
    let mut remaining = gap;
    while remaining > 0.0 {
        let dt = step.min(remaining);
        *state = flow_between_jumps(state, model, dt)?;
        remaining -= dt;
    }
    state.time = target;
    Ok(())
}

// ---------------------------------------------------------------------------
// Filtered predictions
// ---------------------------------------------------------------------------

/// Predicts the joint law `elapsed` ahead by propagating
/// `zetahat = nu (x) xhat` through the joint generator exponential
/// (binomial) or the truncated level system (Poisson).
pub fn predict_joint_filtered(
    model: &Model,
    state: &FilterState,
    elapsed: f64,
) -> Result<FilteredPrediction> {
    if !(elapsed.is_finite() && elapsed >= 0.0) {
        return Err(Error::Validation("elapsed time must be finite and >= 0".into()));
    }
    match model {
        Model::Binomial(m) => {
            if state.count > m.obligors() {
                return Err(Error::Validation(format!(
                    "filter count {} exceeds obligor count {}",
                    state.count,
                    m.obligors()
                )));
            }
            let (n, d) = (m.obligors(), m.dim());
            let zeta = embed_block(n, d, state.count, &state.xhat);
            let big = mat_exp(&binomial_model::big_generator(m), elapsed)?;
            let law = JointDistribution::new(n, d, big.matvec(&zeta))?;
            Ok(FilteredPrediction::Binomial(law))
        }
        Model::Poisson(m) => {
            let window = poisson_model::truncation_level(m, elapsed)?;
            let law = poisson_model::conditional_counts_from_vector(
                m,
                elapsed,
                state.count,
                &state.xhat,
                window,
            )?;
            Ok(FilteredPrediction::Poisson(law))
        }
    }
}

/// Conditional characteristic function of `N_{s+elapsed}` given the
/// counting history, evaluated at the filter state.
pub fn predict_cf_filtered(
    model: &Model,
    state: &FilterState,
    elapsed: f64,
    u: f64,
) -> Result<Complex64> {
    if !(elapsed.is_finite() && elapsed >= 0.0) {
        return Err(Error::Validation("elapsed time must be finite and >= 0".into()));
    }
    match model {
        Model::Binomial(m) => {
            let (scalar, _) = binomial_model::conditional_char_from_vector(
                m,
                elapsed,
                state.count,
                &state.xhat,
                u,
            )?;
            Ok(scalar)
        }
        Model::Poisson(m) => {
            let e = mat_exp_complex(&poisson_model::modulated_generator(m, u), elapsed)?;
            let x: Vec<Complex64> = state
                .xhat
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            let vec = e.matvec(&x);
            let phase = u * state.count as f64;
            Ok(vec.into_iter().sum::<Complex64>() * Complex64::new(phase.cos(), phase.sin()))
        }
    }
}

/// Filtered single-obligor default probability:
/// `1 - 1' exp(Q_lambda elapsed) xhat (1 - Y_s)`, which is 1 once the
/// default has been observed.
pub fn predict_default_filtered(model: &Model, state: &FilterState, elapsed: f64) -> Result<f64> {
    let Model::Binomial(m) = model else {
        return Err(Error::Validation(
            "filtered default probability needs the single-obligor model".into(),
        ));
    };
    if m.obligors() != 1 {
        return Err(Error::Validation(format!(
            "filtered default probability needs n = 1, got n = {}",
            m.obligors()
        )));
    }
    if state.count >= 1 {
        return Ok(1.0);
    }
    let ql = crate::chain::subgenerator(m.generator(), m.rates(), 1);
    let surv: f64 = mat_exp(&ql, elapsed)?.matvec(&state.xhat).iter().sum();
    Ok((1.0 - surv).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binomial_model::{JointState, ObligorModel};
    use crate::chain::validate_generator;
    use crate::linalg::{mat_exp_rk4, Matrix};
    use crate::montecarlo;
    use crate::poisson_model::PoissonModel;
    use crate::rng::child_seed;

    fn canonical_binomial(n: usize, x0: Vec<f64>) -> Model {
        let q = validate_generator(
            Matrix::from_rows(&[vec![-1.0, 2.0], vec![1.0, -2.0]]).unwrap(),
        )
        .unwrap();
        let lambda = RateVector::new(vec![1.0, 3.0]).unwrap();
        Model::Binomial(ObligorModel::new(n, q, lambda, x0).unwrap())
    }

    fn canonical_poisson() -> Model {
        let q = validate_generator(
            Matrix::from_rows(&[vec![-1.0, 2.0], vec![1.0, -2.0]]).unwrap(),
        )
        .unwrap();
        let lambda = RateVector::new(vec![1.0, 3.0]).unwrap();
        Model::Poisson(PoissonModel::new(q, lambda, vec![1.0, 0.0], 1e-12).unwrap())
    }

    #[test]
    fn jump_update_formula() {
        let lambda = RateVector::new(vec![1.0, 3.0]).unwrap();
        let updated = jump_update(&[0.5, 0.5], &lambda).unwrap();
        assert_eq!(updated, vec![0.25, 0.75]);

        // Equal rates carry no information.
        let flat = RateVector::new(vec![2.0, 2.0]).unwrap();
        let same = jump_update(&[0.3, 0.7], &flat).unwrap();
        assert!((same[0] - 0.3).abs() < 1e-15 && (same[1] - 0.7).abs() < 1e-15);

        // A point mass is a fixed point.
        let point = jump_update(&[0.0, 1.0], &lambda).unwrap();
        assert_eq!(point, vec![0.0, 1.0]);
    }

    #[test]
    fn jump_update_is_scale_invariant() {
        let lambda = RateVector::new(vec![0.4, 1.7, 0.9]).unwrap();
        let scaled = lambda.scaled(13.0).unwrap();
        let x = [0.2, 0.5, 0.3];
        let a = jump_update(&x, &lambda).unwrap();
        let b = jump_update(&x, &scaled).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn jump_update_degenerate_intensity_errors() {
        let lambda = RateVector::new(vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            jump_update(&[1.0, 0.0], &lambda),
            Err(Error::DegenerateObservation(_))
        ));
    }

    #[test]
    fn flow_in_fully_defaulted_regime_is_linear() {
        let model = canonical_binomial(2, vec![1.0, 0.0]);
        let state = FilterState::new(0.0, 2, vec![0.4, 0.6]).unwrap();
        let next = flow_between_jumps(&state, &model, 0.3).unwrap();
        let expected = mat_exp(model.generator().matrix(), 0.3)
            .unwrap()
            .matvec(&[0.4, 0.6]);
        for j in 0..2 {
            assert!((next.xhat[j] - expected[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn flow_preserves_uninformative_fixed_point() {
        // With equal rates the stationary law is a fixed point of the flow.
        let q = validate_generator(
            Matrix::from_rows(&[vec![-1.0, 2.0], vec![1.0, -2.0]]).unwrap(),
        )
        .unwrap();
        let lambda = RateVector::new(vec![2.0, 2.0]).unwrap();
        let model =
            Model::Binomial(ObligorModel::new(2, q, lambda, vec![0.5, 0.5]).unwrap());
        let pi = vec![2.0 / 3.0, 1.0 / 3.0];
        let state = FilterState::new(0.0, 0, pi.clone()).unwrap();
        let next = flow_between_jumps(&state, &model, 0.5).unwrap();
        for j in 0..2 {
            assert!((next.xhat[j] - pi[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn flow_richardson_convergence() {
        let model = canonical_binomial(3, vec![1.0, 0.0]);
        let state = FilterState::new(0.0, 1, vec![0.35, 0.65]).unwrap();
        let deviation = |dt: f64| -> f64 {
            let one = flow_between_jumps(&state, &model, dt).unwrap();
            let half = flow_between_jumps(&state, &model, dt / 2.0).unwrap();
            let two = flow_between_jumps(&half, &model, dt / 2.0).unwrap();
            one.xhat
                .iter()
                .zip(&two.xhat)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let d1 = deviation(0.2);
        let d2 = deviation(0.1);
        assert!(
            d1 / d2 >= 4.0,
            "halving the step should shrink the deviation at least 4x: {d1} vs {d2}"
        );
    }

    #[test]
    fn filter_without_jumps_tilts_toward_slow_state() {
        // Observing no defaults favors the low-intensity state 0.
        let model = canonical_binomial(1, vec![0.5, 0.5]);
        let obs = ObservationRecord::new(
            vec![],
            4.0,
            ObservationTag::Binomial { n: 1 },
        )
        .unwrap();
        let grid: Vec<f64> = (1..=16).map(|k| 0.25 * k as f64).collect();
        let traj = run_filter(&model, &obs, &grid).unwrap();
        let mut prev = 0.5;
        for s in &traj {
            assert!(s.xhat[0] > prev, "xhat[0] should increase, got {:?}", s.xhat);
            prev = s.xhat[0];
        }
    }

    #[test]
    fn scalar_chain_filter_is_constant() {
        let q = validate_generator(Matrix::zeros(1, 1)).unwrap();
        let lambda = RateVector::new(vec![2.0]).unwrap();
        let model =
            Model::Binomial(ObligorModel::new(2, q, lambda, vec![1.0]).unwrap());
        let obs = ObservationRecord::new(
            vec![0.4, 1.1],
            2.0,
            ObservationTag::Binomial { n: 2 },
        )
        .unwrap();
        let traj = run_filter(&model, &obs, &[0.5, 1.0, 1.5, 2.0]).unwrap();
        for s in traj {
            assert_eq!(s.xhat, vec![1.0]);
        }
    }

    #[test]
    fn filter_counts_track_observations() {
        let model = canonical_poisson();
        let obs =
            ObservationRecord::new(vec![0.3, 0.6, 1.5], 2.0, ObservationTag::Poisson).unwrap();
        let traj = run_filter(&model, &obs, &[0.0, 1.0, 2.0]).unwrap();
        let at = |t: f64| traj.iter().filter(|s| s.time == t).last().unwrap().clone();
        assert_eq!(at(0.0).count, 0);
        assert_eq!(at(1.0).count, 2);
        assert_eq!(at(2.0).count, 3);
        for s in &traj {
            let total: f64 = s.xhat.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_average_tracks_true_state_better_than_stationary() {
        // Simulate, filter on the jump times only, and compare the average
        // posterior mass on the realized state with the stationary mass.
        let model = canonical_binomial(3, vec![0.5, 0.5]);
        let horizon = 2.0;
        let reps = 10_000u64;
        let mut posterior_mass = 0.0;
        let mut stationary_mass = 0.0;
        let pi = [2.0 / 3.0, 1.0 / 3.0];
        for r in 0..reps {
            let path = montecarlo::simulate_joint(&model, horizon, child_seed(606, r)).unwrap();
            let obs = ObservationRecord::new(
                path.count_jumps.clone(),
                horizon,
                ObservationTag::Binomial { n: 3 },
            )
            .unwrap();
            let traj = run_filter(&model, &obs, &[horizon]).unwrap();
            let last = traj.last().unwrap();
            let true_state = path.chain.state_at(horizon);
            posterior_mass += last.xhat[true_state];
            stationary_mass += pi[true_state];
        }
        posterior_mass /= reps as f64;
        stationary_mass /= reps as f64;
        assert!(
            posterior_mass > stationary_mass,
            "filter should beat the stationary guess: {posterior_mass} vs {stationary_mass}"
        );
    }

    #[test]
    fn prediction_at_zero_elapsed_is_embedded_posterior() {
        let model = canonical_binomial(2, vec![1.0, 0.0]);
        let state = FilterState::new(1.0, 1, vec![0.3, 0.7]).unwrap();
        let FilteredPrediction::Binomial(law) =
            predict_joint_filtered(&model, &state, 0.0).unwrap()
        else {
            panic!("expected binomial prediction")
        };
        assert!((law.get(1, 0) - 0.3).abs() < 1e-15);
        assert!((law.get(1, 1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn degenerate_posterior_matches_fully_observed_conditional() {
        let model = canonical_binomial(3, vec![1.0, 0.0]);
        let Model::Binomial(m) = &model else { unreachable!() };
        let state = FilterState::new(0.5, 1, vec![0.0, 1.0]).unwrap();
        let FilteredPrediction::Binomial(filtered) =
            predict_joint_filtered(&model, &state, 0.8).unwrap()
        else {
            panic!()
        };
        let observed = binomial_model::conditional_joint(
            m,
            0.8,
            JointState { count: 1, chain_state: 1 },
        )
        .unwrap();
        for i in 0..filtered.entries().len() {
            assert!((filtered.entries()[i] - observed.entries()[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn predicted_cf_edges_and_inversion() {
        let model = canonical_binomial(3, vec![1.0, 0.0]);
        let state = FilterState::new(0.6, 1, vec![0.45, 0.55]).unwrap();
        // u = 0 gives 1.
        let one = predict_cf_filtered(&model, &state, 0.9, 0.0).unwrap();
        assert!((one - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // elapsed = 0 gives e^{iu count}.
        let u = 0.8;
        let phase = predict_cf_filtered(&model, &state, 0.0, u).unwrap();
        assert!((phase - Complex64::new(u.cos(), u.sin())).norm() < 1e-12);
        // Fourier inversion recovers the predicted count marginals.
        let grid = 16usize;
        let cf: Vec<Complex64> = (0..grid)
            .map(|k| {
                let u = 2.0 * std::f64::consts::PI * k as f64 / grid as f64;
                predict_cf_filtered(&model, &state, 0.9, u).unwrap()
            })
            .collect();
        let inverted = crate::fourier::invert_to_masses(&cf);
        let predicted = predict_joint_filtered(&model, &state, 0.9)
            .unwrap()
            .count_masses();
        for k in 0..=3usize {
            assert!(
                (inverted[k] - predicted[k]).abs() < 1e-8,
                "k={k}: {} vs {}",
                inverted[k],
                predicted[k]
            );
        }
    }

    #[test]
    fn poisson_predicted_cf_matches_window_masses() {
        let model = canonical_poisson();
        let state = FilterState::new(0.5, 2, vec![0.6, 0.4]).unwrap();
        let grid = 64usize;
        let cf: Vec<Complex64> = (0..grid)
            .map(|k| {
                let u = 2.0 * std::f64::consts::PI * k as f64 / grid as f64;
                predict_cf_filtered(&model, &state, 1.0, u).unwrap()
            })
            .collect();
        let inverted = crate::fourier::invert_to_masses(&cf);
        let FilteredPrediction::Poisson(law) =
            predict_joint_filtered(&model, &state, 1.0).unwrap()
        else {
            panic!()
        };
        let masses = law.count_masses();
        for (r, &mass) in masses.iter().enumerate() {
            let absolute = law.start_count + r;
            if absolute < grid {
                assert!(
                    (inverted[absolute] - mass).abs() < 1e-8,
                    "count {absolute}"
                );
            }
        }
    }

    #[test]
    fn filtered_default_probability() {
        let model = canonical_binomial(1, vec![1.0, 0.0]);
        // Already defaulted: probability one.
        let defaulted = FilterState::new(1.0, 1, vec![0.5, 0.5]).unwrap();
        assert_eq!(predict_default_filtered(&model, &defaulted, 2.0).unwrap(), 1.0);
        // At time zero with the prior posterior this is the unconditional
        // default probability.
        let fresh = FilterState::new(0.0, 0, vec![1.0, 0.0]).unwrap();
        let Model::Binomial(m) = &model else { unreachable!() };
        let direct = binomial_model::default_prob_single(m, 1.4).unwrap();
        let filtered = predict_default_filtered(&model, &fresh, 1.4).unwrap();
        assert!((direct - filtered).abs() < 1e-14);
        // Mixed posterior against the RK4 oracle.
        let state = FilterState::new(0.0, 0, vec![0.25, 0.75]).unwrap();
        let p = predict_default_filtered(&model, &state, 1.0).unwrap();
        let ql = crate::chain::subgenerator(m.generator(), m.rates(), 1);
        let surv: f64 = mat_exp_rk4(&ql, 1.0, 20_000)
            .unwrap()
            .matvec(&[0.25, 0.75])
            .iter()
            .sum();
        assert!((p - (1.0 - surv)).abs() < 1e-8);
    }

    #[test]
    fn tower_property_light() {
        // Averaging filtered predictions over simulated observation records
        // reproduces the unconditional law.
        let model = canonical_binomial(2, vec![1.0, 0.0]);
        let Model::Binomial(m) = &model else { unreachable!() };
        let (s, t) = (0.6, 1.2);
        let reps = 2000u64;
        let mut avg = vec![0.0; 3];
        let mut sq = vec![0.0; 3];
        for r in 0..reps {
            let path = montecarlo::simulate_joint(&model, s, child_seed(707, r)).unwrap();
            let obs = ObservationRecord::new(
                path.count_jumps.clone(),
                s,
                ObservationTag::Binomial { n: 2 },
            )
            .unwrap();
            let state = run_filter(&model, &obs, &[s]).unwrap().pop().unwrap();
            let masses = predict_joint_filtered(&model, &state, t - s)
                .unwrap()
                .count_masses();
            for k in 0..3 {
                avg[k] += masses[k];
                sq[k] += masses[k] * masses[k];
            }
        }
        let unconditional = binomial_model::transient_marginals(m, t)
            .unwrap()
            .count_marginals();
        for k in 0..3 {
            let mean = avg[k] / reps as f64;
            let var = (sq[k] / reps as f64 - mean * mean).max(0.0);
            let se = (var / reps as f64).sqrt().max(1e-12);
            let z = (mean - unconditional.get(k)) / se;
            assert!(z.abs() < 4.5, "k={k} z={z}");
        }
    }

    #[test]
    fn observation_record_validation_and_csv() {
        assert!(ObservationRecord::new(
            vec![0.5, 0.4],
            1.0,
            ObservationTag::Poisson
        )
        .is_err());
        assert!(ObservationRecord::new(
            vec![0.1, 0.2, 0.3],
            1.0,
            ObservationTag::Binomial { n: 2 }
        )
        .is_err());

        let rec =
            ObservationRecord::new(vec![0.25, 0.75], 2.0, ObservationTag::Poisson).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "jump_time\n0.25\n0.75\n");
        let back = ObservationRecord::from_csv_reader(
            text.as_bytes(),
            2.0,
            ObservationTag::Poisson,
        )
        .unwrap();
        assert_eq!(back.jump_times(), rec.jump_times());
    }
}
