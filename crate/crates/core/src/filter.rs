//! The adaptive projection filter (APWL1, and APL1 with unit weights).
//!
//! At time `n` the current estimate is projected onto the hyperslabs of the
//! last `q` measurements, the projections are averaged, the step towards the
//! average is extrapolated by `mu_n = kappa * M_n`, and the result is
//! projected onto the weighted l1 ball `B_l1[w_n, delta]` with
//! `w_{n,i} = 1 / (|h_{n,i}| + eps'_n)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dist, dist_sq, norm_sq};
use crate::projections::{project_weighted_l1_ball, EstimateVector, Hyperslab, WeightedL1Ball};

/// Below this ratio of `||sum w P_j(h) - h||^2` to `sum w ||P_j(h) - h||^2`
/// the combination is treated as equal to `h` and `M_n = 1`.
pub const EXTRAPOLATION_TOL: f64 = 1e-12;

/// Step size rule: `mu_n = kappa * M_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum MuRule {
    FixedFraction { kappa: f64 },
}

impl MuRule {
    pub fn step_size(&self, extrapolation: f64) -> f64 {
        match *self {
            MuRule::FixedFraction { kappa } => kappa * extrapolation,
        }
    }
}

impl Default for MuRule {
    fn default() -> Self {
        MuRule::FixedFraction { kappa: 0.5 }
    }
}

/// Combination weights of the window projections.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaRule {
    /// `1 / |J_n|` for every slab in the window.
    #[default]
    Uniform,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// APWL1: reweighted ball.
    #[default]
    Weighted,
    /// APL1: `w_n = 1`.
    Unweighted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsPrimeSchedule {
    /// `eps' + 1 / (n + 1)`
    #[default]
    Decaying,
    /// `eps' + 1 / (n - n_reset + 1)`, restarted whenever a change is detected.
    DecayingWithReset,
}

/// Thresholded-median detector on the step norms `||h_{n+1} - h_n||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChangeDetectorParams {
    /// Fires when the latest step norm exceeds `factor` times the median.
    pub factor: f64,
    /// Number of previous step norms in the median, also the cooldown length.
    pub warmup: usize,
}

impl Default for ChangeDetectorParams {
    fn default() -> Self {
        Self {
            factor: 5.0,
            warmup: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub dim: usize,
    /// Window size: number of most recent hyperslabs used per step.
    pub q: usize,
    /// Hyperslab half-width.
    pub eps: f64,
    /// Ball radius.
    pub delta: f64,
    pub mu_rule: MuRule,
    pub omega_rule: OmegaRule,
    pub weighting: Weighting,
    /// Floor `eps'` of the reweighting offset schedule.
    pub eps_prime_base: f64,
    pub eps_prime_schedule: EpsPrimeSchedule,
    pub change_detector: ChangeDetectorParams,
}

impl FilterConfig {
    /// Defaults: `q = 1`, `eps = 0`, `delta = 1`, `kappa = 1/2`, weighted
    /// ball, `eps' = 0.01` with the decaying schedule.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            q: 1,
            eps: 0.0,
            delta: 1.0,
            mu_rule: MuRule::default(),
            omega_rule: OmegaRule::default(),
            weighting: Weighting::default(),
            eps_prime_base: 0.01,
            eps_prime_schedule: EpsPrimeSchedule::default(),
            change_detector: ChangeDetectorParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if self.q == 0 {
            return Err(Error::invalid("q", "must be >= 1"));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::invalid("eps", format!("must be finite and >= 0, got {}", self.eps)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid("delta", format!("must be finite and > 0, got {}", self.delta)));
        }
        let MuRule::FixedFraction { kappa } = self.mu_rule;
        if !(kappa > 0.0 && kappa < 2.0) {
            return Err(Error::invalid("kappa", format!("must lie in (0, 2), got {kappa}")));
        }
        if !(self.eps_prime_base > 0.0) || !self.eps_prime_base.is_finite() {
            return Err(Error::invalid(
                "eps_prime_base",
                format!("must be finite and > 0, got {}", self.eps_prime_base),
            ));
        }
        let cd = &self.change_detector;
        if !(cd.factor > 0.0) || cd.warmup == 0 {
            return Err(Error::invalid("change_detector", "factor must be > 0 and warmup >= 1"));
        }
        Ok(())
    }
}

/// `M_n`: ratio of the averaged squared projection distances to the squared
/// distance of the averaged projection, or 1 when the average equals `h`.
pub fn compute_extrapolation_bound(h: &[f64], projections: &[Vec<f64>], omegas: &[f64]) -> Result<f64> {
    if projections.is_empty() {
        return Err(Error::Empty("projections"));
    }
    check_dim(projections.len(), omegas.len())?;
    let total: f64 = omegas.iter().sum();
    if (total - 1.0).abs() > 1e-12 || omegas.iter().any(|&o| !(o > 0.0 && o <= 1.0)) {
        return Err(Error::invalid("omegas", "must lie in (0, 1] and sum to 1"));
    }
    let mut combo = vec![0.0; h.len()];
    let mut numerator = 0.0;
    for (p, &o) in projections.iter().zip(omegas) {
        check_dim(h.len(), p.len())?;
        numerator += o * dist_sq(p, h);
        axpy(o, p, &mut combo);
    }
    let denominator = dist_sq(&combo, h);
    Ok(extrapolation_ratio(numerator, denominator))
}

#[inline]
fn extrapolation_ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator <= EXTRAPOLATION_TOL * numerator || denominator == 0.0 {
        1.0
    } else {
        numerator / denominator
    }
}

/// `w_i = 1 / (|h_i| + eps')`.
pub fn update_ball_weights(h: &[f64], eps_prime: f64) -> Result<Vec<f64>> {
    if !(eps_prime > 0.0) || !eps_prime.is_finite() {
        return Err(Error::invalid("eps_prime", format!("must be finite and > 0, got {eps_prime}")));
    }
    Ok(h.iter().map(|v| 1.0 / (v.abs() + eps_prime)).collect())
}

/// `eps'_n` for time `n`. With resets, `reset_epoch` is the time of the most
/// recent detected change (0 when there was none).
pub fn eps_prime_schedule(n: usize, base: f64, mode: EpsPrimeSchedule, reset_epoch: Option<usize>) -> f64 {
    let origin = match mode {
        EpsPrimeSchedule::Decaying => 0,
        EpsPrimeSchedule::DecayingWithReset => reset_epoch.unwrap_or(0).min(n),
    };
    base + 1.0 / ((n - origin) as f64 + 1.0)
}

/// True when the last entry of `history` exceeds `factor` times the median of
/// the `warmup` entries before it. Returns false while fewer than
/// `warmup + 1` norms are available and while `since_detection <= warmup`.
pub fn detect_change(history: &[f64], params: &ChangeDetectorParams, since_detection: Option<usize>) -> bool {
    let w = params.warmup;
    if history.len() < w + 1 {
        return false;
    }
    if since_detection.is_some_and(|s| s <= w) {
        return false;
    }
    let (latest, before) = history.split_last().expect("non-empty");
    let mut previous = before[before.len() - w..].to_vec();
    previous.sort_unstable_by(f64::total_cmp);
    let median = if w % 2 == 1 {
        previous[w / 2]
    } else {
        0.5 * (previous[w / 2 - 1] + previous[w / 2])
    };
    *latest > params.factor * median
}

/// Rolling step-norm history plus cooldown bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeDetector {
    params: ChangeDetectorParams,
    history: VecDeque<f64>,
    since_detection: Option<usize>,
}

impl ChangeDetector {
    pub fn new(params: ChangeDetectorParams) -> Self {
        Self {
            params,
            history: VecDeque::with_capacity(params.warmup + 1),
            since_detection: None,
        }
    }

    /// Records one step norm and reports whether it marks a change.
    pub fn observe(&mut self, step_norm: f64) -> bool {
        if self.history.len() == self.params.warmup + 1 {
            self.history.pop_front();
        }
        self.history.push_back(step_norm);
        if let Some(s) = self.since_detection.as_mut() {
            *s += 1;
        }
        let fired = detect_change(self.history.make_contiguous(), &self.params, self.since_detection);
        if fired {
            self.since_detection = Some(0);
        }
        fired
    }

    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().copied()
    }
}

/// Diagnostics of one filter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// `M_n`
    pub extrapolation: f64,
    /// `mu_n`
    pub mu: f64,
    /// `||h_{n+1} - h_n||`
    pub step_norm: f64,
    /// `eps'_n` used for the ball weights of this step.
    pub eps_prime: f64,
    pub change_detected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    config: FilterConfig,
    n: usize,
    h: EstimateVector,
    window: VecDeque<Hyperslab>,
    w: Vec<f64>,
    eps_prime: f64,
    reset_epoch: Option<usize>,
    detector: ChangeDetector,
}

impl FilterState {
    /// Starts the filter at `h0` (zero when `None`).
    pub fn init(config: &FilterConfig, h0: Option<&[f64]>) -> Result<Self> {
        config.validate()?;
        let h = match h0 {
            Some(h0) => {
                check_dim(config.dim, h0.len())?;
                EstimateVector::new(h0.to_vec())?
            }
            None => EstimateVector::zeros(config.dim),
        };
        let eps_prime = eps_prime_schedule(0, config.eps_prime_base, config.eps_prime_schedule, None);
        let w = match config.weighting {
            Weighting::Weighted => update_ball_weights(h.as_slice(), eps_prime)?,
            Weighting::Unweighted => vec![1.0; config.dim],
        };
        Ok(Self {
            config: config.clone(),
            n: 0,
            h,
            window: VecDeque::with_capacity(config.q),
            w,
            eps_prime,
            reset_epoch: None,
            detector: ChangeDetector::new(config.change_detector),
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    /// Number of accepted measurements.
    pub fn time(&self) -> usize {
        self.n
    }

    pub fn estimate(&self) -> &[f64] {
        self.h.as_slice()
    }

    /// Weights of the most recent ball (from `init` before the first step).
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// `eps'` that the next step will use.
    pub fn eps_prime(&self) -> f64 {
        self.eps_prime
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = &Hyperslab> {
        self.window.iter()
    }

    pub fn reset_epoch(&self) -> Option<usize> {
        self.reset_epoch
    }

    pub fn step_norm_history(&self) -> impl Iterator<Item = f64> + '_ {
        self.detector.history()
    }

    /// Functional form of [`FilterState::advance`]: returns the next state and
    /// leaves `self` untouched.
    pub fn step(&self, x: &[f64], y: f64) -> Result<FilterState> {
        let mut next = self.clone();
        next.advance(x, y)?;
        Ok(next)
    }

    /// Consumes the measurement `(x, y)` and moves to `h_{n+1}`.
    ///
    /// On error the state is left unchanged and `n` does not advance.
    pub fn advance(&mut self, x: &[f64], y: f64) -> Result<StepInfo> {
        let cfg = &self.config;
        check_dim(cfg.dim, x.len())?;
        let slab = Hyperslab::new(x.to_vec(), y, cfg.eps)?;
        if slab.is_degenerate() {
            return Err(Error::ZeroInput);
        }

        let h = self.h.as_slice();
        let dim = h.len();
        // The oldest slab leaves the window when it is full.
        let skip = usize::from(self.window.len() == cfg.q);
        let active = || self.window.iter().skip(skip).chain(std::iter::once(&slab));
        let window_len = self.window.len() - skip + 1;

        // P_j(h) - h = c_j x_j, so the averaged step and the numerator of M_n
        // need no storage for the projections themselves.
        let omega = match cfg.omega_rule {
            OmegaRule::Uniform => 1.0 / window_len as f64,
        };
        let mut direction = vec![0.0; dim];
        let mut numerator = 0.0;
        let mut moving = 0;
        for s in active() {
            let c = slab_correction(h, s);
            if c != 0.0 {
                numerator += omega * c * c * s.x_norm_sq();
                axpy(omega * c, s.x(), &mut direction);
                moving += 1;
            }
        }
        // a single moving slab gives exactly 1; skip the rounding
        let extrapolation = if moving <= 1 {
            1.0
        } else {
            extrapolation_ratio(numerator, norm_sq(&direction))
        };
        debug_assert!(extrapolation >= 1.0 - 1e-9, "M_n = {extrapolation}");
        let mu = cfg.mu_rule.step_size(extrapolation);

        let mut point = h.to_vec();
        axpy(mu, &direction, &mut point);

        let eps_prime = self.eps_prime;
        let w = match cfg.weighting {
            Weighting::Weighted => update_ball_weights(h, eps_prime)?,
            Weighting::Unweighted => self.w.clone(),
        };
        let ball = WeightedL1Ball::new(w, cfg.delta)?;
        let next = EstimateVector::new(project_weighted_l1_ball(&point, &ball)?)?;
        let step_norm = dist(next.as_slice(), h);

        // Commit.
        if skip == 1 {
            self.window.pop_front();
        }
        self.window.push_back(slab);
        let change_detected = match cfg.eps_prime_schedule {
            EpsPrimeSchedule::DecayingWithReset => self.detector.observe(step_norm),
            EpsPrimeSchedule::Decaying => {
                self.detector.observe_quiet(step_norm);
                false
            }
        };
        self.n += 1;
        if change_detected {
            self.reset_epoch = Some(self.n);
        }
        self.eps_prime = eps_prime_schedule(self.n, cfg.eps_prime_base, cfg.eps_prime_schedule, self.reset_epoch);
        self.h = next;
        self.w = ball.into_weights();

        Ok(StepInfo {
            extrapolation,
            mu,
            step_norm,
            eps_prime,
            change_detected,
        })
    }
}

impl ChangeDetector {
    /// Records a step norm without running the detection rule.
    fn observe_quiet(&mut self, step_norm: f64) {
        if self.history.len() == self.params.warmup + 1 {
            self.history.pop_front();
        }
        self.history.push_back(step_norm);
    }
}

/// Coefficient `c` with `P_S(h) = h + c x`.
#[inline]
fn slab_correction(h: &[f64], slab: &Hyperslab) -> f64 {
    let r = crate::linalg::dot(h, slab.x());
    let (y, eps) = (slab.y(), slab.eps());
    if y - eps > r {
        (y - eps - r) / slab.x_norm_sq()
    } else if y + eps < r {
        (y + eps - r) / slab.x_norm_sq()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projections::project_hyperslab;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn init_weights() {
        let cfg = FilterConfig {
            eps_prime_base: 0.1,
            ..FilterConfig::new(3)
        };
        let s = FilterState::init(&cfg, None).unwrap();
        // eps'_0 = 0.1 + 1/(0+1)
        for &w in s.weights() {
            assert!((w - 1.0 / 1.1).abs() < 1e-15);
        }
        assert_eq!(s.time(), 0);
        assert_eq!(s.window().len(), 0);

        let cfg = FilterConfig {
            weighting: Weighting::Unweighted,
            ..FilterConfig::new(3)
        };
        let s = FilterState::init(&cfg, Some(&[1.0, -2.0, 0.5])).unwrap();
        assert_eq!(s.weights(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn init_rejects_bad_config() {
        let base = FilterConfig::new(2);
        for bad in [
            FilterConfig { q: 0, ..base.clone() },
            FilterConfig { eps: -0.1, ..base.clone() },
            FilterConfig { delta: 0.0, ..base.clone() },
            FilterConfig { eps_prime_base: 0.0, ..base.clone() },
            FilterConfig { mu_rule: MuRule::FixedFraction { kappa: 2.0 }, ..base.clone() },
        ] {
            assert!(FilterState::init(&bad, None).is_err(), "{bad:?}");
        }
        assert!(FilterState::init(&base, Some(&[0.0])).is_err());
    }

    #[test]
    fn extrapolation_bound_examples() {
        let h = vec![0.0, 0.0];
        let m = compute_extrapolation_bound(&h, &[vec![1.0, 0.0]], &[1.0]).unwrap();
        assert_eq!(m, 1.0);
        let m = compute_extrapolation_bound(&h, &[h.clone(), h.clone()], &[0.5, 0.5]).unwrap();
        assert_eq!(m, 1.0);
        let m = compute_extrapolation_bound(&h, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.5, 0.5]).unwrap();
        assert!((m - 2.0).abs() < 1e-15);
        assert!(compute_extrapolation_bound(&h, &[], &[]).is_err());
        assert!(compute_extrapolation_bound(&h, std::slice::from_ref(&h), &[0.7]).is_err());
    }

    #[test]
    fn ball_weight_examples() {
        assert!(update_ball_weights(&[0.0, 0.0], 0.1).unwrap().iter().all(|&w| (w - 10.0).abs() < 1e-12));
        let w = update_ball_weights(&[1.0, -0.2, 0.0], 0.1).unwrap();
        assert!((w[0] - 1.0 / 1.1).abs() < 1e-15);
        assert!(w[0] <= w[1] && w[1] <= w[2]);
        assert!(update_ball_weights(&[1.0], 0.0).is_err());
        assert!(update_ball_weights(&[1.0], -1.0).is_err());
    }

    #[test]
    fn eps_prime_schedule_examples() {
        let d = EpsPrimeSchedule::Decaying;
        assert!((eps_prime_schedule(0, 0.01, d, None) - 1.01).abs() < 1e-15);
        assert!((eps_prime_schedule(1_000_000_000, 0.01, d, None) - 0.01).abs() < 1e-8);
        let r = EpsPrimeSchedule::DecayingWithReset;
        assert!((eps_prime_schedule(500, 0.01, r, Some(500)) - 1.01).abs() < 1e-15);
        assert!((eps_prime_schedule(509, 0.01, r, Some(500)) - 0.11).abs() < 1e-15);
        assert_eq!(eps_prime_schedule(7, 0.01, r, None), eps_prime_schedule(7, 0.01, d, None));
        // plain decay ignores resets
        assert_eq!(eps_prime_schedule(7, 0.01, d, Some(5)), eps_prime_schedule(7, 0.01, d, None));
    }

    #[test]
    fn change_detector_rule() {
        let p = ChangeDetectorParams::default();
        let flat = vec![1.0; 60];
        assert!(!detect_change(&flat, &p, None));
        assert!(!detect_change(&flat[..30], &p, None));

        let mut spiky = vec![1.0; 50];
        spiky.push(10.0);
        assert!(detect_change(&spiky, &p, None));
        assert!(!detect_change(&spiky, &p, Some(10)));
        assert!(detect_change(&spiky, &p, Some(51)));

        let mut det = ChangeDetector::new(p);
        for _ in 0..50 {
            assert!(!det.observe(1.0));
        }
        assert!(det.observe(10.0));
        // cooldown
        assert!(!det.observe(100.0));
        for _ in 0..60 {
            det.observe(1.0);
        }
        assert!(det.observe(10.0));
    }

    #[test]
    fn consistent_point_is_a_fixed_point() {
        let cfg = FilterConfig {
            q: 3,
            eps: 0.1,
            delta: 10.0,
            weighting: Weighting::Unweighted,
            ..FilterConfig::new(2)
        };
        let h0 = [0.5, -0.5];
        let mut s = FilterState::init(&cfg, Some(&h0)).unwrap();
        for x in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]] {
            let y = x[0] * h0[0] + x[1] * h0[1];
            let info = s.advance(&x, y).unwrap();
            assert_eq!(s.estimate(), &h0);
            assert_eq!(info.extrapolation, 1.0);
            assert_eq!(info.step_norm, 0.0);
        }
    }

    #[test]
    fn single_slab_unweighted_is_relaxed_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = FilterConfig {
            q: 1,
            eps: 0.05,
            delta: 1e6,
            weighting: Weighting::Unweighted,
            ..FilterConfig::new(6)
        };
        let mut s = FilterState::init(&cfg, None).unwrap();
        let mut h = vec![0.0; 6];
        for _ in 0..20 {
            let x = gaussian(&mut rng, 6);
            let y: f64 = rng.random_range(-2.0..2.0);
            let info = s.advance(&x, y).unwrap();
            assert_eq!(info.extrapolation, 1.0);
            let slab = Hyperslab::new(x, y, 0.05).unwrap();
            let p = project_hyperslab(&h, &slab).unwrap();
            for (hi, pi) in h.iter_mut().zip(&p) {
                *hi += 0.5 * (pi - *hi);
            }
            assert!(dist(&h, s.estimate()) < 1e-12);
        }
    }

    /// One weighted step written out directly from the recursion.
    fn reference_step(h: &[f64], slabs: &[Hyperslab], cfg: &FilterConfig, eps_prime: f64) -> (Vec<f64>, f64) {
        let projections: Vec<Vec<f64>> = slabs.iter().map(|s| project_hyperslab(h, s).unwrap()).collect();
        let omegas = vec![1.0 / slabs.len() as f64; slabs.len()];
        let m = compute_extrapolation_bound(h, &projections, &omegas).unwrap();
        let mut point = h.to_vec();
        for (p, o) in projections.iter().zip(&omegas) {
            for i in 0..h.len() {
                point[i] += 0.5 * m * o * (p[i] - h[i]);
            }
        }
        let w = update_ball_weights(h, eps_prime).unwrap();
        let ball = WeightedL1Ball::new(w, cfg.delta).unwrap();
        (project_weighted_l1_ball(&point, &ball).unwrap(), m)
    }

    #[test]
    fn step_matches_reference_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = FilterConfig {
            q: 4,
            eps: 0.1,
            delta: 3.0,
            ..FilterConfig::new(8)
        };
        let mut s = FilterState::init(&cfg, None).unwrap();
        let mut slabs = Vec::new();
        for n in 0..40 {
            let x = gaussian(&mut rng, 8);
            let y = rng.random_range(-3.0..3.0);
            slabs.push(Hyperslab::new(x.clone(), y, cfg.eps).unwrap());
            let lo = (n + 1usize).saturating_sub(cfg.q);
            let eps_prime = s.eps_prime();
            let (expected, m) = reference_step(s.estimate(), &slabs[lo..], &cfg, eps_prime);
            let info = s.advance(&x, y).unwrap();
            assert!((info.extrapolation - m).abs() <= 1e-9 * m, "{} vs {m}", info.extrapolation);
            assert!(dist(&expected, s.estimate()) < 1e-10);
            assert_eq!(s.window().len(), (n + 1).min(cfg.q));
            let ball = WeightedL1Ball::new(s.weights().to_vec(), cfg.delta).unwrap();
            assert!(ball.weighted_norm(s.estimate()) <= cfg.delta * (1.0 + 1e-12));
        }
    }

    #[test]
    fn unit_weights_match_apl1() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = FilterConfig {
            q: 3,
            eps: 0.02,
            delta: 2.0,
            weighting: Weighting::Unweighted,
            ..FilterConfig::new(5)
        };
        let mut s = FilterState::init(&cfg, None).unwrap();
        let mut slabs = Vec::new();
        let mut h = vec![0.0; 5];
        for n in 0..30 {
            let x = gaussian(&mut rng, 5);
            let y = rng.random_range(-1.0..1.0);
            slabs.push(Hyperslab::new(x.clone(), y, cfg.eps).unwrap());
            let lo = (n + 1usize).saturating_sub(cfg.q);
            let projections: Vec<Vec<f64>> =
                slabs[lo..].iter().map(|sl| project_hyperslab(&h, sl).unwrap()).collect();
            let k = projections.len() as f64;
            let omegas = vec![1.0 / k; projections.len()];
            let m = compute_extrapolation_bound(&h, &projections, &omegas).unwrap();
            let mut point = h.clone();
            for p in &projections {
                for i in 0..5 {
                    point[i] += 0.5 * m / k * (p[i] - h[i]);
                }
            }
            h = project_weighted_l1_ball(&point, &WeightedL1Ball::unweighted(5, 2.0).unwrap()).unwrap();
            s.advance(&x, y).unwrap();
            assert!(dist(&h, s.estimate()) < 1e-12);
        }
    }

    #[test]
    fn rejected_measurement_leaves_state_unchanged() {
        let cfg = FilterConfig { q: 2, ..FilterConfig::new(3) };
        let mut s = FilterState::init(&cfg, None).unwrap();
        s.advance(&[1.0, 0.0, 0.0], 1.0).unwrap();
        let before = s.clone();
        assert!(matches!(s.advance(&[0.0, 0.0, 0.0], 1.0), Err(Error::ZeroInput)));
        assert!(matches!(s.advance(&[1.0, 0.0], 1.0), Err(Error::DimensionMismatch { .. })));
        assert!(s.advance(&[1.0, f64::NAN, 0.0], 1.0).is_err());
        assert_eq!(s, before);
        assert_eq!(s.time(), 1);
    }

    #[test]
    fn step_does_not_mutate_input_state() {
        let cfg = FilterConfig { q: 2, ..FilterConfig::new(2) };
        let s0 = FilterState::init(&cfg, None).unwrap();
        let s1 = s0.step(&[1.0, 2.0], 3.0).unwrap();
        assert_eq!(s0.time(), 0);
        assert_eq!(s1.time(), 1);
        assert_ne!(s0.estimate(), s1.estimate());
    }

    #[test]
    fn window_holds_latest_q_slabs() {
        let cfg = FilterConfig { q: 3, ..FilterConfig::new(1) };
        let mut s = FilterState::init(&cfg, None).unwrap();
        for n in 0..7usize {
            s.advance(&[1.0], n as f64).unwrap();
            let ys: Vec<f64> = s.window().map(|sl| sl.y()).collect();
            let lo = (n + 1).saturating_sub(3);
            let expected: Vec<f64> = (lo..=n).map(|j| j as f64).collect();
            assert_eq!(ys, expected);
        }
    }

    #[test]
    fn reset_schedule_restarts_eps_prime() {
        let cfg = FilterConfig {
            q: 1,
            eps: 0.0,
            delta: 100.0,
            eps_prime_schedule: EpsPrimeSchedule::DecayingWithReset,
            change_detector: ChangeDetectorParams { factor: 5.0, warmup: 5 },
            ..FilterConfig::new(1)
        };
        let mut s = FilterState::init(&cfg, None).unwrap();
        // Geometric convergence towards 1, then a jump of the target to 50.
        for _ in 0..30 {
            s.advance(&[1.0], 1.0).unwrap();
        }
        assert_eq!(s.reset_epoch(), None);
        let info = s.advance(&[1.0], 50.0).unwrap();
        assert!(info.change_detected);
        assert_eq!(s.reset_epoch(), Some(31));
        assert!((s.eps_prime() - (cfg.eps_prime_base + 1.0)).abs() < 1e-15);
    }
}
