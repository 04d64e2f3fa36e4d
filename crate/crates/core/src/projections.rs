//! Metric projections onto hyperslabs and weighted l1 balls.
//!
//! Both projections are exact and closed-form up to a sort. All functions are
//! pure and may be called from any number of threads.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, dot, norm_sq};
#[cfg(test)]
use crate::linalg::dist;

/// Relative tolerance of the membership test run before a ball projection.
pub const BALL_MEMBERSHIP_RTOL: f64 = 1e-12;

/// The set `{u : |u·x - y| <= eps}` built from one measurement pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperslab {
    x: Vec<f64>,
    y: f64,
    eps: f64,
    #[serde(skip)]
    x_norm_sq: f64,
}

impl Hyperslab {
    pub fn new(x: Vec<f64>, y: f64, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::invalid("eps", format!("must be finite and >= 0, got {eps}")));
        }
        if !all_finite(&x) || !y.is_finite() {
            return Err(Error::NonFinite("hyperslab data"));
        }
        let x_norm_sq = norm_sq(&x);
        Ok(Self { x, y, eps, x_norm_sq })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x_norm_sq(&self) -> f64 {
        self.x_norm_sq
    }

    /// A slab with a zero measurement vector is either everything or empty;
    /// the projection formula is undefined for it.
    pub fn is_degenerate(&self) -> bool {
        self.x_norm_sq == 0.0
    }

    fn check(&self, h: &[f64]) -> Result<()> {
        check_dim(self.x.len(), h.len())?;
        if self.is_degenerate() {
            return Err(Error::ZeroInput);
        }
        Ok(())
    }

    /// Signed correction coefficient `c` such that `P(h) = h + c x`.
    #[inline]
    fn correction(&self, h: &[f64]) -> f64 {
        let r = dot(h, &self.x);
        if self.y - self.eps > r {
            (self.y - self.eps - r) / self.x_norm_sq
        } else if self.y + self.eps < r {
            (self.y + self.eps - r) / self.x_norm_sq
        } else {
            0.0
        }
    }

    pub fn contains(&self, h: &[f64], tol: f64) -> bool {
        (dot(h, &self.x) - self.y).abs() <= self.eps + tol
    }
}

/// `B = {u : sum_i w_i |u_i| <= delta}` with strictly positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedL1Ball {
    w: Vec<f64>,
    delta: f64,
}

impl WeightedL1Ball {
    pub fn new(w: Vec<f64>, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid("delta", format!("must be finite and > 0, got {delta}")));
        }
        if let Some(bad) = w.iter().find(|&&wi| !(wi > 0.0) || !wi.is_finite()) {
            return Err(Error::invalid("w", format!("weights must be finite and > 0, got {bad}")));
        }
        Ok(Self { w, delta })
    }

    /// The classical l1 ball of radius `delta`.
    pub fn unweighted(dim: usize, delta: f64) -> Result<Self> {
        Self::new(vec![1.0; dim], delta)
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.w
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Weighted l1 norm `sum_i w_i |h_i|`.
    pub fn weighted_norm(&self, h: &[f64]) -> f64 {
        self.w.iter().zip(h).map(|(w, v)| w * v.abs()).sum()
    }

    pub fn contains(&self, h: &[f64], tol: f64) -> bool {
        ball_contains(h, self, tol)
    }
}

/// An estimate `h_n`; entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateVector(Vec<f64>);

impl EstimateVector {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if !all_finite(&h) {
            return Err(Error::NonFinite("estimate"));
        }
        Ok(Self(h))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for EstimateVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Projects `h` onto the hyperslab.
pub fn project_hyperslab(h: &[f64], slab: &Hyperslab) -> Result<Vec<f64>> {
    slab.check(h)?;
    let c = slab.correction(h);
    let mut out = h.to_vec();
    if c != 0.0 {
        crate::linalg::axpy(c, &slab.x, &mut out);
    }
    Ok(out)
}

/// `d(h, S) = max{0, |h·x - y| - eps} / ||x||`.
pub fn distance_to_hyperslab(h: &[f64], slab: &Hyperslab) -> Result<f64> {
    slab.check(h)?;
    let excess = (dot(h, &slab.x) - slab.y).abs() - slab.eps;
    Ok(excess.max(0.0) / slab.x_norm_sq.sqrt())
}

/// Projection of a nonnegative point onto the halfspace `{u : u·w <= delta}`:
/// `x - max{0, x·w - delta} / ||w||^2 * w`.
///
/// The result may have negative components; the ball projection drops those
/// coordinates and repeats on the remaining ones.
pub fn project_halfspace_nonneg(x: &[f64], ball: &WeightedL1Ball) -> Result<Vec<f64>> {
    check_dim(ball.dim(), x.len())?;
    if x.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("x", "halfspace step expects a nonnegative point"));
    }
    let excess = (dot(x, &ball.w) - ball.delta).max(0.0);
    let mut out = x.to_vec();
    if excess > 0.0 {
        crate::linalg::axpy(-excess / norm_sq(&ball.w), &ball.w, &mut out);
    }
    Ok(out)
}

/// `sum_i w_i |h_i| <= delta + tol`.
///
/// # Panics
///
/// If `h` and the ball have different dimensions.
pub fn ball_contains(h: &[f64], ball: &WeightedL1Ball, tol: f64) -> bool {
    assert_eq!(h.len(), ball.dim(), "ball_contains: dimension mismatch");
    ball.weighted_norm(h) <= ball.delta + tol
}

/// Result of a weighted l1-ball projection together with the bookkeeping of
/// the active-set search.
#[derive(Debug, Clone, PartialEq)]
pub struct BallProjection {
    pub point: Vec<f64>,
    /// Coordinates sorted by `|h_i| / w_i`, non-ascending. Empty when `h` was
    /// already inside the ball.
    pub order: Vec<usize>,
    /// Number of leading entries of `order` that stay nonzero.
    pub active: usize,
    /// Number of active-set passes.
    pub passes: usize,
}

/// Exact projection onto `B_l1[w, delta]`.
pub fn project_weighted_l1_ball(h: &[f64], ball: &WeightedL1Ball) -> Result<Vec<f64>> {
    project_weighted_l1_ball_detailed(h, ball).map(|p| p.point)
}

/// Exact projection onto `B_l1[w, delta]`, also returning the sort order and
/// active-set size.
///
/// The point is mapped to the nonnegative orthant, coordinates are sorted by
/// `|h_i| / w_i`, and the active set is shrunk until every remaining
/// coordinate survives the halfspace step. Because the ratios are sorted the
/// surviving coordinates always form a prefix, so each pass is a binary
/// search over precomputed prefix sums and the whole projection costs
/// `O(L log L)`.
pub fn project_weighted_l1_ball_detailed(
    h: &[f64],
    ball: &WeightedL1Ball,
) -> Result<BallProjection> {
    check_dim(ball.dim(), h.len())?;
    if !all_finite(h) {
        return Err(Error::NonFinite("point to project"));
    }
    let delta = ball.delta;
    let w = &ball.w;
    if ball.weighted_norm(h) <= delta * (1.0 + BALL_MEMBERSHIP_RTOL) {
        return Ok(BallProjection {
            point: h.to_vec(),
            order: Vec::new(),
            active: h.len(),
            passes: 0,
        });
    }

    let dim = h.len();
    let ratio: Vec<f64> = h.iter().zip(w).map(|(v, wi)| v.abs() / wi).collect();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_unstable_by(|&a, &b| ratio[b].total_cmp(&ratio[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| ratio[i]).collect();

    // prefix[k] = sums over the first k sorted coordinates
    let mut wabs_prefix = Vec::with_capacity(dim + 1);
    let mut wsq_prefix = Vec::with_capacity(dim + 1);
    wabs_prefix.push(0.0);
    wsq_prefix.push(0.0);
    let (mut sa, mut sq) = (0.0, 0.0);
    for &i in &order {
        sa += w[i] * h[i].abs();
        sq += w[i] * w[i];
        wabs_prefix.push(sa);
        wsq_prefix.push(sq);
    }

    let mut active = dim;
    let mut passes = 0;
    let shift = loop {
        passes += 1;
        let t = (wabs_prefix[active] - delta) / wsq_prefix[active];
        let survivors = sorted[..active].partition_point(|&r| r > t);
        if survivors == 0 {
            return Err(Error::NoActiveCoordinate { delta });
        }
        if survivors == active {
            break t;
        }
        active = survivors;
    };

    // Absorb the rounding of the prefix sums so the result sits on the sphere.
    let residual: f64 = order[..active]
        .iter()
        .map(|&i| w[i] * (h[i].abs() - shift * w[i]))
        .sum::<f64>()
        - delta;
    let shift = shift + residual / wsq_prefix[active];

    let mut point = vec![0.0; dim];
    for &i in &order[..active] {
        let p = (h[i].abs() - shift * w[i]).max(0.0);
        point[i] = p.copysign(h[i]);
    }
    Ok(BallProjection {
        point,
        order,
        active,
        passes,
    })
}
