//! Weighted piecewise polynomial regression of a curve set and the dynamic
//! programming segmentation that drives it.
//!
//! Windows are half-open index intervals `(a, b]` on the shared grid, stored
//! as 0-based boundaries: segment `r` of a [`Segmentation`] covers columns
//! `xi_r .. xi_{r+1}` (exclusive upper bound in 0-based column terms).

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::PolyBasis;
use crate::dataset::CurveSet;
use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;
use crate::scalar::Scalar;

/// Relative size of the ridge added to normal matrices before solving.
const RIDGE: f64 = 1e-10;

/// Ordered transition points `0 = xi_0 < xi_1 < ... < xi_R = m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    boundaries: Vec<usize>,
}

impl Segmentation {
    pub fn new(boundaries: Vec<usize>, m: usize, min_len: usize) -> Result<Self> {
        if boundaries.len() < 2 || boundaries[0] != 0 || *boundaries.last().unwrap() != m {
            return Err(Error::InvalidData(format!(
                "boundaries must run from 0 to {m}"
            )));
        }
        for w in boundaries.windows(2) {
            if w[1] <= w[0] || w[1] - w[0] < min_len {
                return Err(Error::InvalidData(format!(
                    "segment ({}, {}] shorter than the minimum length {min_len}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { boundaries })
    }

    /// Evenly spread boundaries honoring the minimum length.
    pub fn uniform(m: usize, r: usize, min_len: usize) -> Result<Self> {
        check_feasible(m, r, min_len)?;
        let mut boundaries = Vec::with_capacity(r + 1);
        for i in 0..=r {
            boundaries.push(i * m / r);
        }
        // Nudge right-to-left so every segment keeps min_len points.
        for i in (1..r).rev() {
            if boundaries[i + 1] - boundaries[i] < min_len {
                boundaries[i] = boundaries[i + 1] - min_len;
            }
        }
        Segmentation::new(boundaries, m, min_len)
    }

    pub fn r(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// `(a, b)` bounds of segment `r`, covering columns `a..b`.
    pub fn segment(&self, r: usize) -> (usize, usize) {
        (self.boundaries[r], self.boundaries[r + 1])
    }

    pub fn segment_len(&self, r: usize) -> usize {
        self.boundaries[r + 1] - self.boundaries[r]
    }

    /// Segment index containing 0-based column `j`.
    pub fn segment_of(&self, j: usize) -> usize {
        match self.boundaries.binary_search(&(j + 1)) {
            Ok(pos) => pos - 1,
            Err(pos) => pos - 1,
        }
    }
}

fn check_feasible(m: usize, r: usize, min_len: usize) -> Result<()> {
    if r < 1 || r * min_len > m {
        return Err(Error::InfeasibleSegmentation {
            segments: r,
            min_len,
            points: m,
        });
    }
    Ok(())
}

/// Cost flavor used when fitting windows and filling cost tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentCost {
    /// `W * m_r * (1 + log sigma2)` with the floored variance plugged in;
    /// the per-segment share of the Gaussian plug-in criterion.
    GaussianPlugin,
    /// Plain weighted residual sum of squares.
    SquaredError,
}

/// Weighted least-squares fit of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit<F> {
    pub beta: Vec<F>,
    pub sigma2: F,
    pub weighted_sse: F,
    pub cost: F,
    /// Whether `sigma2` was clamped to the variance floor.
    pub floored: bool,
}

/// Segmentation plus per-segment fits for one cluster of curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseModel<F> {
    pub segmentation: Segmentation,
    pub fits: Vec<SegmentFit<F>>,
    pub total_cost: F,
}

impl<F: Scalar> PiecewiseModel<F> {
    pub fn r(&self) -> usize {
        self.fits.len()
    }

    /// Piecewise polynomial prototype curve on the full grid.
    pub fn predict(&self, basis: &PolyBasis<F>) -> Vec<F> {
        let mut out = Vec::with_capacity(basis.m());
        for (r, fit) in self.fits.iter().enumerate() {
            let (a, b) = self.segmentation.segment(r);
            for j in a..b {
                out.push(basis.predict(&fit.beta, j));
            }
        }
        out
    }

    /// Sum of per-segment weighted squared residuals.
    pub fn total_sse(&self) -> F {
        self.fits.iter().map(|f| f.weighted_sse).sum()
    }

    pub fn any_floored(&self) -> bool {
        self.fits.iter().any(|f| f.floored)
    }
}

/// Per-column weighted sufficient statistics, accumulated as prefix sums so
/// any window reduces to two array lookups.
pub(crate) struct SuffStats<F> {
    m: usize,
    dim: usize,
    w_total: F,
    /// Prefix of packed upper-triangular `x_j x_j^T` (weight-independent).
    xx: Vec<F>,
    /// Prefix of `x_j * sum_i w_i y_ij`.
    xy: Vec<F>,
    /// Prefix of `sum_i w_i y_ij^2`.
    yy: Vec<F>,
    floor: F,
}

#[inline]
fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

impl<F: Scalar> SuffStats<F> {
    pub(crate) fn new(curves: &CurveSet<F>, basis: &PolyBasis<F>, weights: &[F]) -> Result<Self> {
        let n = curves.n();
        let m = curves.m();
        if basis.m() != m {
            return Err(Error::InvalidData(
                "basis grid does not match curve grid".into(),
            ));
        }
        if weights.len() != n {
            return Err(Error::InvalidData(format!(
                "{} weights for {} curves",
                weights.len(),
                n
            )));
        }
        if weights.iter().any(|&w| w < F::zero() || !w.is_finite()) {
            return Err(Error::InvalidData(
                "weights must be finite and non-negative".into(),
            ));
        }
        let w_total: F = weights.iter().copied().sum();
        if w_total <= F::zero() {
            return Err(Error::EmptyCluster { cluster: 0 });
        }

        let dim = basis.dim();
        let plen = packed_len(dim);
        let mut xx = vec![F::zero(); (m + 1) * plen];
        let mut xy = vec![F::zero(); (m + 1) * dim];
        let mut yy = vec![F::zero(); m + 1];
        let values = curves.values();

        for j in 0..m {
            let row = basis.row(j);
            let mut sy = F::zero();
            let mut syy = F::zero();
            for i in 0..n {
                let w = weights[i];
                if w.is_zero() {
                    continue;
                }
                let y = values[[i, j]];
                sy += w * y;
                syy += w * y * y;
            }
            let (prev, next) = xx.split_at_mut((j + 1) * plen);
            let prev = &prev[j * plen..];
            let mut idx = 0;
            for a in 0..dim {
                for b in a..dim {
                    next[idx] = prev[idx] + row[a] * row[b];
                    idx += 1;
                }
            }
            let (prev, next) = xy.split_at_mut((j + 1) * dim);
            let prev = &prev[j * dim..];
            for a in 0..dim {
                next[a] = prev[a] + row[a] * sy;
            }
            yy[j + 1] = yy[j] + syy;
        }

        Ok(Self {
            m,
            dim,
            w_total,
            xx,
            xy,
            yy,
            floor: curves.variance_floor(),
        })
    }

    /// Fits the window `(a, b]`; `a < b <= m`.
    pub(crate) fn fit_window(&self, a: usize, b: usize, kind: SegmentCost) -> Result<SegmentFit<F>> {
        debug_assert!(a < b && b <= self.m);
        let dim = self.dim;
        let plen = packed_len(dim);
        let w = self.w_total;

        // Unpack the window's normal matrix, keeping the ridge-free copy for
        // the SSE identity.
        let mut a0 = vec![F::zero(); dim * dim];
        {
            let hi = &self.xx[b * plen..(b + 1) * plen];
            let lo = &self.xx[a * plen..(a + 1) * plen];
            let mut idx = 0;
            for i in 0..dim {
                for j in i..dim {
                    let v = w * (hi[idx] - lo[idx]);
                    a0[i * dim + j] = v;
                    a0[j * dim + i] = v;
                    idx += 1;
                }
            }
        }
        let mut v = vec![F::zero(); dim];
        {
            let hi = &self.xy[b * dim..(b + 1) * dim];
            let lo = &self.xy[a * dim..(a + 1) * dim];
            for i in 0..dim {
                v[i] = hi[i] - lo[i];
            }
        }
        let syy = self.yy[b] - self.yy[a];

        let mut trace = F::zero();
        for i in 0..dim {
            trace += a0[i * dim + i];
        }
        let lambda = F::cast(RIDGE) * trace / F::from_count(dim);
        let mut ridged = a0.clone();
        for i in 0..dim {
            ridged[i * dim + i] += lambda;
        }

        let beta = solve_symmetric(&ridged, &v, dim)
            .ok_or(Error::SingularSegment { start: a, end: b })?;

        // Weighted SSE through the sufficient statistics; clamp the tiny
        // negative values cancellation can leave behind.
        let mut quad = F::zero();
        for i in 0..dim {
            let mut row = F::zero();
            for j in 0..dim {
                row += a0[i * dim + j] * beta[j];
            }
            quad += beta[i] * (row - v[i] - v[i]);
        }
        let sse = (syy + quad).max(F::zero());

        let len = F::from_count(b - a);
        let sigma2_raw = sse / (w * len);
        let floored = sigma2_raw < self.floor;
        let sigma2 = if floored { self.floor } else { sigma2_raw };
        let cost = match kind {
            SegmentCost::GaussianPlugin => w * len * (F::one() + sigma2.ln()),
            SegmentCost::SquaredError => sse,
        };
        if !cost.is_finite() {
            return Err(Error::SingularSegment { start: a, end: b });
        }
        Ok(SegmentFit {
            beta,
            sigma2,
            weighted_sse: sse,
            cost,
            floored,
        })
    }
}

/// Weighted polynomial fit of the window `(a, b]` across all curves, with the
/// Gaussian plug-in cost attached.
pub fn weighted_segment_fit<F: Scalar>(
    curves: &CurveSet<F>,
    basis: &PolyBasis<F>,
    a: usize,
    b: usize,
    weights: &[F],
) -> Result<SegmentFit<F>> {
    if a >= b || b > curves.m() || b - a < basis.min_segment_len() {
        return Err(Error::InvalidData(format!(
            "window ({a}, {b}] invalid for m = {} and minimum length {}",
            curves.m(),
            basis.min_segment_len()
        )));
    }
    let stats = SuffStats::new(curves, basis, weights)?;
    stats.fit_window(a, b, SegmentCost::GaussianPlugin)
}

/// Dense table of window costs `c(a, b)` for all `0 <= a < b <= m` with
/// `b - a >= min_len`. Infeasible or singular windows carry `+inf`.
#[derive(Debug, Clone)]
pub struct CostTable<F> {
    m: usize,
    min_len: usize,
    costs: Vec<F>,
}

impl<F: Scalar> CostTable<F> {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }

    pub fn cost(&self, a: usize, b: usize) -> F {
        debug_assert!(a < b && b <= self.m);
        self.costs[a * self.m + (b - 1)]
    }

    /// Builds a table from explicit per-window values (used by tests).
    pub fn from_fn(m: usize, min_len: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut costs = vec![F::infinity(); m * m];
        for a in 0..m {
            for b in (a + min_len).max(a + 1)..=m {
                costs[a * m + (b - 1)] = f(a, b);
            }
        }
        Self { m, min_len, costs }
    }
}

/// Fills the full window-cost table from one pass of prefix sums.
pub fn segment_cost_table<F: Scalar>(
    curves: &CurveSet<F>,
    basis: &PolyBasis<F>,
    weights: &[F],
    kind: SegmentCost,
) -> Result<CostTable<F>> {
    let stats = SuffStats::new(curves, basis, weights)?;
    Ok(cost_table_from_stats(&stats, basis.min_segment_len(), kind))
}

pub(crate) fn cost_table_from_stats<F: Scalar>(
    stats: &SuffStats<F>,
    min_len: usize,
    kind: SegmentCost,
) -> CostTable<F> {
    let m = stats.m;
    let mut costs = vec![F::infinity(); m * m];
    costs
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(a, row)| {
            for b in (a + min_len)..=m {
                // Singular windows stay +inf and are never selected.
                if let Ok(fit) = stats.fit_window(a, b, kind) {
                    row[b - 1] = fit.cost;
                }
            }
        });
    CostTable { m, min_len, costs }
}

/// Globally optimal `R`-segmentation of the cost table by dynamic
/// programming. Cost ties resolve to the smallest boundary index.
pub fn optimal_segmentation<F: Scalar>(
    table: &CostTable<F>,
    r: usize,
) -> Result<(Segmentation, F)> {
    let m = table.m();
    let min_len = table.min_len();
    check_feasible(m, r, min_len)?;

    // best[rr][t]: optimal cost of splitting (0, t] into rr segments.
    let width = m + 1;
    let mut best = vec![F::infinity(); (r + 1) * width];
    let mut arg = vec![0usize; (r + 1) * width];
    for t in min_len..=m {
        best[width + t] = table.cost(0, t);
    }
    for rr in 2..=r {
        for t in (rr * min_len)..=m {
            let mut acc = F::infinity();
            let mut acc_s = 0;
            for s in ((rr - 1) * min_len)..=(t - min_len) {
                let prev = best[(rr - 1) * width + s];
                if !prev.is_finite() {
                    continue;
                }
                let total = prev + table.cost(s, t);
                if total < acc {
                    acc = total;
                    acc_s = s;
                }
            }
            best[rr * width + t] = acc;
            arg[rr * width + t] = acc_s;
        }
    }

    let total = best[r * width + m];
    if !total.is_finite() {
        return Err(Error::FitFailed(
            "no finite-cost segmentation exists".into(),
        ));
    }
    let mut boundaries = vec![m];
    let mut t = m;
    for rr in (2..=r).rev() {
        t = arg[rr * width + t];
        boundaries.push(t);
    }
    boundaries.push(0);
    boundaries.reverse();
    Ok((
        Segmentation::new(boundaries, m, min_len)?,
        total,
    ))
}

/// Weighted piecewise fit: cost table, optimal segmentation, per-segment
/// refits. `total_cost` is the sum of the per-segment costs.
pub fn fit_piecewise<F: Scalar>(
    curves: &CurveSet<F>,
    basis: &PolyBasis<F>,
    r: usize,
    weights: &[F],
    kind: SegmentCost,
) -> Result<PiecewiseModel<F>> {
    check_feasible(curves.m(), r, basis.min_segment_len())?;
    let stats = SuffStats::new(curves, basis, weights)?;
    let table = cost_table_from_stats(&stats, basis.min_segment_len(), kind);
    let (segmentation, dp_cost) = optimal_segmentation(&table, r)?;
    fit_on_segmentation(&stats, &segmentation, kind, Some(dp_cost))
}

/// Per-segment fits on a fixed segmentation (no DP).
pub fn fit_piecewise_fixed<F: Scalar>(
    curves: &CurveSet<F>,
    basis: &PolyBasis<F>,
    segmentation: &Segmentation,
    weights: &[F],
    kind: SegmentCost,
) -> Result<PiecewiseModel<F>> {
    let stats = SuffStats::new(curves, basis, weights)?;
    fit_on_segmentation(&stats, segmentation, kind, None)
}

fn fit_on_segmentation<F: Scalar>(
    stats: &SuffStats<F>,
    segmentation: &Segmentation,
    kind: SegmentCost,
    dp_cost: Option<F>,
) -> Result<PiecewiseModel<F>> {
    let mut fits = Vec::with_capacity(segmentation.r());
    for r in 0..segmentation.r() {
        let (a, b) = segmentation.segment(r);
        fits.push(stats.fit_window(a, b, kind)?);
    }
    let total_cost: F = fits.iter().map(|f| f.cost).sum();
    if let Some(dp) = dp_cost {
        debug_assert!(
            (total_cost - dp).abs()
                <= F::cast(1e-9) * (F::one() + total_cost.abs().max(dp.abs())),
            "refit total diverged from DP optimum"
        );
    }
    Ok(PiecewiseModel {
        segmentation: segmentation.clone(),
        fits,
        total_cost,
    })
}
