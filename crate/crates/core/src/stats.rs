//! Goodness-of-fit statistics and tail estimators.

use serde::Serialize;
use thiserror::Error;

use crate::ldtheory::LimitLaw;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("samples have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("{0}")]
    Domain(String),
}

/// Outcome of one check: `pass` iff `observed <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofReport {
    pub statistic: String,
    pub observed: f64,
    pub threshold: f64,
    pub sample_size: usize,
    pub target: String,
    /// The limit statement the check is about.
    pub claim: String,
    pub pass: bool,
}

impl GofReport {
    pub fn new(
        statistic: impl Into<String>,
        observed: f64,
        threshold: f64,
        sample_size: usize,
        target: impl Into<String>,
        claim: impl Into<String>,
    ) -> Self {
        assert!(threshold > 0.0, "threshold must be positive");
        GofReport {
            statistic: statistic.into(),
            observed,
            threshold,
            sample_size,
            target: target.into(),
            claim: claim.into(),
            pass: observed <= threshold,
        }
    }
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Kolmogorov–Smirnov distance `sup |F_emp - cdf|` between a sample and a
/// continuous distribution function.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let xs = sorted(sample);
    let m = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / m - f).max(f - i as f64 / m);
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov distance `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let x = if xa[i] <= xb[j] { xa[i] } else { xb[j] };
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Dvoretzky–Kiefer–Wolfowitz band `sqrt(ln(2/delta) / (2m))`.
pub fn dkw_threshold(m: usize, delta: f64) -> Result<f64, StatsError> {
    if m == 0 {
        return Err(StatsError::EmptySample);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(StatsError::Domain(format!(
            "level must lie in (0, 1), got {delta}"
        )));
    }
    Ok(((2.0 / delta).ln() / (2.0 * m as f64)).sqrt())
}

/// Which order statistic the Hill estimator divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HillThreshold {
    /// `X_(k+1)`, the usual estimator.
    #[default]
    KPlusOne,
    /// `X_(k)`; the `i = k` term of the sum vanishes.
    KthLargest,
}

/// Hill estimate of `1/alpha` from the `k` largest values, dividing by
/// `X_(k+1)`.
pub fn hill(sample: &[f64], k: usize) -> Result<f64, StatsError> {
    hill_with(sample, k, HillThreshold::KPlusOne)
}

pub fn hill_with(sample: &[f64], k: usize, threshold: HillThreshold) -> Result<f64, StatsError> {
    if k == 0 || k >= sample.len() {
        return Err(StatsError::Domain(format!(
            "need 1 <= k < sample size, got k = {k} with {} values",
            sample.len()
        )));
    }
    let mut xs = sample.to_vec();
    // descending; only the top k + 1 matter
    xs.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let top = &mut xs[..=k];
    top.sort_by(|a, b| b.total_cmp(a));
    if top[k] <= 0.0 || top[k].is_nan() {
        return Err(StatsError::Domain(format!(
            "the {} largest values must be positive",
            k + 1
        )));
    }
    let base = match threshold {
        HillThreshold::KPlusOne => top[k],
        HillThreshold::KthLargest => top[k - 1],
    };
    let sum: f64 = top[..k].iter().map(|&x| (x / base).ln()).sum();
    Ok(sum / k as f64)
}

/// Interval of the real line for tail-measure counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Interval {
    /// `(lo, hi]`
    Bounded { lo: f64, hi: f64 },
    /// `(lo, inf)`
    Above { lo: f64 },
    /// `(-inf, hi]`
    Below { hi: f64 },
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Interval::Bounded { lo, hi } => x > lo && x <= hi,
            Interval::Above { lo } => x > lo,
            Interval::Below { hi } => x <= hi,
        }
    }
}

/// `(1/k) #{points in interval}` for each interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailMeasureEstimate {
    pub intervals: Vec<Interval>,
    pub counts: Vec<usize>,
    pub masses: Vec<f64>,
    pub k: usize,
    pub p: usize,
}

pub fn tail_empirical_measure(
    points: &[f64],
    k: usize,
    intervals: &[Interval],
) -> Result<TailMeasureEstimate, StatsError> {
    if k == 0 || k > points.len() {
        return Err(StatsError::Domain(format!(
            "need 1 <= k <= number of points, got k = {k} with {} points",
            points.len()
        )));
    }
    let counts: Vec<usize> = intervals
        .iter()
        .map(|iv| points.iter().filter(|&&x| iv.contains(x)).count())
        .collect();
    let masses = counts.iter().map(|&c| c as f64 / k as f64).collect();
    Ok(TailMeasureEstimate {
        intervals: intervals.to_vec(),
        counts,
        masses,
        k,
        p: points.len(),
    })
}

/// Compares the empirical `P(max <= x, min <= y)` with the product limit
/// `Lambda(x) (1 - Lambda(-y))` of the normalized maximum and minimum.
pub fn joint_maxmin_check(
    maxima: &[f64],
    minima: &[f64],
    x: f64,
    y: f64,
    threshold: f64,
) -> Result<GofReport, StatsError> {
    if maxima.len() != minima.len() {
        return Err(StatsError::LengthMismatch(maxima.len(), minima.len()));
    }
    if maxima.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let hits = maxima
        .iter()
        .zip(minima)
        .filter(|(&mx, &mn)| mx <= x && mn <= y)
        .count();
    let empirical = hits as f64 / maxima.len() as f64;
    let target = LimitLaw::Gumbel.cdf(x) * (1.0 - LimitLaw::Gumbel.cdf(-y));
    Ok(GofReport::new(
        "joint-cdf-abs-deviation",
        (empirical - target).abs(),
        threshold,
        maxima.len(),
        format!("Lambda({x})(1-Lambda({}))={target:.6}", -y),
        "normalized max and min are asymptotically independent Gumbel",
    ))
}

/// Pearson correlation coefficient.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::EmptySample);
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Lower empirical quantile: the smallest sample value `v` with
/// `F_emp(v) >= q`.
pub fn empirical_quantile(sample: &[f64], q: f64) -> Result<f64, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(StatsError::Domain(format!(
            "quantile level {q} outside [0, 1]"
        )));
    }
    let xs = sorted(sample);
    let idx = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len()) - 1;
    Ok(xs[idx])
}

/// Empirical `P(A <= x, B <= y)` from aligned samples.
pub fn joint_empirical_cdf(a: &[f64], b: &[f64], x: f64, y: f64) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let hits = a.iter().zip(b).filter(|(&u, &v)| u <= x && v <= y).count();
    Ok(hits as f64 / a.len() as f64)
}
