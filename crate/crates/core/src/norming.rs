//! Centering and scaling constants for ensemble maxima, and the regime
//! boundaries that say how large the ensemble may grow.
//!
//! Three families of constants are provided:
//!
//! * Gumbel constants for standardized sums in the normal regime (`c = 1/d`),
//! * Gumbel constants of the subexponential step law itself (lognormal and
//!   Weibull-type tails), used for `S_n - E S_n` in the one-big-jump regime,
//! * the Fréchet scale `a_m` with `m P(|X| > a_m) = 1`.
//!
//! The boundary tables leave their slack sequences free. Every `h_n -> inf`
//! defaults to `log log n` and every `o(g(n))` to `g(n) / log log n`; both
//! can be replaced through [`Slack`].

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::distributions::{LawKind, StepLaw};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormingError {
    #[error("index {got} is below the minimum {min} for this formula")]
    IndexTooSmall { min: f64, got: f64 },
    #[error("invalid parameter {name}={value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("cannot bracket a root of m P(|X| > a) = 1 for m = {m}")]
    NotBracketable { m: f64 },
    #[error("{0}")]
    WrongLaw(String),
    #[error("no table row for tail class {0}")]
    NoTableRow(String),
}

/// Which limit the constants are meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    GumbelNormal,
    GumbelSubexp,
    Frechet,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::GumbelNormal => "gumbel-normal",
            Regime::GumbelSubexp => "gumbel-subexp",
            Regime::Frechet => "frechet",
        })
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gumbel-normal" => Ok(Regime::GumbelNormal),
            "gumbel-subexp" => Ok(Regime::GumbelSubexp),
            "frechet" => Ok(Regime::Frechet),
            other => Err(format!(
                "unknown regime `{other}` (expected gumbel-normal, gumbel-subexp or frechet)"
            )),
        }
    }
}

/// Centering `center` and scale `scale` computed at index `index`.
///
/// For the normal regime the pair normalizes `S_n / sqrt(n)`, i.e.
/// `(S_n / sqrt(n) - d) / c` with `c = 1/d`; for the Fréchet regime `scale`
/// is `a_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormingPair {
    pub center: f64,
    pub scale: f64,
    pub regime: Regime,
    pub index: f64,
}

fn require_index(got: f64, min: f64) -> Result<(), NormingError> {
    if got.is_finite() && got >= min {
        Ok(())
    } else {
        Err(NormingError::IndexTooSmall { min, got })
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), NormingError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(NormingError::InvalidParameter {
            name,
            value,
            reason: "must be finite and positive",
        })
    }
}

/// `sqrt(2 log m) - (log log m + log 4 pi) / (2 sqrt(2 log m))`.
fn normal_max_center(m: f64) -> f64 {
    let two_log = 2.0 * m.ln();
    let root = two_log.sqrt();
    root - (m.ln().ln() + (4.0 * std::f64::consts::PI).ln()) / (2.0 * root)
}

/// Gumbel constants for the maximum of `p` standard normals.
pub fn gumbel_constants_normal(p: f64) -> Result<NormingPair, NormingError> {
    require_index(p, 3.0)?;
    let d = normal_max_center(p);
    Ok(NormingPair {
        center: d,
        scale: 1.0 / d,
        regime: Regime::GumbelNormal,
        index: p,
    })
}

/// Gumbel constants of the standard lognormal law at index `n`.
pub fn gumbel_constants_lognormal(n: f64) -> Result<NormingPair, NormingError> {
    require_index(n, 3.0)?;
    let d = normal_max_center(n).exp();
    Ok(NormingPair {
        center: d,
        scale: d / (2.0 * n.ln()).sqrt(),
        regime: Regime::GumbelSubexp,
        index: n,
    })
}

/// Parameters of a Weibull-type tail `P(X > x) ~ c x^beta exp(-lambda x^tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeibullTail {
    pub c: f64,
    pub beta: f64,
    pub lambda: f64,
    pub tau: f64,
}

impl WeibullTail {
    /// The pure tail `exp(-x^tau)`.
    pub fn pure(tau: f64) -> Self {
        WeibullTail {
            c: 1.0,
            beta: 0.0,
            lambda: 1.0,
            tau,
        }
    }
}

/// Gumbel constants for a Weibull-type tail at index `n`, with
/// `s_n = log(n) / lambda`.
pub fn gumbel_constants_weibull_type(
    n: f64,
    tail: WeibullTail,
) -> Result<NormingPair, NormingError> {
    require_index(n, 2.0)?;
    positive("c", tail.c)?;
    positive("lambda", tail.lambda)?;
    positive("tau", tail.tau)?;
    if !tail.beta.is_finite() {
        return Err(NormingError::InvalidParameter {
            name: "beta",
            value: tail.beta,
            reason: "must be finite",
        });
    }
    let WeibullTail {
        c,
        beta,
        lambda,
        tau,
    } = tail;
    let s = n.ln() / lambda;
    let s_pow = s.powf(1.0 / tau - 1.0);
    let scale = s_pow / (lambda * tau);
    let center =
        s.powf(1.0 / tau) + s_pow / tau * (beta / (lambda * tau) * s.ln() + c.ln() / lambda);
    Ok(NormingPair {
        center,
        scale,
        regime: Regime::GumbelSubexp,
        index: n,
    })
}

/// Fréchet scale `a_m` solving `m P(|X| > a_m) = 1`. Closed form for the
/// Pareto laws, bisection otherwise. The center is left at zero; see
/// [`frechet_norming`] for the pair used on walks.
pub fn frechet_scale(law: &StepLaw, m: f64) -> Result<NormingPair, NormingError> {
    require_index(m, 1.0)?;
    let scale = match *law.kind() {
        LawKind::SymmetricPareto {
            alpha,
            standardized,
            ..
        } => {
            let s = if standardized {
                ((alpha - 2.0) / alpha).sqrt()
            } else {
                1.0
            };
            s * m.powf(1.0 / alpha)
        }
        LawKind::ParetoPositive { alpha, x_m } => x_m * m.powf(1.0 / alpha),
        _ => bisect_two_sided(law, 1.0 / m).ok_or(NormingError::NotBracketable { m })?,
    };
    Ok(NormingPair {
        center: 0.0,
        scale,
        regime: Regime::Frechet,
        index: m,
    })
}

/// Root of `P(|X| > a) = target` for a continuous, strictly decreasing
/// two-sided tail, to relative tolerance 1e-12.
fn bisect_two_sided(law: &StepLaw, target: f64) -> Option<f64> {
    let g = |a: f64| law.two_sided(a) - target;
    let mut lo = 1.0;
    let mut hi = 1.0;
    while g(lo) < 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return None;
        }
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() || hi > 1e300 {
            return None;
        }
    }
    for _ in 0..2000 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `n E[X 1(|X| <= a_n)]` for a Pareto law with `alpha = 1`.
pub fn alpha_one_centering(law: &StepLaw, n: f64) -> Result<f64, NormingError> {
    require_index(n, 1.0)?;
    match *law.kind() {
        // a_n = n, and int_1^a x * x^{-2} dx = log a on each half line
        LawKind::SymmetricPareto {
            alpha: 1.0, p_plus, ..
        } => Ok(n * (2.0 * p_plus - 1.0) * n.ln()),
        // a_n = x_m n, and int_{x_m}^{a} x * x_m x^{-2} dx = x_m log n
        LawKind::ParetoPositive { alpha: 1.0, x_m } => Ok(n * x_m * n.ln()),
        _ => Err(NormingError::WrongLaw(format!(
            "alpha = 1 centering needs a Pareto law with alpha = 1, got {law}"
        ))),
    }
}

/// Centering of `S_n` in the Fréchet regime: the truncated mean for
/// `alpha = 1`, the exact mean `n E X` when it exists, zero otherwise.
pub fn frechet_center(law: &StepLaw, n: f64) -> Result<f64, NormingError> {
    match law.pareto_alpha() {
        Some(1.0) => alpha_one_centering(law, n),
        _ => Ok(law.mean().map_or(0.0, |m| n * m)),
    }
}

/// The pair used for walks of length `n` in an ensemble of size `p`:
/// center from [`frechet_center`] at `n`, scale `a_{np}`.
pub fn frechet_norming(law: &StepLaw, n: f64, p: f64) -> Result<NormingPair, NormingError> {
    let mut pair = frechet_scale(law, n * p)?;
    pair.center = frechet_center(law, n)?;
    Ok(pair)
}

/// Slack sequence standing in for an unspecified `h_n -> inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Slack {
    #[default]
    LogLog,
    Constant(f64),
}

impl Slack {
    pub fn at(&self, n: f64) -> f64 {
        match *self {
            Slack::LogLog => n.ln().ln(),
            Slack::Constant(v) => v,
        }
    }
}

impl FromStr for Slack {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "loglog" || s == "log-log" {
            return Ok(Slack::LogLog);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(Slack::Constant(v)),
            _ => Err(format!(
                "slack must be `loglog` or a positive number, got `{s}`"
            )),
        }
    }
}

/// Tail classes indexing the boundary tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum TailClass {
    /// Regularly varying with index `alpha`. `epsilon` is the margin kept
    /// inside `(0, alpha - 2)`; default `min(1, (alpha - 2) / 2)`.
    RegularlyVarying { alpha: f64, epsilon: Option<f64> },
    /// `P(X > x) ~ c x^beta (log x)^xi exp(-lambda (log x)^gamma)`.
    LogNormalType {
        gamma: f64,
        lambda: f64,
        beta: f64,
        xi: f64,
        c: f64,
    },
    /// `P(X > x) ~ c x^beta exp(-lambda x^tau)`.
    WeibullType {
        tau: f64,
        lambda: f64,
        beta: f64,
        c: f64,
    },
    /// Finite exponential moments (Cramér condition).
    LightTail,
    /// `E|X|^s < inf`.
    Moment { s: f64 },
}

impl fmt::Display for TailClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TailClass::RegularlyVarying { alpha, .. } => write!(f, "RV({alpha})"),
            TailClass::LogNormalType { gamma, .. } => write!(f, "LN({gamma})"),
            TailClass::WeibullType { tau, .. } => write!(f, "WE({tau})"),
            TailClass::LightTail => write!(f, "light"),
            TailClass::Moment { s } => write!(f, "moment({s})"),
        }
    }
}

impl FromStr for TailClass {
    type Err = String;

    /// `rv:alpha=4[,eps=1]`, `ln:gamma=1.5[,lambda=..,beta=..,xi=..,c=..]`,
    /// `we:tau=0.4[,lambda=..,beta=..,c=..]`, `light`, `moment:s=4`.
    fn from_str(spec: &str) -> Result<Self, String> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut kv = std::collections::BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| format!("expected key=value in `{item}`"))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| format!("`{}` is not a number", v.trim()))?;
            kv.insert(k.trim().to_ascii_lowercase(), v);
        }
        let get = |k: &str, default: Option<f64>| {
            kv.get(k)
                .copied()
                .or(default)
                .ok_or_else(|| format!("tail class `{name}` needs `{k}`"))
        };
        let class = match name.trim().to_ascii_lowercase().as_str() {
            "rv" => TailClass::RegularlyVarying {
                alpha: get("alpha", None)?,
                epsilon: kv.get("eps").copied(),
            },
            "ln" => TailClass::LogNormalType {
                gamma: get("gamma", None)?,
                lambda: get("lambda", Some(1.0))?,
                beta: get("beta", Some(0.0))?,
                xi: get("xi", Some(0.0))?,
                c: get("c", Some(1.0))?,
            },
            "we" => TailClass::WeibullType {
                tau: get("tau", None)?,
                lambda: get("lambda", Some(1.0))?,
                beta: get("beta", Some(0.0))?,
                c: get("c", Some(1.0))?,
            },
            "light" | "petrov" => TailClass::LightTail,
            "moment" => TailClass::Moment { s: get("s", None)? },
            other => return Err(format!("unknown tail class `{other}`")),
        };
        class.validate().map_err(|e| e.to_string())?;
        Ok(class)
    }
}

impl TailClass {
    pub fn validate(&self) -> Result<(), NormingError> {
        let bad = |name, value, reason| {
            Err(NormingError::InvalidParameter {
                name,
                value,
                reason,
            })
        };
        match *self {
            TailClass::RegularlyVarying { alpha, epsilon } => {
                positive("alpha", alpha)?;
                if let Some(eps) = epsilon {
                    if !(eps > 0.0 && eps < alpha - 2.0) {
                        return bad("epsilon", eps, "must lie in (0, alpha - 2)");
                    }
                }
            }
            TailClass::LogNormalType {
                gamma, lambda, c, ..
            } => {
                if !(gamma > 1.0) {
                    return bad("gamma", gamma, "must exceed 1");
                }
                positive("lambda", lambda)?;
                positive("c", c)?;
            }
            TailClass::WeibullType { tau, lambda, c, .. } => {
                if !(tau > 0.0 && tau < 1.0) {
                    return bad("tau", tau, "must lie in (0, 1)");
                }
                positive("lambda", lambda)?;
                positive("c", c)?;
            }
            TailClass::LightTail => {}
            TailClass::Moment { s } => {
                if !(s > 2.0) {
                    return bad("s", s, "must exceed 2");
                }
            }
        }
        Ok(())
    }

    /// `epsilon` for the regularly varying rows, defaulting to
    /// `min(1, (alpha - 2) / 2)`.
    fn rv_epsilon(alpha: f64, epsilon: Option<f64>) -> f64 {
        epsilon.unwrap_or_else(|| (0.5 * (alpha - 2.0)).min(1.0))
    }

    fn require_rv_finite_variance(&self, alpha: f64) -> Result<(), NormingError> {
        if alpha > 2.0 {
            Ok(())
        } else {
            Err(NormingError::NoTableRow(format!(
                "{self} (rows need alpha > 2)"
            )))
        }
    }
}

impl StepLaw {
    /// Tail class of the law, as used by the boundary tables.
    pub fn tail_class(&self) -> TailClass {
        match *self.kind() {
            LawKind::StdNormal | LawKind::CenteredExponential => TailClass::LightTail,
            LawKind::SymmetricPareto { alpha, .. } | LawKind::ParetoPositive { alpha, .. } => {
                TailClass::RegularlyVarying {
                    alpha,
                    epsilon: None,
                }
            }
            // Mills ratio: P(X > x) ~ exp(-(log x)^2 / 2) / (sqrt(2 pi) log x)
            LawKind::StdLogNormal => TailClass::LogNormalType {
                gamma: 2.0,
                lambda: 0.5,
                beta: 0.0,
                xi: -1.0,
                c: 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            },
            LawKind::WeibullType { tau } => TailClass::WeibullType {
                tau,
                lambda: 1.0,
                beta: 0.0,
                c: 1.0,
            },
            LawKind::LogNormalType { gamma, lambda } => TailClass::LogNormalType {
                gamma,
                lambda,
                beta: 0.0,
                xi: 0.0,
                c: 1.0,
            },
        }
    }
}

/// Thresholds below which the normal approximation and above which the
/// one-big-jump approximation hold for `P(S_n - E S_n > x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparatingPair {
    pub xi: f64,
    pub psi: f64,
}

pub fn separating_sequences(
    cls: &TailClass,
    n: f64,
    slack: Slack,
) -> Result<SeparatingPair, NormingError> {
    require_index(n, 3.0)?;
    cls.validate()?;
    let h = slack.at(n);
    let log_n = n.ln();
    let pair = match *cls {
        TailClass::RegularlyVarying { alpha, .. } => {
            cls.require_rv_finite_variance(alpha)?;
            let v = ((alpha - 2.0) * n * log_n).sqrt();
            SeparatingPair { xi: v, psi: v }
        }
        TailClass::LogNormalType { gamma, .. } if gamma < 2.0 => {
            let v = (n * log_n.powf(gamma)).sqrt();
            SeparatingPair { xi: v, psi: v }
        }
        TailClass::LogNormalType { gamma, .. } => SeparatingPair {
            xi: (n * log_n.powf(gamma)).sqrt() / h,
            psi: n.sqrt() * log_n.powf(gamma - 1.0) * h,
        },
        TailClass::WeibullType { tau, .. } => {
            let xi = if tau <= 0.5 {
                n.powf(1.0 / (2.0 - tau)) / h
            } else {
                n.powf(2.0 / 3.0) / h
            };
            SeparatingPair {
                xi,
                psi: n.powf(1.0 / (2.0 - 2.0 * tau)) * h,
            }
        }
        TailClass::LightTail | TailClass::Moment { .. } => {
            return Err(NormingError::NoTableRow(cls.to_string()))
        }
    };
    Ok(pair)
}

/// Largest ensemble size `p` for which the normal-regime Gumbel limit holds.
pub fn max_p_bound(cls: &TailClass, n: f64, slack: Slack) -> Result<f64, NormingError> {
    require_index(n, 3.0)?;
    cls.validate()?;
    let little_o = |g: f64| g / slack.at(n);
    let bound = match *cls {
        TailClass::LightTail => little_o(n.cbrt()).exp(),
        TailClass::Moment { s } => n.powf((s - 2.0) / 2.0),
        TailClass::RegularlyVarying { alpha, epsilon } => {
            cls.require_rv_finite_variance(alpha)?;
            let c = alpha - 2.0 - TailClass::rv_epsilon(alpha, epsilon);
            n.powf(c / 2.0)
        }
        TailClass::LogNormalType { gamma, .. } => little_o(n.ln().powf(gamma)).exp(),
        TailClass::WeibullType { tau, .. } if tau <= 0.5 => {
            little_o(n.powf(tau / (2.0 - tau))).exp()
        }
        TailClass::WeibullType { .. } => little_o(n.cbrt()).exp(),
    };
    Ok(bound)
}

/// Lower bound on the block length `r_n` of a walk of length `n`.
///
/// When `diverging_ratio` is set the requirement is `r_n / value -> inf`
/// rather than `r_n > value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockBound {
    pub value: f64,
    pub diverging_ratio: bool,
}

pub fn min_block_bound(cls: &TailClass, n: f64) -> Result<BlockBound, NormingError> {
    require_index(n, 3.0)?;
    cls.validate()?;
    let log_n = n.ln();
    let (value, diverging_ratio) = match *cls {
        TailClass::LightTail => (log_n.powi(3), true),
        TailClass::RegularlyVarying { alpha, epsilon } => {
            cls.require_rv_finite_variance(alpha)?;
            (
                n.powf(2.0 / (alpha - TailClass::rv_epsilon(alpha, epsilon))),
                false,
            )
        }
        TailClass::Moment { s } => (n.powf(2.0 / s), false),
        TailClass::LogNormalType { gamma, .. } => ((2.0 * log_n).powf(1.0 / gamma).exp(), true),
        TailClass::WeibullType { tau, .. } if tau <= 0.5 => (log_n.powf((2.0 - tau) / tau), true),
        TailClass::WeibullType { .. } => (log_n.powi(3), true),
    };
    Ok(BlockBound {
        value,
        diverging_ratio,
    })
}

/// Switch point between the normal and one-big-jump approximations for
/// lognormal-type tails with `1 < gamma <= 2`:
/// `(lambda 2^{1-gamma})^{1/2} n^{1/2} (log n)^{gamma/2}`.
pub fn rozovskii_threshold(gamma: f64, lambda: f64, n: f64) -> Result<f64, NormingError> {
    if !(gamma > 1.0 && gamma <= 2.0) {
        return Err(NormingError::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must lie in (1, 2]",
        });
    }
    positive("lambda", lambda)?;
    require_index(n, 2.0)?;
    Ok((lambda * 2f64.powf(1.0 - gamma)).sqrt() * n.sqrt() * n.ln().powf(gamma / 2.0))
}
