//! Large-deviation approximations to `P(S_n > x)` and the Monte Carlo
//! estimator that checks them.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distributions::{LawKind, StepLaw};
use crate::norming::{rozovskii_threshold, separating_sequences, NormingError, Slack, TailClass};
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApproxError {
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Norming(#[from] NormingError),
}

/// Standard normal survival function `P(Z > x)`.
///
/// Relative error stays near 1e-13 down to the subnormal range
/// (`x` about 37.5).
pub fn normal_survival(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    normal_survival(-x)
}

/// Extreme value limit laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LimitLaw {
    /// `exp(-exp(-x))`
    Gumbel,
    /// `exp(-x^{-alpha})` on `x > 0`
    Frechet { alpha: f64 },
    /// `exp(-p_plus x^{-alpha})` on `x > 0`
    FrechetPower { alpha: f64, p_plus: f64 },
}

impl LimitLaw {
    /// Distribution function; zero on `x <= 0` for the Fréchet kinds.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            LimitLaw::Gumbel => (-(-x).exp()).exp(),
            LimitLaw::Frechet { alpha } => {
                if x > 0.0 {
                    (-x.powf(-alpha)).exp()
                } else {
                    0.0
                }
            }
            LimitLaw::FrechetPower { alpha, p_plus } => {
                if x > 0.0 {
                    (-p_plus * x.powf(-alpha)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Like [`LimitLaw::cdf`] but rejects points outside the support of a
    /// Fréchet law.
    pub fn cdf_checked(&self, x: f64) -> Result<f64, ApproxError> {
        match self {
            LimitLaw::Gumbel => Ok(self.cdf(x)),
            _ if x > 0.0 => Ok(self.cdf(x)),
            _ => Err(ApproxError::Precondition(format!(
                "Fréchet distribution function evaluated at x = {x} <= 0"
            ))),
        }
    }
}

/// Which approximation produced a [`TailApprox`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproxRegime {
    Normal,
    NagaevTwoTerm,
    Subexponential,
    RozovskiiBelow,
    RozovskiiAbove,
}

/// A theoretical tail value, clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailApprox {
    pub value: f64,
    pub regime: ApproxRegime,
    pub n: f64,
    pub x: f64,
    pub law: String,
    /// `P(Z > x / sqrt(n))` when it enters the value.
    pub normal_term: Option<f64>,
    /// `n P(X > x)` when it enters the value.
    pub jump_term: Option<f64>,
    /// Multiplicative correction applied to the jump term.
    pub correction: Option<f64>,
    /// Whether `x` lies above the one-big-jump threshold `psi_n`.
    pub beyond_psi: Option<bool>,
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn require_n(n: f64) -> Result<(), ApproxError> {
    if n.is_finite() && n >= 1.0 {
        Ok(())
    } else {
        Err(ApproxError::Precondition(format!(
            "n must be >= 1, got {n}"
        )))
    }
}

/// `P(Z > x / sqrt(n))`.
pub fn normal_approx(n: f64, x: f64) -> Result<TailApprox, ApproxError> {
    require_n(n)?;
    let t = normal_survival(x / n.sqrt());
    Ok(TailApprox {
        value: clamp01(t),
        regime: ApproxRegime::Normal,
        n,
        x,
        law: "normal-approximation".into(),
        normal_term: Some(t),
        jump_term: None,
        correction: None,
        beyond_psi: None,
    })
}

/// Two-term approximation `P(Z > x/sqrt(n)) + n P(X > x)` for a standardized
/// regularly varying step law with `alpha > 2`.
pub fn nagaev_approx(law: &StepLaw, n: f64, x: f64) -> Result<TailApprox, ApproxError> {
    require_n(n)?;
    match *law.kind() {
        LawKind::SymmetricPareto {
            alpha,
            standardized: true,
            ..
        } if alpha > 2.0 => {}
        _ => {
            return Err(ApproxError::Precondition(format!(
                "the two-term approximation needs a standardized regularly varying law with alpha > 2, got {law}"
            )))
        }
    }
    if x < n.sqrt() {
        return Err(ApproxError::Precondition(format!(
            "x = {x} lies below sqrt(n) = {}",
            n.sqrt()
        )));
    }
    let normal = normal_survival(x / n.sqrt());
    let jump = n * law.survival(x);
    Ok(TailApprox {
        value: clamp01(normal + jump),
        regime: ApproxRegime::NagaevTwoTerm,
        n,
        x,
        law: law.to_string(),
        normal_term: Some(normal),
        jump_term: Some(jump),
        correction: None,
        beyond_psi: None,
    })
}

/// One-big-jump approximation `n P(X > x)` to `P(S_n - E S_n > x)`.
pub fn subexp_approx(law: &StepLaw, n: f64, x: f64) -> Result<TailApprox, ApproxError> {
    require_n(n)?;
    let class = law.tail_class();
    if class == TailClass::LightTail {
        return Err(ApproxError::Precondition(format!(
            "{law} is light-tailed; the one-big-jump approximation does not apply"
        )));
    }
    if !(x > 0.0) {
        return Err(ApproxError::Precondition(format!(
            "x must be positive, got {x}"
        )));
    }
    let jump = n * law.survival(x);
    let beyond_psi = if n >= 3.0 {
        separating_sequences(&class, n, Slack::default())
            .ok()
            .map(|sep| x > sep.psi)
    } else {
        None
    };
    Ok(TailApprox {
        value: clamp01(jump),
        regime: ApproxRegime::Subexponential,
        n,
        x,
        law: law.to_string(),
        normal_term: None,
        jump_term: Some(jump),
        correction: None,
        beyond_psi,
    })
}

/// Lognormal-type tail `P(X > x) ~ c x^beta (log x)^xi exp(-lambda (log x)^gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LnTail {
    pub gamma: f64,
    pub lambda: f64,
    pub beta: f64,
    pub xi: f64,
    pub c: f64,
}

impl LnTail {
    pub fn survival(&self, x: f64) -> f64 {
        let l = x.ln();
        self.c * x.powf(self.beta) * l.powf(self.xi) * (-self.lambda * l.powf(self.gamma)).exp()
    }

    /// Derivative of `g(x) = lambda (log x)^2 - (beta + 2) log x - xi log log x - log c`.
    fn g_prime(&self, x: f64) -> f64 {
        let l = x.ln();
        (2.0 * self.lambda * l - (self.beta + 2.0) - self.xi / l) / x
    }
}

/// Piecewise normal / one-big-jump approximation for lognormal-type tails
/// with `1 < gamma <= 2`, switching hard at the threshold of
/// [`rozovskii_threshold`]. For `gamma = 2` the jump term carries the factor
/// `exp(n g'(x)^2 / 2)`. At exactly the threshold the jump branch is used.
pub fn rozovskii_ln_approx(tail: LnTail, n: f64, x: f64) -> Result<TailApprox, ApproxError> {
    require_n(n)?;
    if !(tail.gamma > 1.0 && tail.gamma <= 2.0) {
        return Err(ApproxError::Precondition(format!(
            "gamma must lie in (1, 2], got {}",
            tail.gamma
        )));
    }
    if !(tail.lambda > 0.0 && tail.c > 0.0) {
        return Err(ApproxError::Precondition(
            "lambda and c must be positive".into(),
        ));
    }
    if !(x > std::f64::consts::E) {
        return Err(ApproxError::Precondition(format!(
            "x must exceed e, got {x}"
        )));
    }
    let threshold = rozovskii_threshold(tail.gamma, tail.lambda, n)?;
    let law = format!(
        "ln-tail:gamma={},lambda={},beta={},xi={},c={}",
        tail.gamma, tail.lambda, tail.beta, tail.xi, tail.c
    );
    if x < threshold {
        let t = normal_survival(x / n.sqrt());
        return Ok(TailApprox {
            value: clamp01(t),
            regime: ApproxRegime::RozovskiiBelow,
            n,
            x,
            law,
            normal_term: Some(t),
            jump_term: None,
            correction: None,
            beyond_psi: None,
        });
    }
    let jump = n * tail.survival(x);
    let correction = if tail.gamma == 2.0 {
        let g = tail.g_prime(x);
        (0.5 * n * g * g).exp()
    } else {
        1.0
    };
    Ok(TailApprox {
        value: clamp01(jump * correction),
        regime: ApproxRegime::RozovskiiAbove,
        n,
        x,
        law,
        normal_term: None,
        jump_term: Some(jump),
        correction: Some(correction),
        beyond_psi: None,
    })
}

/// Two-sided 99% normal quantile.
const Z_99: f64 = 2.575_829_303_548_900_4;

/// Replications per independently seeded chunk.
pub const CHUNK: u64 = 1 << 16;

/// Plain Monte Carlo estimate of a tail probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCTailEstimate {
    pub estimate: f64,
    pub hits: u64,
    pub replications: u64,
    /// Wilson score interval at level 99%.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MCTailEstimate {
    pub fn from_hits(hits: u64, replications: u64) -> Self {
        let r = replications as f64;
        let p = hits as f64 / r;
        let z2 = Z_99 * Z_99;
        let denom = 1.0 + z2 / r;
        let center = (p + z2 / (2.0 * r)) / denom;
        let half = Z_99 / denom * (p * (1.0 - p) / r + z2 / (4.0 * r * r)).sqrt();
        MCTailEstimate {
            estimate: p,
            hits,
            replications,
            ci_low: (center - half).max(0.0).min(p),
            ci_high: (center + half).min(1.0).max(p),
        }
    }
}

/// Sum of `n` steps; compensated when the steps have no finite mean.
#[inline]
pub(crate) fn walk_sum<R: rand::RngCore>(
    sampler: &crate::distributions::Sampler,
    n: u64,
    compensated: bool,
    rng: &mut R,
) -> f64 {
    sampler.sum(n, compensated, rng)
}

pub(crate) fn needs_compensation(law: &StepLaw) -> bool {
    law.pareto_alpha().is_some_and(|a| a <= 1.0)
}

/// Estimates `P(S_n - shift > x)` for each threshold in `xs` from one set of
/// `replications` walks, `shift = n E X` when `centered`, else 0.
///
/// Replications are cut into chunks of [`CHUNK`] walks, chunk `c` drawing
/// from its own stream; the per-chunk hit counts are added, so the result
/// does not depend on how chunks are scheduled across threads.
pub fn mc_tail_many(
    law: &StepLaw,
    n: u64,
    xs: &[f64],
    replications: u64,
    seed: u64,
    centered: bool,
) -> Result<Vec<MCTailEstimate>, ApproxError> {
    if n == 0 {
        return Err(ApproxError::Precondition("n must be >= 1".into()));
    }
    if replications < 1000 {
        return Err(ApproxError::Precondition(format!(
            "at least 1000 replications are required, got {replications}"
        )));
    }
    let shift = if centered {
        let mean = law.mean().ok_or_else(|| {
            ApproxError::Precondition(format!("{law} has no finite mean to center with"))
        })?;
        n as f64 * mean
    } else {
        0.0
    };
    let sampler = law.sampler();
    let compensated = needs_compensation(law);
    let chunks = replications.div_ceil(CHUNK);
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, Domain::TailChunk, c, 0);
            let size = CHUNK.min(replications - c * CHUNK);
            let mut hits = vec![0u64; xs.len()];
            for _ in 0..size {
                let s = walk_sum(&sampler, n, compensated, &mut rng) - shift;
                for (h, &x) in hits.iter_mut().zip(xs) {
                    *h += u64::from(s > x);
                }
            }
            hits
        })
        .collect();
    let mut totals = vec![0u64; xs.len()];
    for chunk in &counts {
        for (t, h) in totals.iter_mut().zip(chunk) {
            *t += h;
        }
    }
    Ok(totals
        .into_iter()
        .map(|h| MCTailEstimate::from_hits(h, replications))
        .collect())
}

/// Estimates `P(S_n - shift > x)`; see [`mc_tail_many`].
pub fn mc_tail(
    law: &StepLaw,
    n: u64,
    x: f64,
    replications: u64,
    seed: u64,
    centered: bool,
) -> Result<MCTailEstimate, ApproxError> {
    Ok(mc_tail_many(law, n, &[x], replications, seed, centered)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent evaluation of the normal tail: Taylor series of the
    /// error function for small x, Lentz continued fraction otherwise.
    fn oracle_survival(x: f64) -> f64 {
        if x < 3.0 {
            // Phi(x) - 1/2 = phi(x) * sum x^{2k+1} / (1*3*...*(2k+1))
            let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let mut term = x;
            let mut sum = x;
            let mut k = 1.0;
            while term.abs() > 1e-18 * sum.abs() {
                term *= x * x / (2.0 * k + 1.0);
                sum += term;
                k += 1.0;
            }
            0.5 - phi * sum
        } else {
            // Mills ratio R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))
            let tiny = 1e-300;
            let mut f = x;
            let mut c = x;
            let mut d = 0.0;
            for j in 1..500 {
                let a = j as f64;
                d = x + a * d;
                d = if d == 0.0 { tiny } else { 1.0 / d };
                c = x + a / c;
                let delta = c * d;
                f *= delta;
                if (delta - 1.0).abs() < 1e-17 {
                    break;
                }
            }
            let log_phi = -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln();
            (log_phi - f.ln()).exp()
        }
    }

    #[test]
    fn normal_survival_examples() {
        assert_eq!(normal_survival(0.0), 0.5);
        assert!((normal_survival(3.0) / 1.349898031630094_5e-3 - 1.0).abs() < 1e-13);
        for x in [0.5, 1.0, 2.0] {
            assert!((normal_survival(x) + normal_survival(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normal_survival_against_oracles() {
        // 40-digit references
        let frozen = [
            (0.1, 0.460_172_162_722_971),
            (1.0, 0.158_655_253_931_457_05),
            (5.0, 2.866_515_718_791_939e-7),
            (10.0, 7.619_853_024_160_525e-24),
            (30.0, 4.906_713_927_148_187e-198),
        ];
        for (x, want) in frozen {
            let got = normal_survival(x);
            assert!((got / want - 1.0).abs() < 1e-12, "x={x}: {got} vs {want}");
            let oracle = oracle_survival(x);
            assert!(
                (got / oracle - 1.0).abs() < 1e-12,
                "x={x}: {got} vs oracle {oracle}"
            );
        }
        let mut prev = 1.0;
        for i in -100..=380 {
            let v = normal_survival(i as f64 * 0.1);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn limit_cdf_examples() {
        assert!((LimitLaw::Gumbel.cdf(0.0) - (-1f64).exp()).abs() < 1e-16);
        for alpha in [0.5, 1.5, 3.0] {
            assert!((LimitLaw::Frechet { alpha }.cdf(1.0) - (-1f64).exp()).abs() < 1e-16);
        }
        let fp = LimitLaw::FrechetPower {
            alpha: 2.0,
            p_plus: 0.5,
        };
        assert!((fp.cdf(1.0) - (-0.5f64).exp()).abs() < 1e-16);
        assert_eq!(fp.cdf(-1.0), 0.0);
        assert!(fp.cdf_checked(0.0).is_err());
        assert!(LimitLaw::Gumbel.cdf_checked(-5.0).is_ok());
    }

    fn pareto3() -> StepLaw {
        StepLaw::symmetric_pareto(3.0, 0.5, true).unwrap()
    }

    #[test]
    fn nagaev_example_value() {
        let approx = nagaev_approx(&pareto3(), 100.0, 50.0).unwrap();
        let normal = 2.866_515_718_791_939e-7;
        let jump = 100.0 * 0.5 * 3f64.powf(-1.5) * 50f64.powi(-3);
        assert!((approx.normal_term.unwrap() / normal - 1.0).abs() < 1e-12);
        assert!((approx.jump_term.unwrap() / jump - 1.0).abs() < 1e-12);
        assert!((approx.value / (normal + jump) - 1.0).abs() < 1e-12);
        assert!((approx.value - 7.73e-5).abs() < 5e-8);
        assert!(approx.value >= approx.normal_term.unwrap());
        assert!(approx.value >= approx.jump_term.unwrap());
    }

    #[test]
    fn nagaev_term_dominance() {
        let law = pareto3();
        let deep = nagaev_approx(&law, 100.0, 10.0).unwrap();
        assert!(deep.normal_term.unwrap() > 10.0 * deep.jump_term.unwrap());
        // beyond sqrt((alpha - 2 + delta) log n) standard deviations
        let n: f64 = 1e6;
        let x = n.sqrt() * ((1.0 + 1.0) * n.ln()).sqrt();
        let far = nagaev_approx(&law, n, x).unwrap();
        assert!(far.jump_term.unwrap() > far.normal_term.unwrap());
    }

    #[test]
    fn nagaev_preconditions() {
        assert!(nagaev_approx(&pareto3(), 100.0, 5.0).is_err());
        let raw = StepLaw::symmetric_pareto(3.0, 0.5, false).unwrap();
        assert!(nagaev_approx(&raw, 100.0, 50.0).is_err());
        assert!(nagaev_approx(&StepLaw::std_normal(), 100.0, 50.0).is_err());
    }

    #[test]
    fn subexp_examples() {
        let w = StepLaw::weibull_type(0.5).unwrap();
        let a = subexp_approx(&w, 10.0, 100.0).unwrap();
        assert!((a.value / (10.0 * (-10f64).exp()) - 1.0).abs() < 1e-14);
        assert!((a.value - 4.54e-4).abs() < 1e-6);
        let single = subexp_approx(&w, 1.0, 7.0).unwrap();
        assert_eq!(single.value, w.survival(7.0));
        let p = StepLaw::pareto_positive(3.0, 1.0).unwrap();
        let a = subexp_approx(&p, 50.0, 30.0).unwrap();
        assert!((a.value / (50.0 / 27_000.0) - 1.0).abs() < 1e-14);
        assert!(subexp_approx(&StepLaw::std_normal(), 10.0, 5.0).is_err());
        // second Nagaev term equals the subexponential value
        let law = pareto3();
        let nag = nagaev_approx(&law, 100.0, 50.0).unwrap();
        let sub = subexp_approx(&law, 100.0, 50.0).unwrap();
        assert_eq!(nag.jump_term.unwrap(), sub.value);
    }

    #[test]
    fn rozovskii_branches() {
        let tail = LnTail {
            gamma: 1.5,
            lambda: 1.0,
            beta: 0.0,
            xi: 0.0,
            c: 1.0,
        };
        let n = 1000.0;
        let threshold = rozovskii_threshold(1.5, 1.0, n).unwrap();
        let below = rozovskii_ln_approx(tail, n, 0.5 * threshold).unwrap();
        assert_eq!(below.regime, ApproxRegime::RozovskiiBelow);
        assert_eq!(below.value, normal_survival(0.5 * threshold / n.sqrt()));
        let above = rozovskii_ln_approx(tail, n, 2.0 * threshold).unwrap();
        assert_eq!(above.regime, ApproxRegime::RozovskiiAbove);
        assert_eq!(above.correction, Some(1.0));
        assert!(rozovskii_ln_approx(LnTail { gamma: 2.5, ..tail }, n, 100.0).is_err());
        assert!(rozovskii_ln_approx(tail, n, 2.0).is_err());
    }

    #[test]
    fn rozovskii_gamma_two_correction() {
        let tail = LnTail {
            gamma: 2.0,
            lambda: 1.0,
            beta: -2.0,
            xi: 0.0,
            c: 1.0,
        };
        let n = 50.0;
        for x in [500.0, 2000.0] {
            let a = rozovskii_ln_approx(tail, n, x).unwrap();
            let l: f64 = f64::ln(x);
            let want = (2.0 * n * l * l / (x * x)).exp();
            assert!((a.correction.unwrap() / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rozovskii_ratio_at_threshold_tends_to_exp_lambda() {
        // log of value / (n F(gamma_n)) over lambda approaches 1 as n grows
        for lambda in [0.5, 1.0, 2.0] {
            let tail = LnTail {
                gamma: 2.0,
                lambda,
                beta: -2.0,
                xi: 0.0,
                c: 1.0,
            };
            let ratio = |n: f64| {
                let g = rozovskii_threshold(2.0, lambda, n).unwrap();
                let a = rozovskii_ln_approx(tail, n, g).unwrap();
                assert_eq!(a.regime, ApproxRegime::RozovskiiAbove);
                a.correction.unwrap().ln() / lambda
            };
            let seq: Vec<f64> = [1e6, 1e12, 1e50, 1e150, 1e300]
                .iter()
                .map(|&n| ratio(n))
                .collect();
            assert!(
                seq.windows(2)
                    .all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()),
                "{seq:?}"
            );
            assert!((seq[4] - 1.0).abs() < 0.06, "{seq:?}");
        }
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        for (hits, r) in [
            (0, 1000),
            (1, 1000),
            (500, 1000),
            (1000, 1000),
            (77, 1_000_000),
        ] {
            let e = MCTailEstimate::from_hits(hits, r);
            assert!(e.ci_low <= e.estimate && e.estimate <= e.ci_high);
            assert_eq!((e.estimate * r as f64).round() as u64, hits);
        }
    }

    #[test]
    fn mc_tail_symmetry() {
        // five standard errors: a single run should essentially never miss
        for (n, r, seed) in [(1, 1_000_000u64, 3), (4, 200_000, 4)] {
            let e = mc_tail(&StepLaw::std_normal(), n, 0.0, r, seed, false).unwrap();
            let se = (0.25 / r as f64).sqrt();
            assert!((e.estimate - 0.5).abs() < 5.0 * se, "{e:?}");
        }
    }

    #[test]
    fn mc_tail_is_deterministic_across_pools() {
        let law = StepLaw::symmetric_pareto(0.8, 0.5, false).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_tail_many(&law, 20, &[10.0, 100.0], 300_000, 9, false).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn mc_tail_preconditions() {
        assert!(mc_tail(&StepLaw::std_normal(), 1, 0.0, 999, 1, false).is_err());
        let no_mean = StepLaw::pareto_positive(0.9, 1.0).unwrap();
        assert!(mc_tail(&no_mean, 3, 0.0, 1000, 1, true).is_err());
    }
}
