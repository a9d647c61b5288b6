//! Ensemble experiments: maxima of many independent random walks, block
//! sums of a single walk, random ensemble sizes, compound Poisson sums and
//! componentwise maxima of independent multivariate walks.
//!
//! Replication `i` of every experiment draws only from the streams
//! addressed by `(seed, domain, i, lane)`, and replications are collected in
//! index order, so the output does not depend on the thread pool it runs in.
//! Walks are generated step by step and reduced on the fly; memory per
//! replication is `O(k)` whatever `n` and `p` are.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distributions::{LawKind, Sampler, StepLaw};
use crate::ldtheory::{needs_compensation, walk_sum, MCTailEstimate, CHUNK};
use crate::norming::{
    frechet_norming, gumbel_constants_lognormal, gumbel_constants_normal,
    gumbel_constants_weibull_type, min_block_bound, NormingError, NormingPair, Regime, WeibullTail,
};
use crate::rng::{substream, Domain, StreamRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("law {law} does not fit the {regime} regime: {reason}")]
    RegimeMismatch {
        law: String,
        regime: Regime,
        reason: &'static str,
    },
    #[error(transparent)]
    Norming(#[from] NormingError),
}

/// Law of the number of walks in a random-index ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum IndexLaw {
    Deterministic(u64),
    Poisson(f64),
}

/// Everything that defines an ensemble experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub law: StepLaw,
    /// Walk length (the full walk length for block experiments).
    pub n: u64,
    /// Ensemble size; the number of blocks for block experiments.
    pub p: u64,
    /// Depth of the kept order statistics.
    pub k: usize,
    pub replications: u64,
    pub seed: u64,
    pub norming: NormingPair,
    /// Block length `r`.
    pub block: Option<u64>,
    pub index_law: Option<IndexLaw>,
}

/// Checks that a law can be normalized in the given regime.
pub fn check_regime(law: &StepLaw, regime: Regime) -> Result<(), SimError> {
    let mismatch = |reason| SimError::RegimeMismatch {
        law: law.to_string(),
        regime,
        reason,
    };
    match regime {
        Regime::GumbelNormal if !law.is_standardized() => {
            Err(mismatch("steps must have mean 0 and variance 1"))
        }
        Regime::GumbelSubexp
            if !matches!(
                law.kind(),
                LawKind::StdLogNormal | LawKind::WeibullType { .. }
            ) =>
        {
            Err(mismatch(
                "constants exist for the lognormal and Weibull-type laws only",
            ))
        }
        Regime::Frechet => match law.pareto_alpha() {
            None => Err(mismatch("steps must be a Pareto law")),
            Some(2.0) => Err(mismatch("alpha = 2 is not supported")),
            Some(_) => Ok(()),
        },
        _ => Ok(()),
    }
}

/// Constants for walks of length `n` in an ensemble of `p`: the normal
/// constants at `p`, the law's own Gumbel constants at `np`, or the Fréchet
/// pair with scale `a_{np}`.
pub fn default_norming(
    law: &StepLaw,
    n: u64,
    p: u64,
    regime: Regime,
) -> Result<NormingPair, SimError> {
    check_regime(law, regime)?;
    let (n, p) = (n as f64, p as f64);
    let pair = match regime {
        Regime::GumbelNormal => gumbel_constants_normal(p)?,
        Regime::GumbelSubexp => match *law.kind() {
            LawKind::StdLogNormal => gumbel_constants_lognormal(n * p)?,
            LawKind::WeibullType { tau } => {
                gumbel_constants_weibull_type(n * p, WeibullTail::pure(tau))?
            }
            _ => unreachable!("checked by check_regime"),
        },
        Regime::Frechet => frechet_norming(law, n, p)?,
    };
    Ok(pair)
}

impl ExperimentPlan {
    /// Plan for `p` independent walks of length `n` with default constants.
    pub fn new(
        law: StepLaw,
        n: u64,
        p: u64,
        k: usize,
        replications: u64,
        seed: u64,
        regime: Regime,
    ) -> Result<Self, SimError> {
        if n == 0 || p == 0 {
            return Err(SimError::Plan("n and p must be positive".into()));
        }
        let norming = default_norming(&law, n, p, regime)?;
        let plan = ExperimentPlan {
            law,
            n,
            p,
            k,
            replications,
            seed,
            norming,
            block: None,
            index_law: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan for one walk of length `n` cut into `n / r` blocks of length `r`.
    pub fn blocks(
        law: StepLaw,
        n: u64,
        r: u64,
        k: usize,
        replications: u64,
        seed: u64,
        regime: Regime,
    ) -> Result<Self, SimError> {
        if r < 2 {
            return Err(SimError::Plan(format!(
                "block length must be >= 2, got {r}"
            )));
        }
        if r > n {
            return Err(SimError::Plan(format!(
                "block length {r} exceeds walk length {n}"
            )));
        }
        let blocks = n / r;
        if blocks < 2 {
            return Err(SimError::Plan(format!(
                "need at least 2 blocks, got {blocks}"
            )));
        }
        let norming = default_norming(&law, r, blocks, regime)?;
        let plan = ExperimentPlan {
            law,
            n,
            p: blocks,
            k,
            replications,
            seed,
            norming,
            block: Some(r),
            index_law: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_index_law(mut self, index_law: IndexLaw) -> Self {
        self.index_law = Some(index_law);
        self
    }

    pub fn with_norming(mut self, norming: NormingPair) -> Self {
        self.norming = norming;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.k == 0 {
            return Err(SimError::Plan("k must be >= 1".into()));
        }
        if self.k as u64 > self.p {
            return Err(SimError::Plan(format!(
                "k = {} exceeds ensemble size {}",
                self.k, self.p
            )));
        }
        if self.replications == 0 {
            return Err(SimError::Plan(
                "at least one replication is required".into(),
            ));
        }
        if let Some(r) = self.block {
            if r > self.n {
                return Err(SimError::Plan(format!(
                    "block length {r} exceeds walk length {}",
                    self.n
                )));
            }
        }
        if !(self.norming.scale > 0.0) {
            return Err(SimError::Plan("norming scale must be positive".into()));
        }
        check_regime(&self.law, self.norming.regime)
    }

    /// Length of each summed segment.
    fn walk_length(&self) -> u64 {
        self.block.unwrap_or(self.n)
    }

    fn normalizer(&self) -> Normalizer {
        Normalizer::new(&self.law, self.walk_length(), &self.norming)
    }
}

/// Affine map from a raw walk sum to the normalized scale.
#[derive(Debug, Clone, Copy)]
struct Normalizer {
    regime: Regime,
    factor: f64,
    shift: f64,
    center: f64,
    scale: f64,
}

impl Normalizer {
    fn new(law: &StepLaw, n: u64, pair: &NormingPair) -> Self {
        let (factor, shift) = match pair.regime {
            Regime::GumbelNormal => (1.0 / (n as f64).sqrt(), 0.0),
            Regime::GumbelSubexp => (1.0, n as f64 * law.mean().unwrap_or(0.0)),
            Regime::Frechet => (1.0, 0.0),
        };
        Normalizer {
            regime: pair.regime,
            factor,
            shift,
            center: pair.center,
            scale: pair.scale,
        }
    }

    #[inline]
    fn max_value(&self, s: f64) -> f64 {
        (s * self.factor - self.shift - self.center) / self.scale
    }

    /// Gumbel regimes use the mirrored centering `(t + d) / c` for the
    /// minimum; the Fréchet regime uses the same map as for the maximum.
    #[inline]
    fn min_value(&self, s: f64) -> f64 {
        match self.regime {
            Regime::Frechet => self.max_value(s),
            _ => (s * self.factor - self.shift + self.center) / self.scale,
        }
    }
}

/// The `k` largest values seen so far, descending, with ties going to the
/// smaller index.
#[derive(Debug, Clone)]
pub(crate) struct TopK {
    k: usize,
    items: Vec<(f64, u64)>,
}

impl TopK {
    pub(crate) fn new(k: usize) -> Self {
        TopK {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, value: f64, index: u64) {
        if self.items.len() == self.k {
            match self.items.last() {
                Some(&(last, _)) if value <= last => return,
                _ => {}
            }
        }
        let pos = self
            .items
            .partition_point(|&(v, j)| v > value || (v == value && j < index));
        self.items.insert(pos, (value, index));
        self.items.truncate(self.k);
    }

    pub(crate) fn into_parts(self) -> (Vec<f64>, Option<u64>) {
        let argmax = self.items.first().map(|&(_, j)| j);
        (self.items.into_iter().map(|(v, _)| v).collect(), argmax)
    }
}

/// One replication of an ensemble experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    /// Normalized top order statistics, descending.
    pub top: Vec<f64>,
    /// Normalized minimum; `None` for an empty ensemble.
    pub min: Option<f64>,
    /// Walk index of the maximum.
    pub argmax: Option<u64>,
    /// Number of walks simulated.
    pub walks: u64,
}

impl ReplicationSummary {
    pub fn is_empty(&self) -> bool {
        self.walks == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub plan: ExperimentPlan,
    pub replications: Vec<ReplicationSummary>,
    /// Replications with no walks; excluded by the accessors below.
    pub empty: u64,
    pub warnings: Vec<String>,
}

impl EnsembleSummary {
    fn nonempty(&self) -> impl Iterator<Item = &ReplicationSummary> {
        self.replications.iter().filter(|r| !r.is_empty())
    }

    /// The `j`-th largest normalized value (0-based) of every non-empty
    /// replication that has one.
    pub fn order_statistic(&self, j: usize) -> Vec<f64> {
        self.nonempty()
            .filter_map(|r| r.top.get(j).copied())
            .collect()
    }

    pub fn maxima(&self) -> Vec<f64> {
        self.order_statistic(0)
    }

    pub fn minima(&self) -> Vec<f64> {
        self.nonempty().filter_map(|r| r.min).collect()
    }
}

/// `walks` consecutive walks of length `n` from one stream, reduced to
/// their normalized top-k and minimum.
fn reduce_walks(
    sampler: &Sampler,
    compensated: bool,
    n: u64,
    walks: u64,
    norm: &Normalizer,
    k: usize,
    rng: &mut StreamRng,
) -> ReplicationSummary {
    let mut top = TopK::new(k);
    let mut min = f64::INFINITY;
    for i in 0..walks {
        let s = walk_sum(sampler, n, compensated, rng);
        top.push(norm.max_value(s), i);
        min = min.min(norm.min_value(s));
    }
    let (top, argmax) = top.into_parts();
    ReplicationSummary {
        top,
        min: (walks > 0).then_some(min),
        argmax,
        walks,
    }
}

fn collect<F>(plan: &ExperimentPlan, f: F) -> Vec<ReplicationSummary>
where
    F: Fn(u64) -> ReplicationSummary + Sync + Send,
{
    (0..plan.replications).into_par_iter().map(f).collect()
}

/// Top-k and minimum of `p` independent normalized walks, per replication.
pub fn ensemble_topk(plan: &ExperimentPlan) -> Result<EnsembleSummary, SimError> {
    plan.validate()?;
    if plan.block.is_some() {
        return Err(SimError::Plan("use block_maxima for block plans".into()));
    }
    let sampler = plan.law.sampler();
    let compensated = needs_compensation(&plan.law);
    let norm = plan.normalizer();
    let replications = collect(plan, |i| {
        let mut rng = substream(plan.seed, Domain::Walk, i, 0);
        reduce_walks(
            &sampler,
            compensated,
            plan.n,
            plan.p,
            &norm,
            plan.k,
            &mut rng,
        )
    });
    Ok(EnsembleSummary {
        plan: plan.clone(),
        replications,
        empty: 0,
        warnings: Vec::new(),
    })
}

/// Extremes of the `n / r` block sums of one walk, per replication.
pub fn block_maxima(plan: &ExperimentPlan) -> Result<EnsembleSummary, SimError> {
    plan.validate()?;
    let r = plan
        .block
        .ok_or_else(|| SimError::Plan("block length is not set".into()))?;
    let mut warnings = Vec::new();
    if plan.norming.regime == Regime::GumbelNormal && plan.n >= 3 {
        let bound = min_block_bound(&plan.law.tail_class(), plan.n as f64)?;
        if (r as f64) <= bound.value {
            warnings.push(format!(
                "block length {r} does not exceed the lower bound {:.4} for walk length {}",
                bound.value, plan.n
            ));
        }
    }
    let sampler = plan.law.sampler();
    let compensated = needs_compensation(&plan.law);
    let norm = plan.normalizer();
    // consecutive blocks of one walk are consecutive segments of one stream
    let replications = collect(plan, |i| {
        let mut rng = substream(plan.seed, Domain::Block, i, 0);
        reduce_walks(&sampler, compensated, r, plan.p, &norm, plan.k, &mut rng)
    });
    Ok(EnsembleSummary {
        plan: plan.clone(),
        replications,
        empty: 0,
        warnings,
    })
}

fn draw_ensemble_size(index_law: IndexLaw, seed: u64, i: u64) -> Result<u64, SimError> {
    match index_law {
        IndexLaw::Deterministic(p) => Ok(p),
        IndexLaw::Poisson(mean) => {
            let poisson = Poisson::new(mean)
                .map_err(|e| SimError::Plan(format!("Poisson index law: {e}")))?;
            let mut rng = substream(seed, Domain::Index, i, 0);
            Ok(poisson.sample(&mut rng) as u64)
        }
    }
}

/// Like [`ensemble_topk`] with a random number of walks per replication,
/// normalized with the constants of the deterministic size `plan.p`.
///
/// Walks draw from the same streams as [`ensemble_topk`], so a
/// deterministic index law reproduces it exactly. Empty ensembles are
/// counted in `empty` and skipped by the summary accessors.
pub fn random_index_maxima(plan: &ExperimentPlan) -> Result<EnsembleSummary, SimError> {
    plan.validate()?;
    let index_law = plan
        .index_law
        .ok_or_else(|| SimError::Plan("index law is not set".into()))?;
    if let IndexLaw::Poisson(mean) = index_law {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(SimError::Plan(format!(
                "Poisson mean must be positive, got {mean}"
            )));
        }
    }
    let sizes: Vec<u64> = (0..plan.replications)
        .map(|i| draw_ensemble_size(index_law, plan.seed, i))
        .collect::<Result<_, _>>()?;
    let sampler = plan.law.sampler();
    let compensated = needs_compensation(&plan.law);
    let norm = plan.normalizer();
    let replications = collect(plan, |i| {
        let mut rng = substream(plan.seed, Domain::Walk, i, 0);
        reduce_walks(
            &sampler,
            compensated,
            plan.n,
            sizes[i as usize],
            &norm,
            plan.k,
            &mut rng,
        )
    });
    let empty = replications.iter().filter(|r| r.is_empty()).count() as u64;
    let mut warnings = Vec::new();
    if empty > 0 {
        warnings.push(format!("{empty} replications drew an empty ensemble"));
    }
    Ok(EnsembleSummary {
        plan: plan.clone(),
        replications,
        empty,
        warnings,
    })
}

/// All `p` normalized walk values of a single ensemble (replication 0 of
/// [`ensemble_topk`]). Memory is `O(p)`.
pub fn ensemble_points(plan: &ExperimentPlan) -> Result<Vec<f64>, SimError> {
    plan.validate()?;
    let sampler = plan.law.sampler();
    let compensated = needs_compensation(&plan.law);
    let norm = plan.normalizer();
    let mut rng = substream(plan.seed, Domain::Walk, 0, 0);
    Ok((0..plan.p)
        .map(|_| norm.max_value(walk_sum(&sampler, plan.n, compensated, &mut rng)))
        .collect())
}

/// Monte Carlo estimate of `P(S(t) - m(t) > x)` for the compound Poisson sum
/// `S(t)` of a Poisson(`intensity`) number of nonnegative steps, with
/// `m(t) = E X * intensity`.
pub fn random_sum_tail(
    intensity: f64,
    law: &StepLaw,
    x: f64,
    replications: u64,
    seed: u64,
) -> Result<MCTailEstimate, SimError> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(SimError::Plan(format!(
            "intensity must be positive, got {intensity}"
        )));
    }
    if !law.is_nonnegative() {
        return Err(SimError::Plan(format!("{law} must have nonnegative steps")));
    }
    if let Some(alpha) = law.pareto_alpha() {
        if alpha <= 1.0 {
            return Err(SimError::Plan(format!(
                "the tail index must exceed 1 for a finite mean, got {alpha}"
            )));
        }
    }
    let mean = law
        .mean()
        .ok_or_else(|| SimError::Plan(format!("{law} has no finite mean")))?;
    if replications == 0 {
        return Err(SimError::Plan(
            "at least one replication is required".into(),
        ));
    }
    let poisson =
        Poisson::new(intensity).map_err(|e| SimError::Plan(format!("Poisson count: {e}")))?;
    let m_t = mean * intensity;
    let sampler = law.sampler();
    let chunks = replications.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, Domain::RandomSum, c, 0);
            let size = CHUNK.min(replications - c * CHUNK);
            let mut hits = 0u64;
            for _ in 0..size {
                let count = poisson.sample(&mut rng) as u64;
                let s = walk_sum(&sampler, count, false, &mut rng);
                hits += u64::from(s - m_t > x);
            }
            hits
        })
        .sum();
    Ok(MCTailEstimate::from_hits(hits, replications))
}

/// Componentwise maxima of `p` independent `d`-dimensional walks whose
/// components are independent with laws `laws`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MvMaxima {
    pub laws: Vec<StepLaw>,
    pub norming: Vec<NormingPair>,
    pub n: u64,
    pub p: u64,
    pub seed: u64,
    /// One row per replication, one column per component.
    pub rows: Vec<Vec<f64>>,
}

impl MvMaxima {
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|row| row[j]).collect()
    }
}

/// Per replication, the vector of normalized componentwise maxima
/// `(max_i S^(j)_ni - d^(j)) / a^(j)_np`. Component 0 reproduces the
/// top-1 values of [`ensemble_topk`] in the Fréchet regime with the same seed.
pub fn mv_component_maxima(
    laws: &[StepLaw],
    n: u64,
    p: u64,
    replications: u64,
    seed: u64,
) -> Result<MvMaxima, SimError> {
    if laws.is_empty() {
        return Err(SimError::Plan("at least one component is required".into()));
    }
    if n == 0 || p == 0 || replications == 0 {
        return Err(SimError::Plan(
            "n, p and the replication count must be positive".into(),
        ));
    }
    let alpha = laws[0].pareto_alpha();
    for law in laws {
        check_regime(law, Regime::Frechet)?;
        if law.pareto_alpha() != alpha {
            return Err(SimError::Plan(
                "all components must share the same tail index".into(),
            ));
        }
    }
    let norming: Vec<NormingPair> = laws
        .iter()
        .map(|law| default_norming(law, n, p, Regime::Frechet))
        .collect::<Result<_, _>>()?;
    let parts: Vec<(Sampler, bool, Normalizer)> = laws
        .iter()
        .zip(&norming)
        .map(|(law, pair)| {
            (
                law.sampler(),
                needs_compensation(law),
                Normalizer::new(law, n, pair),
            )
        })
        .collect();
    let rows = (0..replications)
        .into_par_iter()
        .map(|i| {
            parts
                .iter()
                .enumerate()
                .map(|(j, (sampler, compensated, norm))| {
                    let mut rng = substream(seed, Domain::Walk, i, j as u64);
                    reduce_walks(sampler, *compensated, n, p, norm, 1, &mut rng).top[0]
                })
                .collect()
        })
        .collect();
    Ok(MvMaxima {
        laws: laws.to_vec(),
        norming,
        n,
        p,
        seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldtheory::{normal_cdf, LimitLaw};
    use crate::stats::{dkw_threshold, ks_distance, ks_two_sample};
    use proptest::prelude::*;

    fn normal_plan(n: u64, p: u64, k: usize, reps: u64, seed: u64) -> ExperimentPlan {
        ExperimentPlan::new(
            StepLaw::std_normal(),
            n,
            p,
            k,
            reps,
            seed,
            Regime::GumbelNormal,
        )
        .unwrap()
    }

    #[test]
    fn single_walk_shape() {
        // p = 1 is below the index where normal constants exist; supply one
        let plan = ExperimentPlan {
            p: 1,
            ..normal_plan(1, 3, 1, 50, 2)
        };
        let out = ensemble_topk(&plan).unwrap();
        assert_eq!(out.replications.len(), 50);
        assert!(out
            .replications
            .iter()
            .all(|r| r.top.len() == 1 && r.walks == 1));
        let d = plan.norming.center;
        let mut rng = substream(2, Domain::Walk, 0, 0);
        let z = StepLaw::std_normal().sample(&mut rng);
        assert!((out.replications[0].top[0] - d * (z - d)).abs() < 1e-12);
    }

    #[test]
    fn topk_sorted_and_min_below() {
        let out = ensemble_topk(&normal_plan(8, 50, 4, 40, 5)).unwrap();
        for r in &out.replications {
            assert!(r.top.windows(2).all(|w| w[0] >= w[1]));
            let d = out.plan.norming.center;
            // mirrored centering: min is d (t + d) while top is d (t - d)
            assert!(r.min.unwrap() - 2.0 * d * d <= *r.top.last().unwrap() + 1e-9);
        }
    }

    #[test]
    fn normal_top1_matches_exact_finite_p_law() {
        let plan = normal_plan(64, 1000, 1, 2000, 41);
        let out = ensemble_topk(&plan).unwrap();
        let d = plan.norming.center;
        let exact = |x: f64| normal_cdf(d + x / d).powf(1000.0);
        let ks = ks_distance(&out.maxima(), exact).unwrap();
        assert!(ks <= dkw_threshold(2000, 1e-3).unwrap(), "ks {ks}");
    }

    #[test]
    fn regime_mismatches_rejected() {
        let raw = StepLaw::symmetric_pareto(3.0, 0.5, false).unwrap();
        assert!(ExperimentPlan::new(raw, 10, 10, 1, 10, 1, Regime::GumbelNormal).is_err());
        assert!(
            ExperimentPlan::new(StepLaw::std_normal(), 10, 10, 1, 10, 1, Regime::Frechet).is_err()
        );
        let two = StepLaw::symmetric_pareto(2.0, 0.5, false).unwrap();
        assert!(ExperimentPlan::new(two, 10, 10, 1, 10, 1, Regime::Frechet).is_err());
        let pareto = StepLaw::pareto_positive(1.5, 1.0).unwrap();
        assert!(ExperimentPlan::new(pareto, 10, 10, 1, 10, 1, Regime::GumbelSubexp).is_err());
        assert!(ExperimentPlan::new(
            StepLaw::std_normal(),
            10,
            10,
            11,
            10,
            1,
            Regime::GumbelNormal
        )
        .is_err());
    }

    #[test]
    fn frechet_top1_power_transform_is_near_uniform() {
        let law = StepLaw::symmetric_pareto(1.5, 0.5, false).unwrap();
        let plan = ExperimentPlan::new(law, 100, 200, 1, 1000, 8, Regime::Frechet).unwrap();
        assert_eq!(plan.norming.center, 0.0);
        let out = ensemble_topk(&plan).unwrap();
        let limit = LimitLaw::FrechetPower {
            alpha: 1.5,
            p_plus: 0.5,
        };
        let u: Vec<f64> = out.maxima().iter().map(|&x| limit.cdf(x)).collect();
        let ks = ks_distance(&u, |v| v.clamp(0.0, 1.0)).unwrap();
        assert!(ks <= dkw_threshold(1000, 1e-3).unwrap() + 0.015, "ks {ks}");
    }

    #[test]
    fn subexp_regime_uses_law_constants() {
        let law = StepLaw::weibull_type(0.5).unwrap();
        let plan = ExperimentPlan::new(law, 10, 100, 1, 10, 3, Regime::GumbelSubexp).unwrap();
        let expected = gumbel_constants_weibull_type(1000.0, WeibullTail::pure(0.5)).unwrap();
        assert_eq!(plan.norming, expected);
        let out = ensemble_topk(&plan).unwrap();
        assert_eq!(out.maxima().len(), 10);
    }

    #[test]
    fn block_shape_and_validation() {
        let plan =
            ExperimentPlan::blocks(StepLaw::std_normal(), 8, 4, 1, 5, 1, Regime::GumbelNormal);
        // two blocks are fewer than the three the normal constants need
        assert!(plan.is_err());
        let law = StepLaw::symmetric_pareto(1.5, 0.5, false).unwrap();
        let plan = ExperimentPlan::blocks(law, 8, 4, 2, 5, 1, Regime::Frechet).unwrap();
        assert_eq!(plan.p, 2);
        let out = block_maxima(&plan).unwrap();
        assert!(out
            .replications
            .iter()
            .all(|r| r.walks == 2 && r.top.len() == 2));
        assert!(ExperimentPlan::blocks(law, 8, 9, 1, 5, 1, Regime::Frechet).is_err());
        assert!(ExperimentPlan::blocks(law, 8, 1, 1, 5, 1, Regime::Frechet).is_err());
    }

    #[test]
    fn block_sums_telescope_to_the_walk() {
        let sampler = StepLaw::std_normal().sampler();
        let (r, blocks) = (16u64, 5u64);
        let mut rng = substream(3, Domain::Block, 0, 0);
        let block_sums: Vec<f64> = (0..blocks)
            .map(|_| walk_sum(&sampler, r, false, &mut rng))
            .collect();
        let mut rng = substream(3, Domain::Block, 0, 0);
        let mut walk = 0.0;
        let mut path = vec![0.0];
        for _ in 0..r * blocks {
            walk += sampler.draw(&mut rng);
            path.push(walk);
        }
        let total: f64 = block_sums.iter().sum();
        assert!((total - walk).abs() < 1e-10);
        for (i, b) in block_sums.iter().enumerate() {
            let diff = path[(i as u64 + 1) as usize * r as usize] - path[i * r as usize];
            assert!((b - diff).abs() < 1e-10);
        }
    }

    #[test]
    fn normal_block_sums_match_exact_law() {
        let n = 1u64 << 18;
        let plan = ExperimentPlan::blocks(
            StepLaw::std_normal(),
            n,
            4096,
            1,
            500,
            12,
            Regime::GumbelNormal,
        )
        .unwrap();
        assert_eq!(plan.p, 64);
        let out = block_maxima(&plan).unwrap();
        let d = plan.norming.center;
        let exact = |x: f64| normal_cdf(d + x / d).powf(64.0);
        let ks = ks_distance(&out.maxima(), exact).unwrap();
        assert!(ks <= dkw_threshold(500, 1e-3).unwrap(), "ks {ks}");
    }

    #[test]
    fn short_blocks_warn() {
        let plan = ExperimentPlan::blocks(
            StepLaw::std_normal(),
            1000,
            10,
            1,
            2,
            1,
            Regime::GumbelNormal,
        )
        .unwrap();
        let out = block_maxima(&plan).unwrap();
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn deterministic_index_reproduces_fixed_ensemble() {
        let plan = normal_plan(16, 100, 2, 30, 77);
        let fixed = ensemble_topk(&plan).unwrap();
        let random =
            random_index_maxima(&plan.clone().with_index_law(IndexLaw::Deterministic(100)))
                .unwrap();
        assert_eq!(fixed.replications, random.replications);
    }

    #[test]
    fn poisson_index_close_to_fixed() {
        let fixed = ensemble_topk(&normal_plan(16, 1000, 1, 2000, 1)).unwrap();
        let plan = normal_plan(16, 1000, 1, 2000, 2).with_index_law(IndexLaw::Poisson(1000.0));
        let random = random_index_maxima(&plan).unwrap();
        assert_eq!(random.empty, 0);
        let ks = ks_two_sample(&fixed.maxima(), &random.maxima()).unwrap();
        assert!(ks <= 0.05, "ks {ks}");
    }

    #[test]
    fn sparse_poisson_index_flags_empty_replications() {
        let reps = 4000;
        let plan = normal_plan(2, 3, 1, reps, 6).with_index_law(IndexLaw::Poisson(0.1));
        let out = random_index_maxima(&plan).unwrap();
        let expected = reps as f64 * (-0.1f64).exp();
        let sd = (reps as f64 * (-0.1f64).exp() * (1.0 - (-0.1f64).exp())).sqrt();
        assert!((out.empty as f64 - expected).abs() < 4.0 * sd);
        assert_eq!(out.maxima().len() as u64, reps - out.empty);
        assert_eq!(out.minima().len() as u64, reps - out.empty);
    }

    #[test]
    fn random_sum_edge_cases() {
        let law = StepLaw::pareto_positive(1.5, 1.0).unwrap();
        let m_t = 3.0 * 1e-9;
        let e = random_sum_tail(1e-9, &law, -m_t - 1.0, 2000, 1).unwrap();
        assert_eq!(e.estimate, 1.0);
        let e = random_sum_tail(1e-9, &law, 0.0, 2000, 1).unwrap();
        assert_eq!(e.estimate, 0.0);
        let e = random_sum_tail(50.0, &law, -150.0 - 1.0, 2000, 1).unwrap();
        assert_eq!(e.estimate, 1.0);
        let heavy = StepLaw::pareto_positive(1.0, 1.0).unwrap();
        assert!(random_sum_tail(5.0, &heavy, 10.0, 100, 1).is_err());
        assert!(random_sum_tail(5.0, &StepLaw::std_normal(), 10.0, 100, 1).is_err());
    }

    #[test]
    fn mv_single_component_is_top1() {
        let law = StepLaw::symmetric_pareto(1.5, 0.5, false).unwrap();
        let plan = ExperimentPlan::new(law, 20, 30, 1, 25, 4, Regime::Frechet).unwrap();
        let fixed = ensemble_topk(&plan).unwrap();
        let mv = mv_component_maxima(&[law], 20, 30, 25, 4).unwrap();
        assert_eq!(mv.component(0), fixed.maxima());
    }

    #[test]
    fn mv_rejects_mixed_indices() {
        let a = StepLaw::symmetric_pareto(1.5, 0.5, false).unwrap();
        let b = StepLaw::symmetric_pareto(1.2, 0.5, false).unwrap();
        assert!(mv_component_maxima(&[a, b], 10, 10, 10, 1).is_err());
        assert!(mv_component_maxima(&[a, StepLaw::std_normal()], 10, 10, 10, 1).is_err());
    }

    #[test]
    fn results_do_not_depend_on_pool_size() {
        let plan = normal_plan(8, 40, 3, 64, 10);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ensemble_topk(&plan).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    proptest! {
        #[test]
        fn topk_matches_full_sort(
            values in prop::collection::vec(prop::sample::select(vec![-1.0, 0.0, 0.5, 2.0, 3.0]), 1..60),
            k in 1usize..8,
        ) {
            let mut top = TopK::new(k);
            for (i, &v) in values.iter().enumerate() {
                top.push(v, i as u64);
            }
            let mut all: Vec<(f64, u64)> =
                values.iter().enumerate().map(|(i, &v)| (v, i as u64)).collect();
            all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            all.truncate(k);
            prop_assert_eq!(top.items, all);
        }
    }
}
