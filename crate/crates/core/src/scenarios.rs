//! Named end-to-end checks. Each scenario runs a fixed experiment from one
//! seed and compares it with a closed-form target or a limit theorem.
//!
//! Thresholds are the calibrated desk-scale tolerances: DKW bands for exact
//! targets, with small allowances where only a limit law is known.

use serde::Serialize;

use crate::distributions::StepLaw;
use crate::ldtheory::{
    mc_tail, mc_tail_many, nagaev_approx, normal_cdf, normal_survival, subexp_approx, LimitLaw,
};
use crate::norming::{gumbel_constants_normal, Regime};
use crate::rng::derive_seed;
use crate::simulate::{
    ensemble_points, ensemble_topk, mv_component_maxima, random_index_maxima, random_sum_tail,
    EnsembleSummary, ExperimentPlan, IndexLaw,
};
use crate::stats::{
    correlation, empirical_quantile, hill, joint_empirical_cdf, joint_maxmin_check, ks_distance,
    ks_two_sample, GofReport,
};
use crate::Error;

/// Scenario names, in order.
pub const SCENARIOS: [&str; 12] = [
    "gumbel-normal-exact",
    "gumbel-limit-drift",
    "frechet-maxima",
    "nagaev-ratio",
    "subexp-ratio-weibull",
    "petrov-normal-zone",
    "exp-spacings",
    "joint-maxmin",
    "random-index-invariance",
    "random-sum-ratio",
    "hill-consistency",
    "mv-factorization",
];

/// DKW band for 2000 draws at level 1e-3, rounded up.
const KS_2000: f64 = 0.0437;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedSample {
    pub name: String,
    pub values: Vec<f64>,
}

/// Reports of one scenario and the raw data they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub seed: u64,
    pub reports: Vec<GofReport>,
    pub data: Vec<NamedSample>,
}

impl ScenarioOutcome {
    fn new(scenario: &str, seed: u64) -> Self {
        ScenarioOutcome {
            scenario: scenario.to_string(),
            seed,
            reports: Vec::new(),
            data: Vec::new(),
        }
    }

    fn sample(mut self, name: &str, values: Vec<f64>) -> Self {
        self.data.push(NamedSample {
            name: name.to_string(),
            values,
        });
        self
    }

    fn report(mut self, report: GofReport) -> Self {
        self.reports.push(report);
        self
    }

    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    /// Canonical JSON form; equal outcomes give equal bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcomes serialize")
    }
}

/// Runs the named scenario.
pub fn run(name: &str, seed: u64) -> Result<ScenarioOutcome, Error> {
    match name {
        "gumbel-normal-exact" => gumbel_normal_exact(seed),
        "gumbel-limit-drift" => gumbel_limit_drift(seed),
        "frechet-maxima" => frechet_maxima(seed),
        "nagaev-ratio" => nagaev_ratio(seed),
        "subexp-ratio-weibull" => subexp_ratio_weibull(seed),
        "petrov-normal-zone" => petrov_normal_zone(seed),
        "exp-spacings" => exp_spacings(seed),
        "joint-maxmin" => joint_maxmin(seed),
        "random-index-invariance" => random_index_invariance(seed),
        "random-sum-ratio" => random_sum_ratio(seed),
        "hill-consistency" => hill_consistency(seed),
        "mv-factorization" => mv_factorization(seed),
        _ => Err(Error::UnknownScenario(name.to_string())),
    }
}

fn ratio_report(name: &str, estimate: f64, target: f64, tolerance: f64, size: usize) -> GofReport {
    let ratio = estimate / target;
    GofReport::new(
        name,
        (ratio - 1.0).abs(),
        tolerance,
        size,
        format!(
            "ratio {ratio:.6} in [{}, {}]",
            1.0 - tolerance,
            1.0 + tolerance
        ),
        "Monte Carlo tail over its large-deviation approximation tends to 1",
    )
}

/// StdNormal steps, n = 64, p = 1000, R = 2000, top two and minimum.
fn normal_ensemble(seed: u64) -> Result<EnsembleSummary, Error> {
    let plan = ExperimentPlan::new(
        StepLaw::std_normal(),
        64,
        1000,
        2,
        2000,
        seed,
        Regime::GumbelNormal,
    )?;
    Ok(ensemble_topk(&plan)?)
}

fn gumbel_normal_exact(seed: u64) -> Result<ScenarioOutcome, Error> {
    let run = normal_ensemble(seed)?;
    let pair = run.plan.norming;
    let p = run.plan.p as f64;
    let maxima = run.maxima();
    // the walk sums are exactly normal, so the maximum has an exact law
    let exact = |x: f64| normal_cdf(pair.center + pair.scale * x).powf(p);
    let ks = ks_distance(&maxima, exact)?;
    Ok(ScenarioOutcome::new("gumbel-normal-exact", seed)
        .report(GofReport::new(
            "ks",
            ks,
            KS_2000,
            maxima.len(),
            "Phi(d_p + x / d_p)^p",
            "normalized top-1 follows the exact finite-p law",
        ))
        .sample("top1", maxima))
}

fn gumbel_limit_drift(seed: u64) -> Result<ScenarioOutcome, Error> {
    let ps = [1e4, 1e6, 1e8, 1e10];
    let mut values = Vec::new();
    for &p in &ps {
        let d = gumbel_constants_normal(p)?.center;
        values.push(p * normal_survival(d));
    }
    let errors: Vec<f64> = values.iter().map(|v| (v - 1.0).abs()).collect();
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    let steepest = errors.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    Ok(ScenarioOutcome::new("gumbel-limit-drift", seed)
        .report(GofReport::new(
            "max-abs-error",
            worst,
            0.1,
            ps.len(),
            "p Phi_bar(d_p) = 1",
            "p Phi_bar(d_p) lies in [0.9, 1.1]",
        ))
        .report(GofReport::new(
            "max-error-ratio",
            steepest,
            1.0 - f64::EPSILON / 2.0,
            ps.len(),
            "ratio < 1",
            "|p Phi_bar(d_p) - 1| strictly decreases in p",
        ))
        .sample("p", ps.to_vec())
        .sample("p_phi_bar", values))
}

fn frechet_maxima(seed: u64) -> Result<ScenarioOutcome, Error> {
    let law = StepLaw::symmetric_pareto(1.5, 0.5, false)?;
    let plan = ExperimentPlan::new(law, 100, 200, 1, 2000, seed, Regime::Frechet)?;
    let maxima = ensemble_topk(&plan)?.maxima();
    let limit = LimitLaw::FrechetPower {
        alpha: 1.5,
        p_plus: 0.5,
    };
    let u: Vec<f64> = maxima.iter().map(|&x| limit.cdf(x)).collect();
    let ks = ks_distance(&u, |v| v.clamp(0.0, 1.0))?;
    Ok(ScenarioOutcome::new("frechet-maxima", seed)
        .report(GofReport::new(
            "ks",
            ks,
            0.06,
            u.len(),
            "Uniform(0,1) after exp(-0.5 x^-1.5)",
            "normalized top-1 converges to the Frechet law with weight p_+",
        ))
        .sample("top1", maxima))
}

fn nagaev_ratio(seed: u64) -> Result<ScenarioOutcome, Error> {
    let law = StepLaw::symmetric_pareto(3.0, 0.5, true)?;
    let (n, x, r) = (100, 50.0, 100_000_000);
    let mc = mc_tail(&law, n, x, r, seed, false)?;
    let approx = nagaev_approx(&law, n as f64, x)?;
    Ok(ScenarioOutcome::new("nagaev-ratio", seed)
        .report(ratio_report(
            "abs-ratio-error",
            mc.estimate,
            approx.value,
            0.25,
            r as usize,
        ))
        .sample("hits", vec![mc.hits as f64])
        .sample("estimate_ci", vec![mc.estimate, mc.ci_low, mc.ci_high])
        .sample("approx", vec![approx.value]))
}

fn subexp_ratio_weibull(seed: u64) -> Result<ScenarioOutcome, Error> {
    let tau = 0.3;
    let law = StepLaw::weibull_type(tau)?;
    let n = 30u64;
    // n exp(-x^tau) = 0.05
    let x = (n as f64 / 0.05).ln().powf(1.0 / tau);
    let r = 10_000_000;
    let mc = mc_tail(&law, n, x, r, seed, true)?;
    let approx = subexp_approx(&law, n as f64, x)?;
    Ok(ScenarioOutcome::new("subexp-ratio-weibull", seed)
        .report(ratio_report(
            "abs-ratio-error",
            mc.estimate,
            approx.value,
            0.3,
            r as usize,
        ))
        .sample("x", vec![x])
        .sample("hits", vec![mc.hits as f64])
        .sample("approx", vec![approx.value]))
}

fn petrov_normal_zone(seed: u64) -> Result<ScenarioOutcome, Error> {
    let law = StepLaw::centered_exponential();
    let n = 400u64;
    let zs = [0.5, 1.0, 1.5, 2.0];
    let xs: Vec<f64> = zs.iter().map(|z| z * (n as f64).sqrt()).collect();
    let r = 10_000_000;
    // one set of walks serves every threshold
    let estimates = mc_tail_many(&law, n, &xs, r, seed, false)?;
    let mut outcome = ScenarioOutcome::new("petrov-normal-zone", seed);
    for (z, e) in zs.iter().zip(&estimates) {
        outcome = outcome.report(ratio_report(
            &format!("abs-ratio-error@x={z}"),
            e.estimate,
            normal_survival(*z),
            0.1,
            r as usize,
        ));
    }
    Ok(outcome.sample("hits", estimates.iter().map(|e| e.hits as f64).collect()))
}

fn exp_spacings(seed: u64) -> Result<ScenarioOutcome, Error> {
    let run = normal_ensemble(seed)?;
    let top1 = run.order_statistic(0);
    let top2 = run.order_statistic(1);
    let e1: Vec<f64> = top1.iter().map(|&x| (-x).exp()).collect();
    let gap: Vec<f64> = top1
        .iter()
        .zip(&top2)
        .map(|(&a, &b)| (-b).exp() - (-a).exp())
        .collect();
    let exp1 = |x: f64| if x > 0.0 { -(-x).exp_m1() } else { 0.0 };
    let ks1 = ks_distance(&e1, exp1)?;
    let ks_gap = ks_distance(&gap, exp1)?;
    let rho = correlation(&e1, &gap)?;
    let m = e1.len();
    Ok(ScenarioOutcome::new("exp-spacings", seed)
        .report(GofReport::new(
            "ks",
            ks1,
            KS_2000 + 0.01,
            m,
            "Exp(1)",
            "exp(-top1) is asymptotically standard exponential",
        ))
        .report(GofReport::new(
            "ks",
            ks_gap,
            0.06,
            m,
            "Exp(1)",
            "exp(-top2) - exp(-top1) is asymptotically standard exponential",
        ))
        .report(GofReport::new(
            "abs-correlation",
            rho.abs(),
            0.1,
            m,
            "0",
            "the first two spacings are asymptotically independent",
        ))
        .sample("exp_top1", e1)
        .sample("gap", gap))
}

fn joint_maxmin(seed: u64) -> Result<ScenarioOutcome, Error> {
    let run = normal_ensemble(seed)?;
    let maxima = run.maxima();
    let minima = run.minima();
    let report = joint_maxmin_check(&maxima, &minima, 0.0, 0.0, 0.05)?;
    Ok(ScenarioOutcome::new("joint-maxmin", seed)
        .report(report)
        .sample("max", maxima)
        .sample("min", minima))
}

fn random_index_invariance(seed: u64) -> Result<ScenarioOutcome, Error> {
    let law = StepLaw::std_normal();
    let fixed = ExperimentPlan::new(law, 64, 1000, 1, 2000, seed, Regime::GumbelNormal)?;
    // an independent seed keeps the two samples independent
    let random = ExperimentPlan::new(
        law,
        64,
        1000,
        1,
        2000,
        derive_seed(seed, 9),
        Regime::GumbelNormal,
    )?
    .with_index_law(IndexLaw::Poisson(1000.0));
    let a = ensemble_topk(&fixed)?.maxima();
    let run = random_index_maxima(&random)?;
    let b = run.maxima();
    let ks = ks_two_sample(&a, &b)?;
    Ok(ScenarioOutcome::new("random-index-invariance", seed)
        .report(GofReport::new(
            "ks-two-sample",
            ks,
            0.05,
            a.len().min(b.len()),
            "top-1 law with 1000 walks",
            "a Poisson(p) number of walks has the same limit as p walks",
        ))
        .sample("fixed", a)
        .sample("poisson", b))
}

fn random_sum_ratio(seed: u64) -> Result<ScenarioOutcome, Error> {
    let law = StepLaw::pareto_positive(1.5, 1.0)?;
    let intensity: f64 = 50.0;
    let target = 1e-3;
    // intensity * x^-1.5 = target
    let x = (intensity / target).powf(1.0 / 1.5);
    let r = 10_000_000;
    let mc = random_sum_tail(intensity, &law, x, r, seed)?;
    let approx = intensity * law.survival(x);
    Ok(ScenarioOutcome::new("random-sum-ratio", seed)
        .report(ratio_report(
            "abs-ratio-error",
            mc.estimate,
            approx,
            0.25,
            r as usize,
        ))
        .sample("x", vec![x])
        .sample("hits", vec![mc.hits as f64]))
}

fn hill_consistency(seed: u64) -> Result<ScenarioOutcome, Error> {
    let law = StepLaw::pareto_positive(2.5, 1.0)?;
    let plan = ExperimentPlan::new(law, 50, 5000, 1, 1, seed, Regime::Frechet)?;
    let points = ensemble_points(&plan)?;
    let k = 200;
    let estimate = hill(&points, k)?;
    Ok(ScenarioOutcome::new("hill-consistency", seed)
        .report(ratio_report(
            "abs-ratio-error",
            estimate,
            0.4,
            0.2,
            points.len(),
        ))
        .sample("hill", vec![estimate]))
}

fn mv_factorization(seed: u64) -> Result<ScenarioOutcome, Error> {
    let law = StepLaw::symmetric_pareto(1.5, 0.5, false)?;
    let mv = mv_component_maxima(&[law, law], 100, 200, 2000, seed)?;
    let (a, b) = (mv.component(0), mv.component(1));
    let x = empirical_quantile(&a, 0.5)?;
    let y = empirical_quantile(&b, 0.5)?;
    let joint = joint_empirical_cdf(&a, &b, x, y)?;
    let fa = a.iter().filter(|&&v| v <= x).count() as f64 / a.len() as f64;
    let fb = b.iter().filter(|&&v| v <= y).count() as f64 / b.len() as f64;
    Ok(ScenarioOutcome::new("mv-factorization", seed)
        .report(GofReport::new(
            "joint-cdf-abs-deviation",
            (joint - fa * fb).abs(),
            0.05,
            a.len(),
            format!("F1(x) F2(y) = {:.6}", fa * fb),
            "componentwise maxima of independent components are independent",
        ))
        .sample("component0", a)
        .sample("component1", b))
}
