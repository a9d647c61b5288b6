use serde::Serialize;
use serde_json::json;
use walkmax::ldtheory::{
    mc_tail_many, nagaev_approx, normal_approx, rozovskii_ln_approx, subexp_approx, LnTail,
    TailApprox,
};
use walkmax::norming::{
    max_p_bound, min_block_bound, separating_sequences, NormingError, Regime, TailClass,
};
use walkmax::scenarios::{self, ScenarioOutcome, SCENARIOS};
use walkmax::simulate::{
    block_maxima, default_norming, ensemble_points, ensemble_topk, mv_component_maxima,
    random_index_maxima, random_sum_tail, EnsembleSummary, ExperimentPlan,
};
use walkmax::stats::hill_with;
use walkmax::{Error, StepLaw};

use crate::args::*;
use crate::output::{Cell, Table};

/// What a subcommand produced.
pub struct Rendered {
    pub text: String,
    /// False when a verification failed.
    pub ok: bool,
}

impl Rendered {
    fn ok(text: String) -> Self {
        Rendered { text, ok: true }
    }
}

/// Failure of a subcommand; all of these are reported as usage errors.
#[derive(Debug)]
pub enum Failure {
    Lib(Error),
    Usage(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Usage(s) => f.write_str(s),
        }
    }
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Lib(e.into())
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    s
}

pub fn run(command: &Command) -> Result<Rendered, Failure> {
    let format = command.common().format;
    match command {
        Command::Constants(a) => constants(a, format),
        Command::TailApprox(a) => tail_approx(a, format),
        Command::McTail(a) => mc_tail(a, format),
        Command::Maxima(a) => {
            let e = &a.ensemble;
            let plan = ExperimentPlan::new(e.law, e.n, a.p, e.k, e.replications, e.seed, e.regime)?;
            Ok(ensemble(&ensemble_topk(&plan)?, format))
        }
        Command::Blocks(a) => {
            let e = &a.ensemble;
            let plan =
                ExperimentPlan::blocks(e.law, e.n, a.r, e.k, e.replications, e.seed, e.regime)?;
            let out = block_maxima(&plan)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            Ok(ensemble(&out, format))
        }
        Command::RandomIndex(a) => {
            let e = &a.ensemble;
            let plan = ExperimentPlan::new(e.law, e.n, a.p, e.k, e.replications, e.seed, e.regime)?
                .with_index_law(a.index);
            let out = random_index_maxima(&plan)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            Ok(ensemble(&out, format))
        }
        Command::RandomSum(a) => random_sum(a, format),
        Command::MvMaxima(a) => mv_maxima(a, format),
        Command::Hill(a) => hill(a, format),
        Command::Verify(a) => verify(a, format),
    }
}

fn table_cell<T>(r: Result<T, NormingError>, explicit: bool) -> Result<Option<T>, Failure> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(NormingError::NoTableRow(_)) => Ok(None),
        Err(_) if !explicit => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn constants(a: &ConstantsArgs, format: Format) -> Result<Rendered, Failure> {
    let pair = default_norming(&a.law, a.n, a.p, a.regime)?;
    let class = a.class.unwrap_or_else(|| a.law.tail_class());
    let n = a.n as f64;
    // Table cells stay blank where the class has no row or the walk is
    // shorter than 3 steps; with an explicit --class such errors are reported.
    let explicit = a.class.is_some() && a.n >= 3;
    let separating = table_cell(separating_sequences(&class, n, a.slack), explicit)?;
    let max_p = table_cell(max_p_bound(&class, n, a.slack), explicit)?;
    let min_block = table_cell(min_block_bound(&class, n), explicit)?;
    let text = match format {
        Format::Json => json(&json!({
            "regime": a.regime,
            "law": a.law.to_string(),
            "n": a.n,
            "p": a.p,
            "norming": pair,
            "class": class.to_string(),
            "slack": a.slack,
            "separating": separating,
            "max_p": max_p,
            "min_block": min_block,
        })),
        Format::Csv => {
            let mut t = Table::new(&[
                "regime",
                "law",
                "n",
                "p",
                "center",
                "scale",
                "class",
                "xi",
                "psi",
                "max_p",
                "min_block",
                "min_block_diverging",
            ]);
            t.row(vec![
                a.regime.to_string().into(),
                a.law.to_string().into(),
                a.n.into(),
                a.p.into(),
                pair.center.into(),
                pair.scale.into(),
                class.to_string().into(),
                separating.map(|s| s.xi).into(),
                separating.map(|s| s.psi).into(),
                max_p.into(),
                min_block.map(|b| b.value).into(),
                min_block.map(|b| b.diverging_ratio).into(),
            ]);
            t.finish()
        }
    };
    Ok(Rendered::ok(text))
}

fn ln_tail(class: Option<TailClass>) -> Result<LnTail, Failure> {
    match class {
        Some(TailClass::LogNormalType {
            gamma,
            lambda,
            beta,
            xi,
            c,
        }) => Ok(LnTail {
            gamma,
            lambda,
            beta,
            xi,
            c,
        }),
        _ => Err(Failure::Usage(
            "rozovskii needs --class ln:gamma=..,lambda=..[,beta=..,xi=..,c=..]".into(),
        )),
    }
}

fn tail_approx(a: &TailApproxArgs, format: Format) -> Result<Rendered, Failure> {
    let values: Vec<TailApprox> =
        a.x.iter()
            .map(|&x| -> Result<TailApprox, Failure> {
                Ok(match a.method {
                    Method::Normal => normal_approx(a.n, x)?,
                    Method::Nagaev => nagaev_approx(&a.law, a.n, x)?,
                    Method::Subexp => subexp_approx(&a.law, a.n, x)?,
                    Method::Rozovskii => rozovskii_ln_approx(ln_tail(a.class)?, a.n, x)?,
                })
            })
            .collect::<Result<_, _>>()?;
    let text = match format {
        Format::Json => json(&values),
        Format::Csv => {
            let mut t = Table::new(&[
                "regime",
                "law",
                "n",
                "x",
                "value",
                "normal_term",
                "jump_term",
                "correction",
                "beyond_psi",
            ]);
            for v in &values {
                t.row(vec![
                    serde_json::to_value(v.regime)
                        .ok()
                        .and_then(|r| r.as_str().map(String::from))
                        .into(),
                    v.law.clone().into(),
                    v.n.into(),
                    v.x.into(),
                    v.value.into(),
                    v.normal_term.into(),
                    v.jump_term.into(),
                    v.correction.into(),
                    v.beyond_psi.into(),
                ]);
            }
            t.finish()
        }
    };
    Ok(Rendered::ok(text))
}

fn mc_tail(a: &McTailArgs, format: Format) -> Result<Rendered, Failure> {
    let estimates = mc_tail_many(&a.law, a.n, &a.x, a.replications, a.seed, a.centered)?;
    let text = match format {
        Format::Json => json(&json!({
            "law": a.law.to_string(),
            "n": a.n,
            "seed": a.seed,
            "centered": a.centered,
            "x": a.x,
            "estimates": estimates,
        })),
        Format::Csv => {
            let mut t = Table::new(&[
                "law",
                "n",
                "x",
                "estimate",
                "hits",
                "replications",
                "ci_low",
                "ci_high",
            ]);
            for (x, e) in a.x.iter().zip(&estimates) {
                t.row(vec![
                    a.law.to_string().into(),
                    a.n.into(),
                    (*x).into(),
                    e.estimate.into(),
                    e.hits.into(),
                    e.replications.into(),
                    e.ci_low.into(),
                    e.ci_high.into(),
                ]);
            }
            t.finish()
        }
    };
    Ok(Rendered::ok(text))
}

/// Long format: one row per kept order statistic, one for the minimum, and
/// a single `empty` row for a replication without walks.
fn ensemble(out: &EnsembleSummary, format: Format) -> Rendered {
    let text = match format {
        Format::Json => json(out),
        Format::Csv => {
            let mut t = Table::new(&["replication", "walks", "kind", "rank", "value"]);
            for (i, r) in out.replications.iter().enumerate() {
                if r.is_empty() {
                    t.row(vec![
                        i.into(),
                        0u64.into(),
                        "empty".into(),
                        Cell::Empty,
                        Cell::Empty,
                    ]);
                    continue;
                }
                for (j, v) in r.top.iter().enumerate() {
                    t.row(vec![
                        i.into(),
                        r.walks.into(),
                        "top".into(),
                        (j + 1).into(),
                        (*v).into(),
                    ]);
                }
                t.row(vec![
                    i.into(),
                    r.walks.into(),
                    "min".into(),
                    Cell::Empty,
                    r.min.into(),
                ]);
            }
            t.finish()
        }
    };
    Rendered::ok(text)
}

fn random_sum(a: &RandomSumArgs, format: Format) -> Result<Rendered, Failure> {
    let e = random_sum_tail(a.intensity, &a.law, a.x, a.replications, a.seed)?;
    let approx = a.intensity * a.law.survival(a.x);
    let text = match format {
        Format::Json => json(&json!({
            "law": a.law.to_string(),
            "intensity": a.intensity,
            "x": a.x,
            "seed": a.seed,
            "estimate": e,
            "approx": approx,
        })),
        Format::Csv => {
            let mut t = Table::new(&[
                "law",
                "intensity",
                "x",
                "estimate",
                "hits",
                "replications",
                "ci_low",
                "ci_high",
                "approx",
            ]);
            t.row(vec![
                a.law.to_string().into(),
                a.intensity.into(),
                a.x.into(),
                e.estimate.into(),
                e.hits.into(),
                e.replications.into(),
                e.ci_low.into(),
                e.ci_high.into(),
                approx.into(),
            ]);
            t.finish()
        }
    };
    Ok(Rendered::ok(text))
}

fn mv_maxima(a: &MvMaximaArgs, format: Format) -> Result<Rendered, Failure> {
    let laws: Vec<StepLaw> = match (a.law.as_slice(), a.d) {
        ([law], Some(d)) => vec![*law; d],
        (laws, None) => laws.to_vec(),
        (laws, Some(d)) if laws.len() == d => laws.to_vec(),
        (laws, Some(d)) => {
            return Err(Failure::Usage(format!(
                "{} laws given for dimension {d}",
                laws.len()
            )))
        }
    };
    let out = mv_component_maxima(&laws, a.n, a.p, a.replications, a.seed)?;
    let text = match format {
        Format::Json => json(&out),
        Format::Csv => {
            let mut t = Table::new(&["replication", "component", "value"]);
            for (i, row) in out.rows.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    t.row(vec![i.into(), j.into(), (*v).into()]);
                }
            }
            t.finish()
        }
    };
    Ok(Rendered::ok(text))
}

fn hill(a: &HillArgs, format: Format) -> Result<Rendered, Failure> {
    let sample: Vec<f64> = if let Some(path) = &a.input {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Failure::Usage(format!("bad value `{l}` in input: {e}")))
            })
            .collect::<Result<_, _>>()?
    } else {
        let (Some(law), Some(n), Some(p), Some(seed)) = (a.law, a.n, a.p, a.seed) else {
            return Err(Failure::Usage(
                "give --input FILE, or --law, --n, --p and --seed to simulate".into(),
            ));
        };
        let plan = ExperimentPlan::new(law, n, p, 1, 1, seed, Regime::Frechet)?;
        ensemble_points(&plan)?
    };
    let rows: Vec<(usize, f64)> =
        a.k.iter()
            .map(|&k| Ok((k, hill_with(&sample, k, a.variant.into())?)))
            .collect::<Result<_, Failure>>()?;
    let text = match format {
        Format::Json => json(
            &rows
                .iter()
                .map(|&(k, h)| json!({"k": k, "estimate": h, "alpha": 1.0 / h, "sample_size": sample.len()}))
                .collect::<Vec<_>>(),
        ),
        Format::Csv => {
            let mut t = Table::new(&["k", "estimate", "alpha", "sample_size"]);
            for &(k, h) in &rows {
                t.row(vec![k.into(), h.into(), (1.0 / h).into(), sample.len().into()]);
            }
            t.finish()
        }
    };
    Ok(Rendered::ok(text))
}

fn verify(a: &VerifyArgs, format: Format) -> Result<Rendered, Failure> {
    let names: Vec<&str> = if a.scenario == "all" {
        SCENARIOS.to_vec()
    } else if SCENARIOS.contains(&a.scenario.as_str()) {
        vec![a.scenario.as_str()]
    } else {
        return Err(Failure::Usage(format!(
            "unknown scenario `{}`; expected `all` or one of: {}",
            a.scenario,
            SCENARIOS.join(", ")
        )));
    };
    let outcomes: Vec<ScenarioOutcome> = names
        .iter()
        .map(|name| scenarios::run(name, a.seed))
        .collect::<Result<_, _>>()?;
    let ok = outcomes.iter().all(ScenarioOutcome::pass);
    let text = match format {
        Format::Json => json(&outcomes),
        Format::Csv => {
            let mut t = Table::new(&[
                "scenario",
                "statistic",
                "observed",
                "threshold",
                "sample_size",
                "target",
                "claim",
                "pass",
            ]);
            for o in &outcomes {
                for r in &o.reports {
                    t.row(vec![
                        o.scenario.clone().into(),
                        r.statistic.clone().into(),
                        r.observed.into(),
                        r.threshold.into(),
                        r.sample_size.into(),
                        r.target.clone().into(),
                        r.claim.clone().into(),
                        r.pass.into(),
                    ]);
                }
            }
            t.finish()
        }
    };
    Ok(Rendered { text, ok })
}
