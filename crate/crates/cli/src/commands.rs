//! Subcommand implementations.

use std::collections::BTreeMap;

use serde_json::Value;

use confcal_core::{
    c_min_of, calibrate as calibrate_one, calibrate_grouped, classic_level, compare_to_law,
    histogram, min_calibration_size, resolve_level, run_experiment, solve_level as solve,
    ConformalPredictor, CoverageLaw, Error, ExperimentConfig, GuaranteeSpec, InfeasiblePolicy,
    LevelChoice, PlanOptions,
};

use crate::report::float;
use crate::{
    io, AuditArgs, CalibrateArgs, CliError, CminArgs, GuaranteeArgs, Outcome, PlanArgs,
    ReportEnvelope, SimulateArgs, SolveLevelArgs,
};

const SIGN_NOTE: &str = "small-sample level solves F_C(c_min; m) <= alpha, \
     i.e. P(C >= c_min) >= 1 - alpha (the root of F_C - alpha, not F_C - (1 - alpha))";

impl GuaranteeArgs {
    pub fn to_spec(&self) -> Result<GuaranteeSpec, CliError> {
        let spec = match (self.c_nom, self.c_min, self.alpha) {
            (Some(c_nom), None, None) => GuaranteeSpec::Classic { c_nom },
            (None, Some(c_min), Some(alpha)) => GuaranteeSpec::SmallSample { c_min, alpha },
            _ => {
                return Err(CliError::Usage(
                    "pass either --c-nom or both --c-min and --alpha".into(),
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn echo_guarantee(r: &mut ReportEnvelope, spec: &GuaranteeSpec) {
    r.input("guarantee", spec);
    if matches!(spec, GuaranteeSpec::SmallSample { .. }) {
        r.warn(SIGN_NOTE);
    }
}

fn predictor_warnings(r: &mut ReportEnvelope, p: &ConformalPredictor) {
    let name = p
        .group
        .as_ref()
        .map_or_else(|| "predictor".to_string(), |g| format!("group `{g}`"));
    match p.correction {
        None => {
            r.warn(format!(
                "{name}: guarantee infeasible with {} calibration points; intervals are unbounded",
                p.n_cal
            ));
        }
        Some(q) if q < 0.0 => {
            r.warn(format!(
                "{name}: negative correction {q}; intervals shrink and are clamped to zero width where u < {}",
                -q
            ));
        }
        Some(_) => {}
    }
}

pub fn calibrate(a: &CalibrateArgs) -> Result<Outcome, CliError> {
    let spec = a.guarantee.to_spec()?;
    let source = a.input.display().to_string();
    let (records, extra) = io::read_calibration(io::open(&a.input)?, &source)?;

    let mut r = ReportEnvelope::new("calibrate");
    r.input("file", &source)
        .input("n_records", records.len())
        .input("grouped", a.grouped);
    echo_guarantee(&mut r, &spec);
    for c in extra {
        r.warn(format!("ignored column `{c}`"));
    }

    let predictors: Vec<ConformalPredictor> = if a.grouped {
        let map = calibrate_grouped(
            &records,
            &spec,
            InfeasiblePolicy::Unbounded,
            &a.expect_group,
        )?;
        r.result("n_groups", map.len());
        r.result("predictors", &map);
        map.into_values().collect()
    } else {
        let p = calibrate_one(&records, &spec, InfeasiblePolicy::Unbounded)?;
        r.result("predictor", &p);
        vec![p]
    };
    for p in &predictors {
        predictor_warnings(&mut r, p);
    }
    Ok(if predictors.iter().any(ConformalPredictor::is_unbounded) {
        Outcome::infeasible(r)
    } else {
        Outcome::ok(r)
    })
}

/// Predictors stored in a `calibrate` report, in group order.
pub fn predictors_from_report(r: &ReportEnvelope) -> Result<Vec<ConformalPredictor>, CliError> {
    let bad = |e: serde_json::Error| CliError::Input(format!("malformed calibrate report: {e}"));
    if let Some(v) = r.results.get("predictor") {
        return Ok(vec![serde_json::from_value(v.clone()).map_err(bad)?]);
    }
    if let Some(v) = r.results.get("predictors") {
        let map: BTreeMap<String, ConformalPredictor> =
            serde_json::from_value(v.clone()).map_err(bad)?;
        return Ok(map.into_values().collect());
    }
    Err(CliError::Input("report holds no predictor".into()))
}

pub fn solve_level(a: &SolveLevelArgs) -> Result<Outcome, CliError> {
    let mut r = ReportEnvelope::new("solve-level");
    r.input("n_cal", a.n_cal)
        .input("c_min", a.c_min)
        .input("alpha", a.alpha);
    r.warn(SIGN_NOTE);
    match solve(a.n_cal, a.c_min, a.alpha) {
        Ok(s) => {
            r.result("feasible", true)
                .result("m", s.m)
                .result("m_bar", s.m_bar)
                .result("q_tilde", s.q_tilde)
                .result("achieved_confidence", s.achieved_confidence);
            if let Ok(LevelChoice::Feasible { level, .. }) = classic_level(a.n_cal, a.c_min) {
                r.result("classic_level", level);
            }
            Ok(Outcome::ok(r))
        }
        Err(Error::Infeasible(msg)) => {
            r.result("feasible", false);
            r.warn(format!("{msg}; see plan-n for the calibration size needed"));
            Ok(Outcome::infeasible(r))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmin(a: &CminArgs) -> Result<Outcome, CliError> {
    let mut r = ReportEnvelope::new("cmin");
    r.input("n_cal", a.n_cal).input("alpha", a.alpha);
    let m = match (a.m, a.c_nom) {
        (Some(m), None) => {
            r.input("m", m);
            m
        }
        (None, Some(c_nom)) => {
            r.input("c_nom", c_nom);
            match classic_level(a.n_cal, c_nom)? {
                LevelChoice::Feasible { m, .. } => m,
                LevelChoice::Infeasible { required_m } => {
                    r.result("feasible", false);
                    r.warn(format!(
                        "classic predictor needs order statistic {required_m} of {} scores",
                        a.n_cal
                    ));
                    return Ok(Outcome::infeasible(r));
                }
            }
        }
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --m and --c-nom".into(),
            ))
        }
    };
    let c = c_min_of(a.n_cal, m, a.alpha)?;
    r.result("feasible", true)
        .result("m", m)
        .result("c_min", c)
        .result("confidence", 1.0 - a.alpha);
    Ok(Outcome::ok(r))
}

pub fn plan_n(a: &PlanArgs) -> Result<Outcome, CliError> {
    let mut r = ReportEnvelope::new("plan-n");
    r.input("c_min", a.c_min)
        .input("alpha", a.alpha)
        .input("q_tilde", a.q_tilde)
        .input("slack", a.slack)
        .input("cap", a.cap);
    r.warn(SIGN_NOTE);
    if a.q_tilde <= a.c_min {
        r.warn("q_tilde <= c_min: the required calibration size may be very large");
    }
    let opts = PlanOptions {
        slack: a.slack,
        cap: a.cap,
    };
    match min_calibration_size(a.c_min, a.q_tilde, a.alpha, opts) {
        Ok(p) => {
            r.result("feasible", true)
                .result("n_inf", p.n_inf)
                .result("n_sup", p.n_sup)
                .result("n_min", p.n_min)
                .result("m_at_min", p.m_at_min)
                .result("q_achieved", p.q_achieved);
            if p.n_min.is_none() {
                r.warn("no calibration size up to the cap meets the target within the slack");
            }
            Ok(Outcome::ok(r))
        }
        Err(Error::Infeasible(msg)) => {
            r.result("feasible", false);
            r.warn(msg);
            Ok(Outcome::infeasible(r))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn audit(a: &AuditArgs) -> Result<Outcome, CliError> {
    let source = a.input.display().to_string();
    let (rows, extra) = io::read_audit(io::open(&a.input)?, &source)?;
    let result = confcal_core::audit(&rows, a.confidence)?;
    let mut r = ReportEnvelope::new("audit");
    r.input("file", &source).input("confidence", a.confidence);
    for c in extra {
        r.warn(format!("ignored column `{c}`"));
    }
    r.result("hits", result.hits)
        .result("n_test", result.n_test)
        .result("point_estimate", result.point_estimate)
        .result("ci_low", result.ci_low)
        .result("ci_high", result.ci_high);
    Ok(Outcome::ok(r))
}

pub fn simulate(a: &SimulateArgs) -> Result<Outcome, CliError> {
    let spec = a.guarantee.to_spec()?;
    let mut r = ReportEnvelope::new("simulate");
    r.input("n_cal", a.n_cal)
        .input("n_mc", a.n_mc)
        .input("seed", a.seed)
        .input("bins", a.bins)
        .input("error_model", "folded_std_normal");
    echo_guarantee(&mut r, &spec);

    let cfg = ExperimentConfig {
        policy: InfeasiblePolicy::Unbounded,
        ..ExperimentConfig::new(a.n_cal, a.n_mc, spec, a.seed)
    };
    let sample = run_experiment(&cfg)?;
    let bins = histogram(&sample, a.bins)?;
    let target = match spec {
        GuaranteeSpec::Classic { c_nom } => c_nom,
        GuaranteeSpec::SmallSample { c_min, .. } => c_min,
    };

    let mean = sample.mean();
    let var = sample.variance();
    r.result("mean_coverage", mean)
        .result("variance", var)
        .result("std_error", (var / sample.len() as f64).sqrt())
        .result("target", target)
        .result("fraction_below_target", sample.fraction_below(target))
        .result("fraction_at_least_target", sample.fraction_at_least(target))
        .result(
            "histogram",
            bins.iter()
                .map(|b| serde_json::json!({"bin_low": b.lo, "bin_high": b.hi, "count": b.count}))
                .collect::<Vec<Value>>(),
        );

    let exit = match resolve_level(a.n_cal, &spec)? {
        LevelChoice::Feasible { m, level } => {
            let law = CoverageLaw::new(m, a.n_cal)?;
            r.result("m", m)
                .result("quantile_level", level)
                .result("law_mean", law.mean())
                .result("law_cdf_at_target", law.cdf(target)?)
                .result("ks_distance", compare_to_law(&sample, &law)?);
            Outcome::ok
        }
        LevelChoice::Infeasible { required_m } => {
            r.result("m", required_m)
                .result("quantile_level", float(f64::INFINITY));
            r.warn(format!(
                "guarantee infeasible with {} calibration points; every realization is unbounded",
                a.n_cal
            ));
            Outcome::infeasible
        }
    };

    if let Some(path) = &a.csv {
        io::write_histogram(path, &bins)?;
        r.input("csv", path.display().to_string());
    }
    if let Some(path) = &a.samples {
        io::write_samples(path, &sample)?;
        r.input("samples", path.display().to_string());
    }
    Ok(exit(r))
}
