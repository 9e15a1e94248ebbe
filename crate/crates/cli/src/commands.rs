//! Subcommand adapters: load input, call the library, assemble the report.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::json;
use tvb_core::calib_chisq::{self, ChiSqOptions, Continuity, Direction, ProportionalityRule};
use tvb_core::data::{self, ColumnMap, Dataset, FeatureSpec};
use tvb_core::noise_est::{self, Estimator};
use tvb_core::report::{self, AuditReport, CsvTable, Format, Metadata};
use tvb_core::sim::{self, CatchModel};
use tvb_core::{auc, calib_logistic, confusion, tvb_bounds, Error, Result};

use crate::{
    AuditCommand, Cli, Command, ContinuityArg, DataArgs, DirectionArg, EstimatorArg, FamilyArg,
    OutputFormat, PropRuleArg, SimulateCommand,
};

fn seed(cli: &Cli) -> Result<u64> {
    if let Some(s) = cli.seed {
        return Ok(s);
    }
    match std::env::var("TVB_AUDIT_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::InvalidParameter(format!("TVB_AUDIT_SEED `{v}` is not an integer"))
        }),
        Err(_) => Ok(0),
    }
}

fn column_map(a: &DataArgs, prob: Option<&str>) -> ColumnMap {
    ColumnMap {
        score: a.score_col.clone(),
        group: a.group_col.clone(),
        label: a.label_col.clone(),
        score_level: a.level_col.clone(),
        pred: a.pred_col.clone(),
        prob: prob.map(str::to_string),
        features: a.features.iter().map(|f| FeatureSpec::parse(f)).collect(),
        noisy_group: a.noisy_group.clone(),
        baseline_group: a.baseline_group.clone(),
    }
}

fn load(a: &DataArgs, prob: Option<&str>, meta: &mut Metadata) -> Result<Dataset> {
    let d = data::load_csv(&a.input, &column_map(a, prob))?;
    meta.input_sha256 = Some(report::sha256_file(&a.input)?);
    meta.config
        .insert("noisy_group".into(), d.noisy_group().to_string());
    meta.config
        .insert("baseline_group".into(), d.baseline_group().to_string());
    Ok(d)
}

pub fn run(cli: &Cli, args: &[String]) -> Result<()> {
    let seed = seed(cli)?;
    let mut meta = Metadata::new();
    meta.seed = Some(seed);
    meta.config.insert("argv".into(), args.join(" "));
    let mut rep = match &cli.command {
        Command::Audit(AuditCommand::Rates(a)) => rates(a, &mut meta)?,
        Command::Audit(AuditCommand::Auc(a)) => auc_cmd(a, &mut meta)?,
        Command::Audit(AuditCommand::CalibLogistic(a)) => calib_logistic_cmd(a, seed, &mut meta)?,
        Command::Audit(AuditCommand::CalibChisq(a)) => calib_chisq_cmd(a, &mut meta)?,
        Command::EstimateNoise(a) => estimate_noise(a, &mut meta)?,
        Command::Simulate(SimulateCommand::Example2(a)) => {
            example2(a, seed, &mut meta, cli.out.as_deref())?
        }
        Command::Simulate(SimulateCommand::Smdi(a)) => smdi_cmd(a, seed, &mut meta)?,
    };
    rep.metadata = meta;
    emit(&rep, cli)
}

fn emit(rep: &AuditReport, cli: &Cli) -> Result<()> {
    match (&cli.out, cli.format) {
        (Some(dir), fmt) => {
            let format = match fmt {
                OutputFormat::Json => Format::Json,
                OutputFormat::Csv => Format::CsvBundle,
            };
            for p in report::render(rep, format, dir)? {
                println!("{}", p.display());
            }
        }
        (None, OutputFormat::Json) => print!("{}", report::render_json(rep)?),
        (None, OutputFormat::Csv) => {
            for (name, t) in &rep.tables {
                println!("# {name}");
                print!("{}", t.to_csv_string()?);
            }
        }
    }
    Ok(())
}

fn rates(a: &crate::RatesArgs, meta: &mut Metadata) -> Result<AuditReport> {
    let d = load(&a.data, None, meta)?;
    let noisy = confusion::group_confusion(&d, d.noisy_group(), a.threshold)?;
    let base = confusion::group_confusion(&d, d.baseline_group(), a.threshold)?;
    let grid = tvb_bounds::alpha_grid(0.0, a.alpha_max, a.alpha_step)?;
    let curve = tvb_bounds::bound_curve(&noisy, &base, &grid)?;
    let (fpr_ratio, fnr_ratio) = tvb_bounds::direction_thresholds(&noisy);
    let mut rep = AuditReport::default();
    rep.add_section(
        "rate_bounds",
        &json!({
            "threshold": a.threshold,
            "noisy": {"confusion": noisy, "metrics": noisy.metrics()},
            "baseline": {"confusion": base, "metrics": base.metrics()},
            "trichotomy": tvb_bounds::trichotomy(&noisy).ok(),
            "direction_thresholds": {"fpr_ratio": fpr_ratio, "fnr_ratio": fnr_ratio},
            "flip_regions": curve.flip_regions,
        }),
    )?;
    if let (Some(a0), Some(a1)) = (a.alpha0, a.alpha1) {
        let spec = tvb_bounds::NoiseSpec::split(a0, a1)?;
        rep.add_section(
            "rate_point",
            &json!({
                "alpha0": a0,
                "alpha1": a1,
                "true_metrics": tvb_bounds::metric_at(&noisy, &spec)?,
                "direction": tvb_bounds::direction_conditions(&noisy, &spec)?,
            }),
        )?;
    }
    if let (Some(rho), Some(gamma)) = (a.rho, a.gamma) {
        rep.add_section(
            "label_dependent",
            &tvb_bounds::label_dependent_identities(&noisy, rho, gamma)?,
        )?;
    }
    rep.add_table("rate_bounds", curve.to_table());
    Ok(rep)
}

fn auc_cmd(a: &crate::AucArgs, meta: &mut Metadata) -> Result<AuditReport> {
    let d = load(&a.data, None, meta)?;
    let mut observed = BTreeMap::new();
    for g in [d.noisy_group(), d.baseline_group()] {
        let (s, y) = auc::group_sample(&d, g);
        observed.insert(g.to_string(), auc::observed_auc(&s, &y)?);
    }
    let (s, y) = auc::group_sample(&d, d.noisy_group());
    let bounds = a
        .alpha
        .iter()
        .map(|&alpha| {
            let b = auc::auc_bounds_alpha(&s, &y, alpha)?;
            Ok(json!({"alpha": alpha, "k": b.k, "lower": b.lower, "upper": b.upper}))
        })
        .collect::<Result<Vec<_>>>()?;
    let label_dependent = a
        .rho
        .map(|rho| auc::auc_label_dependent(observed[d.noisy_group()], rho))
        .transpose()?;
    let mut table = CsvTable::new(["alpha", "k", "lower", "upper"]);
    for b in &bounds {
        table.push(vec![
            report::fmt_num(b["alpha"].as_f64().unwrap_or_default()),
            b["k"].to_string(),
            report::fmt_num(b["lower"].as_f64().unwrap_or_default()),
            report::fmt_num(b["upper"].as_f64().unwrap_or_default()),
        ]);
    }
    let mut rep = AuditReport::default();
    rep.add_section(
        "auc",
        &json!({
            "observed": observed,
            "noisy_group": d.noisy_group(),
            "bounds": bounds,
            "rho": a.rho,
            "label_dependent_auc": label_dependent,
        }),
    )?;
    rep.add_table("auc_bounds", table);
    Ok(rep)
}

fn calib_logistic_cmd(
    a: &crate::CalibLogisticArgs,
    seed: u64,
    meta: &mut Metadata,
) -> Result<AuditReport> {
    let d = load(&a.data, None, meta)?;
    let grid = tvb_bounds::alpha_grid(0.0, a.alpha_max, a.alpha_step)?;
    let env = calib_logistic::coefficient_envelope(&d, &grid, a.level)?;
    let mut rep = AuditReport::default();
    rep.add_section(
        "logistic",
        &json!({
            "level": a.level,
            "observed": {
                "beta": env.observed.fit.beta,
                "se": env.observed.fit.se,
                "p_values": env.observed.fit.p_values,
                "condition3": env.observed.condition3,
            },
            "first_mixed_alpha": env.first_alpha(|v| *v == calib_logistic::Verdict::Mixed),
            "first_miscalibrated_all_alpha": env.first_alpha(calib_logistic::Verdict::is_miscalibrated_all),
            "envelope": env.points,
        }),
    )?;
    rep.add_table("logistic_envelope", env.to_table());
    if a.random_reps > 0 {
        let sample =
            calib_logistic::random_mechanism_baseline(&d, a.random_alpha, a.random_reps, seed)?;
        let mut t = CsvTable::new(["rep", "beta_S", "beta_A"]);
        for (i, c) in sample.iter().enumerate() {
            t.push(vec![
                i.to_string(),
                report::fmt_num(c.beta_s),
                report::fmt_num(c.beta_a),
            ]);
        }
        let n = sample.len() as f64;
        rep.add_section(
            "random_baseline",
            &json!({
                "alpha": a.random_alpha,
                "reps": a.random_reps,
                "mean_beta_S": sample.iter().map(|c| c.beta_s).sum::<f64>() / n,
                "mean_beta_A": sample.iter().map(|c| c.beta_a).sum::<f64>() / n,
            }),
        )?;
        rep.add_table("random_baseline", t);
    }
    if a.gamma_noisy.is_some() || a.gamma_baseline.is_some() {
        let mut gammas = BTreeMap::new();
        gammas.insert(d.noisy_group().to_string(), a.gamma_noisy.unwrap_or(0.0));
        gammas.insert(
            d.baseline_group().to_string(),
            a.gamma_baseline.unwrap_or(0.0),
        );
        let fit = calib_logistic::corrected_calibration(&d, &gammas, seed)?;
        rep.add_section(
            "corrected",
            &json!({
                "gamma": gammas,
                "beta": fit.fit.beta,
                "se": fit.fit.se,
                "p_values": fit.fit.p_values,
            }),
        )?;
    }
    Ok(rep)
}

fn chisq_options(a: &crate::CalibChisqArgs) -> ChiSqOptions {
    ChiSqOptions {
        continuity: match a.continuity {
            ContinuityArg::Yates => Continuity::Yates,
            ContinuityArg::None => Continuity::None,
        },
        eps: a.eps,
        rule: match a.prop_rule {
            PropRuleArg::HiddenShare => ProportionalityRule::HiddenShare,
            PropRuleArg::ObservedPositives => ProportionalityRule::ObservedPositives,
        },
    }
}

fn calib_chisq_cmd(a: &crate::CalibChisqArgs, meta: &mut Metadata) -> Result<AuditReport> {
    let d = load(&a.data, None, meta)?;
    let d = data::bin_scores(&d, a.bins)?;
    let tbl = data::to_bin_table(&d)?;
    let opts = chisq_options(a);
    let direction = match a.direction {
        DirectionArg::Break => Direction::BreakCalibration,
        DirectionArg::Achieve => Direction::AchieveCalibration,
    };
    let observed = calib_chisq::chisq_statistic(&tbl, &vec![0; tbl.num_levels()], opts.continuity)?;
    let (result, n_h, reachable, critical) = match a.budget {
        Some(budget) => {
            let r = match direction {
                Direction::BreakCalibration => calib_chisq::maximize_t_greedy(&tbl, budget, &opts)?,
                Direction::AchieveCalibration => calib_chisq::minimize_t(&tbl, budget, &opts)?,
            };
            (r, Some(budget), None, None)
        }
        None => {
            let s = calib_chisq::minimal_budget(&tbl, direction, a.level, &opts, a.budget_step)?;
            let reachable = s.reachable();
            (s.result, s.budget, Some(reachable), Some(s.critical))
        }
    };
    let mut rep = AuditReport::default();
    rep.add_section(
        "chisq",
        &json!({
            "T": result.t,
            "df": result.df,
            "p_value": result.p_value,
            "h": result.h,
            "N_h": n_h,
            "constraint": {"eps": a.eps, "rule": opts.rule},
            "direction": direction.label(),
            "level": a.level,
            "critical_value": critical,
            "reachable": reachable,
            "budget_step": a.budget.is_none().then_some(a.budget_step),
            "continuity": opts.continuity,
            "observed": {"T": observed.t, "df": observed.df, "p_value": observed.p_value},
        }),
    )?;
    rep.add_table(
        "chisq_rates",
        calib_chisq::rate_table(
            &tbl,
            &result.h,
            a.confidence,
            [d.noisy_group(), d.baseline_group()],
        )?,
    );
    Ok(rep)
}

fn estimate_noise(a: &crate::EstimateNoiseArgs, meta: &mut Metadata) -> Result<AuditReport> {
    let d = load(&a.data, a.prob_col.as_deref(), meta)?;
    let probs = match &a.prob_col {
        Some(col) => d
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.prob.ok_or_else(|| Error::BadValue {
                    row: i + 1,
                    field: col.clone(),
                    value: String::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        None => noise_est::logistic_scores(&d)?,
    };
    let estimator = match a.estimator {
        EstimatorArg::Strong => Estimator::StrongSep,
        EstimatorArg::Weak => Estimator::WeakSepSup,
    };
    let est = noise_est::estimate_per_group(&d, &probs, estimator, a.q)?;
    let list: Vec<_> = est
        .values()
        .map(|e| json!({"group": e.group, "estimator": e.estimator, "gamma": e.gamma, "rho": e.rho, "q": e.q}))
        .collect();
    let mut rep = AuditReport::default();
    rep.add_section(
        "noise",
        &json!({"scorer": if a.prob_col.is_some() { "external" } else { "builtin_logistic" }, "estimates": list}),
    )?;
    Ok(rep)
}

fn example2(
    a: &crate::Example2Args,
    seed: u64,
    meta: &mut Metadata,
    out: Option<&Path>,
) -> Result<AuditReport> {
    let model = match a.family {
        FamilyArg::Inc => CatchModel::Inc { b: a.b },
        FamilyArg::Dec => CatchModel::Dec { b: a.b },
        FamilyArg::Constant => CatchModel::Constant { gamma: a.gamma },
    };
    let sim = sim::simulate_example2(a.n, &model, seed)?;
    meta.config
        .insert("family".into(), format!("{:?}", a.family).to_lowercase());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let (records, names) = sim.to_labeled("population");
        let file = std::fs::File::create(dir.join("example2.csv"))?;
        data::write_records(std::io::BufWriter::new(file), &records, &names)?;
    }
    let mut rep = AuditReport::default();
    rep.add_section(
        "simulation",
        &json!({
            "n": a.n,
            "model": model,
            "hidden": sim.hidden,
            "frac_high_risk_hidden": sim.frac_high_risk_hidden,
            "mean_true": sim.mean_true(),
            "mean_observed": sim.mean_observed(),
            "expected_hidden_mass": sim::expected_hidden_mass(&model),
        }),
    )?;
    Ok(rep)
}

fn smdi_cmd(a: &crate::SmdiArgs, seed: u64, meta: &mut Metadata) -> Result<AuditReport> {
    let d = load(&a.data, None, meta)?;
    let exp = sim::smdi_retrain_experiment(&d, &a.alpha_grid, a.reps, seed, a.t0)?;
    let summary: Vec<_> = a
        .alpha_grid
        .iter()
        .map(|&alpha| {
            let m = exp.mean_at(alpha);
            json!({
                "alpha": alpha,
                "mean_d_plus": m.map(|x| x.0),
                "mean_d_minus": m.map(|x| x.1),
                "failed_reps": exp.samples.iter().filter(|s| s.alpha == alpha && s.result.is_none()).count(),
            })
        })
        .collect();
    let mut rep = AuditReport::default();
    rep.add_section(
        "smdi",
        &json!({"t0": exp.t0, "reps": a.reps, "summary": summary}),
    )?;
    rep.add_table("smdi", exp.to_table());
    Ok(rep)
}
