mod args;
mod output;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use reasc_core::calibration::{
    information_criteria_table, select_k_by_bic, CalibrationMode, CalibrationProfile,
};
use reasc_core::confidence::ConfidenceConfig;
use reasc_core::harness::{
    auroc, calibrate_corpus, calibration_slice, evaluate, metric_aurocs, sweep, synth_corpus,
    BootstrapOptions, CostModel, MethodSpec, RunReport, SweepBase, SweepGrid, SynthConfig,
    TokenTraceConfig, TraceCorpus,
};
use serde::Serialize;

use args::{
    AurocArgs, CalibrateArgs, Cli, Command, CompareArgs, CorpusArgs, Method, ReportArgs, RunArgs,
    SweepArgs, SynthArgs,
};

/// Bad arguments or input; maps to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 2 for usage, validation and I/O problems; 1 for internal failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    use reasc_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if cause.is::<tempfile::PersistError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Numerical(_) | E::NoEvidence | E::InvalidWeight(_) | E::InvalidFit(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Auroc(a) => cmd_auroc(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_corpus(path: &Path) -> anyhow::Result<TraceCorpus> {
    TraceCorpus::read_path(path).with_context(|| format!("reading corpus `{}`", path.display()))
}

fn load_slice(args: &CorpusArgs) -> anyhow::Result<TraceCorpus> {
    let corpus = load_corpus(&args.input)?;
    let sliced = corpus.slice(args.skip, args.limit.unwrap_or(usize::MAX));
    if sliced.is_empty() {
        return Err(usage(format!(
            "no problems left in `{}` after skipping {}",
            args.input.display(),
            args.skip
        )));
    }
    Ok(sliced)
}

fn load_profile(path: &Path) -> anyhow::Result<CalibrationProfile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading profile `{}`", path.display()))?;
    CalibrationProfile::from_json(&text)
        .with_context(|| format!("parsing profile `{}`", path.display()))
}

/// AUROC of the response score for correctness over every sample.
fn sample_auroc(
    corpus: &TraceCorpus,
    confidence: &ConfidenceConfig,
) -> anyhow::Result<Option<f64>> {
    let mut scores = Vec::with_capacity(corpus.num_samples());
    let mut labels = Vec::with_capacity(corpus.num_samples());
    for p in &corpus.problems {
        let Some(gold) = p.gold.as_deref().map(reasc_core::canonicalize) else {
            return Ok(None);
        };
        for s in &p.samples {
            scores.push(s.score(confidence)?);
            labels.push(reasc_core::canonicalize(&s.answer) == gold);
        }
    }
    match auroc(&scores, &labels) {
        Ok(v) => Ok(Some(v)),
        Err(reasc_core::Error::DegenerateLabels) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn cmd_synth(a: &SynthArgs) -> anyhow::Result<()> {
    let config = SynthConfig {
        n_problems: a.n_problems,
        samples_per_problem: a.samples_per_problem,
        n_distractors: a.n_distractors,
        prob_correct: a.prob_correct,
        conf_mean_correct: a.conf_mean_correct,
        conf_mean_incorrect: a.conf_mean_incorrect,
        conf_std: a.conf_std,
        tokens_min: a.tokens_min,
        tokens_max: a.tokens_max,
        token_level: a.token_level.then_some(TokenTraceConfig {
            token_noise: a.token_noise,
            dip_depth: a.dip_depth,
            dip_length: a.dip_length,
        }),
        seed: a.seed.seed,
    };
    let corpus = synth_corpus(&config)?;
    output::write_atomic(&a.output, |w| Ok(corpus.write_jsonl(w)?))?;
    let planted = sample_auroc(&corpus, &ConfidenceConfig::default())?;
    println!(
        "wrote {}: {} problems, {} samples, planted AUROC {}",
        a.output.display(),
        corpus.len(),
        corpus.num_samples(),
        planted.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.4}"))
    );
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs) -> anyhow::Result<()> {
    let corpus = load_slice(&a.corpus)?;
    let confidence = a.confidence.config();
    if a.mode == CalibrationMode::Offline
        && !corpus.problems[..a.calibration_size.min(corpus.len())]
            .iter()
            .all(|p| p.gold.is_some())
    {
        return Err(usage(
            "offline calibration needs gold labels; use --mode online",
        ));
    }
    if corpus.len() < a.calibration_size {
        eprintln!(
            "note: corpus has {} problems, calibrating on all of them (requested {})",
            corpus.len(),
            a.calibration_size
        );
    }
    let profile = calibrate_corpus(&corpus, a.mode, a.calibration_size, a.p_target, &confidence)?;
    println!("mode      {}", profile.mode);
    println!("mu        {:.6}", profile.mu);
    println!("sigma     {:.6}", profile.sigma);
    println!("tau_gate  {:.6}", profile.tau_gate);
    println!("p_target  {}", profile.p_target);
    if let Some(g) = &profile.gmm {
        for j in 0..g.pi.len() {
            println!(
                "component {j}: pi {:.4}  mean {:.4}  variance {:.4}",
                g.pi[j], g.means[j], g.variances[j]
            );
        }
        let (items, _) = calibration_slice(&corpus, a.calibration_size, &confidence)?;
        let scores: Vec<f64> = items.iter().map(|(s, _)| *s).collect();
        let ks: Vec<usize> = (1..=4).filter(|k| scores.len() >= 2 * k).collect();
        let table = information_criteria_table(&scores, &ks)?;
        println!("{:>2} {:>14} {:>14}", "k", "AIC", "BIC");
        for (k, fit, ic) in &table {
            let flag = if fit.is_singular() {
                "  (singular)"
            } else {
                ""
            };
            println!("{k:>2} {:>14.4} {:>14.4}{flag}", ic.aic, ic.bic);
        }
        match select_k_by_bic(&table) {
            Some(k) => println!("BIC selects k = {k}"),
            None => println!("BIC selection: every fit is singular"),
        }
    }
    output::write_atomic(&a.output, |w| {
        w.write_all(profile.to_json_pretty()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })?;
    println!("wrote {}", a.output.display());
    Ok(())
}

fn cost_model(n_params: u64) -> anyhow::Result<CostModel> {
    CostModel::new(n_params).map_err(|e| usage(e.to_string()))
}

fn bootstrap(r: &ReportArgs) -> Option<BootstrapOptions> {
    (r.n_resamples > 0).then_some(BootstrapOptions {
        n_resamples: r.n_resamples,
        seed: r.seed.seed,
    })
}

fn emit(r: &ReportArgs, reports: &[RunReport]) -> anyhow::Result<()> {
    output::print_table(reports);
    if let Some(path) = &r.output {
        output::write_json(path, reports)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &r.csv {
        let rows: Vec<_> = reports.iter().map(|rep| (None, rep)).collect();
        output::write_csv(path, &rows)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn method_spec(
    method: Method,
    profile: Option<&Path>,
    evidence: &args::EvidenceArgs,
    esc_window: usize,
    confidence: &args::ConfidenceArgs,
) -> anyhow::Result<MethodSpec> {
    Ok(match method {
        Method::Sc => MethodSpec::Sc {
            k: evidence.max_budget,
        },
        Method::Esc => MethodSpec::Esc {
            window: esc_window,
            max_k: evidence.max_budget,
        },
        Method::Asc => MethodSpec::Asc {
            c_threshold: evidence.c_threshold,
            max_k: evidence.max_budget,
        },
        Method::Reasc => {
            let path = profile.ok_or_else(|| usage("reasc needs --profile"))?;
            MethodSpec::Reasc {
                profile: load_profile(path)?,
                params: evidence.params(),
                confidence: confidence.config(),
            }
        }
    })
}

fn cmd_run(a: &RunArgs) -> anyhow::Result<()> {
    let method = method_spec(
        a.method,
        a.profile.as_deref(),
        &a.evidence,
        a.esc_window,
        &a.confidence,
    )?;
    let corpus = load_slice(&a.corpus)?;
    let cost = cost_model(a.report.n_params)?;
    let report = evaluate(&corpus, &method, &cost, bootstrap(&a.report))?;
    emit(&a.report, &[report])
}

fn cmd_compare(a: &CompareArgs) -> anyhow::Result<()> {
    let methods = [Method::Sc, Method::Esc, Method::Asc, Method::Reasc]
        .into_iter()
        .map(|m| {
            method_spec(
                m,
                Some(&a.profile),
                &a.evidence,
                a.esc_window,
                &a.confidence,
            )
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let corpus = load_slice(&a.corpus)?;
    let cost = cost_model(a.report.n_params)?;
    let reports = methods
        .iter()
        .map(|m| evaluate(&corpus, m, &cost, bootstrap(&a.report)))
        .collect::<Result<Vec<_>, _>>()?;
    emit(&a.report, &reports)
}

fn cmd_sweep(a: &SweepArgs) -> anyhow::Result<()> {
    let eval = load_slice(&a.corpus)?;
    let calib = match &a.calibration_input {
        Some(path) => load_corpus(path)?,
        None => {
            if a.corpus.skip == 0 {
                eprintln!(
                    "note: calibrating on the evaluation problems; pass --skip or --calibration-input to hold them out"
                );
            }
            load_corpus(&a.corpus.input)?
        }
    };
    if calib.is_empty() {
        return Err(usage("calibration corpus is empty"));
    }
    let base = SweepBase {
        mode: a.mode,
        params: a.evidence.params(),
        confidence: a.confidence.config(),
        p_target: a.p_target,
        calibration_size: a.calibration_size,
    };
    let grid = SweepGrid {
        p_target: a.grid_p_target.clone(),
        lambda: a.grid_lambda.clone(),
        c_threshold: a.grid_c_threshold.clone(),
        window_size: a.grid_window_size.clone(),
        calibration_size: a.grid_calibration_size.clone(),
    };
    let cost = cost_model(a.n_params)?;
    let rows = sweep(&calib, &eval, &base, &grid, &cost)?;
    println!(
        "{:>8} {:>6} {:>6} {:>6} {:>6} {:>8} {:>10} {:>9} {:>8}",
        "p_target", "lambda", "C", "window", "calib", "acc(%)", "TF", "acc/TF", "samples"
    );
    for row in &rows {
        let (p, r) = (&row.point, &row.report);
        println!(
            "{:>8} {:>6} {:>6} {:>6} {:>6} {:>8.2} {:>10.4} {:>9.2} {:>8.2}",
            p.p_target,
            p.lambda,
            p.c_threshold,
            p.window_size,
            p.calibration_size,
            r.accuracy * 100.0,
            r.mean_tflops,
            r.acc_per_tf,
            r.mean_samples
        );
    }
    if let Some(path) = &a.output {
        output::write_json(path, &rows)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &a.csv {
        let csv_rows: Vec<_> = rows.iter().map(|r| (Some(r.point), &r.report)).collect();
        output::write_csv(path, &csv_rows)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricAuroc {
    metric: String,
    auroc: f64,
}

fn cmd_auroc(a: &AurocArgs) -> anyhow::Result<()> {
    let corpus = load_slice(&a.corpus)?;
    let table = metric_aurocs(&corpus, a.window_size, a.bottom_fraction)?;
    let rows: Vec<MetricAuroc> = table
        .into_iter()
        .map(|(m, v)| MetricAuroc {
            metric: m.to_string(),
            auroc: v,
        })
        .collect();
    for r in &rows {
        println!("{:<22} {:.4}", r.metric, r.auroc);
    }
    if let Some(path) = &a.output {
        output::write_json(path, &rows)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
