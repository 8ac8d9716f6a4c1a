use std::io::Write;
use std::path::Path;

use anyhow::Context;
use reasc_core::harness::{GridPoint, RunReport};
use serde::Serialize;

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed command never leaves a partial file behind.
pub fn write_atomic<F>(path: &Path, fill: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut dyn Write) -> anyhow::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write to `{}`", path.display()))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("cannot write `{}`", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

/// One CSV row per (method, grid point).
#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    method: &'a str,
    p_target: Option<f64>,
    lambda: Option<f64>,
    c_threshold: Option<f64>,
    window_size: Option<usize>,
    calibration_size: Option<usize>,
    n_problems: usize,
    accuracy: f64,
    mean_tflops: f64,
    acc_per_tf: f64,
    mean_samples: f64,
    total_samples: usize,
    stage1_accept_ratio: Option<f64>,
    stage1_accept_accuracy: Option<f64>,
    ci95_lo: Option<f64>,
    ci95_hi: Option<f64>,
    calibration_tflops: Option<f64>,
}

pub fn write_csv(path: &Path, rows: &[(Option<GridPoint>, &RunReport)]) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        for (point, r) in rows {
            out.serialize(CsvRow {
                method: &r.method,
                p_target: point.map(|p| p.p_target),
                lambda: point.map(|p| p.lambda),
                c_threshold: point.map(|p| p.c_threshold),
                window_size: point.map(|p| p.window_size),
                calibration_size: point.map(|p| p.calibration_size),
                n_problems: r.n_problems,
                accuracy: r.accuracy,
                mean_tflops: r.mean_tflops,
                acc_per_tf: r.acc_per_tf,
                mean_samples: r.mean_samples,
                total_samples: r.total_samples,
                stage1_accept_ratio: r.stage1_accept_ratio,
                stage1_accept_accuracy: r.stage1_accept_accuracy,
                ci95_lo: r.ci95.map(|c| c.0),
                ci95_hi: r.ci95.map(|c| c.1),
                calibration_tflops: r.calibration_tflops,
            })?;
        }
        out.flush()?;
        Ok(())
    })
}

fn opt(v: Option<f64>, scale: f64) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{:.2}", x * scale))
}

/// Side-by-side table for the terminal.
pub fn print_table(reports: &[RunReport]) {
    println!(
        "{:<7} {:>8} {:>10} {:>9} {:>8} {:>17} {:>9} {:>9}",
        "method", "acc(%)", "TF", "acc/TF", "samples", "ci95(%)", "gate(%)", "gateacc"
    );
    for r in reports {
        let ci = r
            .ci95
            .map_or_else(|| "-".to_owned(), |(lo, hi)| format!("[{lo:.2}, {hi:.2}]"));
        println!(
            "{:<7} {:>8.2} {:>10.4} {:>9.2} {:>8.2} {:>17} {:>9} {:>9}",
            r.method,
            r.accuracy * 100.0,
            r.mean_tflops,
            r.acc_per_tf,
            r.mean_samples,
            ci,
            opt(r.stage1_accept_ratio, 100.0),
            opt(r.stage1_accept_accuracy, 100.0),
        );
    }
    if let Some(t) = reports.iter().find_map(|r| r.calibration_tflops) {
        println!("one-off calibration cost (total, not included above): {t:.4} TF");
    }
}
