use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use crate::metrics::ReportRow;

const REQUIRED: [&str; 9] = [
    "run_id",
    "sigma",
    "ng",
    "generator",
    "classifier",
    "loss",
    "acc_unseen",
    "acc_seen",
    "acc_h",
];

/// Reads report rows, naming the missing column or the offending line.
pub fn read_rows(path: &Path) -> Result<Vec<ReportRow>> {
    let name = path.display().to_string();
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {name}"))?;
    let header = r.headers().with_context(|| format!("{name}:1: unreadable header"))?.clone();
    let mut col = [0usize; 9];
    for (slot, want) in col.iter_mut().zip(REQUIRED) {
        *slot = header
            .iter()
            .position(|h| h == want)
            .ok_or_else(|| anyhow!("{name}: missing column `{want}`"))?;
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            anyhow!("{name}:{line}: {e}")
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<&str> {
            rec.get(col[i])
                .ok_or_else(|| anyhow!("{name}:{line}: missing value for `{}`", REQUIRED[i]))
        };
        let num = |i: usize| -> Result<f64> {
            let s = field(i)?;
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| anyhow!("{name}:{line}: malformed `{}` value `{s}`", REQUIRED[i]))
        };
        let ng = field(2)?;
        rows.push(ReportRow {
            run_id: field(0)?.to_string(),
            sigma: num(1)?,
            ng: ng
                .trim()
                .parse()
                .map_err(|_| anyhow!("{name}:{line}: malformed `ng` value `{ng}`"))?,
            generator: field(3)?.to_string(),
            classifier: field(4)?.to_string(),
            loss: field(5)?.to_string(),
            acc_unseen: num(6)?,
            acc_seen: num(7)?,
            acc_h: num(8)?,
        });
    }
    if rows.is_empty() {
        bail!("{name}: no rows");
    }
    Ok(rows)
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

/// Markdown table with columns Method, N_g, A^U, A^S, A^H (percent, 1 decimal).
pub fn render_markdown(rows: &[ReportRow]) -> String {
    let mut out = String::from("| Method | N_g | A^U | A^S | A^H |\n|---|---:|---:|---:|---:|\n");
    for r in rows {
        out.push_str(&format!(
            "| {}+{}+{} (σ={}) | {} | {} | {} | {} |\n",
            r.generator,
            r.classifier,
            r.loss,
            r.sigma,
            r.ng,
            pct(r.acc_unseen),
            pct(r.acc_seen),
            pct(r.acc_h)
        ));
    }
    out
}
