use std::collections::HashMap;
use std::sync::OnceLock;

use anyhow::Result;
use rayon::prelude::*;

use super::args::{CellSeeds, ModelArgs};
use super::pipeline::{fit_generator, generator_seed, run_pipeline, RunSettings};
use crate::datagen::GzslDataset;
use crate::genmodels::{Generator, GeneratorKind};
use crate::metrics::{evaluate, ReportRow};
use crate::nn::stable_hash;

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub sigmas: Vec<f64>,
    pub ngs: Vec<usize>,
    pub generators: Vec<GeneratorKind>,
    pub model: ModelArgs,
    pub cell_seeds: CellSeeds,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub generator: GeneratorKind,
    pub ng: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Cell {
    pub fn settings(&self, model: &ModelArgs) -> RunSettings {
        RunSettings {
            generator: self.generator,
            ng: self.ng,
            sigma: self.sigma,
            model: ModelArgs { seed: self.seed, ..model.clone() },
        }
    }
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    /// Sorted by (σ, N_g, generator).
    pub rows: Vec<ReportRow>,
    pub failed: Vec<(Cell, String)>,
}

pub fn plan_cells(spec: &SweepSpec) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &generator in &spec.generators {
        for &ng in &spec.ngs {
            for &sigma in &spec.sigmas {
                let seed = match spec.cell_seeds {
                    CellSeeds::Common => spec.model.seed,
                    CellSeeds::Derived => {
                        spec.model.seed ^ stable_hash(format!("{generator}|{sigma}|{ng}").as_bytes())
                    }
                };
                cells.push(Cell { generator, ng, sigma, seed });
            }
        }
    }
    cells
}

fn run_cell(ds: &GzslDataset, cell: &Cell, model: &ModelArgs, fitted: Option<&Generator>) -> Result<ReportRow> {
    let s = cell.settings(model);
    let out = run_pipeline(ds, &s, fitted)?;
    let report = evaluate(&out.trained.classifier, ds)?;
    Ok(ReportRow {
        run_id: s.default_run_id(),
        sigma: s.sigma,
        ng: s.ng,
        generator: s.generator.to_string(),
        classifier: s.model.classifier.to_string(),
        loss: s.model.loss.to_string(),
        acc_unseen: report.acc_unseen,
        acc_seen: report.acc_seen,
        acc_h: report.acc_h,
    })
}

/// Runs every cell, sharing one fitted generator among cells with the same
/// generator kind and seed. Failed cells are collected, not propagated.
pub fn run_sweep(ds: &GzslDataset, spec: &SweepSpec) -> Result<SweepOutcome> {
    let cells = plan_cells(spec);
    let mut generators: HashMap<(GeneratorKind, u64), OnceLock<Result<Generator, String>>> = HashMap::new();
    for c in cells.iter().filter(|c| c.ng > 0) {
        generators.entry((c.generator, generator_seed(c.seed))).or_default();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.threads.max(1)).build()?;
    let results: Vec<Result<ReportRow, String>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let fitted = match generators.get(&(cell.generator, generator_seed(cell.seed))) {
                    Some(slot) => {
                        let model = ModelArgs { seed: cell.seed, ..spec.model.clone() };
                        let g = slot.get_or_init(|| {
                            fit_generator(ds, cell.generator, &model).map_err(|e| format!("stage `generator`: {e:#}"))
                        });
                        Some(g.as_ref().map_err(Clone::clone)?)
                    }
                    None => None,
                };
                run_cell(ds, cell, &spec.model, fitted).map_err(|e| format!("{e:#}"))
            })
            .collect()
    });
    let mut out = SweepOutcome::default();
    for (cell, r) in cells.into_iter().zip(results) {
        match r {
            Ok(row) => out.rows.push(row),
            Err(e) => out.failed.push((cell, e)),
        }
    }
    out.rows.sort_by(|a, b| {
        a.sigma
            .total_cmp(&b.sigma)
            .then(a.ng.cmp(&b.ng))
            .then(a.generator.cmp(&b.generator))
    });
    Ok(out)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut r = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // tied values share the mean of their 1-based positions
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; `None` when either
/// side is constant or fewer than two points are given.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

fn sign(rho: Option<f64>) -> String {
    match rho {
        Some(r) if r > 0.0 => format!("{r:+.2} (+)"),
        Some(r) if r < 0.0 => format!("{r:+.2} (-)"),
        Some(r) => format!("{r:+.2} (0)"),
        None => "n/a (0)".to_string(),
    }
}

/// One line per (generator, N_g) group: Spearman of A^U and A^S against σ.
pub fn trend_summary(rows: &[ReportRow]) -> Vec<String> {
    let mut groups: Vec<(String, usize)> = rows.iter().map(|r| (r.generator.clone(), r.ng)).collect();
    groups.sort();
    groups.dedup();
    groups
        .into_iter()
        .map(|(g, ng)| {
            let sel: Vec<&ReportRow> = rows.iter().filter(|r| r.generator == g && r.ng == ng).collect();
            let sigma: Vec<f64> = sel.iter().map(|r| r.sigma).collect();
            let au: Vec<f64> = sel.iter().map(|r| r.acc_unseen).collect();
            let as_: Vec<f64> = sel.iter().map(|r| r.acc_seen).collect();
            format!(
                "trend generator={g} ng={ng}: A^U vs sigma spearman {}, A^S vs sigma spearman {}",
                sign(spearman(&sigma, &au)),
                sign(spearman(&sigma, &as_))
            )
        })
        .collect()
}
