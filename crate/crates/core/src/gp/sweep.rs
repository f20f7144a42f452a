//! The full series-by-kernel BIC sweep.
//!
//! Every (series, kernel) cell is an independent fit seeded from
//! `(sweep seed, series index, kernel index)`, so the matrix is a pure
//! function of its inputs regardless of worker count or scheduling.

use crate::error::{Error, Result};
use crate::gp::{fit, FitConfig};
use crate::grammar::KernelExpr;
use crate::seed;
use crate::series::Dataset;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// J x K matrix of BIC values; rows are series, columns are canonical
/// kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct BicMatrix {
    pub series_ids: Vec<String>,
    pub kernels: Vec<String>,
    values: Vec<f64>,
}

impl BicMatrix {
    pub fn new(series_ids: Vec<String>, kernels: Vec<String>, values: Vec<f64>) -> Result<BicMatrix> {
        if values.len() != series_ids.len() * kernels.len() {
            return Err(Error::validation(format!(
                "BIC matrix size {} does not match {} series x {} kernels",
                values.len(),
                series_ids.len(),
                kernels.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("BIC matrix contains non-finite entries"));
        }
        Ok(BicMatrix { series_ids, kernels, values })
    }

    pub fn rows(&self) -> usize {
        self.series_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.kernels.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let k = self.cols();
        &self.values[row * k..(row + 1) * k]
    }

    /// CSV with a `series_id` first column and one column per kernel; cells
    /// carry 17 significant digits so values round-trip exactly.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "series_id,{}", self.kernels.join(","))?;
        for (j, id) in self.series_ids.iter().enumerate() {
            write!(out, "{id}")?;
            for k in 0..self.cols() {
                write!(out, ",{:.16e}", self.get(j, k))?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<BicMatrix> {
        let text = std::fs::read_to_string(path)?;
        Self::read_csv_str(&text)
    }

    pub fn read_csv_str(text: &str) -> Result<BicMatrix> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty BIC matrix file".to_string()))?;
        let mut fields = header.split(',');
        if fields.next() != Some("series_id") {
            return Err(Error::parse(1, format!("expected 'series_id' first column, got {header:?}")));
        }
        let kernels: Vec<String> = fields.map(str::to_string).collect();
        if kernels.is_empty() {
            return Err(Error::parse(1, "BIC matrix has no kernel columns".to_string()));
        }
        let mut series_ids = Vec::new();
        let mut values = Vec::new();
        for (i, raw) in lines {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split(',').collect();
            if fields.len() != kernels.len() + 1 {
                return Err(Error::parse(
                    line,
                    format!("expected {} fields, got {}", kernels.len() + 1, fields.len()),
                ));
            }
            series_ids.push(fields[0].to_string());
            for cell in &fields[1..] {
                values.push(cell.trim().parse::<f64>().map_err(|_| {
                    Error::parse(line, format!("cannot parse BIC value from {cell:?}"))
                })?);
            }
        }
        BicMatrix::new(series_ids, kernels, values)
    }
}

/// Per-cell outcome of the sweep, for the sidecar report.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CellReport {
    pub series_id: String,
    pub kernel: String,
    pub restarts_used: usize,
    pub failed: bool,
    /// True when the stored BIC is the worst-in-row sentinel.
    pub sentinel: bool,
    pub wall_ms: f64,
    pub lml: Option<f64>,
}

/// Sidecar fit report for one sweep.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FitReport {
    pub n_series: usize,
    pub n_kernels: usize,
    pub n_failed: usize,
    pub mean_fit_wall_ms: f64,
    pub cells: Vec<CellReport>,
}

/// Sweep settings: per-fit optimizer config plus worker count
/// (0 = rayon default).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepConfig {
    pub fit: FitConfig,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { fit: FitConfig::default(), workers: 0 }
    }
}

struct CellOutcome {
    bic: Option<f64>,
    lml: Option<f64>,
    restarts_used: usize,
    wall_ms: f64,
}

/// Fits every kernel to every series and collects the BIC matrix.
///
/// Failed cells receive their row's worst finite BIC plus 10 and are flagged
/// in the report; the sweep errors out if more than half of all cells fail.
pub fn evaluate_all(
    dataset: &Dataset,
    kernels: &[KernelExpr],
    config: &SweepConfig,
) -> Result<(BicMatrix, FitReport)> {
    if kernels.is_empty() {
        return Err(Error::validation("kernel list is empty"));
    }
    if dataset.is_empty() {
        return Err(Error::validation("dataset is empty"));
    }
    let j_count = dataset.len();
    let k_count = kernels.len();

    let run = || -> Vec<CellOutcome> {
        (0..j_count * k_count)
            .into_par_iter()
            .map(|cell| {
                let (j, k) = (cell / k_count, cell % k_count);
                let cell_config = FitConfig {
                    seed: seed::mix(config.fit.seed, &[j as u64, k as u64]),
                    ..config.fit.clone()
                };
                let start = Instant::now();
                let fitted = fit(&kernels[k], &dataset.series[j], &cell_config);
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                match fitted {
                    Ok(model) => CellOutcome {
                        bic: Some(model.bic),
                        lml: Some(model.lml),
                        restarts_used: model.restarts_used,
                        wall_ms,
                    },
                    Err(_) => CellOutcome { bic: None, lml: None, restarts_used: 0, wall_ms },
                }
            })
            .collect()
    };

    let outcomes = if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::numeric("sweep", format!("cannot build worker pool: {e}")))?
            .install(run)
    } else {
        run()
    };

    let n_failed = outcomes.iter().filter(|c| c.bic.is_none()).count();
    if 2 * n_failed > outcomes.len() {
        return Err(Error::numeric(
            "sweep",
            format!("{n_failed} of {} fits failed", outcomes.len()),
        ));
    }

    let global_worst = outcomes
        .iter()
        .filter_map(|c| c.bic)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut values = Vec::with_capacity(outcomes.len());
    let mut cells = Vec::with_capacity(outcomes.len());
    for j in 0..j_count {
        let row = &outcomes[j * k_count..(j + 1) * k_count];
        let row_worst = row
            .iter()
            .filter_map(|c| c.bic)
            .fold(f64::NEG_INFINITY, f64::max);
        let sentinel = if row_worst.is_finite() { row_worst } else { global_worst } + 10.0;
        for (k, outcome) in row.iter().enumerate() {
            let (value, is_sentinel) = match outcome.bic {
                Some(b) => (b, false),
                None => (sentinel, true),
            };
            values.push(value);
            cells.push(CellReport {
                series_id: dataset.series[j].id.clone(),
                kernel: kernels[k].canonical_string(),
                restarts_used: outcome.restarts_used,
                failed: outcome.bic.is_none(),
                sentinel: is_sentinel,
                wall_ms: outcome.wall_ms,
                lml: outcome.lml,
            });
        }
    }

    let mean_wall = cells.iter().map(|c| c.wall_ms).sum::<f64>() / cells.len() as f64;
    let report = FitReport {
        n_series: j_count,
        n_kernels: k_count,
        n_failed,
        mean_fit_wall_ms: mean_wall,
        cells,
    };
    let matrix = BicMatrix::new(
        dataset.ids(),
        kernels.iter().map(|k| k.canonical_string()).collect(),
        values,
    )?;
    Ok((matrix, report))
}
