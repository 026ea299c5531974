//! Cost sweeps: one equilibrium per `(C_A, C_D)` cell, written as one CSV
//! per attacker cost with rows in ascending `C_D`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{Mode, SweepConfig};
use crate::error::{Error, Result};
use crate::game::ModelParams;
use crate::learner::fictitious_play;
use crate::oracle::{oracle_equilibrium, BeliefGrid};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "C_D")]
    pub c_d: f64,
    /// Learned threshold in learn and both modes, exact one in oracle mode.
    pub defender_threshold: Option<f64>,
    pub attacker_threshold: Option<f64>,
    /// Exact fixed point next to the learned one (both mode only).
    #[serde(default)]
    pub oracle_defender_threshold: Option<f64>,
    #[serde(default)]
    pub oracle_attacker_threshold: Option<f64>,
    /// Why the cell has no (or no converged) result.
    pub error: Option<String>,
}

/// All rows for one attacker cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPanel {
    pub c_a: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepPanel {
    pub fn file_name(&self) -> String {
        format!("thresholds_ca_{}.csv", self.c_a)
    }

    pub fn write_csv<W: Write>(&self, out: W, mode: Mode) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["C_D", "defender_threshold", "attacker_threshold"];
        if mode == Mode::Both {
            header.extend(["oracle_defender_threshold", "oracle_attacker_threshold"]);
        }
        header.push("error");
        w.write_record(&header)?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            let mut record = vec![row.c_d.to_string(), cell(row.defender_threshold), cell(row.attacker_threshold)];
            if mode == Mode::Both {
                record.push(cell(row.oracle_defender_threshold));
                record.push(cell(row.oracle_attacker_threshold));
            }
            record.push(row.error.clone().unwrap_or_default());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads rows back from a file written by [`SweepPanel::write_csv`].
pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn equilibrium_cell(cfg: &SweepConfig, params: &ModelParams) -> SweepRow {
    let mut row = SweepRow {
        c_d: params.cost_defender,
        defender_threshold: None,
        attacker_threshold: None,
        oracle_defender_threshold: None,
        oracle_attacker_threshold: None,
        error: None,
    };
    let mut errors = Vec::new();
    if matches!(cfg.mode, Mode::Learn | Mode::Both) {
        match fictitious_play(params, &cfg.learn_config_for(params)) {
            Ok(eq) => {
                row.defender_threshold = Some(eq.theta_defender);
                row.attacker_threshold = Some(eq.theta_attacker);
                if !eq.converged {
                    errors.push(format!("learner did not converge in {} rounds", eq.rounds_used));
                }
            }
            Err(e) => errors.push(format!("learner: {e}")),
        }
    }
    if matches!(cfg.mode, Mode::Oracle | Mode::Both) {
        let solved = BeliefGrid::uniform(cfg.grid_size).and_then(|grid| {
            oracle_equilibrium(params, &grid, cfg.learn.initial_thetas, cfg.oracle_rounds, 1e-12, cfg.solver)
        });
        match solved {
            Ok(eq) => {
                let slot = if cfg.mode == Mode::Oracle {
                    (&mut row.defender_threshold, &mut row.attacker_threshold)
                } else {
                    (&mut row.oracle_defender_threshold, &mut row.oracle_attacker_threshold)
                };
                *slot.0 = Some(eq.theta_defender);
                *slot.1 = Some(eq.theta_attacker);
                if !eq.converged {
                    errors.push(format!("oracle found no fixed point in {} rounds", eq.rounds));
                }
            }
            Err(e) => errors.push(format!("oracle: {e}")),
        }
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

/// Solves every cell concurrently on a pool of `cfg.workers` threads.
/// Results do not depend on the worker count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepPanel>> {
    cfg.validate()?;
    let cd_values = cfg.cd_values();
    let cells: Vec<ModelParams> = cfg
        .ca_values
        .iter()
        .flat_map(|&c_a| {
            cd_values.iter().map(move |&c_d| ModelParams {
                cost_defender: c_d,
                cost_attacker: c_a,
                ..cfg.params
            })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let rows: Vec<SweepRow> = pool.install(|| cells.par_iter().map(|p| equilibrium_cell(cfg, p)).collect());
    Ok(cfg
        .ca_values
        .iter()
        .zip(rows.chunks(cd_values.len()))
        .map(|(&c_a, chunk)| SweepPanel {
            c_a,
            rows: chunk.to_vec(),
        })
        .collect())
}

/// Writes each panel under `dir` and returns the paths in panel order.
pub fn write_sweep(panels: &[SweepPanel], dir: &Path, mode: Mode) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    panels
        .iter()
        .map(|panel| {
            let path = dir.join(panel.file_name());
            panel.write_csv(fs::File::create(&path)?, mode)?;
            Ok(path)
        })
        .collect()
}

/// Spearman rank correlation with average ranks for ties; `None` when
/// either series is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &order[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mean).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - mean).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
