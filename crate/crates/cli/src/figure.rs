//! Plot-ready tables derived from result files. No rendering happens here.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use xgbias::sampler::consistency_probability;

use crate::config::{check_output, resolve_input};
use crate::error::{CliError, CliResult};
use crate::run::{RunCtx, Step};

/// (id, expected input, output columns)
pub const FIGURES: [(&str, &str, &str); 8] = [
    ("h1-heatmap", "simulate h1 CSV", "alpha,n,p_overperform"),
    ("h1-consistency", "simulate h1 CSV", "alpha,n,p_season,p_consistent"),
    ("h3a-augmentation", "simulate h3a CSV", "alpha,m,mean_gax,ci95_low,ci95_high"),
    ("h3b-mixture", "simulate h3b CSV", "allocation,alpha,n,mean_gax,truth_gax,bias"),
    ("calibration", "calibration curve CSV", "bin_lo,bin_hi,n,mean_pred,conv_rate,smoothed_x,smoothed_y"),
    ("conversion-distance", "calibration conversion CSV", "volume,body_part,band,n,goals,conversion_rate"),
    ("messi-3x3", "multicalib baselines CSV", "position,volume,cum_xg"),
    ("leaderboard", "multicalib leaderboard CSV", "rank,player,goals,standard_gax,multicalibrated_gax"),
];

pub fn figure_ids() -> Vec<&'static str> {
    FIGURES.iter().map(|f| f.0).collect()
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FigureArgs {
    /// Figure id; run with an unknown id to list the available ones.
    #[arg(long)]
    pub id: Option<String>,
    /// Result file the figure is derived from.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Seasons required out of `of` (h1-consistency).
    #[arg(long)]
    pub at_least: Option<u32>,
    #[arg(long)]
    pub of: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Step for FigureArgs {
    const NAME: &'static str = "figure";

    fn prepare(&mut self) -> CliResult<()> {
        let id = self
            .id
            .clone()
            .ok_or_else(|| CliError::config("id", format!("is required; available: {}", figure_ids().join(", "))))?;
        if !figure_ids().contains(&id.as_str()) {
            return Err(CliError::config(
                "id",
                format!("unknown figure '{id}'; available: {}", figure_ids().join(", ")),
            ));
        }
        let input = self.input.as_ref().ok_or_else(|| CliError::config("input", "is required"))?;
        self.input = Some(resolve_input("input", input)?);
        let k = *self.at_least.get_or_insert(4);
        let m = *self.of.get_or_insert(5);
        if k > m {
            return Err(CliError::config("at_least", format!("{k} exceeds of = {m}")));
        }
        let out = self.out.get_or_insert_with(|| PathBuf::from(format!("{id}.csv")));
        check_output("out", out)
    }

    fn run(&self, ctx: &mut RunCtx) -> CliResult<()> {
        let input = self.input.as_deref().expect("resolved");
        ctx.input_file(input)?;
        let table = Table::read(input)?;
        let id = self.id.as_deref().unwrap_or_default();
        let (_, _, cols) = FIGURES.iter().find(|f| f.0 == id).expect("validated id");
        let cols: Vec<&str> = cols.split(',').collect();
        let out = match id {
            "h1-consistency" => {
                let (k, m) = (self.at_least.unwrap_or(4), self.of.unwrap_or(5));
                let mut rows = Vec::new();
                for r in 0..table.rows.len() {
                    let p: f64 = table
                        .get(r, "p_overperform")?
                        .parse()
                        .map_err(|_| CliError::Data(format!("row {r}: p_overperform is not a number")))?;
                    rows.push(vec![
                        table.get(r, "alpha")?.to_string(),
                        table.get(r, "n")?.to_string(),
                        p.to_string(),
                        consistency_probability(p, k, m)?.to_string(),
                    ]);
                }
                write_table(&cols, &rows)?
            }
            "messi-3x3" => {
                let t = table.select(&cols)?;
                if t.len() != 9 {
                    return Err(CliError::Data(format!("expected 9 baseline rows, found {}", t.len())));
                }
                write_table(&cols, &t)?
            }
            _ => write_table(&cols, &table.select(&cols)?)?,
        };
        ctx.emit(self.out.as_deref().expect("resolved"), out);
        Ok(())
    }
}

struct Table {
    source: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> CliResult<Table> {
        let err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
        let mut rdr = csv::Reader::from_path(path).map_err(err)?;
        let header = rdr.headers().map_err(err)?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        Ok(Table {
            source: path.display().to_string(),
            header,
            rows,
        })
    }

    fn column(&self, name: &str) -> CliResult<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Data(format!("{} has no column '{name}' (found {})", self.source, self.header.join(",")))
        })
    }

    fn get(&self, row: usize, name: &str) -> CliResult<&str> {
        Ok(&self.rows[row][self.column(name)?])
    }

    fn select(&self, cols: &[&str]) -> CliResult<Vec<Vec<String>>> {
        let idx = cols.iter().map(|c| self.column(c)).collect::<CliResult<Vec<_>>>()?;
        Ok(self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
            .collect())
    }
}

fn write_table(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}
