use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "step,branch,loss_dmd,loss_otd,loss_gan_g,loss_denoise,loss_gan_c,w2,mode_coverage,grad_norm,sinkhorn_iters,wall_ms";

/// Which generator objective a step ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Unconditional reverse-KL stage that precedes conditional training.
    Init,
    /// Distribution matching: transport and/or reverse-KL terms.
    Matching,
    Gan,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Init => "init",
            Branch::Matching => "matching",
            Branch::Gan => "gan",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "init" => Ok(Branch::Init),
            "matching" => Ok(Branch::Matching),
            "gan" => Ok(Branch::Gan),
            other => Err(Error::Csv(format!("unknown branch {other:?}"))),
        }
    }
}

/// One line of `metrics.csv`. Absent values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    pub branch: Branch,
    pub loss_dmd: Option<f64>,
    pub loss_otd: Option<f64>,
    pub loss_gan_g: Option<f64>,
    pub loss_denoise: Option<f64>,
    pub loss_gan_c: Option<f64>,
    pub w2: Option<f64>,
    pub mode_coverage: Option<f64>,
    pub grad_norm: Option<f64>,
    pub sinkhorn_iters: Option<usize>,
    pub wall_ms: Option<f64>,
}

impl MetricsRow {
    pub fn new(step: usize, branch: Branch) -> Self {
        Self {
            step,
            branch,
            loss_dmd: None,
            loss_otd: None,
            loss_gan_g: None,
            loss_denoise: None,
            loss_gan_c: None,
            w2: None,
            mode_coverage: None,
            grad_norm: None,
            sinkhorn_iters: None,
            wall_ms: None,
        }
    }

    pub fn to_csv_line(&self) -> String {
        let mut s = format!("{},{}", self.step, self.branch.name());
        let floats = [
            self.loss_dmd,
            self.loss_otd,
            self.loss_gan_g,
            self.loss_denoise,
            self.loss_gan_c,
            self.w2,
            self.mode_coverage,
            self.grad_norm,
        ];
        for v in floats {
            s.push(',');
            if let Some(v) = v {
                write!(s, "{v:?}").expect("string write");
            }
        }
        s.push(',');
        if let Some(n) = self.sinkhorn_iters {
            write!(s, "{n}").expect("string write");
        }
        s.push(',');
        if let Some(v) = self.wall_ms {
            write!(s, "{v:?}").expect("string write");
        }
        s
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(Error::Csv(format!("expected 12 fields, got {}: {line:?}", fields.len())));
        }
        let float = |i: usize| -> Result<Option<f64>> {
            if fields[i].is_empty() {
                return Ok(None);
            }
            fields[i]
                .parse()
                .map(Some)
                .map_err(|_| Error::Csv(format!("bad number {:?} in {line:?}", fields[i])))
        };
        let step = fields[0]
            .parse()
            .map_err(|_| Error::Csv(format!("bad step {:?}", fields[0])))?;
        let sinkhorn_iters = if fields[10].is_empty() {
            None
        } else {
            Some(
                fields[10]
                    .parse()
                    .map_err(|_| Error::Csv(format!("bad iteration count {:?}", fields[10])))?,
            )
        };
        Ok(Self {
            step,
            branch: Branch::parse(fields[1])?,
            loss_dmd: float(2)?,
            loss_otd: float(3)?,
            loss_gan_g: float(4)?,
            loss_denoise: float(5)?,
            loss_gan_c: float(6)?,
            w2: float(7)?,
            mode_coverage: float(8)?,
            grad_norm: float(9)?,
            sinkhorn_iters,
            wall_ms: float(11)?,
        })
    }

    /// Named numeric column, for plotting.
    pub fn column(&self, name: &str) -> Result<Option<f64>> {
        Ok(match name {
            "step" => Some(self.step as f64),
            "loss_dmd" => self.loss_dmd,
            "loss_otd" => self.loss_otd,
            "loss_gan_g" => self.loss_gan_g,
            "loss_denoise" => self.loss_denoise,
            "loss_gan_c" => self.loss_gan_c,
            "w2" => self.w2,
            "mode_coverage" => self.mode_coverage,
            "grad_norm" => self.grad_norm,
            "sinkhorn_iters" => self.sinkhorn_iters.map(|n| n as f64),
            "wall_ms" => self.wall_ms,
            other => return Err(Error::Csv(format!("unknown column {other:?}"))),
        })
    }
}

/// Parses a whole `metrics.csv` document, header included.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        other => return Err(Error::Csv(format!("unexpected header {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(MetricsRow::parse_csv_line)
        .collect()
}
