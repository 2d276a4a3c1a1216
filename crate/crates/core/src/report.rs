//! CSV and JSON emission for sweep, diffusion and RMSE results.
//!
//! CSV files carry a header row, UTF-8, `.` as decimal separator and the
//! shortest round-trip representation of every float. JSON mirrors are arrays
//! of records with the same field names.

use serde::Serialize;

use crate::error::Result;
use crate::montecarlo::{DiffusionHistogram, McSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(crate::error::Error::InvalidParameter(format!(
                "unknown format {other:?}"
            ))),
        }
    }
}

pub trait CsvRecord: Serialize {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub grouping: String,
    pub sigma_m: f64,
    pub nk: u32,
    pub delta: f64,
    pub trials: u64,
    pub mean_h: f64,
    pub std_h: f64,
}

impl CsvRecord for SweepRecord {
    const HEADER: &'static [&'static str] = &["grouping", "sigma_m", "nk", "delta", "trials", "mean_h", "std_h"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.grouping.clone(),
            self.sigma_m.to_string(),
            self.nk.to_string(),
            self.delta.to_string(),
            self.trials.to_string(),
            self.mean_h.to_string(),
            self.std_h.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionRecord {
    pub bin_left: f64,
    pub bin_right: f64,
    pub density: f64,
}

impl CsvRecord for DiffusionRecord {
    const HEADER: &'static [&'static str] = &["bin_left", "bin_right", "density"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.bin_left.to_string(),
            self.bin_right.to_string(),
            self.density.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseRecord {
    pub code: u64,
    pub rmse: f64,
}

impl CsvRecord for RmseRecord {
    const HEADER: &'static [&'static str] = &["code", "rmse"];

    fn fields(&self) -> Vec<String> {
        vec![self.code.to_string(), self.rmse.to_string()]
    }
}

pub fn sweep_records(summary: &McSummary) -> Vec<SweepRecord> {
    summary
        .cells
        .iter()
        .map(|c| SweepRecord {
            grouping: c.grouping.to_string(),
            sigma_m: c.sigma_m,
            nk: c.nk,
            delta: c.delta,
            trials: c.trials,
            mean_h: c.mean_h,
            std_h: c.std_h,
        })
        .collect()
}

pub fn diffusion_records(hist: &DiffusionHistogram) -> Vec<DiffusionRecord> {
    hist.density
        .iter()
        .enumerate()
        .map(|(b, &density)| {
            let (bin_left, bin_right) = hist.bin_edges(b);
            DiffusionRecord {
                bin_left,
                bin_right,
                density,
            }
        })
        .collect()
}

pub fn rmse_records(profile: &[f64]) -> Vec<RmseRecord> {
    profile
        .iter()
        .enumerate()
        .map(|(d, &rmse)| RmseRecord { code: d as u64, rmse })
        .collect()
}

pub fn to_csv<R: CsvRecord>(records: &[R]) -> String {
    let mut out = R::HEADER.join(",");
    out.push('\n');
    for r in records {
        out.push_str(&r.fields().join(","));
        out.push('\n');
    }
    out
}

pub fn to_json<R: Serialize>(records: &[R]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(records)?;
    s.push('\n');
    Ok(s)
}

pub fn render<R: CsvRecord>(records: &[R], format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(to_csv(records)),
        Format::Json => to_json(records),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Grouping;
    use crate::montecarlo::McCell;

    #[test]
    fn sweep_csv_layout() {
        let summary = McSummary {
            cells: vec![McCell {
                grouping: Grouping::Uniform,
                sigma_m: 0.1,
                nk: 14,
                delta: 0.95,
                trials: 100,
                mean_h: 13.25,
                std_h: 0.125,
                nonfinite: 0,
                raw_h: None,
            }],
        };
        let csv = to_csv(&sweep_records(&summary));
        assert_eq!(
            csv,
            "grouping,sigma_m,nk,delta,trials,mean_h,std_h\nun,0.1,14,0.95,100,13.25,0.125\n"
        );
        let json: serde_json::Value = serde_json::from_str(&to_json(&sweep_records(&summary)).unwrap()).unwrap();
        assert_eq!(json[0]["grouping"], "un");
        assert_eq!(json[0]["nk"], 14);
    }

    #[test]
    fn diffusion_and_rmse_layout() {
        let hist = DiffusionHistogram {
            grouping: Grouping::HalfSplit,
            n0: 3,
            sigma_m: 0.0,
            trials: 1,
            density: vec![2.0, 0.0, 2.0, 0.0],
        };
        assert_eq!(
            to_csv(&diffusion_records(&hist)),
            "bin_left,bin_right,density\n0,0.25,2\n0.25,0.5,0\n0.5,0.75,2\n0.75,1,0\n"
        );
        assert_eq!(to_csv(&rmse_records(&[0.5, 0.25])), "code,rmse\n0,0.5\n1,0.25\n");
        let json: serde_json::Value =
            serde_json::from_str(&render(&rmse_records(&[0.5]), Format::Json).unwrap()).unwrap();
        assert_eq!(json, serde_json::json!([{ "code": 0, "rmse": 0.5 }]));
    }
}
