//! CSV result tables.
//!
//! Each subcommand has a fixed header. Floats use Rust's shortest
//! round-trip formatting (infinite thresholds print as `inf`); undefined
//! values (`None`, NaN) are empty cells.

use std::path::Path;

use crate::error::CliError;

pub const SOLVE_HEADER: &[&str] = &[
    "lambda_a",
    "lambda_b",
    "n_a",
    "n_b",
    "d_max",
    "status",
    "mu1",
    "mu2",
    "mu_tot",
    "mean_queue",
    "mean_delay",
    "lp_objective",
    "duality_gap",
    "max_balance_residual",
    "normalization_residual",
    "pi_consistency",
    "unvisited_states",
    "verified",
    "diagnostics",
];

pub const THRESHOLD_HEADER: &[&str] = &[
    "i",
    "j",
    "pi",
    "reachable",
    "p",
    "q",
    "h_th_a",
    "h_th_b",
    "power_a",
    "power_b",
    "factorization_residual",
];

pub const POWER_HEADER: &[&str] = &[
    "lambda_a",
    "lambda_b",
    "n_a",
    "n_b",
    "rate_r",
    "scale_a",
    "scale_b",
    "mu1",
    "mu2",
    "mean_delay",
    "avg_power_a",
    "avg_power_b",
    "avg_power_total",
    "max_factorization_residual",
];

/// Columns shared by simulated and analytic metric rows.
#[cfg(test)]
const METRICS: &[&str] = &[
    "mu1",
    "mu1_se",
    "mu2",
    "mu2_se",
    "mu_tot",
    "mu_tot_se",
    "mean_delay",
    "mean_delay_se",
    "mean_queue",
    "mean_queue_se",
    "avg_power_a",
    "avg_power_a_se",
    "avg_power_b",
    "avg_power_b_se",
    "avg_power_total",
    "clipped_fraction",
];

pub const SIMULATE_HEADER: &[&str] = &[
    "seed",
    "scheme",
    "mode",
    "lambda_a",
    "lambda_b",
    "n_a",
    "n_b",
    "d_max",
    "measured_slots",
    "mu1",
    "mu1_se",
    "mu2",
    "mu2_se",
    "mu_tot",
    "mu_tot_se",
    "mean_delay",
    "mean_delay_se",
    "mean_queue",
    "mean_queue_se",
    "avg_power_a",
    "avg_power_a_se",
    "avg_power_b",
    "avg_power_b_se",
    "avg_power_total",
    "clipped_fraction",
];

pub const SWEEP_HEADER: &[&str] = &[
    "variable",
    "value",
    "scheme",
    "source",
    "lambda_a",
    "lambda_b",
    "n_a",
    "n_b",
    "d_max",
    "seeds",
    "mu1",
    "mu1_se",
    "mu2",
    "mu2_se",
    "mu_tot",
    "mu_tot_se",
    "mean_delay",
    "mean_delay_se",
    "mean_queue",
    "mean_queue_se",
    "avg_power_a",
    "avg_power_a_se",
    "avg_power_b",
    "avg_power_b_se",
    "avg_power_total",
    "clipped_fraction",
    "error",
];

/// Metric columns of one row; `None` cells stay empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub mu1: Option<f64>,
    pub mu1_se: Option<f64>,
    pub mu2: Option<f64>,
    pub mu2_se: Option<f64>,
    pub mu_tot: Option<f64>,
    pub mu_tot_se: Option<f64>,
    pub mean_delay: Option<f64>,
    pub mean_delay_se: Option<f64>,
    pub mean_queue: Option<f64>,
    pub mean_queue_se: Option<f64>,
    pub avg_power_a: Option<f64>,
    pub avg_power_a_se: Option<f64>,
    pub avg_power_b: Option<f64>,
    pub avg_power_b_se: Option<f64>,
    pub avg_power_total: Option<f64>,
    pub clipped_fraction: Option<f64>,
}

impl Metrics {
    fn cells(&self) -> [Option<f64>; 16] {
        [
            self.mu1,
            self.mu1_se,
            self.mu2,
            self.mu2_se,
            self.mu_tot,
            self.mu_tot_se,
            self.mean_delay,
            self.mean_delay_se,
            self.mean_queue,
            self.mean_queue_se,
            self.avg_power_a,
            self.avg_power_a_se,
            self.avg_power_b,
            self.avg_power_b_se,
            self.avg_power_total,
            self.clipped_fraction,
        ]
    }
}

/// Row under construction.
#[derive(Debug, Clone, Default)]
pub struct Row(Vec<String>);

impl Row {
    pub fn new() -> Self {
        Row(Vec::new())
    }

    pub fn num(mut self, v: f64) -> Self {
        self.0.push(float_cell(v));
        self
    }

    pub fn opt(self, v: Option<f64>) -> Self {
        self.num(v.unwrap_or(f64::NAN))
    }

    pub fn int(mut self, v: impl Into<u64>) -> Self {
        self.0.push(v.into().to_string());
        self
    }

    pub fn text(mut self, v: impl AsRef<str>) -> Self {
        self.0.push(v.as_ref().to_string());
        self
    }

    pub fn metrics(self, m: &Metrics) -> Self {
        m.cells().into_iter().fold(self, Row::opt)
    }

    pub fn cells(&self) -> &[String] {
        &self.0
    }
}

pub fn float_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

pub fn to_csv(header: &[&str], rows: &[Row]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        assert_eq!(row.0.len(), header.len(), "row width differs from header");
        w.write_record(&row.0)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Csv(csv::Error::from(e.into_error())))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Row]) -> Result<(), CliError> {
    let bytes = to_csv(header, rows)?;
    std::fs::write(path, bytes).map_err(CliError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undefined_values_are_empty_cells() {
        let row = Row::new().num(0.25).opt(None).num(f64::NAN).int(3u64).text("x");
        assert_eq!(row.cells(), ["0.25", "", "", "3", "x"]);
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456.789, f64::INFINITY] {
            assert_eq!(float_cell(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn metric_block_fills_its_columns() {
        assert_eq!(Metrics::default().cells().len(), METRICS.len());
        let tail = &SWEEP_HEADER[10..26];
        assert_eq!(tail, METRICS);
        assert_eq!(&SIMULATE_HEADER[9..], METRICS);
    }

    #[test]
    fn csv_has_header_then_rows() {
        let bytes = to_csv(&["a", "b"], &[Row::new().num(1.5).text("q,r")]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "a,b\n1.5,\"q,r\"\n");
    }
}
