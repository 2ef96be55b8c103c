//! CSV time series and flat `key = value` summaries.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rkhs_observer::sim::{RunSummary, SimRecord};

use crate::scenario::DesignReport;
use crate::CliError;

/// Seventeen significant digits, `.` decimal point.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "unavailable".to_string(), num)
}

pub fn csv_header(first: &SimRecord, alpha_columns: bool) -> String {
    let n = first.x.len();
    let m = first.y.len();
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=n).map(|i| format!("xhat{i}")));
    cols.extend(["e_norm", "sigma0", "V"].map(String::from));
    for prefix in ["y", "u", "f", "fhat"] {
        cols.extend((1..=m).map(|i| format!("{prefix}{i}")));
    }
    if first.eta.is_some() {
        cols.extend((1..=3).map(|i| format!("eta{i}")));
        cols.extend((1..=3).map(|i| format!("etahat{i}")));
    }
    if alpha_columns {
        cols.extend((1..=first.alpha_hat.len()).map(|i| format!("alpha{i}")));
    }
    cols.join(",")
}

pub fn csv_row(r: &SimRecord, alpha_columns: bool) -> String {
    let mut fields: Vec<f64> = vec![r.t];
    fields.extend(r.x.iter());
    fields.extend(r.x_hat.iter());
    fields.extend([r.e_norm, r.sigma0, r.v]);
    for v in [&r.y, &r.u, &r.f_true, &r.f_hat] {
        fields.extend(v.iter());
    }
    if let (Some(eta), Some(eta_hat)) = (&r.eta, &r.eta_hat) {
        fields.extend(eta.iter());
        fields.extend(eta_hat.iter());
    }
    if alpha_columns {
        fields.extend(r.alpha_hat.iter());
    }
    fields.into_iter().map(num).collect::<Vec<_>>().join(",")
}

pub fn write_csv(path: &Path, records: &[SimRecord], alpha_columns: bool) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        if let Some(first) = records.first() {
            writeln!(w, "{}", csv_header(first, alpha_columns))?;
        }
        for r in records {
            writeln!(w, "{}", csv_row(r, alpha_columns))?;
        }
        w.flush()
    };
    write().map_err(|e| CliError::io(path, e))
}

/// Ordered `key = value` lines.
#[derive(Debug, Default, Clone)]
pub struct KeyValues(pub Vec<(String, String)>);

impl KeyValues {
    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.0.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

pub fn design_key_values(report: &DesignReport, kv: &mut KeyValues) {
    kv.push("centers", report.centers.to_string());
    kv.push("coefficients", report.coeff_dim.to_string());
    kv.push("grammian_condition_estimate", num(report.grammian_condition));
    kv.push("grammian_jitter", num(report.grammian_jitter));
    let eig: Vec<String> = report
        .error_dynamics_eigenvalues
        .iter()
        .map(|(re, im)| format!("{}{:+}i", num(*re), im))
        .collect();
    kv.push("error_dynamics_eigenvalues", eig.join(" "));
    kv.push("certified", report.certified.to_string());
    if let Some(e) = &report.lure_error {
        kv.push("lure_error", e.clone());
    }
    kv.push("lure_lyapunov_residual", opt(report.lyapunov_residual));
    kv.push("lure_pb_ct_residual", opt(report.pb_ct_residual));
    kv.push("lambda_min_p", opt(report.lambda_min_p));
    kv.push("lambda_min_wtw_eps_p", opt(report.lambda_min_wtw_eps_p));
    kv.push("norm_pl", opt(report.norm_pl));
    kv.push("norm_c", num(report.norm_c));
    kv.push("sup_power", num(report.sup_power));
    kv.push("projection_max_error", opt(report.projection_max_error));
    kv.push("residual_norm_estimate", num(report.residual_norm_estimate));
    kv.push("delta_bar", num(report.delta_bar));
    kv.push("e0", opt(report.e0));
    kv.push("d_n_advisory", opt(report.d_n));
    kv.push("deadzone_width", num(report.deadzone_width));
    kv.push("deadzone_buffer", num(report.deadzone_buffer));
    kv.push(
        "deadzone_exceeds_d_n",
        report.d_n.map_or("unavailable".into(), |d| (report.deadzone_width >= d).to_string()),
    );
    kv.push("warnings", report.warnings.len().to_string());
    for (i, w) in report.warnings.iter().enumerate() {
        kv.push(format!("warning_{}", i + 1), w.clone());
    }
}

pub fn summary_key_values(summary: &RunSummary, max_delta_norm: f64, kv: &mut KeyValues) {
    kv.push("t0", num(summary.t0));
    kv.push("t_final", num(summary.t_final));
    kv.push("records", summary.records.to_string());
    kv.push("entry_threshold", num(summary.threshold));
    kv.push("t_enter", summary.t_enter.map_or_else(|| "not reached".to_string(), num));
    kv.push("ultimate_bound", num(summary.ultimate_bound));
    kv.push("final_e_norm", num(summary.final_e_norm));
    kv.push("max_lyapunov_increase", opt(summary.max_lyapunov_increase));
    for (i, v) in summary.steady_state_mean_abs_error.iter().enumerate() {
        kv.push(format!("steady_state_mean_abs_e{}", i + 1), num(*v));
    }
    kv.push("max_delta_norm", num(max_delta_norm));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(num(-0.1), "-1.0000000000000001e-1");
        assert_eq!(num(f64::NAN), "NaN");
        assert_eq!(num(1.0).parse::<f64>().unwrap(), 1.0);
    }

    #[test]
    fn key_values_render() {
        let mut kv = KeyValues::default();
        kv.push("a", "1");
        kv.push("b", "x y");
        assert_eq!(kv.render(), "a = 1\nb = x y\n");
        assert_eq!(kv.get("b"), Some("x y"));
    }
}
