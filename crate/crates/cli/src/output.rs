//! CSV tables, summaries and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use echoform::{EchoReport, EnsembleResult, SpatialProfile, US};

use crate::run::RunOutput;
use crate::sweep::SweepRow;
use crate::{CliError, Result};

pub const TIMESERIES_HEADER: [&str; 3] = ["t_us", "sum_im_rho12", "sum_re_rho12"];
pub const PROFILE_HEADER: [&str; 5] = ["j", "x_sigma", "G_j", "im_rho12_echo", "emissive"];
pub const SWEEP_HEADER: [&str; 7] = [
    "phi_r_over_pi",
    "E1_sim",
    "E2_sim",
    "E2_eff",
    "eta",
    "E1_eq3",
    "E2_eq4",
];

/// `printf("%.9g")`.
pub fn fmt_g9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A table ready for one of the three CSV schemas.
pub enum Table<'a> {
    Timeseries(&'a EnsembleResult),
    Profile {
        spatial: &'a SpatialProfile,
        report: &'a EchoReport,
    },
    Sweep(&'a [SweepRow]),
}

impl Table<'_> {
    fn header(&self) -> &'static [&'static str] {
        match self {
            Table::Timeseries(_) => &TIMESERIES_HEADER,
            Table::Profile { .. } => &PROFILE_HEADER,
            Table::Sweep(_) => &SWEEP_HEADER,
        }
    }

    fn rows(&self) -> Vec<Vec<String>> {
        match self {
            Table::Timeseries(r) => (0..r.times.len())
                .map(|i| {
                    vec![
                        fmt_g9(r.times[i] / US),
                        fmt_g9(r.total_im_rho12[i]),
                        fmt_g9(r.total_re_rho12[i]),
                    ]
                })
                .collect(),
            Table::Profile { spatial, report } => {
                let echo = report.per_group_echo.last().expect("at least one echo");
                (0..spatial.len())
                    .map(|j| {
                        vec![
                            j.to_string(),
                            fmt_g9(spatial.positions[j]),
                            fmt_g9(spatial.amplitudes[j]),
                            fmt_g9(echo[j]),
                            report.emissive_mask[j].to_string(),
                        ]
                    })
                    .collect()
            }
            Table::Sweep(rows) => rows
                .iter()
                .map(|r| {
                    [
                        r.phi_r_over_pi,
                        r.e1_sim,
                        r.e2_sim,
                        r.e2_eff,
                        r.eta,
                        r.e1_eq3,
                        r.e2_eq4,
                    ]
                    .iter()
                    .map(|&v| fmt_g9(v))
                    .collect()
                })
                .collect(),
        }
    }
}

/// CSV bytes of `table`, header first.
pub fn render_csv(table: &Table<'_>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(table.header()).expect("in-memory write");
    for row in table.rows() {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes `table` to `path` with a header row.
pub fn emit_csv(table: &Table<'_>, path: &Path) -> Result<()> {
    fs::write(path, render_csv(table)).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Hex SHA-256 of the canonical text form of a spec.
pub fn spec_digest(spec: &echoform::ExperimentSpec) -> String {
    hex::encode(Sha256::digest(spec.to_config_text().as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command_line: String,
    pub spec_digest: String,
    pub files: Vec<PathBuf>,
    pub wall_clock_s: f64,
    pub workers: usize,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = format!(
            "command: {}\nspec_sha256: {}\nwall_clock_s: {:.3}\nworkers: {}\nfiles:\n",
            self.command_line, self.spec_digest, self.wall_clock_s, self.workers
        );
        for f in &self.files {
            s.push_str(&format!("  {}\n", f.display()));
        }
        s
    }

    /// Writes `manifest.txt` into `dir` and returns its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.txt");
        write_text(&path, &self.render())?;
        Ok(path)
    }
}

/// Everything a run leaves on disk.
pub struct Artifacts<'a> {
    pub run: &'a RunOutput,
    pub sweep: Option<&'a [SweepRow]>,
    /// Extra summary lines (sweep verdicts and the like).
    pub notes: &'a str,
}

/// Writes the CSVs and `summary.txt` into `dir`, returning the file list.
pub fn write_artifacts(dir: &Path, a: &Artifacts<'_>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();

    let path = dir.join("timeseries.csv");
    emit_csv(&Table::Timeseries(&a.run.result), &path)?;
    files.push(path);

    if let Some(report) = &a.run.report {
        let path = dir.join("profile.csv");
        emit_csv(
            &Table::Profile {
                spatial: &a.run.spatial,
                report,
            },
            &path,
        )?;
        files.push(path);
    }
    if let Some(rows) = a.sweep {
        let path = dir.join("sweep.csv");
        emit_csv(&Table::Sweep(rows), &path)?;
        files.push(path);
    }

    let path = dir.join("summary.txt");
    let mut text = a.run.summary();
    text.push_str(a.notes);
    write_text(&path, &text)?;
    files.push(path);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_matches_printf() {
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(1.0), "1");
        assert_eq!(fmt_g9(0.1), "0.1");
        assert_eq!(fmt_g9(4.1), "4.1");
        assert_eq!(fmt_g9(-0.5), "-0.5");
        assert_eq!(fmt_g9(123456789.0), "123456789");
        assert_eq!(fmt_g9(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_g9(0.0001), "0.0001");
        assert_eq!(fmt_g9(0.00001234), "1.234e-05");
        assert_eq!(fmt_g9(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt_g9(-1.0 / 3.0), "-0.333333333");
        assert_eq!(fmt_g9(1e100), "1e+100");
        assert_eq!(fmt_g9(f64::NAN), "nan");
        assert_eq!(fmt_g9(9.9999999999), "10");
    }

    #[test]
    fn manifest_lists_files() {
        let m = RunManifest {
            command_line: "echoform fig2".into(),
            spec_digest: "ab".into(),
            files: vec![PathBuf::from("out/timeseries.csv")],
            wall_clock_s: 1.5,
            workers: 4,
        };
        let text = m.render();
        assert!(text.contains("workers: 4"));
        assert!(text.contains("  out/timeseries.csv"));
    }
}
