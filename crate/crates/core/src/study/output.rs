use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::svg::{control_heatmap_svg, rate_plot_svg};
use super::{
    consistency, fits_for, summarize, ConsistencyRow, Reference, ReplicationMetrics,
    ReplicationStatus, StudyReport, SummaryRow, METRICS,
};
use crate::bounds::RateFit;
use crate::error::{Result, SaaError};
use crate::mesh_fem::Mesh;
use crate::pde_models::ControlField;

pub const RAW_HEADER: &str = "N,rep,obj_gap,l1_dist,ref_gap,status";
pub const SUMMARY_HEADER: &str = "N,mean_obj_gap,se_obj_gap,mean_l1,se_l1,mean_gap,se_gap";
pub const RATES_HEADER: &str = "metric,slope,intercept,r2";
const SAA_HEADER: &str = "N,rep,saa_value,theta_ref";
const CONSISTENCY_HEADER: &str = "N,mean_abs_err,se_abs_err";

pub const RAW_FILE: &str = "raw.csv";
pub const SAA_FILE: &str = "saa_values.csv";

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub fn write_raw_csv<W: Write>(mut w: W, rows: &[ReplicationMetrics]) -> Result<()> {
    writeln!(w, "{RAW_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{}",
            r.n,
            r.rep,
            r.obj_gap,
            r.l1_dist,
            r.ref_gap,
            r.status.as_str()
        )?;
    }
    Ok(())
}

pub fn write_saa_values_csv<W: Write>(mut w: W, rows: &[ReplicationMetrics], theta_ref: f64) -> Result<()> {
    writeln!(w, "{SAA_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{:e},{:e}", r.n, r.rep, r.saa_value, theta_ref)?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut w: W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.n, r.mean_obj_gap, r.se_obj_gap, r.mean_l1, r.se_l1, r.mean_gap, r.se_gap
        )?;
    }
    Ok(())
}

pub fn write_rates_csv<W: Write>(mut w: W, fits: &[(String, Option<RateFit>)]) -> Result<()> {
    writeln!(w, "{RATES_HEADER}")?;
    for (m, f) in fits {
        match f {
            Some(f) => writeln!(w, "{m},{:e},{:e},{:e}", f.slope, f.intercept, f.r_squared)?,
            None => writeln!(w, "{m},NaN,NaN,NaN")?,
        }
    }
    Ok(())
}

pub fn write_consistency_csv<W: Write>(mut w: W, rows: &[ConsistencyRow]) -> Result<()> {
    writeln!(w, "{CONSISTENCY_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{:e},{:e}", r.n, r.mean_abs_err, r.se_abs_err)?;
    }
    Ok(())
}

/// `cell,x,y,value` with cell centroids.
pub fn write_control_csv<W: Write>(mut w: W, mesh: &Mesh, u: &ControlField) -> Result<()> {
    writeln!(w, "cell,x,y,value")?;
    for (c, v) in u.values.iter().enumerate() {
        let [x, y] = mesh.centroid(c);
        writeln!(w, "{c},{x:e},{y:e},{v:e}")?;
    }
    Ok(())
}

fn parse_err(file: &str, line: usize, msg: impl std::fmt::Display) -> SaaError {
    SaaError::Parse(format!("{file}:{line}: {msg}"))
}

fn data_lines<R: BufRead>(r: R, file: &str, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = r.lines();
    let first = lines.next().transpose()?;
    if first.as_deref().map(str::trim) != Some(header) {
        return Err(parse_err(file, 1, format!("expected header '{header}'")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 2, line.trim().split(',').map(str::to_owned).collect()));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(file: &str, line: usize, cols: &[String], k: usize) -> Result<T> {
    cols.get(k)
        .ok_or_else(|| parse_err(file, line, format!("missing column {}", k + 1)))?
        .parse()
        .map_err(|_| parse_err(file, line, format!("bad value in column {}", k + 1)))
}

/// Raw rows; the SAA value is NaN until merged from the SAA-value table.
pub fn read_raw_csv<R: BufRead>(r: R) -> Result<Vec<ReplicationMetrics>> {
    data_lines(r, RAW_FILE, RAW_HEADER)?
        .into_iter()
        .map(|(line, cols)| {
            if cols.len() != 6 {
                return Err(parse_err(RAW_FILE, line, "expected 6 columns"));
            }
            Ok(ReplicationMetrics {
                n: field(RAW_FILE, line, &cols, 0)?,
                rep: field(RAW_FILE, line, &cols, 1)?,
                obj_gap: field(RAW_FILE, line, &cols, 2)?,
                l1_dist: field(RAW_FILE, line, &cols, 3)?,
                ref_gap: field(RAW_FILE, line, &cols, 4)?,
                saa_value: f64::NAN,
                status: ReplicationStatus::parse(&cols[5])
                    .map_err(|e| parse_err(RAW_FILE, line, e))?,
                error: None,
            })
        })
        .collect()
}

/// `(N, rep, saa_value, theta_ref)` rows.
pub fn read_saa_values_csv<R: BufRead>(r: R) -> Result<Vec<(usize, usize, f64, f64)>> {
    data_lines(r, SAA_FILE, SAA_HEADER)?
        .into_iter()
        .map(|(line, cols)| {
            Ok((
                field(SAA_FILE, line, &cols, 0)?,
                field(SAA_FILE, line, &cols, 1)?,
                field(SAA_FILE, line, &cols, 2)?,
                field(SAA_FILE, line, &cols, 3)?,
            ))
        })
        .collect()
}

fn write_tables(dir: &Path, rows: &[ReplicationMetrics], theta_ref: Option<f64>) -> Result<Vec<SummaryRow>> {
    let summary = summarize(rows);
    let fits = fits_for(&summary);
    write_summary_csv(create(&dir.join("summary.csv"))?, &summary)?;
    write_rates_csv(create(&dir.join("rates.csv"))?, &fits)?;
    for m in METRICS {
        let pts: Vec<(f64, f64, f64)> = summary
            .iter()
            .filter_map(|r| r.metric(m).map(|(mean, se)| (r.n as f64, mean, se)))
            .collect();
        let fit = fits.iter().find(|(k, _)| k == m).and_then(|(_, f)| f.as_ref());
        fs::write(dir.join(format!("rate_{m}.svg")), rate_plot_svg(m, &pts, fit))?;
    }
    if let Some(t) = theta_ref {
        write_consistency_csv(create(&dir.join("consistency.csv"))?, &consistency(rows, t))?;
    }
    Ok(summary)
}

pub(super) fn write_study(dir: &Path, report: &StudyReport, reference: &Reference) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_raw_csv(create(&dir.join(RAW_FILE))?, &report.replications)?;
    write_saa_values_csv(create(&dir.join(SAA_FILE))?, &report.replications, report.theta_ref)?;
    write_tables(dir, &report.replications, Some(report.theta_ref))?;

    let mesh = reference.problem.mesh();
    let data = reference.problem.data();
    write_control_csv(create(&dir.join("reference_control.csv"))?, mesh, &report.u_ref)?;
    fs::write(
        dir.join("reference_control.svg"),
        control_heatmap_svg(mesh, &report.u_ref, data.lower, data.upper, "reference solution"),
    )?;
    reference.trace.write_csv(create(&dir.join("reference_trace.csv"))?)?;

    let failures: Vec<&str> = report
        .replications
        .iter()
        .filter_map(|r| r.error.as_deref())
        .collect();
    if !failures.is_empty() {
        fs::write(dir.join("failures.txt"), failures.join("\n") + "\n")?;
    }
    let mut w = create(&dir.join("study.txt"))?;
    writeln!(w, "kind = {}", report.kind.name())?;
    writeln!(w, "theta_ref = {:e}", report.theta_ref)?;
    writeln!(w, "reference_gap = {:e}", report.reference_gap)?;
    writeln!(w, "reference_iterations = {}", report.reference_iterations)?;
    writeln!(w, "bang_bang_fraction = {}", report.bang_bang_fraction)?;
    writeln!(w, "valid = {}", report.valid)?;
    Ok(())
}

pub(super) fn regenerate(dir: &Path) -> Result<Vec<SummaryRow>> {
    let raw = dir.join(RAW_FILE);
    if !raw.is_file() {
        return Err(SaaError::InvalidArgument(format!(
            "{} is not a study directory (no {RAW_FILE})",
            dir.display()
        )));
    }
    let mut rows = read_raw_csv(BufReader::new(fs::File::open(raw)?))?;
    let saa = dir.join(SAA_FILE);
    let mut theta_ref = None;
    if saa.is_file() {
        for (n, rep, v, t) in read_saa_values_csv(BufReader::new(fs::File::open(saa)?))? {
            if let Some(r) = rows.iter_mut().find(|r| r.n == n && r.rep == rep) {
                r.saa_value = v;
            }
            theta_ref = Some(t);
        }
    }
    write_tables(dir, &rows, theta_ref)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip() {
        let rows = vec![
            ReplicationMetrics {
                n: 2,
                rep: 0,
                obj_gap: 1.25e-4,
                l1_dist: 0.1 + 0.2,
                ref_gap: 3.0e-5,
                saa_value: f64::NAN,
                status: ReplicationStatus::GapMet,
                error: None,
            },
            ReplicationMetrics {
                n: 8,
                rep: 3,
                obj_gap: f64::NAN,
                l1_dist: f64::NAN,
                ref_gap: f64::NAN,
                saa_value: f64::NAN,
                status: ReplicationStatus::Failed,
                error: None,
            },
        ];
        let mut buf = Vec::new();
        write_raw_csv(&mut buf, &rows).unwrap();
        let back = read_raw_csv(buf.as_slice()).unwrap();
        assert_eq!(
            (back[0].obj_gap, back[0].l1_dist, back[0].ref_gap, back[0].status),
            (rows[0].obj_gap, rows[0].l1_dist, rows[0].ref_gap, rows[0].status)
        );
        assert_eq!(back[1].status, ReplicationStatus::Failed);
        assert!(back[1].obj_gap.is_nan());
    }

    #[test]
    fn bad_header_reports_line() {
        let err = read_raw_csv("N,rep\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("raw.csv:1"));
    }
}
