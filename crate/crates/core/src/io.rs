//! CSV ingestion and report writers.
//!
//! Data files (series, forecasts) use shortest round-trip float formatting so
//! that reading them back reproduces every value exactly. Reports use six
//! significant digits.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::backtest::{ComparisonRow, ForecastRecord};
use crate::error::{Error, Result};
use crate::simulation::{StudyRow, StudyTable};
use crate::types::{validate_series, FitResult, LossSeries};

/// Formats `x` with six significant digits, like C's `%g`.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Round first so that 999999.5 moves to the next decade.
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    }
}

fn csv_err(line: Option<u64>, msg: impl std::fmt::Display) -> Error {
    match line {
        Some(l) => Error::Csv(format!("line {l}: {msg}")),
        None => Error::Csv(msg.to_string()),
    }
}

fn parse_cell(cell: &str, column: &str, line: Option<u64>) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| csv_err(line, format!("column `{column}`: `{cell}` is not a number")))
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Csv(format!("missing column `{name}`")))
}

/// Reads a `date,x,y[,z1..zk]` table. Only `x` and `y` are required.
///
/// With `negate` the `x` and `y` columns are treated as returns and negated
/// into losses; covariates are left untouched.
pub fn read_series<R: Read>(reader: R, negate: bool) -> Result<LossSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ix = column(&headers, "x")?;
    let iy = column(&headers, "y")?;
    let idate = column(&headers, "date").ok();
    let mut z_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let h = h.trim();
            let k = h.strip_prefix('z').or_else(|| h.strip_prefix('Z'))?.parse::<usize>().ok()?;
            Some((k, i))
        })
        .collect();
    z_cols.sort_unstable();

    let sign = if negate { -1.0 } else { 1.0 };
    let (mut x, mut y, mut z, mut labels) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line());
        let get = |i: usize, name: &str| {
            rec.get(i)
                .ok_or_else(|| csv_err(line, format!("missing value for column `{name}`")))
        };
        x.push(sign * parse_cell(get(ix, "x")?, "x", line)?);
        y.push(sign * parse_cell(get(iy, "y")?, "y", line)?);
        if !z_cols.is_empty() {
            let row = z_cols
                .iter()
                .map(|&(_, i)| parse_cell(get(i, &headers[i])?, &headers[i], line))
                .collect::<Result<Vec<f64>>>()?;
            z.push(row);
        }
        if let Some(i) = idate {
            labels.push(get(i, "date")?.to_string());
        }
    }
    validate_series(LossSeries {
        x,
        y,
        z: (!z_cols.is_empty()).then_some(z),
        labels: idate.map(|_| labels),
    })
}

pub fn ingest_csv(path: &Path, negate: bool) -> Result<LossSeries> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_series(f, negate)
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(csv::Writer::from_writer(f))
}

/// Writes a series in the format accepted by [`ingest_csv`].
pub fn write_series<W: Write>(writer: W, series: &LossSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let k = series.covariate_dim();
    let mut header: Vec<String> = Vec::new();
    if series.labels.is_some() {
        header.push("date".into());
    }
    header.extend(["x".into(), "y".into()]);
    header.extend((1..=k).map(|j| format!("z{j}")));
    w.write_record(&header)?;
    for t in 0..series.len() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        if let Some(l) = &series.labels {
            row.push(l[t].clone());
        }
        row.push(series.x[t].to_string());
        row.push(series.y[t].to_string());
        if let Some(z) = &series.z {
            row.extend(z[t].iter().map(f64::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_series(path: &Path, series: &LossSeries) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_series(f, series)
}

const FORECAST_HEADER: [&str; 7] = ["t", "date", "model", "v", "c", "x", "y"];

pub fn write_forecasts(path: &Path, records: &[ForecastRecord]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(FORECAST_HEADER)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.label.clone().unwrap_or_default(),
            r.model.clone(),
            r.v.to_string(),
            r.c.to_string(),
            r.x.to_string(),
            r.y.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_forecasts(path: &Path) -> Result<Vec<ForecastRecord>> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = FORECAST_HEADER
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line());
        let cell = |k: usize| {
            rec.get(idx[k])
                .ok_or_else(|| csv_err(line, format!("missing value for column `{}`", FORECAST_HEADER[k])))
        };
        let num = |k: usize| parse_cell(cell(k)?, FORECAST_HEADER[k], line);
        let t = cell(0)?
            .parse::<usize>()
            .map_err(|_| csv_err(line, "column `t` must be a non-negative integer"))?;
        let label = cell(1)?;
        out.push(ForecastRecord {
            t,
            label: (!label.is_empty()).then(|| label.to_string()),
            model: cell(2)?.to_string(),
            v: num(3)?,
            c: num(4)?,
            x: num(5)?,
            y: num(6)?,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty("forecast file"));
    }
    Ok(out)
}

/// Parameter table: one row per parameter with its standard error.
pub fn write_fit_report(path: &Path, fit: &FitResult) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["equation", "parameter", "estimate", "std_error"])?;
    let values = fit.params.to_flat();
    let ses: Vec<f64> = fit.se_v.iter().chain(&fit.se_c).copied().collect();
    for (i, (eq, name)) in fit.params.layout.names().into_iter().enumerate() {
        w.write_record([eq.name().to_string(), name, sig6(values[i]), sig6(ses[i])])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable fit summary with standard errors in parentheses.
pub fn format_fit(fit: &FitResult) -> String {
    let mut s = String::new();
    let lv = fit.spec.levels;
    let _ = writeln!(s, "model {} (beta={}, alpha={})", fit.spec.variant.name(), lv.beta, lv.alpha);
    let values = fit.params.to_flat();
    let ses: Vec<f64> = fit.se_v.iter().chain(&fit.se_c).copied().collect();
    for (i, (eq, name)) in fit.params.layout.names().into_iter().enumerate() {
        let _ = writeln!(s, "  {:<6} {:<14} {:>12} ({})", eq.name(), name, sig6(values[i]), sig6(ses[i]));
    }
    let _ = writeln!(
        s,
        "mean scores: VaR {}  CoVaR {}",
        sig6(fit.avg_score_var),
        sig6(fit.avg_score_covar)
    );
    s
}

pub fn write_study_table(path: &Path, table: &StudyTable) -> Result<()> {
    write_study_rows(path, &table.rows)
}

/// Study CSV with one row per (levels, n, parameter).
pub fn write_study_rows(path: &Path, rows: &[StudyRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record([
        "beta",
        "alpha",
        "n",
        "equation",
        "parameter",
        "true",
        "bias",
        "median_bias",
        "sd_emp",
        "sd_asy",
        "coverage",
        "replications",
    ])?;
    for r in rows {
        w.write_record([
            r.levels.beta.to_string(),
            r.levels.alpha.to_string(),
            r.n.to_string(),
            r.equation.name().to_string(),
            r.name.clone(),
            sig6(r.true_value),
            sig6(r.bias),
            sig6(r.median_bias),
            sig6(r.sd_emp),
            sig6(r.sd_asy),
            sig6(r.coverage),
            r.used.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn opt6(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_else(|| "NA".into())
}

pub fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record([
        "model",
        "score_var",
        "score_covar",
        "rank",
        "var_hit_rate",
        "covar_hit_rate",
        "zone",
        "p_var",
        "p_covar",
    ])?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            sig6(r.scores.s_var),
            sig6(r.scores.s_covar),
            r.rank.to_string(),
            sig6(r.hits.var_rate),
            opt6(r.hits.covar_rate),
            r.zone.map(|z| z.zone.name().to_string()).unwrap_or_else(|| "baseline".into()),
            opt6(r.zone.map(|z| z.p_var)),
            opt6(r.zone.and_then(|z| z.p_covar)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Text table of a comparison. With `display_scale` the VaR and CoVaR scores
/// are multiplied by 10 and 1000 for readability.
pub fn format_comparison(rows: &[ComparisonRow], display_scale: bool) -> String {
    let (kv, kc) = if display_scale { (10.0, 1000.0) } else { (1.0, 1.0) };
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<20} {:>10} {:>10} {:>5} {:>8} {:>9} {:>9} {:>10} {:>10}",
        "model", "VaR score", "CoVaR scr", "rank", "VaR hit", "CoVaR hit", "zone", "p VaR", "p CoVaR"
    );
    for r in rows {
        let pct = |x: f64| format!("{:.2}%", 100.0 * x);
        let _ = writeln!(
            s,
            "{:<20} {:>10} {:>10} {:>5} {:>8} {:>9} {:>9} {:>10} {:>10}",
            r.model,
            sig6(kv * r.scores.s_var),
            sig6(kc * r.scores.s_covar),
            r.rank,
            pct(r.hits.var_rate),
            r.hits.covar_rate.map(pct).unwrap_or_else(|| "NA".into()),
            r.zone.map(|z| z.zone.name()).unwrap_or("baseline"),
            opt6(r.zone.map(|z| z.p_var)),
            opt6(r.zone.and_then(|z| z.p_covar)),
        );
    }
    s
}

/// Writes `var_plot.csv` (t, date, x, v) and `covar_plot.csv` (t, date, y, c)
/// into `dir`.
pub fn write_plot_data(dir: &Path, records: &[ForecastRecord]) -> Result<()> {
    for (file, series) in [("var_plot.csv", 'v'), ("covar_plot.csv", 'c')] {
        let mut w = create(&dir.join(file))?;
        if series == 'v' {
            w.write_record(["t", "date", "x", "v"])?;
        } else {
            w.write_record(["t", "date", "y", "c"])?;
        }
        for r in records {
            let (obs, f) = if series == 'v' { (r.x, r.v) } else { (r.y, r.c) };
            w.write_record([
                r.t.to_string(),
                r.label.clone().unwrap_or_default(),
                obs.to_string(),
                f.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}
