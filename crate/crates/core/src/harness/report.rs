//! CSV output of experiments and trajectories.

use std::io::Write;

use crate::error::Result;
use crate::harness::experiments::{DecayReport, GrowthReport, LimitReport, LimitRow};

pub const LIMIT_HEADER: &str = "eps,time,order_k,norm_s,error,leading_error,residual,self_conv_residual,flags";
pub const PROFILE_HEADER: &str = "time,mass,energy,h1_norm,linf_norm";
pub const KG_HEADER: &str = "time,energy,h1_norm,linf_norm,spectral_tail";

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.12e}")
    }
}

fn flags(f: &[&str]) -> String {
    if f.is_empty() {
        "ok".to_string()
    } else {
        f.join(";")
    }
}

pub fn limit_row_line(r: &LimitRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.eps,
        r.time,
        r.order_k,
        r.norm_s,
        num(r.error),
        num(r.leading_error),
        num(r.residual),
        num(r.self_conv_residual),
        flags(&r.flags)
    )
}

/// Data rows sorted by `(eps desc, time)`, then one fit row per time with
/// `eps = fit`, the three slopes in the error columns and `r2` in the flags.
pub fn write_limit_csv(report: &LimitReport, mut w: impl Write) -> Result<()> {
    writeln!(w, "{LIMIT_HEADER}")?;
    for r in &report.rows {
        writeln!(w, "{}", limit_row_line(r))?;
    }
    for f in &report.fits {
        let mut fl = vec!["fit".to_string(), format!("r2={:.6}", f.error.r_squared)];
        fl.extend(f.flags.iter().map(|s| s.to_string()));
        writeln!(
            w,
            "fit,{},{},{},{},{},{},,{}",
            f.time,
            f.order_k,
            f.norm_s,
            num(f.error.slope),
            num(f.leading.slope),
            num(f.residual.slope),
            fl.join(";")
        )?;
    }
    Ok(())
}

pub fn write_rows(header: &str, rows: &[[f64; 5]], mut w: impl Write) -> Result<()> {
    writeln!(w, "{header}")?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|&x| num(x)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_decay_csv(report: &DecayReport, mut w: impl Write) -> Result<()> {
    writeln!(w, "time,linf_norm,boundary_fraction")?;
    for (t, m, b) in &report.samples {
        writeln!(w, "{t},{},{}", num(*m), num(*b))?;
    }
    let mut fl = Vec::new();
    if report.degenerate {
        fl.push("degenerate".to_string());
    }
    if report.wrap_shortened {
        fl.push(format!("window_shortened_to={}", report.window_end));
    }
    match &report.fit {
        Some(f) => writeln!(w, "fit,{},{},r2={:.6}{}", num(f.slope), report.window_end, f.r_squared, prefix(&fl))?,
        None => writeln!(w, "fit,nan,{},none{}", report.window_end, prefix(&fl))?,
    }
    Ok(())
}

fn prefix(fl: &[String]) -> String {
    fl.iter().map(|s| format!(";{s}")).collect()
}

pub fn write_growth_csv(report: &GrowthReport, mut w: impl Write) -> Result<()> {
    writeln!(w, "eps,time,order_k,error,scaled_error")?;
    for (t, e, s) in &report.samples {
        writeln!(w, "{},{t},{},{},{}", report.eps, report.order_k, num(*e), num(*s))?;
    }
    match &report.fit {
        Some(f) => writeln!(w, "fit,,{},{},r2={:.6}", report.order_k, num(f.slope), f.r_squared)?,
        None => writeln!(w, "fit,,{},nan,none", report.order_k)?,
    }
    Ok(())
}
