//! Number formatting and CSV helpers shared by the artifact writers.

use std::io::Write;

use crate::quadrature::SampledFunction;
use crate::{Error, Result, C64};

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        // Avoid "-0e0" so outputs do not depend on the sign of zero.
        return "0e0".to_string();
    }
    format!("{v:e}")
}

pub fn parse_float(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

/// `v` with 12 significant digits, trailing zeros trimmed.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { format!("{v}") };
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{v:.11e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{e}")
    }
}

/// `a+bi` with 12 significant digits per part.
pub fn format_complex(z: C64) -> String {
    let im = if z.im == 0.0 { 0.0 } else { z.im };
    let sign = if im < 0.0 { '-' } else { '+' };
    format!("{}{sign}{}i", format_sig12(z.re + 0.0), format_sig12(im.abs()))
}

/// Parses `a`, `a+bi`, `a-bi`, `bi`, `i` (whitespace ignored).
pub fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Parse {
        input: s.to_string(),
        position: 0,
        message: "expected a complex number like `1.5-2i`".into(),
    };
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    // Split at the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => v.parse::<f64>().map_err(|_| bad())?,
    };
    let re = re.parse::<f64>().map_err(|_| bad())?;
    Ok(C64::new(re, im))
}

/// Node-major CSV: `node,x,<name>re,<name>im,...` for functions on one grid.
pub fn write_functions_csv<W: Write>(
    mut w: W,
    names: &[String],
    functions: &[&SampledFunction],
) -> Result<()> {
    if names.len() != functions.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} column names for {} functions",
            names.len(),
            functions.len()
        )));
    }
    for f in functions.iter().skip(1) {
        functions[0].check_grid(f)?;
    }
    write!(w, "node,x")?;
    for name in names {
        write!(w, ",{name}re,{name}im")?;
    }
    writeln!(w)?;
    let Some(first) = functions.first() else {
        return Ok(());
    };
    for (i, &x) in first.grid().nodes().iter().enumerate() {
        write!(w, "{i},{}", format_float(x))?;
        for f in functions {
            let v = f.at(i);
            write!(w, ",{},{}", format_float(v.re), format_float(v.im))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
