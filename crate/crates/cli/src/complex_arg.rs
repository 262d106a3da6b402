//! Complex-number grammar for command-line arguments.
//!
//! Accepted forms: `a`, `a+bi`, `a-bi`, `bi`, `-bi`, `i`, `-i`, where `a`
//! and `b` are decimal floats (exponents allowed). Whitespace around a
//! number is ignored. [`format_complex`] emits the canonical spelling and
//! parsing it back yields the same bits.

use qmz_core::Complex;

/// Parse failure with the 0-based character offset where it was detected.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot parse {input:?} at position {pos}: {reason}")]
pub struct ParseError {
    pub input: String,
    pub pos: usize,
    pub reason: String,
}

fn fail(input: &str, pos: usize, reason: impl Into<String>) -> ParseError {
    ParseError {
        input: input.to_string(),
        pos,
        reason: reason.into(),
    }
}

fn real(input: &str, text: &str, offset: usize) -> Result<f64, ParseError> {
    if text.is_empty() {
        return Err(fail(input, offset, "expected a number"));
    }
    // reject what f64::from_str accepts but we do not: inf, nan, "+"-prefixed words
    if let Some(bad) = text
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_digit() || "+-.eE".contains(*c)))
    {
        return Err(fail(
            input,
            offset + bad.0,
            format!("unexpected character {:?}", bad.1),
        ));
    }
    text.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| fail(input, offset, format!("invalid number {text:?}")))
}

/// Parse one complex number.
pub fn parse_complex(input: &str) -> Result<Complex, ParseError> {
    let lead = input.len() - input.trim_start().len();
    let body = input.trim();
    if body.is_empty() {
        return Err(fail(input, lead, "empty value"));
    }
    let Some(no_i) = body.strip_suffix('i') else {
        return Ok(Complex::new(real(input, body, lead)?, 0.0));
    };
    // split before the last sign that is not the leading one and not an exponent sign
    let bytes = no_i.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re_text, im_text, im_off) = match split {
        Some(k) => (&no_i[..k], &no_i[k..], lead + k),
        None => ("", no_i, lead),
    };
    let im = match im_text {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => real(input, t, im_off)?,
    };
    let re = if re_text.is_empty() {
        0.0
    } else {
        real(input, re_text, lead)?
    };
    Ok(Complex::new(re, im))
}

/// Parse a comma-separated list of complex numbers.
pub fn parse_list(input: &str) -> Result<Vec<Complex>, ParseError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for piece in input.split(',') {
        let z = parse_complex(piece).map_err(|e| ParseError {
            input: input.to_string(),
            pos: e.pos + offset,
            ..e
        })?;
        out.push(z);
        offset += piece.len() + 1;
    }
    Ok(out)
}

/// Canonical spelling: `a`, `bi` or `a+bi`/`a-bi` with shortest round-trip floats.
pub fn format_complex(z: Complex) -> String {
    match (z.re, z.im) {
        (re, im) if im == 0.0 && !im.is_sign_negative() => format!("{re}"),
        (re, im) if re == 0.0 && !re.is_sign_negative() => format!("{im}i"),
        (re, im) if im.is_sign_negative() => format!("{re}-{}i", -im),
        (re, im) => format!("{re}+{im}i"),
    }
}

pub fn format_list(zs: &[Complex]) -> String {
    zs.iter()
        .map(|z| format_complex(*z))
        .collect::<Vec<_>>()
        .join(",")
}
