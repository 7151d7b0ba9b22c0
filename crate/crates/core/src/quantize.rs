//! Fixed-point representation of network parameters.
//!
//! A format `<Qi.Qf>` has `N = Qi + Qf` bits and precision `eps = 2^-Qf`.
//! Values are rounded to the nearest multiple of `eps` with ties rounded up,
//! `eps * floor(x / eps + 1/2)`, and then saturated to the representable range.

use std::fmt;

use crate::encoding::EncodingParams;
use crate::error::{Error, Result};
use crate::eval::{evaluate, memory_report, ClassAssignment};
use crate::idx::IdxDataset;
use crate::topology::Network;

pub const MAX_WORDLENGTH: u8 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPointFormat {
    int_bits: u8,
    frac_bits: u8,
    signed: bool,
}

impl FixedPointFormat {
    pub fn new(int_bits: u8, frac_bits: u8, signed: bool) -> Result<Self> {
        let n = int_bits as u32 + frac_bits as u32;
        if n == 0 || n > MAX_WORDLENGTH as u32 {
            return Err(Error::config(format!(
                "wordlength must lie in 1..={MAX_WORDLENGTH}, got {n}"
            )));
        }
        if signed && int_bits == 0 {
            return Err(Error::config("a signed format needs at least one integer bit"));
        }
        Ok(FixedPointFormat {
            int_bits,
            frac_bits,
            signed,
        })
    }

    pub fn unsigned(int_bits: u8, frac_bits: u8) -> Result<Self> {
        Self::new(int_bits, frac_bits, false)
    }

    /// Weight format: unsigned `Q1.(N-1)`, which covers `[0, 2 - eps]` and so `w_max = 1`.
    pub fn weight(wordlength: u8) -> Result<Self> {
        if wordlength == 0 {
            return Err(Error::config("wordlength must be at least 1"));
        }
        Self::unsigned(1, wordlength - 1)
    }

    pub fn int_bits(&self) -> u8 {
        self.int_bits
    }

    pub fn frac_bits(&self) -> u8 {
        self.frac_bits
    }

    pub fn signed(&self) -> bool {
        self.signed
    }

    pub fn wordlength(&self) -> u8 {
        self.int_bits + self.frac_bits
    }

    pub fn epsilon(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn min_value(&self) -> f64 {
        if self.signed {
            -((self.int_bits as f64 - 1.0).exp2())
        } else {
            0.0
        }
    }

    pub fn max_value(&self) -> f64 {
        let top = if self.signed {
            (self.int_bits as f64 - 1.0).exp2()
        } else {
            (self.int_bits as f64).exp2()
        };
        top - self.epsilon()
    }

    /// Raw integer code of an on-grid value (`value / eps`).
    pub fn to_raw(&self, value: f64) -> i64 {
        (value / self.epsilon()).round() as i64
    }

    pub fn from_raw(&self, raw: i64) -> f64 {
        raw as f64 * self.epsilon()
    }
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.signed { "s" } else { "u" };
        write!(f, "{s}Q{}.{}", self.int_bits, self.frac_bits)
    }
}

/// Storage precision of a parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    /// IEEE-754 binary32.
    Reference,
    Fixed(FixedPointFormat),
}

impl Precision {
    pub fn wordlength(&self) -> u8 {
        match self {
            Precision::Reference => 32,
            Precision::Fixed(f) => f.wordlength(),
        }
    }

    pub fn frac_bits(&self) -> Option<u8> {
        match self {
            Precision::Reference => None,
            Precision::Fixed(f) => Some(f.frac_bits()),
        }
    }

    pub fn quantize(&self, x: f32) -> Result<f32> {
        match self {
            Precision::Reference => Ok(x),
            Precision::Fixed(f) => Ok(quantize_value(x as f64, f)? as f32),
        }
    }

    /// Parse `ref`/`fp32` or a weight wordlength such as `8`.
    pub fn parse_weight(token: &str) -> Result<Self> {
        let t = token.trim();
        match t.to_ascii_lowercase().as_str() {
            "ref" | "fp32" | "float" | "reference" => Ok(Precision::Reference),
            _ => {
                let n: u8 = t
                    .parse()
                    .map_err(|_| Error::config(format!("unrecognized precision {t:?}")))?;
                Ok(Precision::Fixed(FixedPointFormat::weight(n)?))
            }
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Reference => write!(f, "fp32"),
            Precision::Fixed(q) => write!(f, "{q}"),
        }
    }
}

/// Round half up onto the format's grid, then saturate.
pub fn quantize_value(x: f64, fmt: &FixedPointFormat) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NumericalFault(format!("cannot quantize {x}")));
    }
    let eps = fmt.epsilon();
    let q = eps * (x / eps + 0.5).floor();
    Ok(q.clamp(fmt.min_value(), fmt.max_value()))
}

/// Unsigned format of the given wordlength whose integer part just holds `max_value`.
pub fn theta_format(wordlength: u8, max_value: f32) -> Result<FixedPointFormat> {
    let mut int_bits = 0u8;
    while int_bits < wordlength && (int_bits as f64).exp2() <= max_value as f64 {
        int_bits += 1;
    }
    FixedPointFormat::unsigned(int_bits, wordlength - int_bits)
}

/// Return a copy of `network` with weights (and optionally theta) quantized to `wordlength`-bit formats.
pub fn quantize_model(network: &Network, precision: Precision, include_theta: bool) -> Result<Network> {
    let mut q = network.clone();
    let Precision::Fixed(fmt) = precision else {
        return Ok(q);
    };
    for w in q.weights.as_mut_slice() {
        *w = (quantize_value(*w as f64, &fmt)? as f32).min(network.weights.w_max());
    }
    q.precision = precision;
    if include_theta {
        let max_theta = q.exc.theta.iter().copied().fold(0.0f32, f32::max);
        let tf = theta_format(fmt.wordlength(), max_theta)?;
        for th in &mut q.exc.theta {
            *th = quantize_value(*th as f64, &tf)? as f32;
        }
        q.theta_precision = Precision::Fixed(tf);
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub precision: Precision,
    pub wordlength: u8,
    pub n_f: Option<u8>,
    pub accuracy: f64,
    pub model_bytes: u64,
}

pub const SWEEP_CSV_HEADER: &str = "wordlength,n_f,accuracy,model_bytes";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let n_f = self.n_f.map(|n| n.to_string()).unwrap_or_else(|| "ref".into());
        format!("{},{},{:.6},{}", self.wordlength, n_f, self.accuracy, self.model_bytes)
    }
}

/// Quantize a fresh copy of `network` per format and measure test accuracy
/// with the stored class assignment. Rows come back ordered by wordlength.
pub fn sweep_quantization(
    network: &Network,
    assignment: &ClassAssignment,
    eval_set: &IdxDataset,
    samples: usize,
    encoding: &EncodingParams,
    formats: &[Precision],
    include_theta: bool,
) -> Result<Vec<SweepRow>> {
    if formats.is_empty() {
        return Err(Error::config("quantization sweep needs at least one format"));
    }
    let mut rows = Vec::with_capacity(formats.len());
    for &precision in formats {
        let mut candidate = quantize_model(network, precision, include_theta)?;
        let eval = evaluate(&mut candidate, assignment, eval_set, samples, encoding)?;
        rows.push(SweepRow {
            precision,
            wordlength: precision.wordlength(),
            n_f: precision.frac_bits(),
            accuracy: eval.accuracy,
            model_bytes: memory_report(&candidate, precision).total_bytes,
        });
    }
    rows.sort_by_key(|r| r.wordlength);
    Ok(rows)
}
