//! Binary model persistence.
//!
//! Little-endian layout:
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `FSPN` |
//! | 2 | format version (u16) |
//! | 4 | n_input (u32) |
//! | 4 | n_exc (u32) |
//! | 1 | inhibition mode: 0 layered, 1 lateral |
//! | 4 | inhibition ratio (f32) |
//! | 1 | weight wordlength, 0 for binary32 |
//! | 1 | weight fractional bits |
//! | 1 | theta fractional bits, 255 when theta is stored as binary32 |
//! | n_input·n_exc words | weights, row-major by input channel |
//! | n_exc words | theta |
//! | n_exc | class labels (u8, 255 = unassigned) |
//! | 8 | seed (u64) |
//!
//! Fixed-point words are unsigned raw codes of `ceil(N / 8)` bytes. Theta
//! shares the weight wordlength but has its own fractional split.

use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::ClassAssignment;
use crate::quantize::{FixedPointFormat, Precision};
use crate::topology::{build_network, InhibitionMode, Network, NetworkConfig, SynapticMatrix};

pub const MAGIC: &[u8; 4] = b"FSPN";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 22;
const UNASSIGNED: u8 = 255;
const FLOAT_THETA: u8 = 255;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub network: Network,
    pub assignment: ClassAssignment,
    pub seed: u64,
}

fn word_bytes(p: Precision) -> usize {
    match p {
        Precision::Reference => 4,
        Precision::Fixed(f) => (f.wordlength() as usize).div_ceil(8),
    }
}

fn put_word(out: &mut Vec<u8>, p: Precision, x: f32) {
    match p {
        Precision::Reference => out.extend_from_slice(&x.to_le_bytes()),
        Precision::Fixed(f) => {
            let raw = f.to_raw(x as f64) as u64;
            out.extend_from_slice(&raw.to_le_bytes()[..word_bytes(p)]);
        }
    }
}

fn get_word(bytes: &[u8], p: Precision) -> f32 {
    match p {
        Precision::Reference => f32::from_le_bytes(bytes.try_into().unwrap()),
        Precision::Fixed(f) => {
            let mut b = [0u8; 8];
            b[..bytes.len()].copy_from_slice(bytes);
            f.from_raw(u64::from_le_bytes(b) as i64) as f32
        }
    }
}

/// Serialize a network and its class labels.
pub fn encode_model(network: &Network, assignment: &ClassAssignment, seed: u64) -> Result<Vec<u8>> {
    if assignment.len() != network.n_exc() {
        return Err(Error::structural(format!(
            "assignment covers {} neurons but the network has {}",
            assignment.len(),
            network.n_exc()
        )));
    }
    let wp = network.precision;
    // theta shares the weight wordlength; a binary32 theta next to fixed weights
    // is written with the 255 marker and 4-byte words
    let tp = match (wp, network.theta_precision) {
        (Precision::Fixed(w), Precision::Fixed(t)) if w.wordlength() == t.wordlength() => network.theta_precision,
        (_, Precision::Fixed(t)) => {
            return Err(Error::structural(format!(
                "theta format {t} does not match weight precision {wp}"
            )))
        }
        (_, Precision::Reference) => Precision::Reference,
    };
    let (wordlength, n_f) = match wp {
        Precision::Reference => (0, 0),
        Precision::Fixed(f) => (f.wordlength(), f.frac_bits()),
    };
    let theta_nf = match tp {
        Precision::Reference => FLOAT_THETA,
        Precision::Fixed(f) => f.frac_bits(),
    };
    let n_w = network.n_input() * network.n_exc();
    let mut out = Vec::with_capacity(HEADER_BYTES + (n_w + network.n_exc()) * word_bytes(wp) + network.n_exc() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(network.n_input() as u32).to_le_bytes());
    out.extend_from_slice(&(network.n_exc() as u32).to_le_bytes());
    out.push(network.mode().code());
    out.extend_from_slice(&network.config.inhibition_ratio.to_le_bytes());
    out.push(wordlength);
    out.push(n_f);
    out.push(theta_nf);
    for &w in network.weights.as_slice() {
        put_word(&mut out, wp, w);
    }
    for &th in &network.exc.theta {
        put_word(&mut out, tp, th);
    }
    out.extend(assignment.labels.iter().map(|l| l.unwrap_or(UNASSIGNED)));
    out.extend_from_slice(&seed.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::parse(
                format!(
                    "truncated model file reading {what}: expected {end} bytes, file has {}",
                    self.bytes.len()
                ),
                self.bytes.len() as u64,
            ));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parse a model file. Neuron constants and couplings come from `template`;
/// its shape, mode and ratio are overridden by the file.
pub fn decode_model(bytes: &[u8], template: &NetworkConfig) -> Result<ModelFile> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::parse("not a model file (bad magic)", 0));
    }
    let version = u16::from_le_bytes(r.take(2, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::parse(format!("unsupported model file version {version}"), 4));
    }
    let n_input = r.u32("n_input")? as usize;
    let n_exc = r.u32("n_exc")? as usize;
    let mode_code = r.u8("inhibition mode")?;
    let mode = InhibitionMode::from_code(mode_code)
        .ok_or_else(|| Error::parse(format!("unknown inhibition mode {mode_code}"), 14))?;
    let ratio = f32::from_le_bytes(r.take(4, "inhibition ratio")?.try_into().unwrap());
    let wordlength = r.u8("wordlength")?;
    let n_f = r.u8("fractional bits")?;
    let theta_nf = r.u8("theta fractional bits")?;

    let bad_format = |what: &str| Error::parse(format!("invalid {what} format"), 19);
    let wp = match wordlength {
        0 => Precision::Reference,
        n if n_f < n => Precision::Fixed(FixedPointFormat::unsigned(n - n_f, n_f).map_err(|_| bad_format("weight"))?),
        _ => return Err(bad_format("weight")),
    };
    let tp = match (wp, theta_nf) {
        (_, FLOAT_THETA) => Precision::Reference,
        (Precision::Fixed(f), t) if t <= f.wordlength() => {
            Precision::Fixed(FixedPointFormat::unsigned(f.wordlength() - t, t).map_err(|_| bad_format("theta"))?)
        }
        _ => return Err(bad_format("theta")),
    };

    let wb = word_bytes(wp);
    let weights: Vec<f32> = r
        .take(n_input * n_exc * wb, "weights")?
        .chunks_exact(wb)
        .map(|c| get_word(c, wp))
        .collect();
    let tb = word_bytes(tp);
    let theta: Vec<f32> = r
        .take(n_exc * tb, "theta")?
        .chunks_exact(tb)
        .map(|c| get_word(c, tp))
        .collect();
    let label_offset = r.pos;
    let labels = r
        .take(n_exc, "class labels")?
        .iter()
        .enumerate()
        .map(|(k, &l)| match l {
            UNASSIGNED => Ok(None),
            l if l < 10 => Ok(Some(l)),
            l => Err(Error::parse(
                format!("invalid class label {l}"),
                (label_offset + k) as u64,
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    let seed = u64::from_le_bytes(r.take(8, "seed")?.try_into().unwrap());
    if r.pos != bytes.len() {
        return Err(Error::parse(
            format!("{} trailing bytes after model", bytes.len() - r.pos),
            r.pos as u64,
        ));
    }

    let mut config = template.clone();
    config.n_input = n_input;
    config.n_exc = n_exc;
    config.inhibition_mode = mode;
    config.inhibition_ratio = ratio;
    let mut network = build_network(&config)?;
    network.weights = SynapticMatrix::from_vec(n_input, n_exc, config.w_max, weights)?;
    network.exc.theta = theta;
    network.precision = wp;
    network.theta_precision = tp;
    Ok(ModelFile {
        network,
        assignment: ClassAssignment::from_labels(labels)?,
        seed,
    })
}

pub fn save_model(path: impl AsRef<Path>, network: &Network, assignment: &ClassAssignment, seed: u64) -> Result<()> {
    let p = path.as_ref();
    std::fs::write(p, encode_model(network, assignment, seed)?).map_err(|e| Error::io(p, e))
}

pub fn load_model(path: impl AsRef<Path>, template: &NetworkConfig) -> Result<ModelFile> {
    let p = path.as_ref();
    let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
    decode_model(&bytes, template)
}
