//! Homodyne measurement records and their on-disk forms.
//!
//! A record holds the increments `dI = <J_z>_c dt + gamma^{-1/2} dW` of the
//! rescaled signal `I = 2 i / gamma` (`i` being the photocurrent), together with
//! everything needed to replay it: model parameters, time step, seed and scheme.
//!
//! CSV form: `#`-prefixed `key=value` header lines, then a `t,dI` table with
//! `t` in Rabi periods at the end of each increment. Floats are written in
//! shortest round-trip notation, so a reload is lossless.
//!
//! Binary form (all little-endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 8 | magic `DWREC\0\0\0` |
//! | 4 | format version (u32) |
//! | 4 | scheme code (u32): 0 split-exponential, 1 euler-maruyama |
//! | 8 | N (u64) |
//! | 8 x 5 | u, K, gamma_bar, bias epsilon, dt (f64) |
//! | 8 | seed (u64) |
//! | 8 | length (u64) |
//! | 8 x length | increments (f64) |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sse::SseScheme;
use crate::error::{Error, Result};
use crate::spinspace::ModelParams;

pub const RECORD_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"DWREC\0\0\0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub params: ModelParams,
    /// Integration step in units of `1/K`.
    pub dt: f64,
    pub seed: u64,
    pub scheme: SseScheme,
    pub increments: Vec<f64>,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// Total covered time in units of `1/K`.
    pub fn duration(&self) -> f64 {
        self.dt * self.increments.len() as f64
    }

    /// Digest of everything that must match for a replay to be valid.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.params.digest().as_bytes());
        hasher.update(self.dt.to_bits().to_le_bytes());
        hasher.update([self.scheme.code() as u8]);
        hex::encode(hasher.finalize())
    }

    /// The signal `I(t)` accumulated from the increments, starting at zero.
    pub fn signal(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.increments.iter().map(|d| {
                acc += d;
                acc
            }))
            .collect()
    }

    /// Fails unless `params` is bit-identical to the model that produced the record.
    pub fn check_compatible(&self, params: &ModelParams) -> Result<()> {
        if self.params.digest() != params.digest() {
            return Err(Error::RecordMismatch(format!(
                "record was produced with {:?}, replay requested with {:?}",
                self.params, params
            )));
        }
        Ok(())
    }

    /// Sums consecutive pairs of increments: the same signal sampled at `2 dt`.
    pub fn coarsened(&self) -> Result<MeasurementRecord> {
        if self.increments.len() % 2 != 0 {
            return Err(Error::InvalidParameter(
                "record length must be even to coarsen".into(),
            ));
        }
        Ok(MeasurementRecord {
            dt: 2.0 * self.dt,
            increments: self.increments.chunks_exact(2).map(|p| p[0] + p[1]).collect(),
            ..self.clone()
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let p = &self.params;
        writeln!(out, "# doublewell measurement record")?;
        writeln!(out, "# format_version={RECORD_FORMAT_VERSION}")?;
        writeln!(out, "# n_particles={}", p.n_particles)?;
        writeln!(out, "# interaction_u={:?}", p.interaction_u)?;
        writeln!(out, "# tunneling_k={:?}", p.tunneling_k)?;
        writeln!(out, "# gamma_bar={:?}", p.gamma_bar)?;
        writeln!(out, "# bias_epsilon={:?}", p.bias_epsilon)?;
        writeln!(out, "# dt={:?}", self.dt)?;
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# scheme={}", self.scheme.name())?;
        writeln!(out, "# length={}", self.increments.len())?;
        writeln!(out, "# digest={}", self.digest())?;
        writeln!(out, "t,dI")?;
        let t_r = p.rabi_period();
        for (i, d) in self.increments.iter().enumerate() {
            writeln!(out, "{:?},{:?}", (i + 1) as f64 * self.dt / t_r, d)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut header = std::collections::HashMap::new();
        let mut increments = Vec::new();
        let mut saw_columns = false;
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    header.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if !saw_columns {
                if line != "t,dI" {
                    return Err(Error::format(path, format!("unexpected column header {line:?}")));
                }
                saw_columns = true;
                continue;
            }
            let (_, d) = line
                .split_once(',')
                .ok_or_else(|| Error::format(path, format!("bad row {line:?}")))?;
            increments.push(parse(path, "dI", d)?);
        }
        let field = |key: &str| -> Result<&String> {
            header
                .get(key)
                .ok_or_else(|| Error::format(path, format!("missing header field {key}")))
        };
        let version: u32 = parse(path, "format_version", field("format_version")?)?;
        if version != RECORD_FORMAT_VERSION {
            return Err(Error::format(path, format!("unsupported format version {version}")));
        }
        let params = ModelParams {
            n_particles: parse(path, "n_particles", field("n_particles")?)?,
            interaction_u: parse(path, "interaction_u", field("interaction_u")?)?,
            tunneling_k: parse(path, "tunneling_k", field("tunneling_k")?)?,
            gamma_bar: parse(path, "gamma_bar", field("gamma_bar")?)?,
            bias_epsilon: parse(path, "bias_epsilon", field("bias_epsilon")?)?,
        };
        let scheme = SseScheme::from_name(field("scheme")?)
            .ok_or_else(|| Error::format(path, "unknown scheme"))?;
        let length: usize = parse(path, "length", field("length")?)?;
        if length != increments.len() {
            return Err(Error::format(
                path,
                format!("header announces {length} increments, found {}", increments.len()),
            ));
        }
        let record = MeasurementRecord {
            params,
            dt: parse(path, "dt", field("dt")?)?,
            seed: parse(path, "seed", field("seed")?)?,
            scheme,
            increments,
        };
        if let Some(digest) = header.get("digest") {
            if *digest != record.digest() {
                return Err(Error::format(path, "digest does not match header fields"));
            }
        }
        Ok(record)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(80 + 8 * self.increments.len());
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&RECORD_FORMAT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&self.scheme.code().to_le_bytes());
        bytes.extend_from_slice(&(self.params.n_particles as u64).to_le_bytes());
        for v in [
            self.params.interaction_u,
            self.params.tunneling_k,
            self.params.gamma_bar,
            self.params.bias_epsilon,
            self.dt,
        ] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        bytes.extend_from_slice(&(self.increments.len() as u64).to_le_bytes());
        for d in &self.increments {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut cursor = Cursor { bytes: &bytes, pos: 0, path };
        if cursor.take(8)? != MAGIC {
            return Err(Error::format(path, "not a measurement record"));
        }
        let version = cursor.u32()?;
        if version != RECORD_FORMAT_VERSION {
            return Err(Error::format(path, format!("unsupported format version {version}")));
        }
        let scheme = SseScheme::from_code(cursor.u32()?)
            .ok_or_else(|| Error::format(path, "unknown scheme code"))?;
        let n_particles = cursor.u64()? as usize;
        let params = ModelParams {
            n_particles,
            interaction_u: cursor.f64()?,
            tunneling_k: cursor.f64()?,
            gamma_bar: cursor.f64()?,
            bias_epsilon: cursor.f64()?,
        };
        let dt = cursor.f64()?;
        let seed = cursor.u64()?;
        let length = cursor.u64()? as usize;
        if bytes.len() - cursor.pos != 8 * length {
            return Err(Error::format(path, "payload length does not match header"));
        }
        let increments = (0..length).map(|_| cursor.f64()).collect::<Result<Vec<_>>>()?;
        Ok(MeasurementRecord {
            params,
            dt,
            seed,
            scheme,
            increments,
        })
    }
}

fn parse<T: std::str::FromStr>(path: &Path, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::format(path, format!("cannot parse {key} from {value:?}")))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(self.path, "truncated file"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
