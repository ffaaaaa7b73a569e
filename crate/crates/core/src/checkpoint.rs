//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "SEPSACKP"
//! version  u32      1
//! input    u32
//! hidden   u32
//! output   u32
//! has_gain u8       0 or 1
//! theta    f64 × hidden·(input+1)
//! head     f64 × output·(hidden+1), row-major
//! gain     f64 × (hidden+1)², row-major, present iff has_gain == 1
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so encode/decode is bit-exact.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::model::{Dims, ReluLayer, SeparableModel};

pub const MAGIC: &[u8; 8] = b"SEPSACKP";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 * 4 + 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: SeparableModel,
    /// RLS gain matrix `B`, if the run used one.
    pub gain: Option<SpdMatrix>,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let dims = self.model.dims();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * (dims.theta_len() + self.model.head.as_slice().len()));
        out.extend_from_slice(MAGIC);
        for v in [VERSION, dims.input as u32, dims.hidden as u32, dims.output as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(self.gain.is_some() as u8);
        let mut put = |xs: &[f64]| xs.iter().for_each(|x| out.extend_from_slice(&x.to_bits().to_le_bytes()));
        put(self.model.theta());
        put(self.model.head.as_slice());
        if let Some(b) = &self.gain {
            put(b.matrix().as_slice());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_owned());
        if bytes.len() < HEADER_LEN {
            return Err(bad("truncated header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let version = u32_at(8);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let (input, hidden, output) = (u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize);
        if input == 0 || hidden == 0 || output == 0 {
            return Err(bad("zero dimension"));
        }
        let has_gain = match bytes[24] {
            0 => false,
            1 => true,
            _ => return Err(bad("gain flag must be 0 or 1")),
        };
        let p = hidden + 1;
        let theta_len = hidden.checked_mul(input + 1);
        let head_len = output.checked_mul(p);
        let gain_len = if has_gain { p.checked_mul(p) } else { Some(0) };
        let (theta_len, head_len, gain_len) = match (theta_len, head_len, gain_len) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(bad("dimensions overflow")),
        };
        let expected = theta_len
            .checked_add(head_len)
            .and_then(|n| n.checked_add(gain_len))
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or_else(|| bad("dimensions overflow"))?;
        if bytes.len() != expected {
            return Err(Error::Checkpoint(format!("expected {expected} bytes, found {}", bytes.len())));
        }

        let mut floats = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))));
        let mut take = |n: usize| -> Vec<f64> { floats.by_ref().take(n).collect() };
        let theta = take(theta_len);
        let head = take(head_len);
        let gain = take(gain_len);

        if theta.iter().chain(&head).chain(&gain).any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        let extractor = ReluLayer::from_flat(input, hidden, theta)?;
        let head = Matrix::from_vec(output, p, head)?;
        let model = SeparableModel::new(extractor, head)?;
        let gain = if has_gain {
            Some(SpdMatrix::new(Matrix::from_vec(p, p, gain)?).map_err(|e| Error::Checkpoint(format!("gain: {e}")))?)
        } else {
            None
        };
        debug_assert_eq!(model.dims(), Dims::new(input, hidden, output));
        Ok(Checkpoint { model, gain })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::decode(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sherman_morrison_downdate;

    fn sample() -> Checkpoint {
        let model = SeparableModel::init_kaiming_uniform(Dims::new(3, 4, 2), 5);
        let gain = sherman_morrison_downdate(&SpdMatrix::scaled_identity(5, 100.0), &[0.1, 0.2, 0.0, 1.0, 1.0]).unwrap();
        Checkpoint {
            model,
            gain: Some(gain),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let bytes = ck.encode();
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.encode(), bytes);

        let bare = Checkpoint { gain: None, ..ck };
        assert_eq!(Checkpoint::decode(&bare.encode()).unwrap(), bare);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().encode();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut b = bytes.clone();
        b[0] = b'X';
        assert!(Checkpoint::decode(&b).is_err());
        let mut b = bytes.clone();
        b[8] = 2;
        assert!(Checkpoint::decode(&b).unwrap_err().to_string().contains("version"));
        let mut b = bytes.clone();
        b[24] = 7;
        assert!(Checkpoint::decode(&b).is_err());
        let mut b = bytes;
        let nan = f64::NAN.to_bits().to_le_bytes();
        b[HEADER_LEN..HEADER_LEN + 8].copy_from_slice(&nan);
        assert!(Checkpoint::decode(&b).is_err());
    }
}
