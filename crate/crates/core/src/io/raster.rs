//! Minimal raster container.
//!
//! Layout (little-endian): `"TRAV"`, version `u16`, dtype `u8`
//! (0 = `f32`, 1 = `u8`), channels `u16`, height `u32`, width `u32`, then the
//! row-major, channel-interleaved payload. Nothing may follow the payload.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TRAV";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 17;

#[derive(Debug, Clone, PartialEq)]
pub enum RasterData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

impl RasterData {
    fn len(&self) -> usize {
        match self {
            RasterData::F32(v) => v.len(),
            RasterData::U8(v) => v.len(),
        }
    }

    fn code(&self) -> u8 {
        match self {
            RasterData::F32(_) => 0,
            RasterData::U8(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub channels: u16,
    pub data: RasterData,
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: u16, data: RasterData) -> Result<Self> {
        let expected = width as usize * height as usize * channels as usize;
        if channels == 0 {
            return Err(Error::Shape("raster needs at least one channel".into()));
        }
        if data.len() != expected {
            return Err(Error::Shape(format!("{} values for a {width}x{height}x{channels} raster", data.len())));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn from_f32(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let (w, h, c) = dims(width, height, channels)?;
        Self::new(w, h, c, RasterData::F32(data))
    }

    pub fn from_u8(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        let (w, h, c) = dims(width, height, channels)?;
        Self::new(w, h, c, RasterData::U8(data))
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            RasterData::F32(v) => Some(v),
            RasterData::U8(_) => None,
        }
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.data {
            RasterData::U8(v) => Some(v),
            RasterData::F32(_) => None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let elem = if matches!(self.data, RasterData::F32(_)) { 4 } else { 1 };
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * elem);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.data.code());
        out.extend_from_slice(&self.channels.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        match &self.data {
            RasterData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            RasterData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    /// Parses an encoded raster; `path` only labels errors.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Raster { path: path.to_path_buf(), reason };
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(bad("bad magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let dtype = bytes[6];
        let channels = u16::from_le_bytes([bytes[7], bytes[8]]);
        let height = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
        let width = u32::from_le_bytes(bytes[13..17].try_into().unwrap());
        let elem: u64 = match dtype {
            0 => 4,
            1 => 1,
            d => return Err(bad(format!("unknown dtype code {d}"))),
        };
        if channels == 0 {
            return Err(bad("zero channels".into()));
        }
        let expected = u64::from(width) * u64::from(height) * u64::from(channels) * elem;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() as u64 != expected {
            return Err(bad(format!("payload is {} bytes, header implies {expected}", payload.len())));
        }
        let data = if dtype == 0 {
            RasterData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
        } else {
            RasterData::U8(payload.to_vec())
        };
        Ok(Self { width, height, channels, data })
    }
}

fn dims(width: usize, height: usize, channels: usize) -> Result<(u32, u32, u16)> {
    let w = u32::try_from(width).map_err(|_| Error::Shape("raster width too large".into()))?;
    let h = u32::try_from(height).map_err(|_| Error::Shape("raster height too large".into()))?;
    let c = u16::try_from(channels).map_err(|_| Error::Shape("too many raster channels".into()))?;
    Ok((w, h, c))
}

pub fn write_raster(path: &Path, raster: &Raster) -> Result<()> {
    super::atomic_write(path, &raster.encode())
}

pub fn read_raster(path: &Path) -> Result<Raster> {
    let bytes = super::read_input(path)?;
    Raster::decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn p() -> &'static Path {
        Path::new("t.rast")
    }

    #[test]
    fn random_64x48x8_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f32> = (0..64 * 48 * 8).map(|_| f32::from_bits(rng.random::<u32>())).collect();
        let r = Raster::from_f32(64, 48, 8, data).unwrap();
        let bytes = r.encode();
        assert_eq!(bytes.len(), HEADER_LEN + 64 * 48 * 8 * 4);
        let back = Raster::decode(&bytes, p()).unwrap();
        assert_eq!(back.encode(), bytes);
        // NaN payloads survive bit-for-bit, which PartialEq on floats cannot show.
        let a: Vec<u32> = r.as_f32().unwrap().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u32> = back.as_f32().unwrap().iter().map(|x| x.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn header_layout() {
        let r = Raster::from_u8(3, 2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let b = r.encode();
        assert_eq!(&b[..4], b"TRAV");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(b[6], 1);
        assert_eq!(&b[7..9], &[1, 0]);
        assert_eq!(&b[9..13], &[2, 0, 0, 0]);
        assert_eq!(&b[13..17], &[3, 0, 0, 0]);
        assert_eq!(&b[17..], &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn rejects_malformed() {
        let good = Raster::from_u8(2, 2, 1, vec![0; 4]).unwrap().encode();
        let mut magic = good.clone();
        magic[0] = b'X';
        assert!(matches!(Raster::decode(&magic, p()), Err(Error::Raster { .. })));
        let mut dtype = good.clone();
        dtype[6] = 7;
        assert!(Raster::decode(&dtype, p()).is_err());
        let mut version = good.clone();
        version[4] = 2;
        assert!(Raster::decode(&version, p()).is_err());
        assert!(Raster::decode(&good[..good.len() - 1], p()).is_err());
        let mut long = good.clone();
        long.push(0);
        assert!(Raster::decode(&long, p()).is_err());
        assert!(Raster::decode(&good[..10], p()).is_err());
        assert!(Raster::from_u8(2, 2, 1, vec![0; 3]).is_err());
        assert!(Raster::from_u8(2, 2, 0, vec![]).is_err());
    }

    proptest! {
        #[test]
        fn fuzzed_shapes_round_trip(w in 0usize..20, h in 0usize..20, c in 1usize..5, seed in any::<u64>(), float in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = w * h * c;
            let r = if float {
                Raster::from_f32(w, h, c, (0..n).map(|_| f32::from_bits(rng.random())).collect()).unwrap()
            } else {
                Raster::from_u8(w, h, c, (0..n).map(|_| rng.random()).collect()).unwrap()
            };
            let bytes = r.encode();
            prop_assert_eq!(Raster::decode(&bytes, p()).unwrap().encode(), bytes);
        }

        #[test]
        fn corrupted_headers_never_misparse(
            w in 1usize..6, h in 1usize..6, c in 1usize..3,
            pos in 0usize..17, val in any::<u8>(), cut in 0usize..200,
        ) {
            let r = Raster::from_u8(w, h, c, vec![9; w * h * c]).unwrap();
            let bytes = r.encode();
            let mut bad = bytes.clone();
            bad[pos] = val;
            match Raster::decode(&bad, p()) {
                // A surviving edit must describe a consistent raster of the same byte size.
                Ok(got) => {
                    prop_assert_eq!(got.encode(), bad.clone());
                }
                Err(e) => prop_assert!(matches!(e, Error::Raster { .. }), "unexpected error kind"),
            }
            let cut = cut.min(bytes.len() - 1);
            prop_assert!(Raster::decode(&bytes[..cut], p()).is_err());
        }
    }
}
