//! "DPWF v1" little-endian waveform files.
//!
//! Layout: magic `DPWF`, `u32` version (1), `u64` n_samples, `f64` dt in
//! seconds, `f64` z in km, then `n_samples` (re, im) `f64` pairs for the x
//! polarization followed by the y polarization.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{DualPolWaveform, WaveformGrid};

pub const MAGIC: &[u8; 4] = b"DPWF";
pub const VERSION: u32 = 1;

pub fn write<W: Write>(mut out: W, w: &DualPolWaveform) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(VERSION)?;
    out.write_u64::<LittleEndian>(w.len() as u64)?;
    out.write_f64::<LittleEndian>(w.grid().dt())?;
    out.write_f64::<LittleEndian>(w.z_km())?;
    for v in w.x().iter().chain(w.y()) {
        out.write_f64::<LittleEndian>(v.re)?;
        out.write_f64::<LittleEndian>(v.im)?;
    }
    Ok(())
}

/// Reads a waveform. `hint` supplies symbol rate / oversampling when the
/// caller knows them; its sampling must agree with the file header.
pub fn read<R: Read>(mut inp: R, hint: Option<&WaveformGrid>) -> Result<DualPolWaveform> {
    let mut magic = [0u8; 4];
    inp.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a DPWF file".into()));
    }
    let version = inp.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported DPWF version {version}")));
    }
    let n = inp.read_u64::<LittleEndian>()? as usize;
    let dt = inp.read_f64::<LittleEndian>()?;
    let z_km = inp.read_f64::<LittleEndian>()?;
    let grid = match hint {
        Some(g) if g.n_samples() == n && g.dt() == dt => *g,
        Some(g) => {
            return Err(Error::GridMismatch(format!(
                "file has {n} samples @ {dt:e} s, expected {} @ {:e} s",
                g.n_samples(),
                g.dt()
            )))
        }
        None => WaveformGrid::from_sampling(n, dt)?,
    };
    let mut read_pol = || -> Result<Vec<Complex64>> {
        (0..n)
            .map(|_| {
                let re = inp.read_f64::<LittleEndian>()?;
                let im = inp.read_f64::<LittleEndian>()?;
                Ok(Complex64::new(re, im))
            })
            .collect()
    };
    let x = read_pol()?;
    let y = read_pol()?;
    DualPolWaveform::new(x, y, grid, z_km)
}

pub fn save(path: impl AsRef<Path>, w: &DualPolWaveform) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write(&mut out, w)?;
    out.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>, hint: Option<&WaveformGrid>) -> Result<DualPolWaveform> {
    read(BufReader::new(File::open(path)?), hint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = WaveformGrid::new(2, 30e9, 4).unwrap();
        let w = DualPolWaveform::from_fn(g, 12.5, |t| (Complex64::new(t, 1.0), Complex64::new(-1.0, t)));
        let mut buf = Vec::new();
        write(&mut buf, &w).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 8 + 2 * 8 * 16);
        assert_eq!(&buf[..4], b"DPWF");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), g.dt());
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 12.5);
        // first y sample: re = -1.0
        assert_eq!(f64::from_le_bytes(buf[32 + 128..32 + 136].try_into().unwrap()), -1.0);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let g = WaveformGrid::new(2, 30e9, 4).unwrap();
        let mut buf = Vec::new();
        write(&mut buf, &DualPolWaveform::zeros(g, 0.0)).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read(&bad[..], None), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[4] = 2;
        assert!(matches!(read(&bad[..], None), Err(Error::Format(_))));
        assert!(read(&buf[..40], None).is_err());
        let other = WaveformGrid::new(4, 30e9, 4).unwrap();
        assert!(matches!(read(&buf[..], Some(&other)), Err(Error::GridMismatch(_))));
    }

    proptest! {
        #[test]
        fn round_trip(vals in proptest::collection::vec(-1e3f64..1e3, 64), z in 0.0f64..200.0) {
            let g = WaveformGrid::new(4, 30e9, 4).unwrap();
            let x: Vec<_> = vals[..32].chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
            let y: Vec<_> = vals[32..].chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
            let w = DualPolWaveform::new(x, y, g, z).unwrap();
            let mut buf = Vec::new();
            write(&mut buf, &w).unwrap();
            prop_assert_eq!(read(&buf[..], Some(&g)).unwrap(), w);
        }
    }
}
