//! LMDS and LMCP containers.
//!
//! LMDS holds a masked binary dataset: magic `LMDS`, then little-endian
//! u32 version (1), count, height, width, followed per sample by
//! `height*width` pixel bytes (missing stored as 0), `height*width` mask
//! bytes (1 = missing), and one label byte.
//!
//! LMCP holds real-valued completions in the same layout, except each
//! pixel is a little-endian f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::imputation::Completion;
use crate::missingness::{MaskedDataset, MaskedSample};
use crate::types::{BinaryVector, Mask};

pub const LMDS_MAGIC: &[u8; 4] = b"LMDS";
pub const LMCP_MAGIC: &[u8; 4] = b"LMCP";
pub const CONTAINER_VERSION: u32 = 1;

fn write_header(w: &mut impl Write, magic: &[u8; 4], count: u32, h: u32, width: u32) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    w.write_all(&h.to_le_bytes())?;
    w.write_all(&width.to_le_bytes())?;
    Ok(())
}

fn read_u32_le(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_header(r: &mut impl Read, magic: &[u8; 4], path: &Path) -> Result<(usize, usize, usize)> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "{}: bad magic {:?}, expected {:?}",
            path.display(),
            got,
            magic
        )));
    }
    let version = read_u32_le(r)?;
    if version != CONTAINER_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let count = read_u32_le(r)? as usize;
    let height = read_u32_le(r)? as usize;
    let width = read_u32_le(r)? as usize;
    if height == 0 || width == 0 {
        return Err(Error::Format(format!(
            "{}: zero dimensions",
            path.display()
        )));
    }
    Ok((count, height, width))
}

pub fn write_masked_dataset(dataset: &MaskedDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        LMDS_MAGIC,
        dataset.len() as u32,
        dataset.height as u32,
        dataset.width as u32,
    )?;
    for s in &dataset.samples {
        w.write_all(s.pixels.bits().as_slice().unwrap())?;
        w.write_all(s.mask.missing().as_slice().unwrap())?;
        w.write_all(&[s.label])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_masked_dataset(path: &Path) -> Result<MaskedDataset> {
    let mut r = BufReader::new(File::open(path)?);
    let (count, height, width) = read_header(&mut r, LMDS_MAGIC, path)?;
    let n = height * width;
    let mut samples = Vec::with_capacity(count);
    let mut pixels = vec![0u8; n];
    let mut mask = vec![0u8; n];
    let mut label = [0u8; 1];
    for i in 0..count {
        r.read_exact(&mut pixels)
            .and_then(|()| r.read_exact(&mut mask))
            .and_then(|()| r.read_exact(&mut label))
            .map_err(|e| {
                Error::Format(format!("{}: truncated at sample {i}: {e}", path.display()))
            })?;
        let pixels = BinaryVector::from_bits(pixels.clone())
            .map_err(|_| Error::Format(format!("{}: non-binary pixel", path.display())))?;
        let mask = Mask::from_missing(mask.clone())
            .map_err(|_| Error::Format(format!("{}: non-binary mask", path.display())))?;
        // missing pixels must be stored zeroed
        if pixels
            .bits()
            .iter()
            .zip(mask.missing())
            .any(|(&p, &m)| m == 1 && p != 0)
        {
            return Err(Error::Format(format!(
                "{}: sample {i} has nonzero missing pixels",
                path.display()
            )));
        }
        samples.push(MaskedSample {
            pixels,
            mask,
            label: label[0],
        });
    }
    Ok(MaskedDataset {
        samples,
        height,
        width,
    })
}

/// Completions with their labels and image geometry, as stored in LMCP.
#[derive(Debug, Clone)]
pub struct CompletionSet {
    pub completions: Vec<Completion>,
    pub labels: Vec<u8>,
    pub height: usize,
    pub width: usize,
}

pub fn write_completions(set: &CompletionSet, path: &Path) -> Result<()> {
    if set.completions.len() != set.labels.len() {
        return Err(Error::dim(
            "completion labels",
            set.completions.len(),
            set.labels.len(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        LMCP_MAGIC,
        set.completions.len() as u32,
        set.height as u32,
        set.width as u32,
    )?;
    for (c, &label) in set.completions.iter().zip(&set.labels) {
        for &v in &c.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        w.write_all(c.source_mask.missing().as_slice().unwrap())?;
        w.write_all(&[label])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_completions(path: &Path) -> Result<CompletionSet> {
    let mut r = BufReader::new(File::open(path)?);
    let (count, height, width) = read_header(&mut r, LMCP_MAGIC, path)?;
    let n = height * width;
    let mut completions = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut values_buf = vec![0u8; n * 4];
    let mut mask = vec![0u8; n];
    let mut label = [0u8; 1];
    for i in 0..count {
        r.read_exact(&mut values_buf)
            .and_then(|()| r.read_exact(&mut mask))
            .and_then(|()| r.read_exact(&mut label))
            .map_err(|e| {
                Error::Format(format!("{}: truncated at sample {i}: {e}", path.display()))
            })?;
        let values = Array1::from_iter(values_buf.chunks_exact(4).map(|b| {
            f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        }));
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "{}: non-finite completion value in sample {i}",
                path.display()
            )));
        }
        let source_mask = Mask::from_missing(mask.clone())
            .map_err(|_| Error::Format(format!("{}: non-binary mask", path.display())))?;
        completions.push(Completion {
            values,
            source_mask,
        });
        labels.push(label[0]);
    }
    Ok(CompletionSet {
        completions,
        labels,
        height,
        width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy_dataset() -> MaskedDataset {
        MaskedDataset {
            samples: vec![
                MaskedSample {
                    pixels: BinaryVector::from_bits(vec![1, 0, 0, 1, 0, 0]).unwrap(),
                    mask: Mask::from_missing(vec![0, 0, 1, 0, 0, 1]).unwrap(),
                    label: 3,
                },
                MaskedSample {
                    pixels: BinaryVector::from_bits(vec![0, 0, 0, 0, 0, 0]).unwrap(),
                    mask: Mask::from_missing(vec![1, 1, 1, 1, 1, 1]).unwrap(),
                    label: 9,
                },
            ],
            height: 2,
            width: 3,
        }
    }

    #[test]
    fn lmds_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.lmds");
        let ds = toy_dataset();
        write_masked_dataset(&ds, &path).unwrap();
        let back = read_masked_dataset(&path).unwrap();
        assert_eq!(back.height, 2);
        assert_eq!(back.width, 3);
        assert_eq!(back.samples.len(), 2);
        for (a, b) in ds.samples.iter().zip(&back.samples) {
            assert_eq!(a.pixels.bits(), b.pixels.bits());
            assert_eq!(a.mask.missing(), b.mask.missing());
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn lmds_rejects_nonzero_missing_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.lmds");
        let mut ds = toy_dataset();
        // corrupt invariant: pixel set where mask says missing
        ds.samples[0].pixels = BinaryVector::from_bits(vec![1, 0, 1, 1, 0, 0]).unwrap();
        write_masked_dataset(&ds, &path).unwrap();
        assert!(matches!(read_masked_dataset(&path), Err(Error::Format(_))));
    }

    #[test]
    fn lmds_rejects_wrong_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x");
        std::fs::write(&path, b"LMCPxxxxxxxxxxxxxxxx").unwrap();
        assert!(matches!(read_masked_dataset(&path), Err(Error::Format(_))));

        let good = dir.path().join("good.lmds");
        write_masked_dataset(&toy_dataset(), &good).unwrap();
        let bytes = std::fs::read(&good).unwrap();
        let cut = dir.path().join("cut.lmds");
        std::fs::write(&cut, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(read_masked_dataset(&cut), Err(Error::Format(_))));
    }

    #[test]
    fn lmcp_round_trip_is_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.lmcp");
        let set = CompletionSet {
            completions: vec![Completion {
                values: array![0.0, 1.0, 0.25, 0.7, 0.5, 0.125],
                source_mask: Mask::from_missing(vec![0, 0, 1, 1, 0, 1]).unwrap(),
            }],
            labels: vec![5],
            height: 2,
            width: 3,
        };
        write_completions(&set, &path).unwrap();
        let back = read_completions(&path).unwrap();
        assert_eq!(back.labels, vec![5]);
        for (a, b) in set.completions[0]
            .values
            .iter()
            .zip(&back.completions[0].values)
        {
            // values survive the f32 narrowing exactly when representable
            assert_eq!(f64::from(*a as f32), *b);
        }
        assert_eq!(
            back.completions[0].source_mask.missing(),
            set.completions[0].source_mask.missing()
        );
    }
}
