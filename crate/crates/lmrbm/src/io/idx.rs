//! IDX (MNIST-style) readers. Big-endian headers: magic 2051 for image
//! tensors, 2049 for label vectors.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::BinaryVector;

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

/// Raw IDX image tensor: flattened u8 pixels per image.
#[derive(Debug, Clone)]
pub struct IdxImages {
    pub height: usize,
    pub width: usize,
    /// `count` rows of `height * width` bytes each.
    pub pixels: Vec<Vec<u8>>,
}

fn read_u32_be(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_be_bytes(buf))
}

pub fn load_idx_images(path: &Path) -> Result<IdxImages> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_u32_be(&mut r)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad image magic {magic}, expected {IDX_IMAGES_MAGIC}",
            path.display()
        )));
    }
    let count = read_u32_be(&mut r)? as usize;
    let height = read_u32_be(&mut r)? as usize;
    let width = read_u32_be(&mut r)? as usize;
    if height == 0 || width == 0 {
        return Err(Error::Format(format!(
            "{}: zero image dimensions",
            path.display()
        )));
    }
    let mut pixels = Vec::with_capacity(count);
    let mut buf = vec![0u8; height * width];
    for i in 0..count {
        r.read_exact(&mut buf).map_err(|e| {
            Error::Format(format!("{}: truncated at image {i}: {e}", path.display()))
        })?;
        pixels.push(buf.clone());
    }
    Ok(IdxImages {
        height,
        width,
        pixels,
    })
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_u32_be(&mut r)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad label magic {magic}, expected {IDX_LABELS_MAGIC}",
            path.display()
        )));
    }
    let count = read_u32_be(&mut r)? as usize;
    let mut labels = vec![0u8; count];
    r.read_exact(&mut labels)
        .map_err(|e| Error::Format(format!("{}: truncated labels: {e}", path.display())))?;
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::Format(format!(
            "{}: label byte {bad} outside 0-9",
            path.display()
        )));
    }
    Ok(labels)
}

/// Binarizes grayscale images: a pixel is on when `value / 255 > threshold`.
pub fn binarize_images(images: &IdxImages, threshold: f64) -> Vec<BinaryVector> {
    images
        .pixels
        .iter()
        .map(|img| {
            let bits = img
                .iter()
                .map(|&p| u8::from(f64::from(p) / 255.0 > threshold))
                .collect();
            BinaryVector::from_bits_unchecked(bits)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_images(path: &Path, h: u32, w: u32, images: &[Vec<u8>]) {
        let mut f = File::create(path).unwrap();
        f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(images.len() as u32).to_be_bytes()).unwrap();
        f.write_all(&h.to_be_bytes()).unwrap();
        f.write_all(&w.to_be_bytes()).unwrap();
        for img in images {
            f.write_all(img).unwrap();
        }
    }

    #[test]
    fn round_trip_images_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("imgs");
        write_images(&img_path, 2, 3, &[vec![0, 128, 255, 7, 200, 90]]);
        let imgs = load_idx_images(&img_path).unwrap();
        assert_eq!((imgs.height, imgs.width), (2, 3));
        assert_eq!(imgs.pixels, vec![vec![0, 128, 255, 7, 200, 90]]);

        let lbl_path = dir.path().join("lbls");
        let mut f = File::create(&lbl_path).unwrap();
        f.write_all(&IDX_LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&3u32.to_be_bytes()).unwrap();
        f.write_all(&[4, 0, 9]).unwrap();
        drop(f);
        assert_eq!(load_idx_labels(&lbl_path).unwrap(), vec![4, 0, 9]);

        let bad_path = dir.path().join("badlbls");
        let mut f = File::create(&bad_path).unwrap();
        f.write_all(&IDX_LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&1u32.to_be_bytes()).unwrap();
        f.write_all(&[10]).unwrap();
        drop(f);
        assert!(matches!(load_idx_labels(&bad_path), Err(Error::Format(_))));
    }

    #[test]
    fn binarize_threshold_is_strict() {
        let imgs = IdxImages {
            height: 1,
            width: 4,
            // 127/255 ≈ 0.498, 128/255 ≈ 0.502
            pixels: vec![vec![0, 127, 128, 255]],
        };
        let bin = binarize_images(&imgs, 0.5);
        assert_eq!(bin[0].bits().to_vec(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad");
        std::fs::write(&path, 2049u32.to_be_bytes()).unwrap();
        assert!(matches!(load_idx_images(&path), Err(Error::Format(_))));

        let short = dir.path().join("short");
        let mut f = File::create(&short).unwrap();
        f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(&[1, 2, 3, 4, 5]).unwrap(); // 3 bytes short
        drop(f);
        assert!(matches!(load_idx_images(&short), Err(Error::Format(_))));
    }
}
