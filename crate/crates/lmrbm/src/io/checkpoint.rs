//! LMRB model checkpoints.
//!
//! Layout, all little-endian: magic `LMRB`, u32 version (1), u8 variant
//! (0 = lm, 1 = zeroed), u32 n, u32 m, u32 r (0 = dense weights), then
//! f64 arrays: visible biases `b[n]`, hidden biases `c[m]`, observation
//! probabilities `lambda[n]`, and the weights — `W` row-major `n x m`
//! when dense, else `A` (`n x r`) followed by `B` (`r x m`) row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::training::Variant;
use crate::types::{RbmParams, Weights};

pub const LMRB_MAGIC: &[u8; 4] = b"LMRB";
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_f64_slice(w: &mut impl Write, xs: impl IntoIterator<Item = f64>) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32_le(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64_vec(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

pub fn save_checkpoint(params: &RbmParams, variant: Variant, path: &Path) -> Result<()> {
    params.validate()?;
    let (n, m) = (params.n_visible(), params.n_hidden());
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(LMRB_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&[match variant {
        Variant::Lm => 0u8,
        Variant::Zeroed => 1u8,
    }])?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(m as u32).to_le_bytes())?;
    let r = params.weights.rank().unwrap_or(0);
    w.write_all(&(r as u32).to_le_bytes())?;
    write_f64_slice(&mut w, params.visible_bias.iter().copied())?;
    write_f64_slice(&mut w, params.hidden_bias.iter().copied())?;
    write_f64_slice(&mut w, params.lambda.iter().copied())?;
    match &params.weights {
        Weights::Dense(mat) => write_f64_slice(&mut w, mat.iter().copied())?,
        Weights::Factored { a, b } => {
            write_f64_slice(&mut w, a.iter().copied())?;
            write_f64_slice(&mut w, b.iter().copied())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(RbmParams, Variant)> {
    let mut rd = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    rd.read_exact(&mut magic)?;
    if &magic != LMRB_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {:?}, expected LMRB",
            path.display(),
            magic
        )));
    }
    let version = read_u32_le(&mut rd)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let mut variant_byte = [0u8; 1];
    rd.read_exact(&mut variant_byte)?;
    let variant = match variant_byte[0] {
        0 => Variant::Lm,
        1 => Variant::Zeroed,
        v => {
            return Err(Error::Format(format!(
                "{}: unknown variant byte {v}",
                path.display()
            )))
        }
    };
    let n = read_u32_le(&mut rd)? as usize;
    let m = read_u32_le(&mut rd)? as usize;
    let r = read_u32_le(&mut rd)? as usize;
    if n == 0 || m == 0 {
        return Err(Error::Format(format!("{}: zero unit count", path.display())));
    }
    let visible_bias = Array1::from_vec(read_f64_vec(&mut rd, n)?);
    let hidden_bias = Array1::from_vec(read_f64_vec(&mut rd, m)?);
    let lambda = Array1::from_vec(read_f64_vec(&mut rd, n)?);
    let weights = if r == 0 {
        Weights::Dense(
            Array2::from_shape_vec((n, m), read_f64_vec(&mut rd, n * m)?).unwrap(),
        )
    } else {
        let a = Array2::from_shape_vec((n, r), read_f64_vec(&mut rd, n * r)?).unwrap();
        let b = Array2::from_shape_vec((r, m), read_f64_vec(&mut rd, r * m)?).unwrap();
        Weights::Factored { a, b }
    };
    let mut trailing = [0u8; 1];
    if rd.read(&mut trailing)? != 0 {
        return Err(Error::Format(format!(
            "{}: trailing bytes after checkpoint",
            path.display()
        )));
    }
    let params = RbmParams {
        visible_bias,
        hidden_bias,
        weights,
        lambda,
    };
    params
        .validate()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    Ok((params, variant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dense_params() -> RbmParams {
        RbmParams {
            visible_bias: array![0.1, -0.2],
            hidden_bias: array![0.3, 0.0, -0.5],
            weights: Weights::Dense(array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]),
            lambda: array![0.7, 0.4],
        }
    }

    #[test]
    fn dense_round_trip_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lmrb");
        let params = dense_params();
        save_checkpoint(&params, Variant::Lm, &path).unwrap();
        // 4 magic + 4 version + 1 variant + 12 dims + 8*(2 + 3 + 2 + 6)
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 125);
        let (back, variant) = load_checkpoint(&path).unwrap();
        assert_eq!(variant, Variant::Lm);
        assert_eq!(back.visible_bias, params.visible_bias);
        assert_eq!(back.hidden_bias, params.hidden_bias);
        assert_eq!(back.lambda, params.lambda);
        assert_eq!(
            back.effective_weights().to_owned(),
            params.effective_weights().to_owned()
        );
    }

    #[test]
    fn factored_round_trip_preserves_factors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.lmrb");
        let params = RbmParams {
            visible_bias: array![0.0, 0.0, 0.0],
            hidden_bias: array![0.0, 0.0],
            weights: Weights::Factored {
                a: array![[1.0], [2.0], [3.0]],
                b: array![[0.5, -0.5]],
            },
            lambda: array![1.0, 1.0, 1.0],
        };
        save_checkpoint(&params, Variant::Zeroed, &path).unwrap();
        let (back, variant) = load_checkpoint(&path).unwrap();
        assert_eq!(variant, Variant::Zeroed);
        match (&back.weights, &params.weights) {
            (Weights::Factored { a, b }, Weights::Factored { a: a0, b: b0 }) => {
                assert_eq!(a, a0);
                assert_eq!(b, b0);
            }
            _ => panic!("factored weights not preserved"),
        }
    }

    #[test]
    fn rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lmrb");
        save_checkpoint(&dense_params(), Variant::Lm, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let truncated = dir.path().join("t.lmrb");
        std::fs::write(&truncated, &bytes[..bytes.len() - 1]).unwrap();
        assert!(load_checkpoint(&truncated).is_err());

        let extended = dir.path().join("e.lmrb");
        let mut longer = bytes.clone();
        longer.push(0);
        std::fs::write(&extended, &longer).unwrap();
        assert!(matches!(load_checkpoint(&extended), Err(Error::Format(_))));

        let mut bad = bytes.clone();
        bad[0] = b'X';
        let badpath = dir.path().join("b.lmrb");
        std::fs::write(&badpath, &bad).unwrap();
        assert!(matches!(load_checkpoint(&badpath), Err(Error::Format(_))));

        // non-finite bias -> rejected by validate on load
        let mut nan = bytes;
        let bias_off = 4 + 4 + 1 + 12;
        nan[bias_off..bias_off + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        let nanpath = dir.path().join("n.lmrb");
        std::fs::write(&nanpath, &nan).unwrap();
        assert!(load_checkpoint(&nanpath).is_err());
    }
}
