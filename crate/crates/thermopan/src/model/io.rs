//! Versioned binary container for trained parameters: magic string,
//! architecture descriptor, then tensors as little-endian f32 with
//! shape headers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::tensor::Tensor;
use crate::model::{Architecture, ModelParams};

const MAGIC: &[u8; 8] = b"TPANPRM\x01";

pub fn save_params(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    let a = &params.arch;
    for v in [
        a.in_channels as u32,
        a.out_channels as u32,
        a.base_width as u32,
        a.levels as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(a.leaky_slope as f32).to_le_bytes())?;
    w.write_all(&(a.dropout as f32).to_le_bytes())?;
    w.write_all(&(params.tensors.len() as u32).to_le_bytes())?;
    for t in &params.tensors {
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32(r: &mut impl Read) -> Result<f32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(f32::from_le_bytes(buf))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::ParamsFile("bad magic; not a parameter file".into()));
    }
    let in_channels = read_u32(&mut r)? as usize;
    let out_channels = read_u32(&mut r)? as usize;
    let base_width = read_u32(&mut r)? as usize;
    let levels = read_u32(&mut r)? as usize;
    let leaky_slope = read_f32(&mut r)? as f64;
    let dropout = read_f32(&mut r)? as f64;
    let arch = Architecture {
        in_channels,
        out_channels,
        base_width,
        levels,
        leaky_slope,
        dropout,
    };
    arch.validate()?;
    let count = read_u32(&mut r)? as usize;
    let expected = arch.tensor_shapes();
    if count != expected.len() {
        return Err(Error::ParamsFile(format!(
            "file holds {count} tensors, architecture needs {}",
            expected.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for want in &expected {
        let ndim = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u32(&mut r)? as usize);
        }
        if &shape != want {
            return Err(Error::ParamsFile(format!(
                "tensor shape {shape:?} does not match architecture (expected {want:?})"
            )));
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let v = read_f32(&mut r)? as f64;
            if !v.is_finite() {
                return Err(Error::ParamsFile("non-finite tensor value".into()));
            }
            data.push(v);
        }
        tensors.push(Tensor::from_vec(&shape, data)?);
    }
    Ok(ModelParams { arch, tensors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_f32_values() {
        let arch = Architecture::desk_scale();
        let params = ModelParams::init(&arch, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tpan");
        save_params(&params, &path).unwrap();
        let back = load_params(&path).unwrap();
        assert_eq!(back.tensors.len(), params.tensors.len());
        for (a, b) in params.tensors.iter().zip(back.tensors.iter()) {
            assert_eq!(a.shape(), b.shape());
            for (&x, &y) in a.data().iter().zip(b.data().iter()) {
                assert_eq!(x as f32, y as f32);
            }
        }
        // A second save of the loaded params is byte-identical.
        let path2 = dir.path().join("m2.tpan");
        save_params(&back, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn rejects_corrupted_magic() {
        let arch = Architecture::desk_scale();
        let params = ModelParams::init(&arch, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tpan");
        save_params(&params, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xFF;
        std::fs::write(&path, bytes).unwrap();
        assert!(load_params(&path).is_err());
    }
}
