//! safetensors reading and writing for parameter stores.

use std::path::Path;

use safetensors::tensor::{Dtype, TensorView};
use safetensors::SafeTensors;

use super::ModelError;
use crate::nn::{Matrix, ParamStore};

pub(crate) struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    /// 1-D tensors become `1 × n` rows; 2-D keep their shape.
    pub fn into_matrix(self, path: &Path) -> Result<Matrix, ModelError> {
        let shape = match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            other => return Err(ModelError::checkpoint(path, format!("{}: unsupported rank {}", self.name, other.len()))),
        };
        Ok(Matrix::from_shape_vec(shape, self.data).expect("element count matches shape"))
    }
}

fn f16_to_f32(h: u16) -> f32 {
    let sign = ((h >> 15) as u32) << 31;
    let exp = ((h >> 10) & 0x1f) as u32;
    let frac = (h & 0x3ff) as u32;
    let bits = match exp {
        0 if frac == 0 => sign,
        0 => {
            // subnormal: renormalize
            let mut e = 127 - 15 + 1;
            let mut f = frac;
            while f & 0x400 == 0 {
                f <<= 1;
                e -= 1;
            }
            sign | (e << 23) | ((f & 0x3ff) << 13)
        }
        0x1f => sign | 0x7f80_0000 | (frac << 13),
        _ => sign | ((exp + 127 - 15) << 23) | (frac << 13),
    };
    f32::from_bits(bits)
}

pub(crate) fn read(path: &Path) -> Result<Vec<Tensor>, ModelError> {
    let bytes = std::fs::read(path).map_err(|e| ModelError::checkpoint(path, e))?;
    let st = SafeTensors::deserialize(&bytes).map_err(|e| ModelError::checkpoint(path, e))?;
    let mut out = Vec::new();
    for (name, view) in st.tensors() {
        let raw = view.data();
        let data: Vec<f64> = match view.dtype() {
            Dtype::F64 => raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            Dtype::F32 => raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
            Dtype::BF16 => raw
                .chunks_exact(2)
                .map(|c| f32::from_bits((u16::from_le_bytes([c[0], c[1]]) as u32) << 16) as f64)
                .collect(),
            Dtype::F16 => raw.chunks_exact(2).map(|c| f16_to_f32(u16::from_le_bytes([c[0], c[1]])) as f64).collect(),
            // integer buffers (e.g. position_ids) are not parameters
            _ => continue,
        };
        out.push(Tensor { name, shape: view.shape().to_vec(), data });
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Precision {
    F32,
    F64,
}

/// Writes every parameter; `one_d` decides which are stored as vectors.
pub(crate) fn write(
    path: &Path,
    store: &ParamStore,
    precision: Precision,
    one_d: impl Fn(&str) -> bool,
) -> Result<(), ModelError> {
    let mut buffers = Vec::with_capacity(store.len());
    for (_, p) in store.iter() {
        let bytes: Vec<u8> = match precision {
            Precision::F64 => p.value.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Precision::F32 => p.value.iter().flat_map(|&x| (x as f32).to_le_bytes()).collect(),
        };
        let shape = if one_d(&p.name) && p.value.nrows() == 1 {
            vec![p.value.ncols()]
        } else {
            vec![p.value.nrows(), p.value.ncols()]
        };
        buffers.push((p.name.clone(), shape, bytes));
    }
    let dtype = match precision {
        Precision::F32 => Dtype::F32,
        Precision::F64 => Dtype::F64,
    };
    let views = buffers
        .iter()
        .map(|(n, s, b)| TensorView::new(dtype, s.clone(), b).map(|v| (n.clone(), v)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ModelError::checkpoint(path, e))?;
    let bytes = safetensors::serialize(views, &None).map_err(|e| ModelError::checkpoint(path, e))?;
    crate::corpus::io::write_atomic(path, &bytes).map_err(|e| ModelError::checkpoint(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_precision_conversion() {
        assert_eq!(f16_to_f32(0x3c00), 1.0);
        assert_eq!(f16_to_f32(0xc000), -2.0);
        assert_eq!(f16_to_f32(0x0001), 2f32.powi(-24));
        assert!(f16_to_f32(0x7c00).is_infinite());
    }

    #[test]
    fn round_trip_f64() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.safetensors");
        let mut s = ParamStore::new();
        s.add("a.weight", Matrix::from_shape_vec((2, 3), vec![1.0, 2.0, 3.0, 4.0, 5.0, 0.1]).unwrap());
        s.add("a.bias", Matrix::from_shape_vec((1, 2), vec![-1.0, 1e-300]).unwrap());
        write(&p, &s, Precision::F64, |n| n.ends_with("bias")).unwrap();
        let t = read(&p).unwrap();
        assert_eq!(t[0].name, "a.bias");
        assert_eq!(t[0].shape, vec![2]);
        assert_eq!(t[1].data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 0.1]);
    }
}
