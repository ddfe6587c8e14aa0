//! Versioned binary checkpoints for the fusion model: magic "PINF",
//! a u32 version, the layer-size chain, seed and step counters, the
//! flattened f64 parameters (little-endian, row-major per layer), and an
//! optional Adam state in the same layout.

use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use cloudinterp::model::{DenseLayer, FusionModel};
use cloudinterp::train::AdamState;
use nalgebra::{DMatrix, DVector};

use super::{io_err, malformed, Result};

pub const MAGIC: [u8; 4] = *b"PINF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: FusionModel,
    pub optimizer: Option<AdamState>,
    pub step: u64,
    pub seed: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(&MAGIC);
        buf.write_u32::<LittleEndian>(VERSION).unwrap();
        let sizes = self.model.layer_sizes();
        buf.write_u32::<LittleEndian>(sizes.len() as u32).unwrap();
        for s in &sizes {
            buf.write_u32::<LittleEndian>(*s as u32).unwrap();
        }
        buf.write_u64::<LittleEndian>(self.seed).unwrap();
        buf.write_u64::<LittleEndian>(self.step).unwrap();
        for layer in self.model.layers() {
            write_layer(&mut buf, &layer.weights, &layer.bias);
        }
        match &self.optimizer {
            None => buf.push(0),
            Some(state) => {
                buf.push(1);
                for (w, b) in &state.m {
                    write_layer(&mut buf, w, b);
                }
                for (w, b) in &state.v {
                    write_layer(&mut buf, w, b);
                }
            }
        }
        let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
        file.write_all(&buf).map_err(|e| io_err(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        let mut cur = Cursor::new(bytes.as_slice());
        let mut magic = [0u8; 4];
        std::io::Read::read_exact(&mut cur, &mut magic)
            .map_err(|_| malformed(path, "truncated magic"))?;
        if magic != MAGIC {
            return Err(malformed(path, "bad magic bytes (not a checkpoint)"));
        }
        let version = cur
            .read_u32::<LittleEndian>()
            .map_err(|_| malformed(path, "truncated version"))?;
        if version != VERSION {
            return Err(malformed(path, format!("unrecognized version {version}")));
        }
        let n_sizes = cur
            .read_u32::<LittleEndian>()
            .map_err(|_| malformed(path, "truncated size count"))? as usize;
        if n_sizes < 2 || n_sizes > 64 {
            return Err(malformed(path, format!("implausible layer chain length {n_sizes}")));
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            sizes.push(
                cur.read_u32::<LittleEndian>()
                    .map_err(|_| malformed(path, "truncated layer sizes"))? as usize,
            );
        }
        let seed = cur
            .read_u64::<LittleEndian>()
            .map_err(|_| malformed(path, "truncated seed"))?;
        let step = cur
            .read_u64::<LittleEndian>()
            .map_err(|_| malformed(path, "truncated step"))?;

        let mut layers = Vec::with_capacity(n_sizes - 1);
        for w in sizes.windows(2) {
            let (weights, bias) = read_layer(&mut cur, w[1], w[0], path)?;
            layers.push(DenseLayer { weights, bias });
        }
        let model = FusionModel::from_layers(layers)
            .map_err(|e| malformed(path, format!("inconsistent parameters: {e}")))?;

        let has_optimizer =
            cur.read_u8().map_err(|_| malformed(path, "truncated optimizer flag"))?;
        let optimizer = match has_optimizer {
            0 => None,
            1 => {
                let mut read_set = || -> Result<Vec<(DMatrix<f64>, DVector<f64>)>> {
                    sizes
                        .windows(2)
                        .map(|w| read_layer(&mut cur, w[1], w[0], path))
                        .collect()
                };
                let m = read_set()?;
                let v = read_set()?;
                Some(AdamState { m, v, step })
            }
            other => {
                return Err(malformed(path, format!("bad optimizer flag {other}")));
            }
        };
        Ok(Checkpoint { model, optimizer, step, seed })
    }
}

fn write_layer(buf: &mut Vec<u8>, weights: &DMatrix<f64>, bias: &DVector<f64>) {
    for r in 0..weights.nrows() {
        for c in 0..weights.ncols() {
            buf.write_f64::<LittleEndian>(weights[(r, c)]).unwrap();
        }
    }
    for b in bias.iter() {
        buf.write_f64::<LittleEndian>(*b).unwrap();
    }
}

fn read_layer(
    cur: &mut Cursor<&[u8]>,
    rows: usize,
    cols: usize,
    path: &Path,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut weights = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            weights[(r, c)] = cur
                .read_f64::<LittleEndian>()
                .map_err(|_| malformed(path, "truncated parameters"))?;
        }
    }
    let mut bias = DVector::zeros(rows);
    for r in 0..rows {
        bias[r] = cur
            .read_f64::<LittleEndian>()
            .map_err(|_| malformed(path, "truncated bias"))?;
    }
    Ok((weights, bias))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_model_and_optimizer_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = FusionModel::standard(42);
        let mut state = AdamState::zeros_like(&model);
        state.step = 17;
        state.m[0].0[(3, 2)] = 0.125;
        state.v[1].1[5] = 1e-9;
        let ckpt = Checkpoint { model: model.clone(), optimizer: Some(state.clone()), step: 17, seed: 42 };
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.model, model);
        assert_eq!(loaded.optimizer.unwrap(), state);
        assert_eq!(loaded.step, 17);
        assert_eq!(loaded.seed, 42);
    }

    #[test]
    fn optimizer_free_checkpoint_is_smaller_and_loads() {
        let dir = tempfile::tempdir().unwrap();
        let with = dir.path().join("with.ckpt");
        let without = dir.path().join("without.ckpt");
        let model = FusionModel::standard(7);
        Checkpoint {
            model: model.clone(),
            optimizer: Some(AdamState::zeros_like(&model)),
            step: 0,
            seed: 7,
        }
        .save(&with)
        .unwrap();
        Checkpoint { model, optimizer: None, step: 0, seed: 7 }.save(&without).unwrap();
        assert!(fs::metadata(&with).unwrap().len() > fs::metadata(&without).unwrap().len());
        assert!(Checkpoint::load(&without).unwrap().optimizer.is_none());
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        fs::write(&path, b"NOPE").unwrap();
        assert!(Checkpoint::load(&path).is_err());
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&99u32.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }

    #[test]
    fn reduced_architectures_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.ckpt");
        let model = FusionModel::seeded(&[4, 2, 2, 3], 1).unwrap();
        Checkpoint { model: model.clone(), optimizer: None, step: 5, seed: 1 }
            .save(&path)
            .unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap().model, model);
    }
}
