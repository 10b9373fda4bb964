use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::arch::ArchDescriptor;
use super::net::{self, Workspace};
use crate::error::{Error, Result};
use crate::imgproc::ModelInput;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DIQM";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Predicted quality of one text line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    /// Unclamped network output.
    pub raw: f64,
    /// `raw` clamped to [0, 1].
    pub value: f64,
}

impl QualityScore {
    pub fn from_raw(raw: f64) -> Self {
        QualityScore {
            raw,
            value: raw.clamp(0.0, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorModel {
    pub arch: ArchDescriptor,
    pub params: Vec<f32>,
    pub version: u32,
}

/// Deterministic initialization: He-normal conv weights, zero biases, and
/// head weights drawn from U(-0.1, 0.1).
pub fn init_model(arch: &ArchDescriptor, seed: u64) -> Result<PredictorModel> {
    arch.validate()?;
    let layout = arch.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![0.0f32; layout.total];
    for l in &layout.convs {
        let std = (2.0 / l.fan_in() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        for p in &mut params[l.weight_offset..l.weight_offset + l.weight_len()] {
            *p = normal.sample(&mut rng) as f32;
        }
    }
    for p in &mut params[layout.head_weight_offset..layout.head_bias_offset] {
        *p = loop {
            let v = rng.random_range(-0.1..0.1) as f32;
            if v > -0.1 && v < 0.1 {
                break v;
            }
        };
    }
    Ok(PredictorModel {
        arch: arch.clone(),
        params,
        version: CHECKPOINT_VERSION,
    })
}

impl PredictorModel {
    pub fn zeros(arch: &ArchDescriptor) -> Result<Self> {
        arch.validate()?;
        Ok(PredictorModel {
            arch: arch.clone(),
            params: vec![0.0; arch.param_count()],
            version: CHECKPOINT_VERSION,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.params.len() != self.arch.param_count() {
            return Err(Error::param(format!(
                "model has {} parameters, architecture needs {}",
                self.params.len(),
                self.arch.param_count()
            )));
        }
        if let Some(i) = self.params.iter().position(|p| !p.is_finite()) {
            return Err(Error::param(format!("parameter {i} is not finite")));
        }
        Ok(())
    }

    pub fn check_input(&self, input: &ModelInput) -> Result<()> {
        let a = &self.arch;
        if (input.channels, input.height, input.width) != (a.channels, a.height, a.width) {
            return Err(Error::param(format!(
                "input shape {}x{}x{} does not match model {}x{}x{}",
                input.channels, input.height, input.width, a.channels, a.height, a.width
            )));
        }
        Ok(())
    }

    pub fn workspace(&self) -> Workspace<f32> {
        Workspace::new(&self.arch)
    }

    pub fn forward(&self, input: &ModelInput) -> Result<QualityScore> {
        self.forward_with(input, &mut self.workspace())
    }

    /// Like [`forward`](Self::forward) but reuses caller-owned scratch space.
    pub fn forward_with(&self, input: &ModelInput, ws: &mut Workspace<f32>) -> Result<QualityScore> {
        self.check_input(input)?;
        Ok(QualityScore::from_raw(f64::from(net::forward(
            &self.params,
            &input.data,
            ws,
        ))))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let a = &self.arch;
        let mut out = Vec::with_capacity(32 + 4 * self.params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        for v in [a.channels, a.height, a.width, a.blocks.len()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for &b in &a.blocks {
            out.extend_from_slice(&(b as u32).to_le_bytes());
        }
        out.extend_from_slice(&u32::from(a.standardize_input).to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::data("not a model checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::data(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let channels = r.u32()? as usize;
        let height = r.u32()? as usize;
        let width = r.u32()? as usize;
        let nblocks = r.u32()? as usize;
        if nblocks > 64 {
            return Err(Error::data(format!("implausible block count {nblocks}")));
        }
        let blocks = (0..nblocks)
            .map(|_| r.u32().map(|b| b as usize))
            .collect::<Result<Vec<_>>>()?;
        let standardize_input = match r.u32()? {
            0 => false,
            1 => true,
            f => return Err(Error::data(format!("unknown input-normalization flag {f}"))),
        };
        let arch = ArchDescriptor {
            channels,
            height,
            width,
            blocks,
            standardize_input,
        };
        arch.validate()
            .map_err(|e| Error::data(format!("checkpoint architecture: {e}")))?;
        let count = r.u64()? as usize;
        if count != arch.param_count() {
            return Err(Error::data(format!(
                "checkpoint holds {count} parameters, architecture needs {}",
                arch.param_count()
            )));
        }
        let raw = r.take(count * 4)?;
        let params = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        if r.pos != bytes.len() {
            return Err(Error::data("trailing bytes after checkpoint parameters"));
        }
        let model = PredictorModel {
            arch,
            params,
            version,
        };
        model
            .validate()
            .map_err(|e| Error::data(format!("checkpoint: {e}")))?;
        Ok(model)
    }

    /// Writes through a temporary file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(path, e)
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::data("truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(arch: &ArchDescriptor, f: impl Fn(usize) -> f32) -> ModelInput {
        ModelInput::new(
            arch.channels,
            arch.height,
            arch.width,
            (0..arch.input_len()).map(f).collect(),
        )
        .unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let arch = ArchDescriptor::default();
        assert_eq!(init_model(&arch, 5).unwrap(), init_model(&arch, 5).unwrap());
        assert_ne!(
            init_model(&arch, 5).unwrap().params,
            init_model(&arch, 6).unwrap().params
        );
    }

    #[test]
    fn he_variance_and_head_range() {
        let arch = ArchDescriptor::default();
        let m = init_model(&arch, 11).unwrap();
        let layout = arch.layout();
        let mut checked = 0;
        for l in layout.convs.iter().filter(|l| l.weight_len() >= 1000) {
            let w = &m.params[l.weight_offset..l.weight_offset + l.weight_len()];
            let n = w.len() as f64;
            let mean = w.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
            let var = w.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n;
            let target = 2.0 / l.fan_in() as f64;
            assert!((var / target - 1.0).abs() < 0.1, "var {var} vs {target}");
            assert!(m.params[l.bias_offset..l.bias_offset + l.out_channels]
                .iter()
                .all(|&b| b == 0.0));
            checked += 1;
        }
        assert_eq!(checked, 2);
        let head = &m.params[layout.head_weight_offset..layout.head_bias_offset];
        assert!(head.iter().all(|&w| w > -0.1 && w < 0.1));
        assert_eq!(m.params[layout.head_bias_offset], 0.0);
    }

    #[test]
    fn zero_params_give_zero_and_bias_passes_through() {
        let arch = ArchDescriptor::default();
        let mut m = PredictorModel::zeros(&arch).unwrap();
        let x = input(&arch, |i| (i % 7) as f32 / 7.0);
        assert_eq!(m.forward(&x).unwrap().raw, 0.0);
        let b = arch.layout().head_bias_offset;
        m.params[b] = 0.37;
        assert_eq!(m.forward(&x).unwrap().raw, f64::from(0.37f32));
        let y = input(&arch, |_| 1.0);
        assert_eq!(m.forward(&y).unwrap().raw, f64::from(0.37f32));
    }

    #[test]
    fn score_is_clamped() {
        assert_eq!(QualityScore::from_raw(1.3).value, 1.0);
        assert_eq!(QualityScore::from_raw(-0.2).value, 0.0);
        assert_eq!(QualityScore::from_raw(0.4).value, 0.4);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let m = init_model(&ArchDescriptor::default(), 0).unwrap();
        let bad = ModelInput::new(1, 40, 399, vec![0.0; 40 * 399]).unwrap();
        assert!(matches!(m.forward(&bad), Err(Error::Parameter(_))));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let arch = ArchDescriptor::default();
        let m = init_model(&arch, 21).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.diqm");
        m.save(&path).unwrap();
        let back = PredictorModel::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), m.to_bytes());
        let x = input(&arch, |i| ((i * 31) % 255) as f32 / 255.0);
        assert_eq!(
            back.forward(&x).unwrap().raw.to_bits(),
            m.forward(&x).unwrap().raw.to_bits()
        );
    }

    #[test]
    fn corrupt_checkpoints_are_data_errors() {
        let m = init_model(&ArchDescriptor::new(1, 8, 8, vec![2]).unwrap(), 0).unwrap();
        let bytes = m.to_bytes();
        assert!(matches!(PredictorModel::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Data(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(PredictorModel::from_bytes(&bad), Err(Error::Data(_))));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(PredictorModel::from_bytes(&extra), Err(Error::Data(_))));
    }
}
