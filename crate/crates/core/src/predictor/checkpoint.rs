//! Versioned little-endian checkpoint encoding:
//! magic `SNPC`, version, arch header, member count, then per member the
//! init seed and both length-prefixed parameter vectors.

use alloc::vec::Vec;

use super::{ArchConfig, Ensemble, PredictorError, PredictorParameters, TwoStagePredictor};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SNPC";

pub fn encode_ensemble(ensemble: &Ensemble) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let a = ensemble.arch;
    for v in [a.crop_size, a.base_channels, a.occupancy_classes, a.semantic_classes, ensemble.members.len()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for m in &ensemble.members {
        out.extend_from_slice(&m.params.init_seed.to_le_bytes());
        for theta in [&m.params.theta_o, &m.params.theta_s] {
            out.extend_from_slice(&(theta.len() as u64).to_le_bytes());
            for x in theta.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], PredictorError> {
        if self.bytes.len() < n {
            return Err(PredictorError::Checkpoint("truncated"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }
    fn u32(&mut self) -> Result<u32, PredictorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, PredictorError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, expected: usize) -> Result<Vec<f64>, PredictorError> {
        let n = self.u64()? as usize;
        if n != expected {
            return Err(PredictorError::Checkpoint("parameter count does not match architecture"));
        }
        let raw = self.take(n.checked_mul(8).ok_or(PredictorError::Checkpoint("overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode_ensemble(bytes: &[u8]) -> Result<Ensemble, PredictorError> {
    let mut r = Reader { bytes };
    if r.take(4)? != MAGIC {
        return Err(PredictorError::Checkpoint("bad magic"));
    }
    if r.u32()? != CHECKPOINT_VERSION {
        return Err(PredictorError::Checkpoint("unsupported version"));
    }
    let arch = ArchConfig {
        crop_size: r.u32()? as usize,
        base_channels: r.u32()? as usize,
        occupancy_classes: r.u32()? as usize,
        semantic_classes: r.u32()? as usize,
    };
    if arch.crop_size < 3 || arch.base_channels == 0 || arch.occupancy_classes == 0 || arch.semantic_classes == 0 {
        return Err(PredictorError::Checkpoint("invalid architecture header"));
    }
    let n = r.u32()? as usize;
    let mut members = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let init_seed = r.u64()?;
        let theta_o = r.f64s(arch.occupancy_param_count())?;
        let theta_s = r.f64s(arch.semantic_param_count())?;
        members.push(TwoStagePredictor {
            arch,
            params: PredictorParameters { theta_o, theta_s, init_seed },
        });
    }
    if !r.bytes.is_empty() {
        return Err(PredictorError::Checkpoint("trailing bytes"));
    }
    if members.is_empty() {
        return Err(PredictorError::EmptyEnsemble);
    }
    Ok(Ensemble { arch, members })
}
