//! Binary model files.
//!
//! Layout, all little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `FTNDLSPA` |
//! | 4     | version (u32, currently 1) |
//! | 4     | flags (u32, bit 0: weights tied across iterations) |
//! | 8     | τ (f64) |
//! | 8     | α (f64) |
//! | 4 × 5 | L_E, N, f, κ, m_max (u32) |
//! | 8 × P | parameters (f64), block by block in declared order |

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::neural::{CnnParams, ParamShape};
use crate::spda::{DetectorModel, EdgeTable};

pub const MODEL_MAGIC: &[u8; 8] = b"FTNDLSPA";
pub const MODEL_VERSION: u32 = 1;

const FLAG_TIED: u32 = 1;

/// What a parameter set was trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelHeader {
    pub tau: f64,
    pub alpha: f64,
    pub l_e: usize,
    pub n: usize,
    pub filters: usize,
    pub kappa: usize,
    pub m_max: usize,
    pub tied: bool,
}

impl ModelHeader {
    pub fn shape(&self) -> ParamShape {
        ParamShape {
            filters: self.filters,
            kappa: self.kappa,
            edges: EdgeTable::new(self.n, self.l_e).len(),
        }
    }

    /// Refuses a detector configuration the parameters were not trained for.
    pub fn check(&self, tau: f64, model: &DetectorModel, m_max: usize) -> Result<()> {
        let mut problems = Vec::new();
        if (self.tau - tau).abs() > 1e-12 {
            problems.push(format!("tau {} vs {}", self.tau, tau));
        }
        if self.l_e != model.detector_taps() {
            problems.push(format!("L_E {} vs {}", self.l_e, model.detector_taps()));
        }
        if self.n != model.block_len() {
            problems.push(format!("N {} vs {}", self.n, model.block_len()));
        }
        if self.m_max != m_max {
            problems.push(format!("m_max {} vs {}", self.m_max, m_max));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ModelMismatch(problems.join(", ")))
        }
    }
}

fn to_u32(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::ModelFormat(format!("{what} {value} does not fit in u32")))
}

pub fn write_model<W: Write>(mut w: W, header: &ModelHeader, params: &CnnParams) -> Result<()> {
    if params.shape() != header.shape() || params.iterations() != header.m_max || params.tied() != header.tied {
        return Err(Error::ModelFormat("parameters do not match the header".into()));
    }
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&(if header.tied { FLAG_TIED } else { 0 }).to_le_bytes())?;
    w.write_all(&header.tau.to_le_bytes())?;
    w.write_all(&header.alpha.to_le_bytes())?;
    for (value, what) in [
        (header.l_e, "L_E"),
        (header.n, "N"),
        (header.filters, "f"),
        (header.kappa, "kappa"),
        (header.m_max, "m_max"),
    ] {
        w.write_all(&to_u32(value, what)?.to_le_bytes())?;
    }
    for x in params.as_slice() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<(ModelHeader, CnnParams)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let mut u32_buf = [0u8; 4];
    let mut f64_buf = [0u8; 8];
    let mut read_u32 = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut u32_buf)?;
        Ok(u32::from_le_bytes(u32_buf))
    };
    let version = read_u32(&mut r)?;
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let flags = read_u32(&mut r)?;
    if flags & !FLAG_TIED != 0 {
        return Err(Error::ModelFormat(format!("unknown flags {flags:#x}")));
    }
    let mut read_f64 = |r: &mut R| -> Result<f64> {
        r.read_exact(&mut f64_buf)?;
        Ok(f64::from_le_bytes(f64_buf))
    };
    let tau = read_f64(&mut r)?;
    let alpha = read_f64(&mut r)?;
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = read_u32(&mut r)? as usize;
    }
    let [l_e, n, filters, kappa, m_max] = dims;
    if n == 0 || filters == 0 || kappa == 0 || m_max == 0 {
        return Err(Error::ModelFormat("zero dimension in header".into()));
    }
    let header = ModelHeader { tau, alpha, l_e, n, filters, kappa, m_max, tied: flags & FLAG_TIED != 0 };
    let blocks = if header.tied { 1 } else { m_max };
    let count = blocks * header.shape().block_len();
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        data.push(read_f64(&mut r)?);
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::ModelFormat("trailing bytes after parameters".into()));
    }
    let params = CnnParams::from_flat(header.shape(), m_max, header.tied, data)?;
    Ok((header, params))
}
