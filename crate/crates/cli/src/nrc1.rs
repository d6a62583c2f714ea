//! NRC1 trajectory files. Little endian throughout.
//!
//! ```text
//! magic  b"NRC1"
//! u32    format version (1)
//! u64    N, snapshot count
//! f64    dt, J, gamma, kappa, Gamma, theta
//! u64    boundary (0 open, 1 periodic), sample_stride
//! f64    t0
//! then per snapshot: f64 t, N x (f64 re, f64 im)
//! ```

use condensate_core::dynamics::Trajectory;
use condensate_core::{Boundary, C64};

pub const MAGIC: &[u8; 4] = b"NRC1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub sites: u64,
    pub count: u64,
    pub dt: f64,
    pub j: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub big_gamma: f64,
    pub theta: f64,
    pub boundary: u64,
    pub sample_stride: u64,
    pub t0: f64,
}

pub fn encode(traj: &Trajectory) -> Vec<u8> {
    let p = &traj.params;
    let n = p.sites();
    let mut out = Vec::with_capacity(96 + traj.len() * (8 + 16 * n));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(traj.len() as u64).to_le_bytes());
    for v in [traj.config.dt, p.hopping(), p.corr_loss(), p.pump(), p.pair_loss(), p.theta()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let b: u64 = match p.boundary() {
        Boundary::Open => 0,
        Boundary::Periodic => 1,
    };
    out.extend_from_slice(&b.to_le_bytes());
    out.extend_from_slice(&(traj.config.sample_stride as u64).to_le_bytes());
    out.extend_from_slice(&traj.times.first().copied().unwrap_or(0.0).to_le_bytes());
    for (t, s) in traj.times.iter().zip(&traj.states) {
        out.extend_from_slice(&t.to_le_bytes());
        for z in s {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const K: usize>(&mut self) -> Result<[u8; K], String> {
        let end = self.pos + K;
        let s = self.buf.get(self.pos..end).ok_or("truncated NRC1 file")?;
        self.pos = end;
        Ok(s.try_into().unwrap())
    }
    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// Header, snapshot times and states.
pub fn decode(buf: &[u8]) -> Result<(Header, Vec<f64>, Vec<Vec<C64>>), String> {
    let mut c = Cursor { buf, pos: 0 };
    if &c.take::<4>()? != MAGIC {
        return Err("not an NRC1 file".into());
    }
    let version = u32::from_le_bytes(c.take()?);
    if version != VERSION {
        return Err(format!("unsupported NRC1 version {version}"));
    }
    let h = Header {
        sites: c.u64()?,
        count: c.u64()?,
        dt: c.f64()?,
        j: c.f64()?,
        gamma: c.f64()?,
        kappa: c.f64()?,
        big_gamma: c.f64()?,
        theta: c.f64()?,
        boundary: c.u64()?,
        sample_stride: c.u64()?,
        t0: c.f64()?,
    };
    let mut times = Vec::with_capacity(h.count as usize);
    let mut states = Vec::with_capacity(h.count as usize);
    for _ in 0..h.count {
        times.push(c.f64()?);
        let s = (0..h.sites).map(|_| Ok(C64::new(c.f64()?, c.f64()?))).collect::<Result<Vec<_>, String>>()?;
        states.push(s);
    }
    if c.pos != buf.len() {
        return Err("trailing bytes after NRC1 payload".into());
    }
    Ok((h, times, states))
}
