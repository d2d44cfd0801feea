//! File formats.
//!
//! Binary grid dump (little endian):
//!
//! ```text
//! magic "STFH" | version u16 | n u8 | dims u32 × n | h f64 | t f64 | [lambda f64] | U f64… | V f64…
//! ```
//!
//! Version 1 is a plain snapshot; version 2 is a rescaled snapshot and carries `lambda`. Radial
//! profiles use `n = 1` with the number of radial nodes as the only dimension.
//!
//! Tables are plain comma-separated text with a header row; floats use the shortest
//! representation that round-trips, so identical results give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::frontmetrics::FrontSet;
use crate::grid::GridFunction;
use crate::obstacle::StepRecord;
use crate::reference::RadialFront;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"STFH";
pub const VERSION_PLAIN: u16 = 1;
pub const VERSION_RESCALED: u16 = 2;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a grid dump (bad magic)")]
    Magic,
    #[error("unsupported dump version {0}")]
    Version(u16),
    #[error("dump is truncated or has trailing bytes")]
    Length,
}

/// Contents of a binary dump.
#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub dims: Vec<u32>,
    pub h: f64,
    pub t: f64,
    pub lambda: Option<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Dump {
    pub fn from_grid<T: Scalar>(
        u: &GridFunction<T>,
        v: &GridFunction<T>,
        t: T,
        lambda: Option<T>,
    ) -> Self {
        let g = &u.grid;
        let dims = g.dims()[..g.dimension()]
            .iter()
            .map(|&d| d as u32)
            .collect();
        Self {
            dims,
            h: g.h().as_f64(),
            t: t.as_f64(),
            lambda: lambda.map(|l| l.as_f64()),
            u: u.values.iter().map(|x| x.as_f64()).collect(),
            v: v.values.iter().map(|x| x.as_f64()).collect(),
        }
    }

    /// A radial profile `(U(r_i), θ(r_i))` on nodes spaced by `dr`.
    pub fn radial(u: &[f64], theta: &[f64], dr: f64, t: f64) -> Self {
        Self {
            dims: vec![u.len() as u32],
            h: dr,
            t,
            lambda: None,
            u: u.to_vec(),
            v: theta.to_vec(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 16 * self.u.len());
        out.extend_from_slice(MAGIC);
        let version = if self.lambda.is_some() {
            VERSION_RESCALED
        } else {
            VERSION_PLAIN
        };
        out.extend_from_slice(&version.to_le_bytes());
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&self.h.to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        if let Some(l) = self.lambda {
            out.extend_from_slice(&l.to_le_bytes());
        }
        for x in self.u.iter().chain(&self.v) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IoError> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| IoError::Length)?;
        if &magic != MAGIC {
            return Err(IoError::Magic);
        }
        let version = u16::from_le_bytes(take(&mut r)?);
        if version != VERSION_PLAIN && version != VERSION_RESCALED {
            return Err(IoError::Version(version));
        }
        let [n] = take::<1>(&mut r)?;
        let dims: Vec<u32> = (0..n)
            .map(|_| take(&mut r).map(u32::from_le_bytes))
            .collect::<Result<_, _>>()?;
        let h = f64::from_le_bytes(take(&mut r)?);
        let t = f64::from_le_bytes(take(&mut r)?);
        let lambda = if version == VERSION_RESCALED {
            Some(f64::from_le_bytes(take(&mut r)?))
        } else {
            None
        };
        let count: usize = dims.iter().map(|&d| d as usize).product();
        if r.len() != 16 * count {
            return Err(IoError::Length);
        }
        let mut read = |k: usize| -> Vec<f64> {
            (0..k)
                .map(|_| f64::from_le_bytes(take(&mut r).expect("length checked")))
                .collect()
        };
        let u = read(count);
        let v = read(count);
        Ok(Self {
            dims,
            h,
            t,
            lambda,
            u,
            v,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        write_file(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn take<const N: usize>(r: &mut &[u8]) -> Result<[u8; N], IoError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|_| IoError::Length)?;
    Ok(buf)
}

/// Writes `bytes`, creating parent directories first.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn step_log_csv<T: Scalar>(log: &[StepRecord<T>]) -> String {
    let mut s =
        String::from("step_index,t,residual,iterations,front_min_radius,front_max_radius\n");
    for r in log {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.step_index,
            r.t.as_f64(),
            r.residual.as_f64(),
            r.iterations,
            r.front_min_radius.as_f64(),
            r.front_max_radius.as_f64()
        );
    }
    s
}

/// Front points of several snapshots: `t,x1,…,xn`.
pub fn front_csv<T: Scalar>(fronts: &[FrontSet<T>]) -> String {
    let n = fronts.first().map_or(2, |f| f.dimension);
    let mut s = String::from("t");
    for d in 1..=n {
        let _ = write!(s, ",x{d}");
    }
    s.push('\n');
    for f in fronts {
        for p in &f.points {
            let _ = write!(s, "{}", f.t.as_f64());
            for c in &p[..n] {
                let _ = write!(s, ",{}", c.as_f64());
            }
            s.push('\n');
        }
    }
    s
}

/// One row of the front-metrics table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontMetricsRow {
    pub t: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub deviation: f64,
    pub hausdorff_to_reference: f64,
}

pub fn metrics_csv(rows: &[FrontMetricsRow]) -> String {
    let mut s = String::from("t,r_min,r_max,deviation,hausdorff_to_reference\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.t, r.r_min, r.r_max, r.deviation, r.hausdorff_to_reference
        );
    }
    s
}

pub fn radial_front_csv<T: Scalar>(front: &RadialFront<T>) -> String {
    let mut s = String::from("t,R,R_over_rho\n");
    for (t, r, ratio) in front.ratio_to_rho() {
        let _ = writeln!(s, "{},{},{}", t.as_f64(), r.as_f64(), ratio.as_f64());
    }
    s
}

/// `key = value` lines, in the given order.
pub fn manifest(entries: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}
