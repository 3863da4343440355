//! Flat binary snapshot dumps.
//!
//! Layout (little endian): magic `RVSNAP1\0`; `u32` dim; `u32 ×3` resolution;
//! `f64 ×3` periods (radius first for the sphere); `u8` kind (0 torus, 1
//! sphere); `f64` time; `u32` field count; then per field a `u32` name length,
//! the UTF-8 name, a `u32` component count and `len × components` values in
//! node-major order.

use crate::error::{Error, Result};
use crate::flows::solution::Snapshot;
use crate::geometry::grid::{Grid, GridKind};
use std::io::{Read, Write};

pub const MAGIC: &[u8; 8] = b"RVSNAP1\0";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub name: String,
    pub components: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotDump {
    pub dim: usize,
    pub resolution: [usize; 3],
    pub periods: [f64; 3],
    pub sphere: bool,
    pub t: f64,
    pub fields: Vec<FieldDump>,
}

impl SnapshotDump {
    pub fn field(&self, name: &str) -> Option<&FieldDump> {
        self.fields.iter().find(|f| f.name == name)
    }
}

fn sym_components(n: usize, data: &[[[f64; 3]; 3]]) -> (usize, Vec<f64>) {
    let mut v = Vec::with_capacity(data.len() * n * (n + 1) / 2);
    for m in data {
        for i in 0..n {
            for j in i..n {
                v.push(m[i][j]);
            }
        }
    }
    (n * (n + 1) / 2, v)
}

/// Collect the fields of a snapshot; symmetric tensors store the upper
/// triangle row by row.
pub fn dump(snap: &Snapshot) -> SnapshotDump {
    let grid: &Grid = snap.state.grid();
    let n = grid.dim();
    let mut fields = Vec::new();
    let (c, v) = sym_components(n, &snap.state.g.field().data);
    fields.push(FieldDump { name: "g".into(), components: c, values: v });
    let (c, v) = sym_components(n, &snap.s_tensor.data);
    fields.push(FieldDump { name: "S_ij".into(), components: c, values: v });
    fields.push(FieldDump { name: "S".into(), components: 1, values: snap.s.data.clone() });
    if let Some(p) = &snap.state.psi {
        fields.push(FieldDump { name: "psi".into(), components: 1, values: p.data.clone() });
    }
    for (a, p) in snap.state.phi.iter().enumerate() {
        fields.push(FieldDump { name: format!("phi{a}"), components: 1, values: p.data.clone() });
    }
    if let Some(u) = &snap.state.height {
        fields.push(FieldDump { name: "u".into(), components: 1, values: u.data.clone() });
    }
    if let Some(xi) = &snap.state.shift {
        let v = xi.data.iter().flat_map(|x| x[..n].to_vec()).collect();
        fields.push(FieldDump { name: "xi".into(), components: n, values: v });
    }
    let sphere = grid.kind() == GridKind::AnalyticSphere;
    let periods = if sphere { [grid.radius(), 0.0, 0.0] } else { grid.periods() };
    SnapshotDump { dim: n, resolution: grid.resolution(), periods, sphere, t: snap.t(), fields }
}

pub fn write_dump(w: &mut impl Write, d: &SnapshotDump) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(d.dim as u32).to_le_bytes())?;
    for r in d.resolution {
        w.write_all(&(r as u32).to_le_bytes())?;
    }
    for p in d.periods {
        w.write_all(&p.to_le_bytes())?;
    }
    w.write_all(&[d.sphere as u8])?;
    w.write_all(&d.t.to_le_bytes())?;
    w.write_all(&(d.fields.len() as u32).to_le_bytes())?;
    for f in &d.fields {
        w.write_all(&(f.name.len() as u32).to_le_bytes())?;
        w.write_all(f.name.as_bytes())?;
        w.write_all(&(f.components as u32).to_le_bytes())?;
        for v in &f.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_snapshot(w: &mut impl Write, snap: &Snapshot) -> Result<()> {
    write_dump(w, &dump(snap))
}

fn u32_of(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::Snapshot(e.to_string()))?;
    Ok(u32::from_le_bytes(b))
}

fn f64_of(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::Snapshot(e.to_string()))?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_dump(r: &mut impl Read) -> Result<SnapshotDump> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::Snapshot(e.to_string()))?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let dim = u32_of(r)? as usize;
    let mut resolution = [0usize; 3];
    for x in resolution.iter_mut() {
        *x = u32_of(r)? as usize;
    }
    let mut periods = [0.0; 3];
    for p in periods.iter_mut() {
        *p = f64_of(r)?;
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind).map_err(|e| Error::Snapshot(e.to_string()))?;
    let t = f64_of(r)?;
    let count = u32_of(r)? as usize;
    let nodes: usize = resolution[..dim.min(3)].iter().product();
    let mut fields = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u32_of(r)? as usize;
        if len > 256 {
            return Err(Error::Snapshot("field name too long".into()));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|e| Error::Snapshot(e.to_string()))?;
        let name = String::from_utf8(name).map_err(|e| Error::Snapshot(e.to_string()))?;
        let components = u32_of(r)? as usize;
        if components > 9 {
            return Err(Error::Snapshot(format!("field {name} has {components} components")));
        }
        let mut values = Vec::with_capacity(nodes * components);
        for _ in 0..nodes * components {
            values.push(f64_of(r)?);
        }
        fields.push(FieldDump { name, components, values });
    }
    Ok(SnapshotDump { dim, resolution, periods, sphere: kind[0] == 1, t, fields })
}
