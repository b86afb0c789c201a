use super::{ByteReader, ByteWriter};
use crate::error::{HdaError, Result};
use crate::sphere::{dof_count, Grid, GridField, GridKind, SpectralField};
use serde_json::Value;
use std::path::Path;

const MAGIC: &[u8; 4] = b"HDA1";
const VERSION: u8 = 1;
const KIND_GRID: u8 = 0;
const KIND_SPECTRAL: u8 = 1;
const KIND_CONTAINER: u8 = 2;

/// A named n-dimensional array of 8-byte floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Array {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Array { shape, data }
    }

    pub fn from_rows(rows: &[Vec<f64>], width: usize) -> Self {
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Array::new(vec![rows.len(), width], data)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.shape[1..].iter().product::<usize>();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.shape.first().copied().unwrap_or(0))
            .map(|i| self.row(i).to_vec())
            .collect()
    }
}

/// Archive container: a JSON provenance header plus named arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: Value,
    pub entries: Vec<(String, Array)>,
}

impl Container {
    pub fn new(header: Value) -> Self {
        Container {
            header,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, array: Array) {
        self.entries.push((name.into(), array));
    }

    pub fn get(&self, name: &str) -> Result<&Array> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, a)| a)
            .ok_or_else(|| HdaError::Malformed {
                offset: 0,
                reason: format!("missing entry `{name}`"),
            })
    }
}

/// Anything stored in an `HDA1` file.
#[derive(Debug, Clone, PartialEq)]
pub enum HdaFile {
    Grid(GridField),
    Spectral(SpectralField),
    Container(Container),
}

fn write_names(w: &mut ByteWriter, names: &[String]) {
    w.u32(names.len() as u32);
    for n in names {
        w.string(n);
    }
}

fn read_names(r: &mut ByteReader) -> Result<Vec<String>> {
    let n = r.u32()? as usize;
    (0..n).map(|_| r.string()).collect()
}

pub fn encode_hda(file: &HdaFile) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u8(VERSION);
    match file {
        HdaFile::Grid(f) => {
            w.u8(KIND_GRID);
            w.u8(match f.grid.kind {
                GridKind::Gauss => 0,
                GridKind::Ring => 1,
            });
            w.u32(f.grid.nlat as u32);
            w.u32(f.grid.nlon as u32);
            write_names(&mut w, &f.names);
            w.f64s(&f.values);
        }
        HdaFile::Spectral(s) => {
            w.u8(KIND_SPECTRAL);
            w.u32(s.truncation as u32);
            write_names(&mut w, &s.names);
            w.f64s(&s.coeffs);
        }
        HdaFile::Container(c) => {
            w.u8(KIND_CONTAINER);
            w.string(&serde_json::to_string(&c.header).expect("json header"));
            w.u32(c.entries.len() as u32);
            for (name, a) in &c.entries {
                w.string(name);
                w.u8(a.shape.len() as u8);
                for &d in &a.shape {
                    w.u64(d as u64);
                }
                w.f64s(&a.data);
            }
        }
    }
    w.buf
}

pub fn decode_hda(bytes: &[u8]) -> Result<HdaFile> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(HdaError::Malformed {
            offset: 0,
            reason: "bad magic, expected HDA1".into(),
        });
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(r.malformed(format!("unsupported version {version}")));
    }
    let file = match r.u8()? {
        KIND_GRID => {
            let kind = r.u8()?;
            let nlat = r.u32()? as usize;
            let nlon = r.u32()? as usize;
            if nlat == 0 || nlon == 0 {
                return Err(r.malformed("empty grid"));
            }
            let grid = match kind {
                0 => Grid::gauss(nlat, nlon),
                1 if nlat == 1 => Grid::ring(nlon),
                _ => return Err(r.malformed(format!("bad grid kind {kind} for nlat {nlat}"))),
            };
            let names = read_names(&mut r)?;
            let values = r.f64s(names.len() * grid.npoints())?;
            HdaFile::Grid(GridField {
                grid,
                names,
                values,
            })
        }
        KIND_SPECTRAL => {
            let truncation = r.u32()? as usize;
            let names = read_names(&mut r)?;
            let coeffs = r.f64s(names.len() * 2 * dof_count(truncation))?;
            HdaFile::Spectral(SpectralField {
                truncation,
                names,
                coeffs,
            })
        }
        KIND_CONTAINER => {
            let start = r.pos;
            let header: Value =
                serde_json::from_str(&r.string()?).map_err(|e| HdaError::Malformed {
                    offset: start,
                    reason: format!("bad json header: {e}"),
                })?;
            let n = r.u32()? as usize;
            let mut c = Container::new(header);
            for _ in 0..n {
                let name = r.string()?;
                let ndim = r.u8()? as usize;
                let shape = (0..ndim)
                    .map(|_| r.u64().map(|d| d as usize))
                    .collect::<Result<Vec<_>>>()?;
                let len = shape
                    .iter()
                    .try_fold(1usize, |a, &d| a.checked_mul(d))
                    .ok_or_else(|| r.malformed("array size overflow"))?;
                let data = r.f64s(len)?;
                c.push(name, Array { shape, data });
            }
            HdaFile::Container(c)
        }
        k => return Err(r.malformed(format!("unknown kind {k}"))),
    };
    r.finish()?;
    Ok(file)
}

pub fn write_hda(path: &Path, file: &HdaFile) -> Result<()> {
    std::fs::write(path, encode_hda(file))?;
    Ok(())
}

pub fn read_hda(path: &Path) -> Result<HdaFile> {
    decode_hda(&std::fs::read(path)?)
}
