//! Scalar grid fields on disk.
//!
//! CSV: a header `# n=<n> grid=<N> shape=<s1>x…x<s2n>` followed by one value
//! per line in storage order (`-inf` allowed). Binary: the magic `QPOSFLD1`,
//! then little-endian `u32` n, `u32` grid size, `2n` `u32` axis sizes,
//! `u64` sample count and the `f64` samples.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::TorusModel;

pub const MAGIC: &[u8; 8] = b"QPOSFLD1";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub torus: TorusModel,
    pub values: Vec<f64>,
}

impl FieldFile {
    pub fn new(torus: &TorusModel, values: Vec<f64>) -> Result<Self> {
        if values.len() != torus.len() {
            return Err(Error::Grid(format!("{} values for a grid of {}", values.len(), torus.len())));
        }
        Ok(Self { torus: torus.clone(), values })
    }

    pub fn from_mask(torus: &TorusModel, mask: &[bool]) -> Result<Self> {
        Self::new(torus, mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }

    /// Nonzero samples are in the mask.
    pub fn to_mask(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v != 0.0).collect()
    }

    pub fn to_csv(&self) -> String {
        let shape: Vec<String> = self.torus.shape().iter().map(usize::to_string).collect();
        let mut out = format!("# n={} grid={} shape={}\n", self.torus.n(), self.torus.grid_size(), shape.join("x"));
        for v in &self.values {
            // `{:?}` round-trips f64 exactly.
            let _ = writeln!(out, "{v:?}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Input("empty field file".into()))?;
        let torus = parse_header(header)?;
        let mut values = Vec::with_capacity(torus.len());
        for (i, line) in lines {
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("line {}: `{}` is not a number", i + 1, line.trim())))?;
            values.push(v);
        }
        Self::new(&torus, values)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let shape = self.torus.shape();
        let mut out = Vec::with_capacity(8 + 4 * (2 + shape.len()) + 8 + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.torus.n() as u32).to_le_bytes());
        out.extend_from_slice(&(self.torus.grid_size() as u32).to_le_bytes());
        for s in shape {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(8)? != MAGIC {
            return Err(Error::Input("not a field file (bad magic)".into()));
        }
        let n = cursor.u32()? as usize;
        let grid = cursor.u32()? as usize;
        if !(1..=3).contains(&n) {
            return Err(Error::Input(format!("unsupported dimension {n}")));
        }
        let shape: Vec<usize> = (0..2 * n).map(|_| cursor.u32().map(|s| s as usize)).collect::<Result<_>>()?;
        let torus = torus_from_shape(n, grid, &shape)?;
        let count = cursor.u64()? as usize;
        if count != torus.len() {
            return Err(Error::Input(format!("sample count {count} does not match shape ({})", torus.len())));
        }
        let values = (0..count).map(|_| cursor.f64()).collect::<Result<Vec<_>>>()?;
        if cursor.pos != bytes.len() {
            return Err(Error::Input("trailing bytes after field payload".into()));
        }
        Self::new(&torus, values)
    }

    /// Format chosen by extension: `.csv` is text, anything else binary.
    pub fn write(&self, path: &Path) -> Result<()> {
        let data = if is_csv(path) { self.to_csv().into_bytes() } else { self.to_bytes() };
        std::fs::write(path, data).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        if is_csv(path) {
            let text = String::from_utf8(data).map_err(|_| Error::Input(format!("{} is not UTF-8", path.display())))?;
            Self::from_csv(&text)
        } else {
            Self::from_bytes(&data)
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn parse_header(line: &str) -> Result<TorusModel> {
    let body =
        line.trim().strip_prefix('#').ok_or_else(|| Error::Input("missing `# n= grid= shape=` header".into()))?;
    let (mut n, mut grid, mut shape) = (None, None, None);
    for word in body.split_whitespace() {
        let (k, v) = word.split_once('=').ok_or_else(|| Error::Input(format!("bad header entry `{word}`")))?;
        let bad = || Error::Input(format!("bad header value `{word}`"));
        match k {
            "n" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
            "grid" => grid = Some(v.parse::<usize>().map_err(|_| bad())?),
            "shape" => {
                shape = Some(v.split('x').map(|s| s.parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?)
            }
            _ => return Err(Error::Input(format!("unknown header key `{k}`"))),
        }
    }
    let (Some(n), Some(grid)) = (n, grid) else {
        return Err(Error::Input("header must give n and grid".into()));
    };
    let shape = shape.unwrap_or_else(|| vec![grid; 2 * n]);
    if shape.len() != 2 * n {
        return Err(Error::Input(format!("shape has {} axes, expected {}", shape.len(), 2 * n)));
    }
    torus_from_shape(n, grid, &shape)
}

fn torus_from_shape(n: usize, grid: usize, shape: &[usize]) -> Result<TorusModel> {
    let active = shape
        .iter()
        .map(|&s| match s {
            1 => Ok(false),
            s if s == grid => Ok(true),
            s => Err(Error::Input(format!("axis size {s} is neither 1 nor the grid size {grid}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    TorusModel::with_mask(n, grid, active).map_err(|e| Error::Input(e.to_string()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos + k;
        let s = self.bytes.get(self.pos..end).ok_or_else(|| Error::Input("truncated field file".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Axis;

    fn sample() -> FieldFile {
        let t = TorusModel::with_active_axes(2, 8, &[Axis::X(0), Axis::Y(1)]).unwrap();
        let values = (0..t.len()).map(|i| (i as f64 * 0.37).sin() / 3.0).collect::<Vec<_>>();
        let mut f = FieldFile::new(&t, values).unwrap();
        f.values[3] = f64::NEG_INFINITY;
        f
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let f = sample();
        assert_eq!(FieldFile::from_csv(&f.to_csv()).unwrap(), f);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let f = sample();
        assert_eq!(FieldFile::from_bytes(&f.to_bytes()).unwrap(), f);
        let mut bad = f.to_bytes();
        bad.pop();
        assert!(matches!(FieldFile::from_bytes(&bad), Err(Error::Input(_))));
        assert!(matches!(FieldFile::from_bytes(b"nonsense"), Err(Error::Input(_))));
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(FieldFile::from_csv("# n=1 grid=8\n1\n"), Err(Error::Grid(_))));
        assert!(matches!(FieldFile::from_csv("1\n2\n"), Err(Error::Input(_))));
        assert!(matches!(FieldFile::from_csv("# n=1 grid=8 shape=8x4\n"), Err(Error::Input(_))));
    }
}
