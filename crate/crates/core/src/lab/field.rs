//! Scalar fields sampled on a uniform 2-D grid.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const MAGIC: &[u8; 4] = b"GF01";

/// Values at the nodes `(x0 + i h, y0 + j h)`, stored x-major
/// (`index = i * ny + j`). An optional mask marks the smooth locus; masked
/// nodes (`false`) are skipped by stencils and ball scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    h: f64,
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
    /// Declared sup-norm bound.
    bound: Option<f64>,
}

impl GridField {
    pub fn new(nx: usize, ny: usize, x0: f64, y0: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(invalid("grid needs at least 2 nodes per axis"));
        }
        if !(h > 0.0 && h.is_finite()) || !x0.is_finite() || !y0.is_finite() {
            return Err(invalid("spacing must be positive and the origin finite"));
        }
        if values.len() != nx * ny {
            return Err(Error::DimensionMismatch { expected: nx * ny, found: values.len() });
        }
        let f = GridField { nx, ny, x0, y0, h, values, mask: None, bound: None };
        f.check_finite()?;
        Ok(f)
    }

    fn from_parts(
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        h: f64,
        values: Vec<f64>,
        mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        match mask {
            None => GridField::new(nx, ny, x0, y0, h, values),
            Some(m) => {
                // masked nodes may carry NaN, so validate the shape before the values
                let shape = GridField::new(nx, ny, x0, y0, h, vec![0.0; values.len()])?;
                GridField { values, ..shape }.with_mask(m)
            }
        }
    }

    /// Sample `f` on the square `[lo, hi]^2` with `n` nodes per axis.
    pub fn from_fn(n: usize, lo: f64, hi: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::from_fn_box(n, n, lo, lo, (hi - lo) / (n as f64 - 1.0), f)
    }

    pub fn from_fn_box(nx: usize, ny: usize, x0: f64, y0: f64, h: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                values.push(f(x0 + i as f64 * h, y0 + j as f64 * h));
            }
        }
        GridField::new(nx, ny, x0, y0, h, values)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.values.len() {
            return Err(Error::DimensionMismatch { expected: self.values.len(), found: mask.len() });
        }
        self.mask = Some(mask);
        self.check_finite()?;
        Ok(self)
    }

    /// Mask out nodes where `pred(x, y)` is false.
    pub fn mask_where(self, pred: impl Fn(f64, f64) -> bool) -> Result<Self> {
        let mask = (0..self.len()).map(|k| {
            let (x, y) = self.coords(k);
            pred(x, y)
        });
        let mask = mask.collect();
        self.with_mask(mask)
    }

    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) {
            return Err(invalid("sup-norm bound must be nonnegative"));
        }
        self.bound = Some(bound);
        Ok(self)
    }

    fn check_finite(&self) -> Result<()> {
        let bad = (0..self.len()).any(|k| self.is_active(k) && !self.values[k].is_finite());
        if bad {
            return Err(Error::Format("non-finite value on an unmasked node".into()));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.x0, self.y0)
    }

    /// Upper corner of the box.
    pub fn corner(&self) -> (f64, f64) {
        (self.x0 + (self.nx - 1) as f64 * self.h, self.y0 + (self.ny - 1) as f64 * self.h)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.ny, k % self.ny)
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (self.x0 + i as f64 * self.h, self.y0 + j as f64 * self.h)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[k])
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut f = GridField::from_parts(self.nx, self.ny, self.x0, self.y0, self.h, values, self.mask.clone())?;
        f.bound = self.bound;
        Ok(f)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridField { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    /// Oscillation over active nodes.
    pub fn oscillation(&self) -> f64 {
        let (lo, hi) = (0..self.len())
            .filter(|&k| self.is_active(k))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| (lo.min(self.values[k]), hi.max(self.values[k])));
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x1, y1) = self.corner();
        x >= self.x0 && x <= x1 && y >= self.y0 && y <= y1
    }

    /// Bilinear interpolation; `None` outside the box or next to a masked node.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        if !self.contains(x, y) {
            return None;
        }
        let fx = ((x - self.x0) / self.h).min((self.nx - 1) as f64);
        let fy = ((y - self.y0) / self.h).min((self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
        if corners.iter().any(|&(a, b)| !self.is_active(self.index(a, b))) {
            return None;
        }
        let v = |a, b| self.get(a, b);
        Some(
            v(i, j) * (1.0 - tx) * (1.0 - ty)
                + v(i + 1, j) * tx * (1.0 - ty)
                + v(i, j + 1) * (1.0 - tx) * ty
                + v(i + 1, j + 1) * tx * ty,
        )
    }

    /// CSV: a metadata line `#gridfield,nx,ny,x0,y0,h,bound`, a header
    /// `x,y,value,active`, then one row per node in x-major order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        let bound = self.bound.map(|b| format!("{b:e}")).unwrap_or_default();
        writeln!(out, "#gridfield,{},{},{:e},{:e},{:e},{}", self.nx, self.ny, self.x0, self.y0, self.h, bound)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "value", "active"]).map_err(csv_err)?;
        for k in 0..self.len() {
            let (x, y) = self.coords(k);
            let active = if self.is_active(k) { "1" } else { "0" };
            w.write_record([format!("{x:e}"), format!("{y:e}"), format!("{:e}", self.values[k]), active.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = BufReader::new(input);
        let mut meta = String::new();
        rd.read_line(&mut meta)?;
        let parts: Vec<&str> = meta.trim().split(',').collect();
        if parts.len() != 7 || parts[0] != "#gridfield" {
            return Err(Error::Format("missing #gridfield metadata line".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number {s:?}")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad count {s:?}")));
        let (nx, ny) = (int(parts[1])?, int(parts[2])?);
        let (x0, y0, h) = (num(parts[3])?, num(parts[4])?, num(parts[5])?);
        let bound = if parts[6].is_empty() { None } else { Some(num(parts[6])?) };
        let mut rows = csv::Reader::from_reader(rd);
        let mut values = Vec::with_capacity(nx * ny);
        let mut mask = Vec::with_capacity(nx * ny);
        for (k, rec) in rows.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != 4 {
                return Err(Error::Format(format!("row {k} has {} fields", rec.len())));
            }
            let (x, y) = (num(&rec[0])?, num(&rec[1])?);
            if k >= nx * ny {
                return Err(Error::Format("more rows than nodes".into()));
            }
            let (i, j) = (k / ny, k % ny);
            let tol = 1e-6 * h;
            if (x - (x0 + i as f64 * h)).abs() > tol || (y - (y0 + j as f64 * h)).abs() > tol {
                return Err(Error::Format(format!("row {k} is not at node ({i}, {j})")));
            }
            let text = rec[2].trim();
            values.push(if text.eq_ignore_ascii_case("nan") { f64::NAN } else { num(text)? });
            mask.push(match rec[3].trim() {
                "1" => true,
                "0" => false,
                s => return Err(Error::Format(format!("bad active flag {s:?}"))),
            });
        }
        let mask = mask.iter().any(|m| !m).then_some(mask);
        let mut f = GridField::from_parts(nx, ny, x0, y0, h, values, mask)?;
        f.bound = bound;
        Ok(f)
    }

    /// Binary: magic `GF01`, then little-endian `u64 nx, u64 ny`,
    /// `f64 x0, y0, h, bound` (NaN if absent), a `u8` mask flag, the values,
    /// and one byte per node if the mask is present.
    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        out.write_all(MAGIC)?;
        out.write_all(&(self.nx as u64).to_le_bytes())?;
        out.write_all(&(self.ny as u64).to_le_bytes())?;
        for v in [self.x0, self.y0, self.h, self.bound.unwrap_or(f64::NAN)] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&[u8::from(self.mask.is_some())])?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        if let Some(m) = &self.mask {
            out.write_all(&m.iter().map(|&b| u8::from(b)).collect::<Vec<_>>())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(input: R) -> Result<Self> {
        let mut rd = BufReader::new(input);
        let mut magic = [0u8; 4];
        rd.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, expected GF01".into()));
        }
        let mut b8 = [0u8; 8];
        let mut u = |rd: &mut BufReader<R>| -> Result<u64> {
            rd.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let nx = u(&mut rd)? as usize;
        let ny = u(&mut rd)? as usize;
        let f = |rd: &mut BufReader<R>| -> Result<f64> {
            let mut b = [0u8; 8];
            rd.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let (x0, y0, h, bound) = (f(&mut rd)?, f(&mut rd)?, f(&mut rd)?, f(&mut rd)?);
        let mut flag = [0u8; 1];
        rd.read_exact(&mut flag)?;
        let count =
            nx.checked_mul(ny).filter(|&c| c <= 1 << 32).ok_or_else(|| Error::Format("grid too large".into()))?;
        let values = (0..count).map(|_| f(&mut rd)).collect::<Result<Vec<_>>>()?;
        let mask = match flag[0] {
            0 => None,
            1 => {
                let mut m = vec![0u8; count];
                rd.read_exact(&mut m)?;
                Some(m.into_iter().map(|b| b != 0).collect::<Vec<_>>())
            }
            _ => return Err(Error::Format("bad mask flag".into())),
        };
        let mut field = GridField::from_parts(nx, ny, x0, y0, h, values, mask)?;
        field.bound = if bound.is_nan() { None } else { Some(bound) };
        Ok(field)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
