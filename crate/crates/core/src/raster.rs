//! ESRI ASCII grid rasters.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::DEFAULT_NODATA;
use crate::{Error, Result};

/// A single-band raster. Row 0 is the northern edge, as in the file body.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata: f64,
    pub values: Vec<f64>,
}

impl RasterGrid {
    /// A grid filled with NODATA.
    pub fn new(nrows: usize, ncols: usize, cellsize: f64) -> Self {
        RasterGrid {
            ncols,
            nrows,
            xllcorner: 0.0,
            yllcorner: 0.0,
            cellsize,
            nodata: DEFAULT_NODATA,
            values: vec![DEFAULT_NODATA; nrows * ncols],
        }
    }

    /// A grid with the same geometry as `self`, filled with NODATA.
    pub fn like(&self) -> Self {
        RasterGrid {
            values: vec![self.nodata; self.values.len()],
            ..self.clone()
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.ncols + col] = v;
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata || v.is_nan()
    }

    pub fn aligned_with(&self, other: &RasterGrid) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && self.cellsize == other.cellsize
            && self.xllcorner == other.xllcorner
            && self.yllcorner == other.yllcorner
    }
}

/// Reads an ESRI ASCII grid (`ncols`, `nrows`, `xllcorner|xllcenter`,
/// `yllcorner|yllcenter`, `cellsize`, optional `NODATA_value`).
pub fn read_ascii_grid(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ascii_grid(&text).map_err(|m| Error::Data(format!("{}: {m}", path.display())))
}

fn parse_ascii_grid(text: &str) -> std::result::Result<RasterGrid, String> {
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut center = false;
    let mut cellsize = None;
    let mut nodata = DEFAULT_NODATA;
    let mut tokens = text.split_whitespace().peekable();
    while let Some(&tok) = tokens.peek() {
        if tok.parse::<f64>().is_ok() {
            break;
        }
        let key = tok.to_ascii_lowercase();
        tokens.next();
        let val = tokens
            .next()
            .ok_or_else(|| format!("header key '{tok}' has no value"))?;
        let num: f64 = val
            .parse()
            .map_err(|_| format!("header '{tok}' value '{val}' is not a number"))?;
        match key.as_str() {
            "ncols" => ncols = Some(num as usize),
            "nrows" => nrows = Some(num as usize),
            "xllcorner" => xll = Some(num),
            "yllcorner" => yll = Some(num),
            "xllcenter" => {
                xll = Some(num);
                center = true;
            }
            "yllcenter" => yll = Some(num),
            "cellsize" => cellsize = Some(num),
            "nodata_value" => nodata = num,
            _ => return Err(format!("unknown header key '{tok}'")),
        }
    }
    let ncols = ncols.ok_or("missing ncols")?;
    let nrows = nrows.ok_or("missing nrows")?;
    let cellsize = cellsize.ok_or("missing cellsize")?;
    let mut xllcorner = xll.ok_or("missing xllcorner")?;
    let mut yllcorner = yll.ok_or("missing yllcorner")?;
    if center {
        xllcorner -= cellsize / 2.0;
        yllcorner -= cellsize / 2.0;
    }
    let values = tokens
        .map(|t| t.parse::<f64>().map_err(|_| format!("body value '{t}' is not a number")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if values.len() != nrows * ncols {
        return Err(format!(
            "header declares {nrows}x{ncols} = {} cells but body has {}",
            nrows * ncols,
            values.len()
        ));
    }
    Ok(RasterGrid {
        ncols,
        nrows,
        xllcorner,
        yllcorner,
        cellsize,
        nodata,
        values,
    })
}

/// Writes an ESRI ASCII grid. Values use shortest round-trip formatting so
/// a read gives back identical numbers.
pub fn write_ascii_grid(grid: &RasterGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if grid.values.len() != grid.nrows * grid.ncols {
        return Err(Error::Data(format!(
            "raster has {} values for a {}x{} header",
            grid.values.len(),
            grid.nrows,
            grid.ncols
        )));
    }
    let mut s = String::new();
    let _ = writeln!(s, "ncols {}", grid.ncols);
    let _ = writeln!(s, "nrows {}", grid.nrows);
    let _ = writeln!(s, "xllcorner {}", grid.xllcorner);
    let _ = writeln!(s, "yllcorner {}", grid.yllcorner);
    let _ = writeln!(s, "cellsize {}", grid.cellsize);
    let _ = writeln!(s, "NODATA_value {}", grid.nodata);
    for r in 0..grid.nrows {
        let row = &grid.values[r * grid.ncols..(r + 1) * grid.ncols];
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_values_and_nodata() {
        let dir = tempfile::tempdir().unwrap();
        let g = RasterGrid {
            ncols: 2,
            nrows: 2,
            xllcorner: 100.5,
            yllcorner: -3.25,
            cellsize: 30.0,
            nodata: -9999.0,
            values: vec![0.1, 1.0 / 3.0, -9999.0, 2.5e-7],
        };
        let p = dir.path().join("g.asc");
        write_ascii_grid(&g, &p).unwrap();
        let back = read_ascii_grid(&p).unwrap();
        assert_eq!(back, g);
        assert!(back.is_nodata(back.get(1, 0)));
    }

    #[test]
    fn body_size_mismatch_is_an_error() {
        let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 3\n";
        let err = parse_ascii_grid(text).unwrap_err();
        assert!(err.contains("body has 3"), "{err}");
    }

    #[test]
    fn center_registration_is_shifted_to_corner() {
        let text = "NCOLS 1\nNROWS 1\nXLLCENTER 15\nYLLCENTER 15\nCELLSIZE 30\n7\n";
        let g = parse_ascii_grid(text).unwrap();
        assert_eq!((g.xllcorner, g.yllcorner), (0.0, 0.0));
        assert_eq!(g.values, vec![7.0]);
    }
}
