//! Steady-state wetness and the limit-equilibrium failure index.
//!
//! Slope is a gradient (rise over run), so `θ = atan(S)`. Precipitation is in
//! m/s and drainage area in m², matching transmissivity in m²/s.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::raster::RasterGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiParams {
    /// Slope gradient at which a dry cell is at limit equilibrium.
    pub threshold_slope: f64,
    /// Saturated transmissivity, m²/s.
    pub transmissivity: f64,
    pub water_density: f64,
    pub soil_density: f64,
    /// Contour length in metres; the raster cell size when `None`.
    pub contour_length: Option<f64>,
}

impl Default for FiParams {
    fn default() -> Self {
        FiParams {
            threshold_slope: 1.0,
            transmissivity: 1e-4,
            water_density: 1.0,
            soil_density: 2.0,
            contour_length: None,
        }
    }
}

impl FiParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.threshold_slope, self.transmissivity, self.water_density, self.soil_density];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.contour_length.is_some_and(|b| !(b > 0.0)) {
            return Err(Error::Config("failure-index parameters must be positive".into()));
        }
        if self.water_density >= self.soil_density {
            return Err(Error::Config("water density must be below soil density".into()));
        }
        Ok(())
    }
}

/// `min(1, qA / (b T sin θ))`; NaN when the slope is not positive.
pub fn wetness_value(q: f64, area: f64, slope: f64, contour_length: f64, transmissivity: f64) -> f64 {
    if !(slope > 0.0) {
        return f64::NAN;
    }
    let theta = slope.atan();
    (q * area / (contour_length * transmissivity * theta.sin())).min(1.0)
}

/// `(S/S₀) / (1 − W ρw/ρs)`.
pub fn failure_index_value(slope: f64, wetness: f64, p: &FiParams) -> f64 {
    (slope / p.threshold_slope) / (1.0 - wetness * p.water_density / p.soil_density)
}

fn check_aligned(grids: &[&RasterGrid]) -> Result<()> {
    if grids.windows(2).any(|w| !w[0].aligned_with(w[1])) {
        return Err(Error::Data("rasters are not aligned".into()));
    }
    Ok(())
}

/// Per-cell wetness. NODATA inputs and non-positive slopes give NODATA.
pub fn wetness(precip: &RasterGrid, area: &RasterGrid, slope: &RasterGrid, p: &FiParams) -> Result<RasterGrid> {
    p.validate()?;
    check_aligned(&[precip, area, slope])?;
    let b = p.contour_length.unwrap_or(slope.cellsize);
    let mut out = slope.like();
    let nodata = out.nodata;
    out.values = (0..slope.values.len())
        .into_par_iter()
        .map(|i| {
            let (q, a, s) = (precip.values[i], area.values[i], slope.values[i]);
            if precip.is_nodata(q) || area.is_nodata(a) || slope.is_nodata(s) {
                return nodata;
            }
            let w = wetness_value(q, a, s, b, p.transmissivity);
            if w.is_finite() {
                w
            } else {
                nodata
            }
        })
        .collect();
    Ok(out)
}

/// Per-cell failure index from slope and wetness rasters.
pub fn failure_index(slope: &RasterGrid, wet: &RasterGrid, p: &FiParams) -> Result<RasterGrid> {
    p.validate()?;
    check_aligned(&[slope, wet])?;
    let mut out = slope.like();
    let nodata = out.nodata;
    out.values = (0..slope.values.len())
        .into_par_iter()
        .map(|i| {
            let (s, w) = (slope.values[i], wet.values[i]);
            if slope.is_nodata(s) || wet.is_nodata(w) || !(s > 0.0) {
                return nodata;
            }
            failure_index_value(s, w.clamp(0.0, 1.0), p)
        })
        .collect();
    Ok(out)
}
