//! File formats: time series CSV and model JSON.
//!
//! A series is a CSV with header `t,y_re,y_im`; the `y_im` column may be
//! left out for real data. A model is a JSON object with `n`, row-major `A`,
//! `b` and `c`, complex numbers written as `[re, im]`. TIB systems add
//! `kappa`, `r` and `sigma2`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, CVector, C64};
use crate::model::{StateSpaceModel, TimeSeries};
use crate::tib::TibSystem;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t: usize,
    y_re: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y_im: Option<f64>,
}

/// Writes `series`; the imaginary column is omitted when every sample is real.
pub fn write_series<W: Write>(series: &TimeSeries, out: W) -> Result<()> {
    let real = series.is_real();
    let mut w = csv::Writer::from_writer(out);
    if real {
        w.write_record(["t", "y_re"])?;
    } else {
        w.write_record(["t", "y_re", "y_im"])?;
    }
    for (i, y) in series.samples().iter().enumerate() {
        let t = (i + 1).to_string();
        // shortest round-trip formatting
        if real {
            w.write_record([t, y.re.to_string()])?;
        } else {
            w.write_record([t, y.re.to_string(), y.im.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_series<R: Read>(input: R) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["t", "y_re"] && names != ["t", "y_re", "y_im"] {
        return Err(Error::Validation(format!("expected header t,y_re[,y_im], got {}", names.join(","))));
    }
    let mut samples = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row?;
        if row.t != i + 1 {
            return Err(Error::Validation(format!("row {} has t = {}, expected {}", i + 1, row.t, i + 1)));
        }
        samples.push(c64(row.y_re, row.y_im.unwrap_or(0.0)));
    }
    TimeSeries::new(samples)
}

pub fn write_series_file(series: &TimeSeries, path: &Path) -> Result<()> {
    write_series(series, File::create(path)?)
}

pub fn read_series_file(path: &Path) -> Result<TimeSeries> {
    read_series(File::open(path)?)
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    pub c: Vec<C64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

impl ModelFile {
    pub fn from_model(m: &StateSpaceModel) -> Self {
        let n = m.order();
        Self {
            n,
            a: m.a().transpose().as_slice().to_vec(),
            b: m.b().as_slice().to_vec(),
            c: m.c().as_slice().to_vec(),
            kappa: None,
            r: None,
            sigma2: None,
        }
    }

    pub fn from_tib(tib: &TibSystem, c: &CVector) -> Self {
        Self {
            n: tib.order(),
            a: tib.a().transpose().as_slice().to_vec(),
            b: tib.b().as_slice().to_vec(),
            c: c.as_slice().to_vec(),
            kappa: Some(tib.kappa()),
            r: Some(tib.r()),
            sigma2: Some(tib.sigma2()),
        }
    }

    fn parts(&self) -> Result<(CMatrix, CVector, CVector)> {
        let n = self.n;
        if n == 0 || self.a.len() != n * n || self.b.len() != n || self.c.len() != n {
            return Err(Error::Dimension(format!("model file sizes do not match n = {n}")));
        }
        Ok((CMatrix::from_row_slice(n, n, &self.a), CVector::from_column_slice(&self.b), CVector::from_column_slice(&self.c)))
    }

    /// Validated model (stable, nonsingular `A`).
    pub fn to_model(&self) -> Result<StateSpaceModel> {
        let (a, b, c) = self.parts()?;
        StateSpaceModel::new(a, b, c)
    }

    /// TIB system and output vector; needs `kappa`.
    pub fn to_tib(&self) -> Result<(TibSystem, CVector)> {
        let (a, b, c) = self.parts()?;
        let kappa = self.kappa.ok_or_else(|| Error::Validation("model file has no kappa".into()))?;
        let sigma2 = self.sigma2.unwrap_or(1.0);
        let tib = TibSystem::from_parts(a, b, kappa, sigma2)?;
        if let Some(r) = self.r {
            if (r - tib.r()).abs() > 1e-12 * tib.r().max(1.0) {
                return Err(Error::Validation(format!("r = {r} disagrees with sigma2 / kappa = {}", tib.r())));
            }
        }
        Ok((tib, c))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
