use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::forward::ElectrodeData;
use super::layout::{ElectrodeLayout, LayoutSpec};
use super::patterns::PatternKind;
use crate::error::{Error, Result};

/// JSON measurement file: one current and one voltage vector per applied
/// pattern, optionally with the electrode layout embedded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutSpec>,
    pub patterns: PatternKind,
    /// `K` vectors of `L` electrode currents (A).
    pub currents: Vec<Vec<f64>>,
    /// `K` vectors of `L` electrode voltages (V).
    pub voltages: Vec<Vec<f64>>,
    /// Background conductivity if known; fitted otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
}

fn to_matrix(path: &Path, name: &str, cols: &[Vec<f64>], rows: usize) -> Result<DMatrix<f64>> {
    if let Some(bad) = cols.iter().position(|c| c.len() != rows) {
        return Err(Error::format(
            path,
            format!("{name}[{bad}] has {} entries, expected {rows}", cols[bad].len()),
        ));
    }
    Ok(DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

impl MeasurementFile {
    pub fn new(layout: &ElectrodeLayout, patterns: PatternKind, data: &ElectrodeData) -> Self {
        MeasurementFile {
            layout: Some(layout.spec().clone()),
            patterns,
            currents: from_matrix(&data.currents),
            voltages: from_matrix(&data.voltages),
            sigma0: None,
            r0: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Resolves the layout and checks the data shape; `path` names the file in
    /// error messages. A separately supplied layout takes precedence but must
    /// agree with an embedded one.
    pub fn resolve(
        &self,
        path: &Path,
        external: Option<&ElectrodeLayout>,
    ) -> Result<(ElectrodeLayout, ElectrodeData)> {
        let layout = match (external, &self.layout) {
            (Some(ext), Some(own)) if ext.spec() != own => {
                return Err(Error::format(
                    path,
                    format!("embedded layout '{}' differs from layout '{}'", own.id, ext.id()),
                ))
            }
            (Some(ext), _) => ext.clone(),
            (None, Some(own)) => ElectrodeLayout::from_spec(own.clone())
                .map_err(|e| Error::format(path, e.to_string()))?,
            (None, None) => return Err(Error::format(path, "no electrode layout given")),
        };
        if self.currents.len() != self.voltages.len() {
            return Err(Error::format(
                path,
                format!(
                    "{} current patterns but {} voltage patterns",
                    self.currents.len(),
                    self.voltages.len()
                ),
            ));
        }
        let l = layout.len();
        let currents = to_matrix(path, "currents", &self.currents, l)?;
        let voltages = to_matrix(path, "voltages", &self.voltages, l)?;
        Ok((layout, ElectrodeData { currents, voltages }))
    }
}
