use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Per-chain diagnostics carried alongside the draws.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DrawDiagnostics {
    /// Post-burn-in Metropolis acceptance rate, when the sampler has one.
    pub acceptance_rate: Option<f64>,
    pub seed_used: u64,
}

/// `T × d` matrix of retained posterior draws, one row per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    draws: DMatrix<f64>,
    param_names: Vec<String>,
    diagnostics: DrawDiagnostics,
}

impl DrawMatrix {
    pub fn new(
        draws: DMatrix<f64>,
        param_names: Vec<String>,
        diagnostics: DrawDiagnostics,
    ) -> Result<Self> {
        if draws.nrows() < 2 {
            return Err(Error::InsufficientDraws {
                needed: 2,
                got: draws.nrows(),
            });
        }
        if param_names.len() != draws.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter names for {} columns",
                param_names.len(),
                draws.ncols()
            )));
        }
        if draws.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "draw matrix has no parameters".into(),
            ));
        }
        if let Some(pos) = draws.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % draws.nrows(), pos / draws.nrows());
            return Err(Error::Numerical(format!(
                "non-finite draw at row {}, parameter {}",
                row + 1,
                param_names[col]
            )));
        }
        Ok(Self {
            draws,
            param_names,
            diagnostics,
        })
    }

    /// Builds from row vectors; names default to `prefix_1 .. prefix_d`.
    pub fn from_rows(
        rows: &[DVector<f64>],
        param_names: Vec<String>,
        diagnostics: DrawDiagnostics,
    ) -> Result<Self> {
        let d = param_names.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "row of length {} for {d} parameters",
                bad.len()
            )));
        }
        let m = DMatrix::from_fn(rows.len(), d, |t, j| rows[t][j]);
        Self::new(m, param_names, diagnostics)
    }

    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.draws
    }

    pub fn row(&self, t: usize) -> DVector<f64> {
        self.draws.row(t).transpose()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.column(j).iter().copied().collect()
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn diagnostics(&self) -> DrawDiagnostics {
        self.diagnostics
    }

    pub fn with_diagnostics(mut self, diagnostics: DrawDiagnostics) -> Self {
        self.diagnostics = diagnostics;
        self
    }

    /// Keeps only the listed columns.
    pub fn select_columns(&self, idx: &[usize]) -> Result<DrawMatrix> {
        if let Some(&bad) = idx.iter().find(|&&j| j >= self.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "column {bad} out of range for {} parameters",
                self.dim()
            )));
        }
        let m = DMatrix::from_fn(self.n_draws(), idx.len(), |t, c| self.draws[(t, idx[c])]);
        let names = idx.iter().map(|&j| self.param_names[j].clone()).collect();
        DrawMatrix::new(m, names, self.diagnostics)
    }
}

pub fn indexed_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}_{j}")).collect()
}
