//! Dataset, model description and parameter vector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::ResponseFamily;
use crate::mechanism::{MechanismKind, SelectionMechanism};
use crate::normalizer::Truncation;

/// Observations `(yᵢ, dᵢ, xᵢ, wᵢ)`; `yᵢ` is present exactly when `dᵢ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub d: Vec<bool>,
    pub y: Vec<Option<f64>>,
    /// Response design, one row per observation.
    pub x: DMatrix<f64>,
    /// Selection design.
    pub w: DMatrix<f64>,
    pub x_names: Vec<String>,
    pub w_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        d: Vec<bool>,
        y: Vec<Option<f64>>,
        x: DMatrix<f64>,
        w: DMatrix<f64>,
        x_names: Vec<String>,
        w_names: Vec<String>,
    ) -> Result<Self> {
        let n = d.len();
        if y.len() != n || x.nrows() != n || w.nrows() != n {
            return Err(Error::model(format!(
                "row counts disagree: d={n}, y={}, X={}, W={}",
                y.len(),
                x.nrows(),
                w.nrows()
            )));
        }
        if x_names.len() != x.ncols() || w_names.len() != w.ncols() {
            return Err(Error::model("column names do not match the design widths"));
        }
        for (i, (&di, yi)) in d.iter().zip(&y).enumerate() {
            match (di, yi) {
                (true, None) => return Err(Error::schema(i + 1, "response", "missing response on a selected row")),
                (false, Some(_)) => return Err(Error::schema(i + 1, "response", "response present on a non-selected row")),
                (true, Some(v)) if !v.is_finite() => return Err(Error::schema(i + 1, "response", "response is not finite")),
                _ => {}
            }
        }
        for (name, m) in [("X", &x), ("W", &w)] {
            if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
                let row = pos % n.max(1);
                return Err(Error::schema(row + 1, name, "covariate is not finite"));
            }
        }
        Ok(Self { d, y, x, w, x_names, w_names })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn n_selected(&self) -> usize {
        self.d.iter().filter(|&&d| d).count()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.w.ncols()
    }

    /// Largest observed response, or 0 when nothing is observed.
    pub fn y_max(&self) -> f64 {
        self.y.iter().flatten().fold(0.0, |m: f64, &v| m.max(v))
    }

    /// Observed responses and the matching rows of `X`.
    pub fn selected(&self) -> (Vec<f64>, DMatrix<f64>) {
        let rows: Vec<usize> = (0..self.n()).filter(|&i| self.d[i]).collect();
        let y = rows.iter().map(|&i| self.y[i].expect("selected rows carry y")).collect();
        (y, self.x.select_rows(rows.iter()))
    }

    /// Checks each observed response against the family support.
    pub fn check_support(&self, family: &ResponseFamily) -> Result<()> {
        for (i, yi) in self.y.iter().enumerate() {
            if let Some(v) = yi {
                family
                    .check_support(*v)
                    .map_err(|e| Error::schema(i + 1, "response", e.to_string()))?;
            }
        }
        Ok(())
    }
}

/// Response family, selection mechanism and truncation policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub family: ResponseFamily,
    pub mechanism: MechanismKind,
    pub truncation: Truncation,
}

impl Model {
    pub fn new(family: ResponseFamily, mechanism: MechanismKind) -> Result<Self> {
        mechanism.compatible_with(&family)?;
        Ok(Self { family, mechanism, truncation: Truncation::Auto })
    }

    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn has_psi(&self) -> bool {
        !self.family.dispersion_known()
    }

    pub fn selection(&self, alpha: f64) -> Result<SelectionMechanism> {
        SelectionMechanism::new(self.mechanism, alpha)
    }
}

/// `(α, β, γ, ψ)`; the free vector θ is ordered `β, γ` with ψ appended when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub alpha: f64,
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    pub psi: Option<f64>,
}

impl ParamVector {
    pub fn dim(&self) -> usize {
        self.beta.len() + self.gamma.len() + usize::from(self.psi.is_some())
    }

    pub fn theta(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend(self.beta.iter());
        v.extend(self.gamma.iter());
        v.extend(self.psi);
        DVector::from_vec(v)
    }

    /// Same shape as `self`, with θ replaced.
    pub fn with_theta(&self, theta: &DVector<f64>) -> Self {
        let p = self.beta.len();
        let q = self.gamma.len();
        assert_eq!(theta.len(), self.dim(), "θ length mismatch");
        Self {
            alpha: self.alpha,
            beta: theta.rows(0, p).into_owned(),
            gamma: theta.rows(p, q).into_owned(),
            psi: self.psi.map(|_| theta[p + q]),
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }

    pub fn check_shape(&self, data: &Dataset, model: &Model) -> Result<()> {
        if self.beta.len() != data.p() || self.gamma.len() != data.q() {
            return Err(Error::model(format!(
                "parameter sizes ({}, {}) do not match designs ({}, {})",
                self.beta.len(),
                self.gamma.len(),
                data.p(),
                data.q()
            )));
        }
        if self.psi.is_some() != model.has_psi() {
            return Err(Error::model("dispersion parameter presence does not match the family"));
        }
        Ok(())
    }
}
