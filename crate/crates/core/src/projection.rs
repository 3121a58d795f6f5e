//! Residual sums of squares under the nested designs `(X, Z₀)` and `(X, Z)`.
//!
//! The annihilators `I − P` are never formed. Each design is factored once by
//! a column-pivoted QR, after which `‖(I − P)v‖²` and `Pv` cost `O(N · rank)`
//! for any vector, which is what the bootstrap loops need.

use nalgebra::DVector;

use crate::design::DesignMatrices;
use crate::error::{Error, Result};
use crate::qr::PivotedQr;

#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub rank_null: usize,
    pub rank_full: usize,
    pub df_num: usize,
    pub df_den: usize,
    n_obs: usize,
    null: PivotedQr,
    full: PivotedQr,
}

/// Default relative rank tolerance for an `nrows × ncols` design.
pub fn default_rank_tol(nrows: usize, ncols: usize) -> f64 {
    nrows.max(ncols) as f64 * f64::EPSILON
}

/// Factor `(X, Z₀)` and `(X, Z)`.
///
/// `rank_tol` is relative to the largest `|R_ii|`; `None` selects
/// [`default_rank_tol`] for each design.
pub fn build_projection_pair(
    design: &DesignMatrices,
    rank_tol: Option<f64>,
) -> Result<ProjectionPair> {
    let n = design.n_obs();
    let null_x = design.null_design();
    let full_x = design.full_design();
    if let Some(t) = rank_tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::DomainError(format!("rank tolerance {t}")));
        }
    }
    let null = PivotedQr::new(
        &null_x,
        rank_tol.unwrap_or_else(|| default_rank_tol(n, null_x.ncols())),
    );
    let full = PivotedQr::new(
        &full_x,
        rank_tol.unwrap_or_else(|| default_rank_tol(n, full_x.ncols())),
    );
    let rank_null = null.rank();
    let rank_full = full.rank();
    // Numerically the null span sits inside the full span; a smaller full rank
    // can only come from tolerance effects on near-singular designs.
    if rank_full < rank_null {
        return Err(Error::DegenerateDesign(format!(
            "rk(X,Z) = {rank_full} < rk(X,Z0) = {rank_null}; design is numerically ill-posed"
        )));
    }
    let df_num = rank_full - rank_null;
    let df_den = n - rank_full;
    if df_num == 0 {
        return Err(Error::DegenerateDesign(
            "tested random-effect columns add no rank (df_num = 0)".into(),
        ));
    }
    if df_den == 0 {
        return Err(Error::DegenerateDesign(
            "full design is saturated (df_den = 0)".into(),
        ));
    }
    Ok(ProjectionPair {
        rank_null,
        rank_full,
        df_num,
        df_den,
        n_obs: n,
        null,
        full,
    })
}

impl ProjectionPair {
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_obs {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {len}, design has {} rows",
                self.n_obs
            )));
        }
        Ok(())
    }

    /// `‖(I − P_{X,Z₀})v‖²`.
    pub fn rss_null(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v.len())?;
        Ok(self.null.residual_ss(v))
    }

    /// `‖(I − P_{X,Z})v‖²`.
    pub fn rss_full(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v.len())?;
        Ok(self.full.residual_ss(v))
    }

    /// `((‖(P_{X,Z} − P_{X,Z₀})v‖², ‖(I − P_{X,Z})v‖²)`.
    ///
    /// The first term is `rss_null − rss_full`, obtained without the
    /// subtraction: the null residual is formed first (so any component in
    /// span(X, Z₀) is annihilated exactly up to rounding), then split by the
    /// full factorization. This keeps the F numerator accurate when it is tiny
    /// relative to `‖v‖²`.
    pub fn decompose(&self, v: &[f64]) -> Result<(f64, f64)> {
        self.check_len(v.len())?;
        let r0 = self.null.residual(v);
        Ok(self.full.split_ss(&r0))
    }

    /// `P_{X,Z₀}v`: least-squares fitted values under the null design.
    pub fn project_null(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        Ok(self.null.project(v))
    }

    /// `P_{X,Z}v`.
    pub fn project_full(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        Ok(self.full.project(v))
    }

    /// Null fitted values `Xβ̂ + Z₀b̂₀` of the design's own response.
    pub fn fitted_null(&self, design: &DesignMatrices) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.project_null(design.y().as_slice())?))
    }
}
