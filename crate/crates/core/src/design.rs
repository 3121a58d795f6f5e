use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Response, fixed design and random design of a linear mixed model, with the
/// random design split into an untested leading block `Z₀` (first `r0`
/// columns) and a tested trailing block `Z₋₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    y: DVector<f64>,
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    r0: usize,
}

impl DesignMatrices {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, z: DMatrix<f64>, r0: usize) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidDesign("response is empty".into()));
        }
        if x.nrows() != n || z.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {n} rows, X has {}, Z has {}",
                x.nrows(),
                z.nrows()
            )));
        }
        if z.ncols() == 0 {
            return Err(Error::InvalidDesign("Z has no columns".into()));
        }
        if r0 >= z.ncols() {
            return Err(Error::InvalidDesign(format!(
                "r0 = {r0} leaves no tested columns in Z with {} columns",
                z.ncols()
            )));
        }
        let finite = y.iter().chain(x.iter()).chain(z.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidDesign("non-finite entry".into()));
        }
        Ok(Self { y, x, z, r0 })
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn r0(&self) -> usize {
        self.r0
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    /// `(X, Z₀)`.
    pub fn null_design(&self) -> DMatrix<f64> {
        hcat(&self.x, &self.z.columns(0, self.r0).into_owned())
    }

    /// `(X, Z)`.
    pub fn full_design(&self) -> DMatrix<f64> {
        hcat(&self.x, &self.z)
    }

    /// Same design with a different response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.n_obs() {
            return Err(Error::DimensionMismatch(format!(
                "response length {} != {}",
                y.len(),
                self.n_obs()
            )));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidDesign("non-finite entry".into()));
        }
        Ok(Self { y, ..self.clone() })
    }

    /// `(Wy, WX, WZ)` for a whitening matrix `W` with `W Ω Wᵀ ∝ I`, for error
    /// covariance `Ω` other than `σ²I`. `W` must be square of order `N`.
    pub fn whiten(&self, w: &DMatrix<f64>) -> Result<Self> {
        let n = self.n_obs();
        if w.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "whitening matrix is {}×{}, need {n}×{n}",
                w.nrows(),
                w.ncols()
            )));
        }
        Self::new(w * &self.y, w * &self.x, w * &self.z, self.r0)
    }
}

pub(crate) fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows().max(b.nrows());
    let mut out = DMatrix::zeros(n, a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_r0_covering_all_of_z() {
        let y = DVector::from_element(4, 1.0);
        let x = DMatrix::from_element(4, 1, 1.0);
        let z = DMatrix::identity(4, 2);
        assert!(matches!(
            DesignMatrices::new(y, x, z, 2),
            Err(Error::InvalidDesign(_))
        ));
    }

    #[test]
    fn rejects_non_finite() {
        let mut y = DVector::from_element(4, 1.0);
        y[2] = f64::NAN;
        let x = DMatrix::from_element(4, 1, 1.0);
        let z = DMatrix::identity(4, 2);
        assert!(DesignMatrices::new(y, x, z, 0).is_err());
    }

    #[test]
    fn row_mismatch() {
        let y = DVector::from_element(4, 1.0);
        let x = DMatrix::from_element(3, 1, 1.0);
        let z = DMatrix::identity(4, 2);
        assert!(matches!(
            DesignMatrices::new(y, x, z, 0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn whiten_applies_to_every_block() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = DMatrix::from_element(3, 1, 1.0);
        let z = DMatrix::identity(3, 2);
        let d = DesignMatrices::new(y, x, z, 1).unwrap();
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 0.5]));
        let dw = d.whiten(&w).unwrap();
        assert_eq!(dw.y().as_slice(), &[2.0, 2.0, 1.5]);
        assert_eq!(dw.x().as_slice(), &[2.0, 1.0, 0.5]);
        assert_eq!(dw.z()[(0, 0)], 2.0);
        assert_eq!(dw.r0(), 1);
        assert!(d.whiten(&DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn empty_fixed_design_is_allowed() {
        let y = DVector::from_element(4, 1.0);
        let x = DMatrix::zeros(4, 0);
        let z = DMatrix::identity(4, 2);
        let d = DesignMatrices::new(y, x, z, 1).unwrap();
        assert_eq!(d.null_design().ncols(), 1);
        assert_eq!(d.full_design().ncols(), 2);
    }
}
