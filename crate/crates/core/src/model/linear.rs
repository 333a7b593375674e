//! Linear SDE dX = (A X + b) dt + σ dB with constant coefficients.
//!
//! The drift-linearised baseline is exact for this family and every
//! correction weight vanishes, which makes it the exactness oracle of the
//! test suites. A diagonal Ornstein-Uhlenbeck parameterisation is provided
//! for fitting; fully general coefficient matrices are not parameterised.

use nalgebra::{DMatrix, DVector};

use super::{SdeModel, StateDims};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    General,
    /// A = -diag(rates), b = 0, σ = diag(vols); θ = [rates.., vols..]
    DiagOu,
}

#[derive(Debug, Clone)]
pub struct LinearSde {
    a: DMatrix<f64>,
    b: DVector<f64>,
    sigma: DMatrix<f64>,
    n_smooth: usize,
    kind: Kind,
}

impl LinearSde {
    /// General constant-coefficient linear SDE; all coordinates rough.
    pub fn general(a: DMatrix<f64>, b: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        Self::with_smooth(a, b, sigma, 0)
    }

    /// General linear SDE whose first `n_smooth` coordinates carry no noise.
    pub fn with_smooth(
        a: DMatrix<f64>,
        b: DVector<f64>,
        sigma: DMatrix<f64>,
        n_smooth: usize,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || sigma.nrows() != n {
            return Err(Error::input("linear SDE: inconsistent coefficient shapes"));
        }
        if n_smooth >= n && n > 0 && n_smooth != 0 {
            return Err(Error::input("linear SDE: n_smooth must be < n_total"));
        }
        for i in 0..n_smooth {
            if sigma.row(i).iter().any(|v| *v != 0.0) {
                return Err(Error::input("linear SDE: smooth rows of sigma must be zero"));
            }
        }
        Ok(LinearSde {
            a,
            b,
            sigma,
            n_smooth,
            kind: Kind::General,
        })
    }

    /// Diagonal OU chain dX_i = -rate_i X_i dt + vol_i dB_i.
    pub fn diag_ou(rates: &[f64], vols: &[f64]) -> Result<Self> {
        if rates.len() != vols.len() || rates.is_empty() {
            return Err(Error::input("diag OU expects equal-length rates and vols"));
        }
        if rates.iter().chain(vols).any(|v| !(*v > 0.0)) {
            return Err(Error::input("diag OU requires positive rates and vols"));
        }
        let n = rates.len();
        let a = DMatrix::from_diagonal(&DVector::from_iterator(n, rates.iter().map(|r| -r)));
        let sigma = DMatrix::from_diagonal(&DVector::from_column_slice(vols));
        Ok(LinearSde {
            a,
            b: DVector::zeros(n),
            sigma,
            n_smooth: 0,
            kind: Kind::DiagOu,
        })
    }
}

impl SdeModel for LinearSde {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn dims(&self) -> StateDims {
        let n = self.a.nrows();
        StateDims::new(self.n_smooth, n - self.n_smooth, self.sigma.ncols())
    }

    fn theta(&self) -> Vec<f64> {
        match self.kind {
            Kind::DiagOu => {
                let n = self.a.nrows();
                let mut theta = Vec::with_capacity(2 * n);
                theta.extend((0..n).map(|i| -self.a[(i, i)]));
                theta.extend((0..n).map(|i| self.sigma[(i, i)]));
                theta
            }
            Kind::General => {
                let mut theta: Vec<f64> = self.a.transpose().as_slice().to_vec();
                theta.extend(self.b.iter());
                theta.extend(self.sigma.transpose().as_slice());
                theta
            }
        }
    }

    fn theta_names(&self) -> Vec<&'static str> {
        match self.kind {
            Kind::DiagOu => vec!["rate", "vol"],
            Kind::General => vec!["a", "b", "sigma"],
        }
    }

    fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        match self.kind {
            Kind::DiagOu => {
                let n = self.a.nrows();
                if theta.len() != 2 * n {
                    return Err(Error::input("diag OU expects theta = [rates.., vols..]"));
                }
                LinearSde::diag_ou(&theta[..n], &theta[n..])
            }
            Kind::General => Err(Error::input(
                "general linear SDE is not parameterised; use the diagonal OU form for fitting",
            )),
        }
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b
    }

    fn diffusion(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.sigma.clone()
    }

    fn drift_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }

    fn em_step_into(&self, x: &[f64], h: f64, z: &[f64], out: &mut [f64]) {
        let n = self.a.nrows();
        let sh = h.sqrt();
        for i in 0..n {
            let mut acc = self.b[i];
            for j in 0..n {
                acc += self.a[(i, j)] * x[j];
            }
            let mut noise = 0.0;
            for j in 0..self.sigma.ncols() {
                noise += self.sigma[(i, j)] * z[j];
            }
            out[i] = x[i] + acc * h + noise * sh;
        }
    }
}
