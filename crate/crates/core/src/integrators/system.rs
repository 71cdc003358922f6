use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type RhsFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Relative error allowed when spot-checking a declared linear operator.
const LINEARITY_CHECK: f64 = 1e-12;

/// A circulant matrix `M_ij = c_{(i−j) mod n}`, applied by direct convolution
/// and inverted (shifted) through its FFT eigenvalues.
#[derive(Clone)]
pub struct Circulant {
    column: Vec<f64>,
    nonzeros: Vec<(usize, f64)>,
    eigenvalues: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Circulant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Circulant").field("column", &self.column).finish()
    }
}

impl Circulant {
    pub fn new(column: Vec<f64>) -> Self {
        let nonzeros = column
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| (k, *v))
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(column.len());
        let inverse = planner.plan_fft_inverse(column.len());
        let mut eigenvalues: Vec<Complex64> =
            column.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        forward.process(&mut eigenvalues);
        Circulant {
            column,
            nonzeros,
            eigenvalues,
            forward,
            inverse,
        }
    }

    pub fn dim(&self) -> usize {
        self.column.len()
    }

    pub fn column(&self) -> &[f64] {
        &self.column
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut out = DVector::zeros(n);
        for &(k, c) in &self.nonzeros {
            for j in 0..n {
                out[(j + k) % n] += c * u[j];
            }
        }
        out
    }

    /// Solves `(I − h M) x = rhs`; `None` if the shifted matrix is singular.
    pub fn solve_shifted(&self, h: f64, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.dim();
        let mut buf: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (x, lam) in buf.iter_mut().zip(&self.eigenvalues) {
            let d = Complex64::new(1.0, 0.0) - lam * h;
            if d.norm() < 1e-14 {
                return None;
            }
            *x /= d;
        }
        self.inverse.process(&mut buf);
        Some(DVector::from_iterator(n, buf.iter().map(|z| z.re / n as f64)))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.column[(i + n - j) % n])
    }
}

/// The matrix of a linear part.
#[derive(Clone, Debug)]
pub enum LinearOp {
    Dense(DMatrix<f64>),
    Circulant(Circulant),
}

impl LinearOp {
    pub fn dim(&self) -> usize {
        match self {
            LinearOp::Dense(m) => m.nrows(),
            LinearOp::Circulant(c) => c.dim(),
        }
    }

    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        match self {
            LinearOp::Dense(m) => m * u,
            LinearOp::Circulant(c) => c.apply(u),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            LinearOp::Dense(m) => m.clone(),
            LinearOp::Circulant(c) => c.to_dense(),
        }
    }

    pub fn scaled(&self, k: f64) -> LinearOp {
        match self {
            LinearOp::Dense(m) => LinearOp::Dense(m * k),
            LinearOp::Circulant(c) => {
                LinearOp::Circulant(Circulant::new(c.column.iter().map(|v| v * k).collect()))
            }
        }
    }

    pub fn sum(&self, other: &LinearOp) -> LinearOp {
        match (self, other) {
            (LinearOp::Circulant(a), LinearOp::Circulant(b)) => LinearOp::Circulant(
                Circulant::new(a.column.iter().zip(&b.column).map(|(x, y)| x + y).collect()),
            ),
            _ => LinearOp::Dense(self.to_dense() + other.to_dense()),
        }
    }

    /// Solves `(I − h M) x = rhs`.
    pub fn solve_shifted(&self, h: f64, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            LinearOp::Dense(m) => {
                let n = m.nrows();
                let lu = (DMatrix::identity(n, n) - m * h).lu();
                lu.solve(rhs)
            }
            LinearOp::Circulant(c) => c.solve_shifted(h, rhs),
        }
    }
}

/// One additive term of a right-hand side.
#[derive(Clone)]
pub struct Part {
    rhs: RhsFn,
    jacobian: Option<JacobianFn>,
    linear: Option<LinearOp>,
}

impl fmt::Debug for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Part")
            .field("linear", &self.linear.is_some())
            .field("jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl Part {
    pub fn linear(op: LinearOp) -> Part {
        let applied = op.clone();
        let jac = op.to_dense();
        Part {
            rhs: Arc::new(move |u| applied.apply(u)),
            jacobian: Some(Arc::new(move |_| jac.clone())),
            linear: Some(op),
        }
    }

    pub fn nonlinear(f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Part {
        Part {
            rhs: Arc::new(f),
            jacobian: None,
            linear: None,
        }
    }

    /// A part given as a function and claimed to equal `op`. The claim is
    /// spot-checked on a few random vectors.
    pub fn declared_linear(
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        op: LinearOp,
    ) -> Result<Part> {
        let n = op.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x11ea);
        for _ in 0..3 {
            let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let fu = f(&u);
            let mu = op.apply(&u);
            if fu.len() != n {
                return Err(Error::Validation(format!(
                    "right-hand side returned {} components, operator has {n}",
                    fu.len()
                )));
            }
            let err = (&fu - &mu).amax() / mu.amax().max(f64::MIN_POSITIVE);
            if err > LINEARITY_CHECK {
                return Err(Error::Validation(format!(
                    "part declared linear differs from its matrix (relative error {err:e})"
                )));
            }
        }
        let jac = op.to_dense();
        Ok(Part {
            rhs: Arc::new(f),
            jacobian: Some(Arc::new(move |_| jac.clone())),
            linear: Some(op),
        })
    }

    pub fn with_jacobian(
        mut self,
        j: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Part {
        self.jacobian = Some(Arc::new(j));
        self
    }

    pub fn zero(n: usize) -> Part {
        Part::linear(LinearOp::Circulant(Circulant::new(vec![0.0; n])))
    }

    pub fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.rhs)(u)
    }

    pub fn linear_op(&self) -> Option<&LinearOp> {
        self.linear.as_ref()
    }

    pub fn is_linear(&self) -> bool {
        self.linear.is_some()
    }

    /// Analytic Jacobian when known, else forward differences.
    pub fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        if let Some(j) = &self.jacobian {
            return j(u);
        }
        let n = u.len();
        let f0 = self.eval(u);
        let mut jac = DMatrix::zeros(n, n);
        let mut x = u.clone();
        for j in 0..n {
            let h = f64::EPSILON.sqrt() * u[j].abs().max(1.0);
            x[j] = u[j] + h;
            let col = (self.eval(&x) - &f0) / h;
            jac.set_column(j, &col);
            x[j] = u[j];
        }
        jac
    }

    pub fn sum(&self, other: &Part) -> Part {
        let (f, g) = (self.rhs.clone(), other.rhs.clone());
        let jacobian: Option<JacobianFn> = match (&self.jacobian, &other.jacobian) {
            (Some(a), Some(b)) => {
                let (a, b) = (a.clone(), b.clone());
                Some(Arc::new(move |u| a(u) + b(u)))
            }
            _ => None,
        };
        Part {
            rhs: Arc::new(move |u| f(u) + g(u)),
            jacobian,
            linear: match (&self.linear, &other.linear) {
                (Some(a), Some(b)) => Some(a.sum(b)),
                _ => None,
            },
        }
    }
}

/// `u' = F(u)`, or `u' = F(u) + G(u)` when split for IMEX stepping.
#[derive(Clone, Debug)]
pub struct OdeSystem {
    n: usize,
    f: Part,
    g: Option<Part>,
}

impl OdeSystem {
    pub fn new(n: usize, f: Part) -> Result<Self> {
        check_dim(n, &f, "F")?;
        Ok(OdeSystem { n, f, g: None })
    }

    pub fn split(n: usize, f: Part, g: Part) -> Result<Self> {
        check_dim(n, &f, "F")?;
        check_dim(n, &g, "G")?;
        Ok(OdeSystem { n, f, g: Some(g) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> &Part {
        &self.f
    }

    pub fn g(&self) -> Option<&Part> {
        self.g.as_ref()
    }

    /// `F + G` as a single part.
    pub fn combined(&self) -> Part {
        match &self.g {
            None => self.f.clone(),
            Some(g) => self.f.sum(g),
        }
    }

    pub fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        match &self.g {
            None => self.f.eval(u),
            Some(g) => self.f.eval(u) + g.eval(u),
        }
    }
}

fn check_dim(n: usize, p: &Part, label: &str) -> Result<()> {
    if let Some(op) = p.linear_op() {
        if op.dim() != n {
            return Err(Error::Validation(format!(
                "{label} has dimension {}, system has {n}",
                op.dim()
            )));
        }
    }
    let got = p.eval(&DVector::zeros(n)).len();
    if got != n {
        return Err(Error::Validation(format!(
            "{label} returned {got} components for a system of dimension {n}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circulant_matches_dense() {
        let c = Circulant::new(vec![1.0, -2.0, 0.0, 0.5, 3.0]);
        let u = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.7, 0.1]);
        let dense = c.to_dense();
        assert!((c.apply(&u) - &dense * &u).amax() < 1e-14);
        let x = c.solve_shifted(0.3, &u).unwrap();
        let back = &x - &dense * &x * 0.3;
        assert!((back - &u).amax() < 1e-13);
    }

    #[test]
    fn declared_linear_is_checked() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mm = m.clone();
        assert!(Part::declared_linear(move |u| &mm * u, LinearOp::Dense(m.clone())).is_ok());
        let err = Part::declared_linear(|u| u.map(|v| v * v), LinearOp::Dense(m)).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn wrong_dimension_rejected() {
        let p = Part::nonlinear(|_| DVector::zeros(3));
        assert!(OdeSystem::new(2, p).is_err());
    }
}
