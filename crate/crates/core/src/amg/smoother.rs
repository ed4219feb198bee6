use crate::linalg::{CsrMatrix, Preconditioner};
use crate::{Error, Result};

pub(crate) fn inverse_diagonal(a: &CsrMatrix) -> Result<Vec<f64>> {
    a.diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| if d != 0.0 && d.is_finite() { Ok(1.0 / d) } else { Err(Error::ZeroDiagonal(i)) })
        .collect()
}

#[inline]
fn relax_row(a: &CsrMatrix, inv_diag: &[f64], f: &[f64], u: &mut [f64], i: usize) {
    let (cols, vals) = a.row(i);
    let mut s = f[i];
    for (&j, &v) in cols.iter().zip(vals) {
        if j != i {
            s -= v * u[j];
        }
    }
    u[i] = s * inv_diag[i];
}

/// One Gauss-Seidel sweep in ascending row order.
pub fn gauss_seidel_forward(a: &CsrMatrix, inv_diag: &[f64], f: &[f64], u: &mut [f64]) {
    for i in 0..a.nrows() {
        relax_row(a, inv_diag, f, u, i);
    }
}

/// One Gauss-Seidel sweep in descending row order.
pub fn gauss_seidel_backward(a: &CsrMatrix, inv_diag: &[f64], f: &[f64], u: &mut [f64]) {
    for i in (0..a.nrows()).rev() {
        relax_row(a, inv_diag, f, u, i);
    }
}

/// Symmetric Gauss-Seidel: a forward sweep followed by a backward sweep.
pub fn sgs_sweep(a: &CsrMatrix, f: &[f64], u: &mut [f64]) -> Result<()> {
    if f.len() != a.nrows() || u.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: f.len().min(u.len()),
        });
    }
    let inv = inverse_diagonal(a)?;
    gauss_seidel_forward(a, &inv, f, u);
    gauss_seidel_backward(a, &inv, f, u);
    Ok(())
}

/// One symmetric Gauss-Seidel sweep from a zero guess.
#[derive(Debug, Clone)]
pub struct SgsPreconditioner {
    a: CsrMatrix,
    inv_diag: Vec<f64>,
}

impl SgsPreconditioner {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Ok(Self {
            inv_diag: inverse_diagonal(a)?,
            a: a.clone(),
        })
    }
}

impl Preconditioner for SgsPreconditioner {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.fill(0.0);
        gauss_seidel_forward(&self.a, &self.inv_diag, r, z);
        gauss_seidel_backward(&self.a, &self.inv_diag, r, z);
    }
}
