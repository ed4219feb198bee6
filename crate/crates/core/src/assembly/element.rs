use crate::mesh::{tet_volume, Point};
use crate::{Error, Result};

/// Affine P1 element data: volume and the constant barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub volume: f64,
    pub grads: [[f64; 3]; 4],
}

impl ElementGeometry {
    pub fn new(p: &[Point; 4], tet: usize) -> Result<Self> {
        let volume = tet_volume(p);
        if !(volume > 0.0) {
            return Err(Error::DegenerateElement { tet, volume });
        }
        // J has columns p_k - p_0; rows of J^{-1} are the gradients of
        // lambda_1..lambda_3.
        let j = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0], p[3][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1], p[3][1] - p[0][1]],
            [p[1][2] - p[0][2], p[2][2] - p[0][2], p[3][2] - p[0][2]],
        ];
        let det = 6.0 * volume;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| j[r0][c0] * j[r1][c1] - j[r0][c1] * j[r1][c0];
        // inverse = adj(J) / det; row i of the inverse is column i of cof^T
        let inv = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        let mut grads = [[0.0; 3]; 4];
        for k in 0..3 {
            for d in 0..3 {
                grads[k + 1][d] = inv[k][d] / det;
                grads[0][d] -= grads[k + 1][d];
            }
        }
        Ok(Self { volume, grads })
    }

    /// `|T| grad(lambda_i) . grad(lambda_j)`
    pub fn stiffness(&self) -> [[f64; 4]; 4] {
        let mut k = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                let g = &self.grads;
                let v = self.volume * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2]);
                k[i][j] = v;
                k[j][i] = v;
            }
        }
        k
    }

    /// `|T| (1 + delta_ij) / 20`
    pub fn mass(&self) -> [[f64; 4]; 4] {
        let off = self.volume / 20.0;
        let mut m = [[off; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 2.0 * off;
        }
        m
    }

    /// Gradient of the P1 function with nodal values `u`.
    pub fn gradient(&self, u: &[f64; 4]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (ui, gi) in u.iter().zip(&self.grads) {
            for d in 0..3 {
                g[d] += ui * gi[d];
            }
        }
        g
    }
}
