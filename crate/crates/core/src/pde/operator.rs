use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::WentzellParams;

use super::Grid;

/// Discretization of the dynamic boundary condition `a u̇₁ = b u₁ − d u_x(1)` at node `n_x`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryClosure {
    /// Half-cell balance `(Δx/2 + a/d) u̇_N = (u_{N−1} − u_N)/Δx + (b/d) u_N`.
    ///
    /// Second-order consistent (the half-cell term equals the `u_xx` correction
    /// of the one-sided derivative) and self-adjoint in the discrete `H` product.
    #[default]
    Symmetric,
    /// `u_x(1) ≈ (3u_N − 4u_{N−1} + u_{N−2}) / (2Δx)`.
    ThreePoint,
    /// `u_x(1) ≈ (u_N − u_{N−1}) / Δx`, the first-order backward formula.
    FirstOrder,
}

/// Semi-discrete operator `L` acting on nodes `1..=n_x`, so that the method of
/// lines reads `u̇ = L u + e₁ f(t)/Δx²`.
///
/// Row `i` corresponds to node `i + 1`. The last row may carry one extra entry
/// on node `n_x − 2` (three-point closure).
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub(crate) lower: Vec<f64>,
    pub(crate) diag: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) corner: f64,
    /// Coefficient of node 0 in row 0 (`1/Δx²`).
    pub(crate) control_coeff: f64,
    /// Diagonal of the discrete `H` inner product on nodes `1..=n_x`.
    pub(crate) mass: Vec<f64>,
}

impl DiscreteOperator {
    pub fn new(params: &WentzellParams, grid: Grid, closure: BoundaryClosure) -> Self {
        let n = grid.n_x;
        let dx = grid.dx();
        let inv_dx2 = 1.0 / (dx * dx);
        let mut lower = vec![inv_dx2; n];
        let mut diag = vec![-2.0 * inv_dx2; n];
        let upper = vec![inv_dx2; n - 1];
        lower[0] = 0.0;
        let w = params.weight();
        let r = params.ratio();
        let mut corner = 0.0;
        match closure {
            BoundaryClosure::Symmetric => {
                let m = 0.5 * dx + w;
                lower[n - 1] = 1.0 / (dx * m);
                diag[n - 1] = (r - 1.0 / dx) / m;
            }
            BoundaryClosure::ThreePoint => {
                lower[n - 1] = 2.0 / (dx * w);
                diag[n - 1] = (r - 1.5 / dx) / w;
                corner = -0.5 / (dx * w);
            }
            BoundaryClosure::FirstOrder => {
                lower[n - 1] = 1.0 / (dx * w);
                diag[n - 1] = (r - 1.0 / dx) / w;
            }
        }
        let mut mass = vec![dx; n];
        mass[n - 1] = 0.5 * dx + w;
        Self {
            lower,
            diag,
            upper,
            corner,
            control_coeff: inv_dx2,
            mass,
        }
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// `(L u)` for interior-plus-boundary values `u` (nodes `1..=n_x`) and node-0 value `u0`.
    pub fn apply(&self, u0: f64, u: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut v = self.diag[i] * u[i];
            if i > 0 {
                v += self.lower[i] * u[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * u[i + 1];
            }
            out[i] = v;
        }
        out[0] += self.control_coeff * u0;
        out[n - 1] += self.corner * u[n - 3];
        out
    }

    /// Factor `s·I + t·L` for repeated solves.
    pub fn factor(&self, s: f64, t: f64) -> Result<BandedFactor> {
        let n = self.size();
        let lower: Vec<f64> = self.lower.iter().map(|v| t * v).collect();
        let diag: Vec<f64> = self.diag.iter().map(|v| s + t * v).collect();
        let upper: Vec<f64> = self.upper.iter().map(|v| t * v).collect();
        BandedFactor::new(lower, diag, upper, t * self.corner, n)
    }
}

/// Thomas factorization of a tridiagonal matrix with an optional entry at
/// `(n−1, n−3)`, removed beforehand by one row operation with row `n−2`.
#[derive(Clone, Debug)]
pub struct BandedFactor {
    lower: Vec<f64>,
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
    corner_factor: f64,
}

const PIVOT_TOL: f64 = 1e-12;

impl BandedFactor {
    fn new(
        mut lower: Vec<f64>,
        mut diag: Vec<f64>,
        upper: Vec<f64>,
        corner: f64,
        n: usize,
    ) -> Result<Self> {
        let mut corner_factor = 0.0;
        if corner != 0.0 {
            corner_factor = corner / lower[n - 2];
            lower[n - 1] -= corner_factor * diag[n - 2];
            diag[n - 1] -= corner_factor * upper[n - 2];
        }
        let scale = diag
            .iter()
            .chain(&lower)
            .chain(&upper)
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut inv_pivot = vec![0.0; n];
        let mut pivot = diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = diag[i] - lower[i] * upper[i - 1] * inv_pivot[i - 1];
            }
            if pivot.abs() <= PIVOT_TOL * scale || !pivot.is_finite() {
                return Err(Error::SingularSystem { row: i + 1, pivot });
            }
            inv_pivot[i] = 1.0 / pivot;
        }
        Ok(Self {
            lower,
            upper,
            inv_pivot,
            corner_factor,
        })
    }

    /// Solve in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        if self.corner_factor != 0.0 {
            rhs[n - 1] -= self.corner_factor * rhs[n - 2];
        }
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * self.inv_pivot[i] * rhs[i + 1];
        }
    }
}
