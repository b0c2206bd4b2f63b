//! Flow-map geometry: deformation tensor, cofactor matrix, Jacobian, and the
//! geometric identities they satisfy, exposed as computable residuals.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::grid::{Grid, Parity, ResidualMax, ScalarField};

/// Deviation bound on `F − I` and `𝔞 − I` under which the linearized
/// problem is posed.
pub const ASSUMPTION_BOUND: f64 = 1.0 / 8.0;

/// Smallest |J| accepted by [`build_geometry`].
pub const MIN_JACOBIAN: f64 = 1e-12;

/// Lagrangian map `(R, Z, Θ)` stored as periodic displacements from the
/// identity: `R − r` (odd), `Z − z` (even), `Θ̂ = Θ − θ` (even).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMapState {
    pub r_disp: ScalarField,
    pub z_disp: ScalarField,
    pub theta_hat: ScalarField,
    pub t: f64,
}

impl FlowMapState {
    pub fn identity(grid: Grid) -> Self {
        Self {
            r_disp: ScalarField::zeros(grid, Parity::Odd),
            z_disp: ScalarField::zeros(grid, Parity::Even),
            theta_hat: ScalarField::zeros(grid, Parity::Even),
            t: 0.0,
        }
    }

    /// Map given by closed forms `R(r, z)` and `Z(r, z)`, with `Θ̂ = 0`.
    pub fn from_maps(
        grid: Grid,
        radial: impl Fn(f64, f64) -> f64,
        axial: impl Fn(f64, f64) -> f64,
    ) -> Self {
        Self {
            r_disp: ScalarField::from_fn(grid, Parity::Odd, |r, z| radial(r, z) - r),
            z_disp: ScalarField::from_fn(grid, Parity::Even, |r, z| axial(r, z) - z),
            theta_hat: ScalarField::zeros(grid, Parity::Even),
            t: 0.0,
        }
    }

    /// Map given by closed-form displacements `R − r` and `Z − z`.
    pub fn from_displacements(
        grid: Grid,
        radial: impl Fn(f64, f64) -> f64,
        axial: impl Fn(f64, f64) -> f64,
    ) -> Self {
        Self {
            r_disp: ScalarField::from_fn(grid, Parity::Odd, radial),
            z_disp: ScalarField::from_fn(grid, Parity::Even, axial),
            theta_hat: ScalarField::zeros(grid, Parity::Even),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.r_disp.grid()
    }

    /// The full radial map `R = r + (R − r)`.
    pub fn radius(&self) -> ScalarField {
        &ScalarField::radius(*self.grid()) + &self.r_disp
    }

    /// `R` at `r = R0`.
    pub fn radius_trace(&self) -> Vec<f64> {
        let r0 = self.grid().r0;
        self.r_disp.boundary_trace().into_iter().map(|d| r0 + d).collect()
    }

    /// Linear blend `(1 − w) self + w other`.
    pub fn lerp(&self, other: &Self, w: f64) -> Self {
        let blend = |a: &ScalarField, b: &ScalarField| a.zip_with(b, a.parity(), |x, y| x + w * (y - x));
        Self {
            r_disp: blend(&self.r_disp, &other.r_disp),
            z_disp: blend(&self.z_disp, &other.z_disp),
            theta_hat: blend(&self.theta_hat, &other.theta_hat),
            t: self.t + w * (other.t - self.t),
        }
    }
}

/// A 2×2 tensor field, row index Eulerian, column index reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    pub c11: ScalarField,
    pub c12: ScalarField,
    pub c21: ScalarField,
    pub c22: ScalarField,
}

impl Tensor2 {
    pub fn identity(grid: Grid) -> Self {
        Self {
            c11: ScalarField::constant(grid, 1.0),
            c12: ScalarField::zeros(grid, Parity::Odd),
            c21: ScalarField::zeros(grid, Parity::Odd),
            c22: ScalarField::constant(grid, 1.0),
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            c11: ScalarField::zeros(grid, Parity::Even),
            c12: ScalarField::zeros(grid, Parity::Odd),
            c21: ScalarField::zeros(grid, Parity::Odd),
            c22: ScalarField::zeros(grid, Parity::Even),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        match (i, j) {
            (0, 0) => &self.c11,
            (0, 1) => &self.c12,
            (1, 0) => &self.c21,
            (1, 1) => &self.c22,
            _ => panic!("tensor index ({i}, {j}) out of range"),
        }
    }

    pub fn components(&self) -> [&ScalarField; 4] {
        [&self.c11, &self.c12, &self.c21, &self.c22]
    }

    pub fn zip(&self, other: &Self, f: impl Fn(&ScalarField, &ScalarField) -> ScalarField) -> Self {
        Self {
            c11: f(&self.c11, &other.c11),
            c12: f(&self.c12, &other.c12),
            c21: f(&self.c21, &other.c21),
            c22: f(&self.c22, &other.c22),
        }
    }

    /// Max over nodes and components of `|T_ij − δ_ij|`.
    pub fn max_dev_from_identity(&self) -> f64 {
        let diag = |f: &ScalarField| f.values().iter().fold(0.0_f64, |m, v| m.max((v - 1.0).abs()));
        diag(&self.c11)
            .max(diag(&self.c22))
            .max(self.c12.max_abs())
            .max(self.c21.max_abs())
    }
}

/// Deformation tensor `F_ij = ∂_{a_j} ζ^i`, cofactor `𝔞 = F^{-T}`, and `J = det F`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryCache {
    pub deformation: Tensor2,
    pub cofactor: Tensor2,
    pub jacobian: ScalarField,
}

impl GeometryCache {
    pub fn grid(&self) -> &Grid {
        self.jacobian.grid()
    }
}

pub fn check_radius_positive(m: &FlowMapState) -> Result<(), GeometryError> {
    let g = *m.grid();
    let radius = m.radius();
    for i in 0..g.nr {
        for j in 0..g.nz {
            let v = radius.at(i, j);
            if !(v > 0.0) {
                return Err(GeometryError::NonPositiveRadius { i, j, value: v });
            }
        }
    }
    Ok(())
}

pub fn build_geometry(m: &FlowMapState) -> Result<GeometryCache, GeometryError> {
    check_radius_positive(m)?;
    let g = *m.grid();
    let f11 = m.r_disp.d_r().map(Parity::Even, |v| 1.0 + v);
    let f12 = m.r_disp.d_z();
    let f21 = m.z_disp.d_r();
    let f22 = m.z_disp.d_z().map(Parity::Even, |v| 1.0 + v);

    let n = g.len();
    let mut jac = vec![0.0; n];
    let mut a11 = vec![0.0; n];
    let mut a12 = vec![0.0; n];
    let mut a21 = vec![0.0; n];
    let mut a22 = vec![0.0; n];
    for k in 0..n {
        let (p, q, s, t) = (f11.values()[k], f12.values()[k], f21.values()[k], f22.values()[k]);
        let det = p * t - q * s;
        if !(det.abs() >= MIN_JACOBIAN) {
            return Err(GeometryError::DegenerateJacobian {
                i: k / g.nz,
                j: k % g.nz,
                value: det,
            });
        }
        jac[k] = det;
        // F^{-T} = adj(F)^T / det
        a11[k] = t / det;
        a12[k] = -s / det;
        a21[k] = -q / det;
        a22[k] = p / det;
    }
    let field = |p, v| ScalarField::from_values(g, p, v).expect("length matches grid");
    Ok(GeometryCache {
        deformation: Tensor2 {
            c11: f11,
            c12: f12,
            c21: f21,
            c22: f22,
        },
        cofactor: Tensor2 {
            c11: field(Parity::Even, a11),
            c12: field(Parity::Odd, a12),
            c21: field(Parity::Odd, a21),
            c22: field(Parity::Even, a22),
        },
        jacobian: field(Parity::Even, jac),
    })
}

/// Eulerian gradient `(∇_𝔞 q)_i = 𝔞_ij ∂_{a_j} q` of an even scalar.
pub fn lagrangian_gradient(a: &Tensor2, q: &ScalarField) -> [ScalarField; 2] {
    let (dr, dz) = (q.d_r(), q.d_z());
    [&(&a.c11 * &dr) + &(&a.c12 * &dz), &(&a.c21 * &dr) + &(&a.c22 * &dz)]
}

/// Cylindrical divergence `Div_𝔞 g = 𝔞_ij ∂_{a_j} g_i + g_1 / R` of a
/// poloidal vector `(g_1, g_2)` with `g_1` odd and `g_2` even.
pub fn lagrangian_divergence(
    a: &Tensor2,
    radius: &ScalarField,
    g1: &ScalarField,
    g2: &ScalarField,
) -> ScalarField {
    let (dr1, dz1, dr2, dz2) = (g1.d_r(), g1.d_z(), g2.d_r(), g2.d_z());
    let grid = *g1.grid();
    let mut out = ScalarField::zeros(grid, Parity::Even);
    let v = out.values_mut();
    for k in 0..grid.len() {
        v[k] = a.c11.values()[k] * dr1.values()[k]
            + a.c12.values()[k] * dz1.values()[k]
            + a.c21.values()[k] * dr2.values()[k]
            + a.c22.values()[k] * dz2.values()[k]
            + g1.values()[k] / radius.values()[k];
    }
    out
}

/// Time derivative of the cofactor matrix along a velocity `(v^r, v^z)`:
/// `∂_t 𝔞_ij = −𝔞_iℓ (∂_{a_ℓ} v_m) 𝔞_mj`.
pub fn cofactor_rate(a: &Tensor2, vr: &ScalarField, vz: &ScalarField) -> Tensor2 {
    let grid = *vr.grid();
    let dv = [[vr.d_r(), vr.d_z()], [vz.d_r(), vz.d_z()]];
    let mut out = Tensor2::zeros(grid);
    for k in 0..grid.len() {
        let at = |i: usize, j: usize| a.get(i, j).values()[k];
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for l in 0..2 {
                    for m in 0..2 {
                        s += at(i, l) * dv[m][l].values()[k] * at(m, j);
                    }
                }
                let slot = match (i, j) {
                    (0, 0) => &mut out.c11,
                    (0, 1) => &mut out.c12,
                    (1, 0) => &mut out.c21,
                    _ => &mut out.c22,
                };
                slot.values_mut()[k] = -s;
            }
        }
    }
    out
}

/// `(R/r) J − 1`: vanishes for volume-preserving axisymmetric maps.
pub fn incompressibility_residual(m: &FlowMapState) -> Result<ScalarField, GeometryError> {
    let geo = build_geometry(m)?;
    let ratio = m.radius().div_r();
    Ok((&ratio * &geo.jacobian).map(Parity::Even, |v| v - 1.0))
}

/// Divergence of the rows of `J𝔞` in reference coordinates,
/// `Σ_j ∂_{a_j}(J 𝔞_ij)` for `i = 1, 2`.
///
/// `J𝔞` is the cofactor matrix of `F`, so with tensor-product stencils the
/// two mixed differences cancel and the discrete residual sits at round-off.
pub fn piola_residual(m: &FlowMapState) -> Result<[ScalarField; 2], GeometryError> {
    let geo = build_geometry(m)?;
    let ja = |f: &ScalarField| f * &geo.jacobian;
    let a = &geo.cofactor;
    let row1 = &ja(&a.c11).d_r() + &ja(&a.c12).d_z();
    let row2 = &ja(&a.c21).d_r() + &ja(&a.c22).d_z();
    Ok([row1, row2])
}

/// Max-norm of a Piola residual pair.
pub fn piola_max(m: &FlowMapState) -> Result<ResidualMax, GeometryError> {
    let [p1, p2] = piola_residual(m)?;
    let (a, b) = (p1.max_abs_split(), p2.max_abs_split());
    Ok(ResidualMax {
        interior: a.interior.max(b.interior),
        boundary: a.boundary.max(b.boundary),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    R,
    Z,
}

fn derivative(f: &ScalarField, dir: Direction) -> ScalarField {
    match dir {
        Direction::R => f.d_r(),
        Direction::Z => f.d_z(),
    }
}

/// Deviation `|∂J − J 𝔞_ij ∂F_ij|` with every derivative taken by stencil.
pub fn identity_dj_check(m: &FlowMapState, dir: Direction) -> Result<ResidualMax, GeometryError> {
    let geo = build_geometry(m)?;
    let lhs = derivative(&geo.jacobian, dir);
    let mut rhs = ScalarField::zeros(*m.grid(), lhs.parity());
    for i in 0..2 {
        for j in 0..2 {
            let term = geo.cofactor.get(i, j) * &derivative(geo.deformation.get(i, j), dir);
            rhs = rhs.zip_with(&term, rhs.parity(), |a, b| a + b);
        }
    }
    let rhs = &rhs * &geo.jacobian;
    Ok(lhs.zip_with(&rhs, lhs.parity(), |a, b| a - b).max_abs_split())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub max_f_dev: f64,
    pub max_a_dev: f64,
    pub ok: bool,
}

/// Measures how far `F` and `𝔞` stray from the identity.
pub fn assumption_monitor(g: &GeometryCache) -> AssumptionReport {
    let max_f_dev = g.deformation.max_dev_from_identity();
    let max_a_dev = g.cofactor.max_dev_from_identity();
    AssumptionReport {
        max_f_dev,
        max_a_dev,
        ok: max_f_dev <= ASSUMPTION_BOUND && max_a_dev <= ASSUMPTION_BOUND,
    }
}
