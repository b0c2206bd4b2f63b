//! Seed-field admissibility, the frozen-in field carried by the flow map, and
//! the vacuum field amplitude `C(t)` that sets the interface pressure.
//!
//! The vacuum field between the plasma and the wall is purely azimuthal,
//! `𝓑^θ = C(t)/r`, with `C(t) = C(0) exp(∫₀ᵗ A)`. `A` is a ratio of two
//! boundary integrals over the current plasma surface.

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, MagneticsError};
use crate::evolve::Kinematics;
use crate::geometry::{self, FlowMapState, GeometryCache};
use crate::grid::{Grid, Parity, ResidualMax, ScalarField};

/// Smallest vacuum-integral denominator accepted by [`vacuum_a`].
pub const MIN_VACUUM_DENOMINATOR: f64 = 1e-12;

/// Time-independent seed field `b₀ = (b₀^r, b₀^θ, b₀^z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagneticSeed {
    pub b0r: ScalarField,
    pub b0th: ScalarField,
    pub b0z: ScalarField,
    /// `min |b₀^z|` over the boundary trace.
    pub delta: f64,
}

impl MagneticSeed {
    pub fn new(b0r: ScalarField, b0th: ScalarField, b0z: ScalarField) -> Self {
        let delta = b0z
            .boundary_trace()
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()));
        Self {
            b0r: b0r.with_parity(Parity::Odd),
            b0th: b0th.with_parity(Parity::Odd),
            b0z: b0z.with_parity(Parity::Even),
            delta,
        }
    }

    pub fn from_fn(
        grid: Grid,
        br: impl Fn(f64, f64) -> f64,
        bth: impl Fn(f64, f64) -> f64,
        bz: impl Fn(f64, f64) -> f64,
    ) -> Self {
        Self::new(
            ScalarField::from_fn(grid, Parity::Odd, br),
            ScalarField::from_fn(grid, Parity::Odd, bth),
            ScalarField::from_fn(grid, Parity::Even, bz),
        )
    }

    pub fn zero(grid: Grid) -> Self {
        Self::from_fn(grid, |_, _| 0.0, |_, _| 0.0, |_, _| 0.0)
    }

    /// `b₀ = (0, c₀ r, c₁)`.
    pub fn screw_pinch(grid: Grid, c0: f64, c1: f64) -> Self {
        Self::from_fn(grid, |_, _| 0.0, |r, _| c0 * r, |_, _| c1)
    }

    pub fn grid(&self) -> &Grid {
        self.b0r.grid()
    }

    /// `(b₀^r ∂_r + b₀^z ∂_z) f` for an axisymmetric field `f`; preserves parity.
    pub fn dot_grad(&self, f: &ScalarField) -> ScalarField {
        let a = &self.b0r * &f.d_r();
        let b = &self.b0z * &f.d_z();
        a.zip_with(&b, f.parity(), |x, y| x + y)
    }

    /// `b₀·∇R` for the full radial map `R = r + (R − r)`.
    pub fn dot_grad_radius(&self, m: &FlowMapState) -> ScalarField {
        &self.b0r + &self.dot_grad(&m.r_disp)
    }

    /// `b₀·∇Z` for the full axial map `Z = z + (Z − z)`.
    pub fn dot_grad_axial(&self, m: &FlowMapState) -> ScalarField {
        &self.b0z + &self.dot_grad(&m.z_disp)
    }

    /// `b₀·∇Θ` for the full angle `Θ = θ + Θ̂`; the `θ` part gives `b₀^θ / r`.
    pub fn dot_grad_angle(&self, m: &FlowMapState) -> ScalarField {
        &self.dot_grad(&m.theta_hat) + &self.b0th.div_r()
    }

    /// Nodewise maximum of `|b₀|`.
    pub fn sup_norm(&self) -> f64 {
        let mut m = 0.0_f64;
        for k in 0..self.grid().len() {
            let (a, b, c) = (self.b0r.values()[k], self.b0th.values()[k], self.b0z.values()[k]);
            m = m.max((a * a + b * b + c * c).sqrt());
        }
        m
    }

    /// `∂_r b₀^r + b₀^r / r + ∂_z b₀^z`.
    pub fn divergence(&self) -> ScalarField {
        let d = &self.b0r.d_r() + &self.b0r.div_r();
        &d + &self.b0z.d_z()
    }
}

/// Outcome of [`validate_seed`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub div_residual: f64,
    pub boundary_br: f64,
    pub delta: f64,
    pub delta_min: f64,
    pub tolerance: f64,
    pub divergence_ok: bool,
    pub boundary_ok: bool,
    pub noncollinear_ok: bool,
}

impl SeedReport {
    pub fn admissible(&self) -> bool {
        self.divergence_ok && self.boundary_ok && self.noncollinear_ok
    }
}

/// Checks the divergence constraint, tangency on the boundary, and the
/// non-collinearity bound `|b₀^z| ≥ δ_min` on `r = R0`.
///
/// The discrete divergence of a smooth admissible seed is `O(h²)`, so the
/// first two checks use the tolerance `10 h² max(1, ‖b₀‖∞)`.
pub fn validate_seed(b0: &MagneticSeed, delta_min: f64) -> SeedReport {
    let g = b0.grid();
    let tolerance = 10.0 * g.h_max().powi(2) * b0.sup_norm().max(1.0);
    let div_residual = b0.divergence().max_abs();
    let boundary_br = b0
        .b0r
        .boundary_trace()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    SeedReport {
        div_residual,
        boundary_br,
        delta: b0.delta,
        delta_min,
        tolerance,
        divergence_ok: div_residual <= tolerance,
        boundary_ok: boundary_br <= tolerance,
        noncollinear_ok: b0.delta >= delta_min && b0.delta > 0.0,
    }
}

/// Magnetic field `(b^r, b^θ, b^z)` transported by the flow map.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenInField {
    pub br: ScalarField,
    pub bth: ScalarField,
    pub bz: ScalarField,
}

/// `b^r = b₀·∇R`, `b^z = b₀·∇Z`, `b^θ = R b₀·∇Θ̂ + R b₀^θ / r`.
pub fn frozen_in(b0: &MagneticSeed, m: &FlowMapState) -> FrozenInField {
    let radius = m.radius();
    let stretch = radius.div_r();
    let bth = &(&stretch * &b0.b0th) + &(&radius * &b0.dot_grad(&m.theta_hat));
    FrozenInField {
        br: b0.dot_grad_radius(m),
        bth,
        bz: b0.dot_grad_axial(m),
    }
}

/// Lagrangian divergence `Div_𝔞 b = 𝔞_ij ∂_{a_j} b_i + b^r / R` of the
/// poloidal part of a frozen-in field.
pub fn lagrangian_divergence(b: &FrozenInField, g: &GeometryCache, m: &FlowMapState) -> ScalarField {
    geometry::lagrangian_divergence(&g.cofactor, &m.radius(), &b.br, &b.bz)
}

pub fn lagrangian_div_residual(b: &FrozenInField, g: &GeometryCache, m: &FlowMapState) -> ResidualMax {
    lagrangian_divergence(b, g, m).max_abs_split()
}

/// Vacuum amplitude history. `A` samples are stored with their times and the
/// time integral of `A` is accumulated by the trapezoid rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacuumState {
    pub c: f64,
    pub c0: f64,
    pub rs: f64,
    pub a_history: Vec<(f64, f64)>,
    pub integral: f64,
}

impl VacuumState {
    pub fn new(c0: f64, rs: f64, a0: f64) -> Self {
        Self {
            c: c0,
            c0,
            rs,
            a_history: vec![(0.0, a0)],
            integral: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.a_history.last().map(|&(t, _)| t).unwrap_or(0.0)
    }

    pub fn latest_a(&self) -> f64 {
        self.a_history.last().map(|&(_, a)| a).unwrap_or(0.0)
    }
}

/// Appends `A_new` one step `dt` later and re-evaluates `C = C₀ exp(∫A)`.
pub fn advance_c(vs: &VacuumState, a_new: f64, dt: f64) -> Result<VacuumState, MagneticsError> {
    if !(dt > 0.0) {
        return Err(MagneticsError::BadStep(dt));
    }
    let mut next = vs.clone();
    let t = vs.time() + dt;
    next.integral += 0.5 * dt * (vs.latest_a() + a_new);
    next.a_history.push((t, a_new));
    next.c = vs.c0 * next.integral.exp();
    Ok(next)
}

/// Boundary quadrature
/// `A = ∫(v^r ∂_z Z − v^z ∂_z R) dz / ∫(ln R_S − ln R) ∂_z Z dz` on `r = R0`.
pub fn vacuum_a(v: &Kinematics, m: &FlowMapState, rs: f64) -> Result<f64, MagneticsError> {
    let g = *m.grid();
    let radius = m.radius_trace();
    let r_max = radius.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(rs > r_max) {
        return Err(MagneticsError::WallInside { rs, r_max });
    }
    for (j, &value) in radius.iter().enumerate() {
        if !(value > 0.0) {
            return Err(GeometryError::NonPositiveTrace { j, value }.into());
        }
    }
    let dz_r = m.r_disp.d_z().boundary_trace();
    let dz_z = m.z_disp.d_z().boundary_trace();
    let vr = v.vr.boundary_trace();
    let vz = v.vz.boundary_trace();
    let (mut num, mut den) = (0.0, 0.0);
    let ln_rs = rs.ln();
    for j in 0..g.nz {
        let zz = 1.0 + dz_z[j];
        num += vr[j] * zz - vz[j] * dz_r[j];
        den += (ln_rs - radius[j].ln()) * zz;
    }
    let (num, den) = (num * g.hz(), den * g.hz());
    if !(den.abs() >= MIN_VACUUM_DENOMINATOR) {
        return Err(MagneticsError::VacuumGeometry { value: den });
    }
    Ok(num / den)
}

/// Interface pressure `q_Γ = C² / (2 R²)` along `r = R0`.
pub fn boundary_pressure(c: f64, r_trace: &[f64]) -> Result<Vec<f64>, GeometryError> {
    r_trace
        .iter()
        .enumerate()
        .map(|(j, &value)| {
            if value > 0.0 {
                Ok(0.5 * c * c / (value * value))
            } else {
                Err(GeometryError::NonPositiveTrace { j, value })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_geometry;
    use std::f64::consts::{E, PI};

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 1.0, 2.0 * PI).unwrap()
    }

    fn kin(g: Grid, vr: impl Fn(f64, f64) -> f64, vz: impl Fn(f64, f64) -> f64) -> Kinematics {
        Kinematics {
            vr: ScalarField::from_fn(g, Parity::Odd, vr),
            vth: ScalarField::zeros(g, Parity::Odd),
            vz: ScalarField::from_fn(g, Parity::Even, vz),
        }
    }

    #[test]
    fn screw_pinch_is_admissible() {
        let b0 = MagneticSeed::screw_pinch(grid(32), 0.5, 0.5);
        let rep = validate_seed(&b0, 1e-6);
        assert!(rep.div_residual < 1e-14);
        assert!((rep.delta - 0.5).abs() < 1e-14);
        assert!(rep.admissible());
    }

    #[test]
    fn radial_seed_fails_divergence() {
        let b0 = MagneticSeed::from_fn(grid(32), |r, _| r, |_, _| 0.0, |_, _| 0.0);
        let rep = validate_seed(&b0, 0.0);
        assert!((rep.div_residual - 2.0).abs() < 1e-12);
        assert!(!rep.divergence_ok);
        assert!(!rep.admissible());
    }

    #[test]
    fn zero_seed_fails_noncollinearity() {
        let rep = validate_seed(&MagneticSeed::zero(grid(16)), 1e-3);
        assert!(rep.divergence_ok && rep.boundary_ok);
        assert_eq!(rep.delta, 0.0);
        assert!(!rep.noncollinear_ok);
    }

    #[test]
    fn frozen_in_identity_is_exact() {
        let g = grid(16);
        let b0 = MagneticSeed::from_fn(
            g,
            |r, z| 0.1 * r * (1.0 - r * r) * z.cos(),
            |r, _| 0.3 * r,
            |r, z| 0.7 + 0.1 * r * r * z.sin(),
        );
        let b = frozen_in(&b0, &FlowMapState::identity(g));
        assert_eq!(b.br, b0.b0r);
        assert_eq!(b.bth.values(), b0.b0th.values());
        assert_eq!(b.bz, b0.b0z);
    }

    #[test]
    fn frozen_in_under_shear_and_rotation() {
        let g = grid(32);
        let b0 = MagneticSeed::screw_pinch(g, 0.5, 0.5);
        let shear = FlowMapState::from_displacements(g, |_, _| 0.0, |r, _| 0.1 * r * r);
        let b = frozen_in(&b0, &shear);
        assert!(b.br.max_abs() < 1e-14);
        assert!(b.bz.values().iter().all(|v| (v - 0.5).abs() < 1e-14));
        for i in 0..g.nr {
            assert!((b.bth.at(i, 1) - 0.5 * g.r(i)).abs() < 1e-14);
        }
        let mut spin = FlowMapState::identity(g);
        spin.theta_hat = ScalarField::constant(g, 0.3);
        let b = frozen_in(&b0, &spin);
        for i in 0..g.nr {
            assert!((b.bth.at(i, 2) - 0.5 * g.r(i)).abs() < 1e-14);
        }
    }

    #[test]
    fn lagrangian_divergence_of_inadmissible_seed() {
        let g = grid(32);
        let m = FlowMapState::identity(g);
        let geo = build_geometry(&m).unwrap();
        let bad = MagneticSeed::from_fn(g, |r, _| r, |_, _| 0.0, |_, _| 0.0);
        let res = lagrangian_div_residual(&frozen_in(&bad, &m), &geo, &m);
        assert!((res.overall() - 2.0).abs() < 1e-12);
        let good = MagneticSeed::screw_pinch(g, 0.5, 0.5);
        assert!(lagrangian_div_residual(&frozen_in(&good, &m), &geo, &m).overall() < 1e-14);
    }

    #[test]
    fn vacuum_quadrature_examples() {
        let g = grid(32);
        let m = FlowMapState::identity(g);
        let a = vacuum_a(&kin(g, |_, _| 0.0, |_, z| z.cos()), &m, E).unwrap();
        assert_eq!(a, 0.0);
        let a = vacuum_a(&kin(g, |r, _| 0.1 * r, |_, _| 0.0), &m, E).unwrap();
        assert!((a - 0.1).abs() < 1e-12, "{a}");
        let a = vacuum_a(&kin(g, |r, z| 0.1 * r * z.sin(), |_, _| 0.0), &m, E).unwrap();
        assert!(a.abs() < 1e-14);
        assert!(matches!(
            vacuum_a(&kin(g, |_, _| 0.0, |_, _| 0.0), &m, 1.0),
            Err(MagneticsError::WallInside { .. })
        ));
    }

    #[test]
    fn vacuum_denominator_guard() {
        let g = grid(16);
        let m = FlowMapState::identity(g);
        let rs = 1.0 + 1e-14;
        assert!(matches!(
            vacuum_a(&kin(g, |_, _| 0.0, |_, _| 0.0), &m, rs),
            Err(MagneticsError::VacuumGeometry { .. })
        ));
    }

    #[test]
    fn advance_c_matches_exponential() {
        let mut vs = VacuumState::new(1.0, E, 0.0);
        for _ in 0..100 {
            vs = advance_c(&vs, 0.0, 0.01).unwrap();
        }
        assert_eq!(vs.c, 1.0);

        let mut vs = VacuumState::new(1.0, E, 0.1);
        for _ in 0..1000 {
            vs = advance_c(&vs, 0.1, 1e-3).unwrap();
        }
        assert!((vs.c - 0.1_f64.exp()).abs() < 1e-12);
        assert!(advance_c(&vs, 0.1, 0.0).is_err());

        let mut vs = VacuumState::new(-2.0, E, 0.0);
        vs = advance_c(&vs, -3.0, 0.5).unwrap();
        assert!(vs.c < 0.0);
    }

    #[test]
    fn interface_pressure_examples() {
        assert_eq!(boundary_pressure(1.0, &[1.0; 4]).unwrap(), vec![0.5; 4]);
        assert_eq!(boundary_pressure(0.0, &[1.0; 4]).unwrap(), vec![0.0; 4]);
        assert_eq!(boundary_pressure(2.0, &[2.0; 4]).unwrap(), vec![0.5; 4]);
        assert!(boundary_pressure(1.0, &[1.0, 0.0]).is_err());
    }
}
