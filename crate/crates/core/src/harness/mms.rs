//! Manufactured solutions for the pressure operator.
//!
//! Each case fixes a frozen map and an Eulerian field `Q(R, Z)`. The
//! Lagrangian solution is `q = Q ∘ (R, Z)` and the forcing is `J Δ_cyl Q`,
//! since `(1/R)∂_i(R J 𝔞_ℓi 𝔞_ℓj ∂_j q)` is the Jacobian times the cylindrical
//! Laplacian of `Q`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{ConfigError, HarnessError};
use crate::geometry::{build_geometry, FlowMapState};
use crate::grid::{Grid, Parity, ScalarField};
use crate::pressure::{pressure_tensor, solve_pressure_from, EllipticSystem};

pub const MMS_CASES: [u32; 3] = [1, 2, 3];
pub const DEFAULT_MMS_GRIDS: [usize; 3] = [32, 64, 128];
const MMS_REL_TOL: f64 = 1e-12;
const WAVE: f64 = 0.05;

/// Closed-form description of one case on the reference domain
/// `R0 = 1`, `Lz = 2π`.
struct Case {
    /// `(R, Z)` of the frozen map at `(r, z)`.
    map: fn(f64, f64) -> (f64, f64),
    /// Jacobian of the map.
    jacobian: fn(f64, f64) -> f64,
    q: fn(f64, f64) -> f64,
    laplacian: fn(f64, f64) -> f64,
}

fn identity(r: f64, z: f64) -> (f64, f64) {
    (r, z)
}

fn unit(_: f64, _: f64) -> f64 {
    1.0
}

/// `R = r(1 + w cos z)`, `Z = z + w sin z cos r`.
fn wavy(r: f64, z: f64) -> (f64, f64) {
    (r * (1.0 + WAVE * z.cos()), z + WAVE * z.sin() * r.cos())
}

fn wavy_jacobian(r: f64, z: f64) -> f64 {
    let f11 = 1.0 + WAVE * z.cos();
    let f12 = -WAVE * r * z.sin();
    let f21 = -WAVE * z.sin() * r.sin();
    let f22 = 1.0 + WAVE * z.cos() * r.cos();
    f11 * f22 - f12 * f21
}

fn case(id: u32) -> Result<Case, ConfigError> {
    Ok(match id {
        1 => Case {
            map: identity,
            jacobian: unit,
            q: |r, _| r * r,
            laplacian: |_, _| 4.0,
        },
        2 => Case {
            map: identity,
            jacobian: unit,
            q: |r, z| 1.0 + r * r * z.cos(),
            laplacian: |r, z| (4.0 - r * r) * z.cos(),
        },
        3 => Case {
            map: wavy,
            jacobian: wavy_jacobian,
            q: |r, z| r * r * (1.0 + 0.2 * z.cos()),
            laplacian: |r, z| 4.0 * (1.0 + 0.2 * z.cos()) - 0.2 * r * r * z.cos(),
        },
        other => {
            return Err(ConfigError::new(
                "mms.case",
                format!("unknown manufactured case {other}; available: 1, 2, 3"),
            ))
        }
    })
}

pub fn describe_case(id: u32) -> &'static str {
    match id {
        1 => "q = r^2 on the identity map",
        2 => "q = 1 + r^2 cos z on the identity map",
        3 => "Q = R^2 (1 + cos(Z)/5) on the map R = r(1 + cos(z)/20), Z = z + sin(z) cos(r)/20",
        _ => "unknown",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MmsPoint {
    pub n: usize,
    pub h: f64,
    pub error_inf: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmsStudy {
    pub case_id: u32,
    pub points: Vec<MmsPoint>,
    /// `log₂(e_k / e_{k+1})` between consecutive grids.
    pub orders: Vec<f64>,
}

impl MmsStudy {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Max nodal error of the discrete solution on an `n × n` grid.
pub fn mms_error(case_id: u32, n: usize) -> Result<MmsPoint, HarnessError> {
    let c = case(case_id)?;
    let g = Grid::new(n, n, 1.0, 2.0 * PI)?;
    let map = FlowMapState::from_maps(g, |r, z| (c.map)(r, z).0, |r, z| (c.map)(r, z).1);
    let geo = build_geometry(&map)?;
    let coeff = pressure_tensor(&geo.cofactor, &geo.jacobian);
    let at_image = |f: fn(f64, f64) -> f64| {
        move |r: f64, z: f64| {
            let (rr, zz) = (c.map)(r, z);
            f(rr, zz)
        }
    };
    let q_exact = at_image(c.q);
    let lap = at_image(c.laplacian);
    let rhs = ScalarField::from_fn(g, Parity::Even, |r, z| (c.jacobian)(r, z) * lap(r, z));
    let bc: Vec<f64> = (0..g.nz).map(|j| q_exact(g.r0, g.z(j))).collect();
    let sys = EllipticSystem::from_parts(map.radius(), coeff, rhs, bc)?;
    let (q, stats) = solve_pressure_from(&sys, MMS_REL_TOL, None)?;
    let exact = ScalarField::from_fn(g, Parity::Even, q_exact);
    Ok(MmsPoint {
        n,
        h: g.h_max(),
        error_inf: (&q - &exact).max_abs(),
        iterations: stats.iterations,
    })
}

pub fn convergence_study(case_id: u32, grids: &[usize]) -> Result<MmsStudy, HarnessError> {
    let points = grids
        .iter()
        .map(|&n| mms_error(case_id, n))
        .collect::<Result<Vec<_>, _>>()?;
    let orders = points
        .windows(2)
        .map(|w| (w[0].error_inf / w[1].error_inf).ln() / (w[0].h / w[1].h).ln())
        .collect();
    Ok(MmsStudy {
        case_id,
        points,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavy_jacobian_matches_differences() {
        let (r, z, h) = (0.37, 1.3, 1e-6);
        let d = |f: &dyn Fn(f64, f64) -> f64, dr: f64, dz: f64| (f(r + dr, z + dz) - f(r - dr, z - dz)) / (2.0 * h);
        let rr = |r, z| wavy(r, z).0;
        let zz = |r, z| wavy(r, z).1;
        let j = d(&rr, h, 0.0) * d(&zz, 0.0, h) - d(&rr, 0.0, h) * d(&zz, h, 0.0);
        assert!((j - wavy_jacobian(r, z)).abs() < 1e-8);
    }

    #[test]
    fn manufactured_laplacians_are_consistent() {
        // Δ_cyl Q = Q_RR + Q_R / R + Q_ZZ by central differences
        for id in MMS_CASES {
            let c = case(id).unwrap();
            let (r, z, h) = (0.6, 0.9, 1e-4);
            let q = c.q;
            let lap = (q(r + h, z) - 2.0 * q(r, z) + q(r - h, z)) / (h * h)
                + (q(r + h, z) - q(r - h, z)) / (2.0 * h * r)
                + (q(r, z + h) - 2.0 * q(r, z) + q(r, z - h)) / (h * h);
            assert!((lap - (c.laplacian)(r, z)).abs() < 1e-5, "case {id}");
        }
    }

    #[test]
    fn unknown_case_is_a_config_error() {
        assert_eq!(mms_error(9, 16).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn coarse_study_converges() {
        for id in MMS_CASES {
            let s = convergence_study(id, &[16, 32]).unwrap();
            assert!(s.orders[0] > 1.7, "case {id}: {:?}", s);
        }
    }
}
