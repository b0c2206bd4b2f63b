//! Energy functional, residual reports and well-posedness monitors, one
//! record per time node.

use serde::{Deserialize, Serialize};

use crate::error::{EvolveError, GridError};
use crate::evolve::{IterateTrajectory, SimState};
use crate::geometry::{assumption_monitor, build_geometry, cofactor_rate, piola_max, Tensor2, ASSUMPTION_BOUND};
use crate::grid::{weighted_norm, weighted_norm_sq, Grid, Parity, ScalarField};
use crate::magnetics::{frozen_in, lagrangian_div_residual, MagneticSeed};

/// One line of the diagnostics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub div_v: f64,
    pub piola: f64,
    pub curl_v: f64,
    pub frozen_div: f64,
    /// Largest deviation of `F` or `𝔞` from the identity.
    #[serde(rename = "maxA_dev")]
    pub max_a_dev: f64,
    pub delta: f64,
    pub psi: Option<f64>,
}

fn check_energy_order(k: usize) -> Result<(), GridError> {
    if k < 2 {
        return Err(GridError::Precondition(format!("energy norm order must be 2, 3 or 4, got {k}")));
    }
    if k > crate::grid::MAX_NORM_ORDER {
        return Err(GridError::OrderTooHigh(k));
    }
    Ok(())
}

/// `‖v‖_k² + ‖(R − r, Z − z)‖_k² + ‖(b₀·∇R, R b₀·∇Θ, b₀·∇Z)‖_k²`.
pub fn energy_functional(state: &SimState, b0: &MagneticSeed, k: usize) -> Result<f64, GridError> {
    check_energy_order(k)?;
    let b = frozen_in(b0, &state.map);
    let fields = [
        &state.kin.vr,
        &state.kin.vth,
        &state.kin.vz,
        &state.map.r_disp,
        &state.map.z_disp,
        &b.br,
        &b.bth,
        &b.bz,
    ];
    let mut total = 0.0;
    for f in fields {
        total += weighted_norm_sq(f, k)?;
    }
    Ok(total)
}

/// Running trapezoid integrals `∫₀ᵗ ∂_t𝔞 dτ` and `∫₀ᵗ ∂_tR / R² dτ` along a
/// trajectory.
#[derive(Debug, Clone)]
pub struct TimeIntegrals {
    pub cofactor: Tensor2,
    pub radial: ScalarField,
    last: Option<(f64, Tensor2, ScalarField)>,
}

impl TimeIntegrals {
    pub fn new(grid: Grid) -> Self {
        Self {
            cofactor: Tensor2::zeros(grid),
            radial: ScalarField::zeros(grid, Parity::Odd),
            last: None,
        }
    }

    /// Adds the interval from the previous state to `state`.
    pub fn accumulate(&mut self, state: &SimState) -> Result<(), EvolveError> {
        let geo = build_geometry(&state.map)?;
        let da = cofactor_rate(&geo.cofactor, &state.kin.vr, &state.kin.vz);
        let radius = state.map.radius();
        let dr = state.kin.vr.div(&(&radius * &radius));
        if let Some((t, da0, dr0)) = &self.last {
            let h = 0.5 * (state.t - t);
            let step = |acc: &ScalarField, a: &ScalarField, b: &ScalarField| {
                acc.zip_with(&(a + b), acc.parity(), |s, v| s + h * v)
            };
            self.cofactor = Tensor2 {
                c11: step(&self.cofactor.c11, &da0.c11, &da.c11),
                c12: step(&self.cofactor.c12, &da0.c12, &da.c12),
                c21: step(&self.cofactor.c21, &da0.c21, &da.c21),
                c22: step(&self.cofactor.c22, &da0.c22, &da.c22),
            };
            self.radial = step(&self.radial, dr0, &dr);
        }
        self.last = Some((state.t, da, dr));
        Ok(())
    }
}

/// Residual of the Eulerian divergence relation
/// `∂_r v^r + v^r/r + ∂_z v^z + (∫∂_t𝔞)_ij ∂_j ν_i − (∫∂_tR/R²) v^r`.
pub fn divergence_relation(state: &SimState, integrals: &TimeIntegrals) -> ScalarField {
    let (vr, vz) = (&state.kin.vr, &state.kin.vz);
    let dv = [[vr.d_r(), vr.d_z()], [vz.d_r(), vz.d_z()]];
    let vr_r = vr.div_r();
    let grid = *state.grid();
    let mut out = ScalarField::zeros(grid, Parity::Even);
    for k in 0..grid.len() {
        let mut s = dv[0][0].values()[k] + vr_r.values()[k] + dv[1][1].values()[k];
        for i in 0..2 {
            for j in 0..2 {
                s += integrals.cofactor.get(i, j).values()[k] * dv[i][j].values()[k];
            }
        }
        s -= integrals.radial.values()[k] * vr.values()[k];
        out.values_mut()[k] = s;
    }
    out
}

/// `∂_z v^r − ∂_r v^z`.
pub fn poloidal_curl(state: &SimState) -> ScalarField {
    &state.kin.vr.d_z() - &state.kin.vz.d_r()
}

/// Fills every field of a record for one state. `integrals` must have been
/// accumulated up to `state`.
pub fn residual_report(
    state: &SimState,
    integrals: &TimeIntegrals,
    b0: &MagneticSeed,
    norm_order: usize,
    psi: Option<f64>,
) -> Result<DiagnosticsRecord, EvolveError> {
    let geo = build_geometry(&state.map)?;
    let b = frozen_in(b0, &state.map);
    let monitor = assumption_monitor(&geo);
    Ok(DiagnosticsRecord {
        t: state.t,
        energy: energy_functional(state, b0, norm_order)?,
        c: state.vacuum.c,
        a: state.vacuum.latest_a(),
        div_v: weighted_norm(&divergence_relation(state, integrals), 0)?,
        piola: piola_max(&state.map)?.interior,
        curl_v: weighted_norm(&poloidal_curl(state), 0)?,
        frozen_div: lagrangian_div_residual(&b, &geo, &state.map).interior,
        max_a_dev: monitor.max_f_dev.max(monitor.max_a_dev),
        delta: b0.delta,
        psi,
    })
}

/// One record per node of a trajectory.
pub fn trajectory_records(
    traj: &IterateTrajectory,
    b0: &MagneticSeed,
    norm_order: usize,
    psi: Option<f64>,
) -> Result<Vec<DiagnosticsRecord>, EvolveError> {
    let Some(first) = traj.snapshots.first() else {
        return Ok(Vec::new());
    };
    let mut integrals = TimeIntegrals::new(*first.grid());
    let mut out = Vec::with_capacity(traj.snapshots.len());
    for s in &traj.snapshots {
        integrals.accumulate(s)?;
        out.push(residual_report(s, &integrals, b0, norm_order, psi)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorThresholds {
    /// `𝔈(0)`.
    pub m0: f64,
    pub energy_margin: f64,
    pub delta_min: f64,
}

/// Times at which each hypothesis was found violated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorFlags {
    pub energy: Vec<f64>,
    pub assumption: Vec<f64>,
    pub noncollinear: Vec<f64>,
}

impl MonitorFlags {
    pub fn any(&self) -> bool {
        !(self.energy.is_empty() && self.assumption.is_empty() && self.noncollinear.is_empty())
    }

    /// One line per raised flag, naming its first occurrence.
    pub fn describe(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(t) = self.energy.first() {
            out.push(format!("energy exceeded twice its initial value at t = {t}"));
        }
        if let Some(t) = self.assumption.first() {
            out.push(format!("deformation left the 1/8 neighbourhood of the identity at t = {t}"));
        }
        if let Some(t) = self.noncollinear.first() {
            out.push(format!("|b0^z| on the boundary fell below delta_min at t = {t}"));
        }
        out
    }
}

/// Flags `𝔈(t) > 2 M₀ (1 + margin)`, deviations above 1/8, and `δ < δ_min`.
pub fn wellposedness_monitor(records: &[DiagnosticsRecord], th: &MonitorThresholds) -> MonitorFlags {
    let mut flags = MonitorFlags::default();
    let energy_cap = 2.0 * th.m0 * (1.0 + th.energy_margin);
    for r in records {
        if r.energy > energy_cap {
            flags.energy.push(r.t);
        }
        if r.max_a_dev > ASSUMPTION_BOUND {
            flags.assumption.push(r.t);
        }
        if r.delta < th.delta_min {
            flags.noncollinear.push(r.t);
        }
    }
    flags
}
