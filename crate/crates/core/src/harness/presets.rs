//! Initial data for the configured preset and the time grid it runs on.

use std::f64::consts::PI;

use crate::error::{ConfigError, HarnessError};
use crate::evolve::{stability_bound, uniform_step, Kinematics, SimState, STABILITY_SAFETY};
use crate::geometry::FlowMapState;
use crate::grid::{Grid, Parity, ScalarField};
use crate::harness::config::{Preset, SimConfig, TimeStep};
use crate::magnetics::{boundary_pressure, vacuum_a, validate_seed, MagneticSeed, SeedReport, VacuumState};

#[derive(Debug, Clone)]
pub struct InitialData {
    pub state: SimState,
    pub b0: MagneticSeed,
    pub seed: SeedReport,
    pub dt: f64,
    pub steps: usize,
}

/// `C₀²/(2R0²) + (c₀²/2)(R0² − r²)`, the pressure balancing the pinch force.
pub fn screw_pinch_pressure(grid: Grid, cc: f64, c0: f64) -> ScalarField {
    let r0 = grid.r0;
    ScalarField::from_fn(grid, Parity::Even, |r, _| {
        0.5 * cc * cc / (r0 * r0) + 0.5 * c0 * c0 * (r0 * r0 - r * r)
    })
}

/// `C₀²/(2R0²) − (ω²/2)(R0² − r²)`, so that `∂_r q = ω² r`.
pub fn rigid_rotation_pressure(grid: Grid, cc: f64, omega: f64) -> ScalarField {
    let r0 = grid.r0;
    ScalarField::from_fn(grid, Parity::Even, |r, _| {
        0.5 * cc * cc / (r0 * r0) - 0.5 * omega * omega * (r0 * r0 - r * r)
    })
}

/// Divergence-free poloidal perturbation `(−(a k/2) r cos kz, 0, a sin kz)`
/// with `k = 2π/Lz`.
pub fn perturbation(grid: Grid, amp: f64) -> Kinematics {
    let k = 2.0 * PI / grid.lz;
    Kinematics::from_fn(
        grid,
        |r, z| -0.5 * amp * k * r * (k * z).cos(),
        |_, _| 0.0,
        |_, z| amp * (k * z).sin(),
    )
}

/// Preset fields and seed for a validated config, without the seed checks.
pub fn preset_fields(cfg: &SimConfig) -> Result<(SimState, MagneticSeed), HarnessError> {
    let g = cfg.grid;
    let mut state = SimState::rest(g, cfg.c0, cfg.rs);
    let b0 = match cfg.preset {
        Preset::Rest => {
            state.q = ScalarField::constant(g, 0.5 * cfg.c0 * cfg.c0 / (g.r0 * g.r0));
            MagneticSeed::zero(g)
        }
        Preset::ScrewPinch { c0, c1 } => {
            state.q = screw_pinch_pressure(g, cfg.c0, c0);
            MagneticSeed::screw_pinch(g, c0, c1)
        }
        Preset::RigidRotation { omega } => {
            state.q = rigid_rotation_pressure(g, cfg.c0, omega);
            state.kin.vth = ScalarField::from_fn(g, Parity::Odd, |r, _| omega * r);
            MagneticSeed::zero(g)
        }
        Preset::PerturbedPinch { c0, c1, amp } => {
            state.q = screw_pinch_pressure(g, cfg.c0, c0);
            state.kin = perturbation(g, amp);
            MagneticSeed::screw_pinch(g, c0, c1)
        }
        Preset::Mms { .. } => {
            return Err(ConfigError::new(
                "initial.preset",
                "manufactured-solution cases are run by the `mms` subcommand",
            )
            .into())
        }
    };
    state.map = FlowMapState::identity(g);
    state.q_gamma = boundary_pressure(cfg.c0, &state.map.radius_trace())?;
    let a0 = vacuum_a(&state.kin, &state.map, cfg.rs)?;
    state.vacuum = VacuumState::new(cfg.c0, cfg.rs, a0);
    Ok((state, b0))
}

/// Builds the preset, validates its seed and fixes the uniform time grid.
/// Non-collinearity below `delta_min` is reported in the seed report and
/// left to the monitor.
pub fn build_initial_state(cfg: &SimConfig) -> Result<InitialData, HarnessError> {
    let (state, b0) = preset_fields(cfg)?;
    let seed = validate_seed(&b0, cfg.delta_min);
    if !(seed.divergence_ok && seed.boundary_ok) && !cfg.allow_inadmissible {
        return Err(HarnessError::Startup(format!(
            "magnetic seed is inadmissible: div residual {:e}, boundary b0^r {:e}, tolerance {:e}",
            seed.div_residual, seed.boundary_br, seed.tolerance
        )));
    }
    let dt_max = match cfg.step {
        TimeStep::Dt(dt) => dt,
        TimeStep::CflSafety(c) => c / STABILITY_SAFETY * stability_bound(&cfg.grid, &b0, &state.kin, cfg.eps),
    };
    let (dt, steps) = uniform_step(cfg.t_final, dt_max);
    Ok(InitialData {
        state,
        b0,
        seed,
        dt,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config_with;

    const BASE: &str = r#"
[grid]
Nr = 16
Nz = 16
R0 = 1.0
Lz = 6.283185307179586
[wall]
RS = 2.0
[time]
T = 0.1
[physics]
C0 = 1.0
[initial]
preset = "rest"
"#;

    fn cfg(preset: &str) -> SimConfig {
        parse_config_with(BASE, &[format!("initial.preset=\"{preset}\"")]).unwrap()
    }

    #[test]
    fn every_preset_passes_seed_validation() {
        for p in ["rest", "screw_pinch(0.5,0.5)", "rigid_rotation(1.0)", "perturbed_pinch(0.5,0.5,0.01)"] {
            let init = build_initial_state(&cfg(p)).unwrap();
            assert!(init.seed.divergence_ok && init.seed.boundary_ok, "{p}");
        }
    }

    #[test]
    fn pressures_match_the_boundary_datum() {
        for p in ["rest", "screw_pinch(0.5,0.5)", "rigid_rotation(1.0)"] {
            let init = build_initial_state(&cfg(p)).unwrap();
            let g = init.state.grid();
            let trace = init.state.q.boundary_trace();
            for j in 0..g.nz {
                assert!((trace[j] - init.state.q_gamma[j]).abs() < 1e-12, "{p}");
            }
        }
    }

    #[test]
    fn rigid_rotation_balance() {
        let init = build_initial_state(&cfg("rigid_rotation(1.0)")).unwrap();
        let dq = init.state.q.d_r();
        let g = *init.state.grid();
        for i in g.interior_rows() {
            assert!((dq.at(i, 3) - g.r(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_is_solenoidal() {
        let g = Grid::new(32, 32, 1.0, 2.0 * PI).unwrap();
        let k = perturbation(g, 0.01);
        let div = &(&k.vr.d_r() + &k.vr.div_r()) + &k.vz.d_z();
        assert!(div.max_abs_split().interior < 1e-4);
    }

    #[test]
    fn mms_and_pinch_without_axial_field() {
        let e = build_initial_state(&cfg("mms(1)")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let init = build_initial_state(&cfg("screw_pinch(0.5,0)")).unwrap();
        assert!(!init.seed.noncollinear_ok);
    }

    #[test]
    fn step_divides_final_time() {
        let init = build_initial_state(&cfg("screw_pinch(0.5,0.5)")).unwrap();
        assert!((init.dt * init.steps as f64 - 0.1).abs() < 1e-15);
        let g = init.state.grid();
        assert!(init.dt <= 0.4 * g.h_min() * (1.0 + 1e-12));
    }
}
