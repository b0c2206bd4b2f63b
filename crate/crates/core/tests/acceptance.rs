//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.

use std::f64::consts::PI;
use std::fs;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use axmhd::diagnostics::{residual_report, wellposedness_monitor, MonitorThresholds, TimeIntegrals};
use axmhd::evolve::SimState;
use axmhd::geometry::{build_geometry, identity_dj_check, piola_max, Direction, FlowMapState};
use axmhd::grid::{Grid, Parity, ScalarField};
use axmhd::harness::{parse_config_with, run_simulation, simulate, RunSummary, SimConfig, Silent};
use axmhd::magnetics::{advance_c, MagneticSeed, VacuumState};
use axmhd::pressure::{pressure_tensor, solve_pressure, EllipticSystem};

fn verdict(n: u32, title: &str, ok: bool, detail: &str) {
    println!("criterion {n}: {} {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn config(n: usize, preset: &str, t: f64) -> SimConfig {
    let src = format!(
        r#"
[grid]
Nr = {n}
Nz = {n}
R0 = 1.0
Lz = 6.283185307179586
[wall]
RS = 2.718281828
[time]
T = {t}
cfl_safety = 0.4
[physics]
C0 = 1.0
[initial]
preset = "{preset}"
[iteration]
n_max = 12
psi_tol = 1e-8
"#
    );
    parse_config_with(&src, &[]).expect("acceptance config parses")
}

fn square(n: usize) -> Grid {
    Grid::new(n, n, 1.0, 2.0 * PI).unwrap()
}

fn log2_ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Residuals at the round-off floor count as exact; otherwise each
/// refinement must gain at least order 1.9.
fn converges_at_second_order(v: &[f64]) -> bool {
    v.iter().all(|&e| e <= 1e-10) || log2_ratios(v).iter().all(|&p| p >= 1.9)
}

#[test]
fn criterion_01_geometry_identities() {
    let start = Instant::now();
    let grids = [32, 64, 128];
    let mut piola = Vec::new();
    let mut dj = Vec::new();
    for n in grids {
        let m = FlowMapState::from_displacements(square(n), |_, _| 0.0, |r, _| 0.1 * r.sin());
        piola.push(piola_max(&m).unwrap().interior);
        let r = identity_dj_check(&m, Direction::R).unwrap().interior;
        let z = identity_dj_check(&m, Direction::Z).unwrap().interior;
        dj.push(r.max(z));
    }
    let elapsed = start.elapsed();
    let ok = converges_at_second_order(&piola) && converges_at_second_order(&dj) && elapsed < Duration::from_secs(10);
    verdict(
        1,
        "geometry identities on the shear map",
        ok,
        &format!("piola {piola:?}, dJ {dj:?}, {elapsed:?}"),
    );
}

fn r_squared_error(n: usize) -> f64 {
    let g = square(n);
    let sys = EllipticSystem::laplacian(ScalarField::constant(g, 4.0), vec![1.0; n]).unwrap();
    let q = solve_pressure(&sys, 1e-12).unwrap();
    let exact = ScalarField::from_fn(g, Parity::Even, |r, _| r * r);
    (&q - &exact).max_abs()
}

/// `Q(R, Z) = R² (1 + cos(Z)/5)` pulled back through
/// `R = r(1 + cos(z)/20)`, `Z = z + sin(z) cos(r)/20`. The forcing is the
/// Jacobian times the cylindrical Laplacian of `Q`.
fn wavy_error(n: usize) -> f64 {
    let g = square(n);
    let w = 0.05;
    let big_r = move |r: f64, z: f64| r * (1.0 + w * z.cos());
    let big_z = move |r: f64, z: f64| z + w * z.sin() * r.cos();
    let jac = move |r: f64, z: f64| {
        (1.0 + w * z.cos()) * (1.0 + w * z.cos() * r.cos()) - (w * r * z.sin()) * (w * z.sin() * r.sin())
    };
    let q = move |r: f64, z: f64| {
        let (rr, zz) = (big_r(r, z), big_z(r, z));
        rr * rr * (1.0 + 0.2 * zz.cos())
    };
    let lap = move |r: f64, z: f64| {
        let (rr, zz) = (big_r(r, z), big_z(r, z));
        4.0 * (1.0 + 0.2 * zz.cos()) - 0.2 * rr * rr * zz.cos()
    };
    let m = FlowMapState::from_maps(g, big_r, big_z);
    let geo = build_geometry(&m).unwrap();
    let sys = EllipticSystem::from_parts(
        m.radius(),
        pressure_tensor(&geo.cofactor, &geo.jacobian),
        ScalarField::from_fn(g, Parity::Even, |r, z| jac(r, z) * lap(r, z)),
        (0..n).map(|j| q(1.0, g.z(j))).collect(),
    )
    .unwrap();
    let sol = solve_pressure(&sys, 1e-12).unwrap();
    (&sol - &ScalarField::from_fn(g, Parity::Even, q)).max_abs()
}

#[test]
fn criterion_02_elliptic_mms() {
    let start = Instant::now();
    let grids = [32, 64, 128];
    let e1: Vec<f64> = grids.iter().map(|&n| r_squared_error(n)).collect();
    let e2: Vec<f64> = grids.iter().map(|&n| wavy_error(n)).collect();
    let (p1, p2) = (log2_ratios(&e1), log2_ratios(&e2));
    let elapsed = start.elapsed();
    let ok = e1[1] <= 5e-3
        && p1.iter().all(|&p| p >= 1.9)
        && p2.iter().all(|&p| p >= 1.9)
        && elapsed < Duration::from_secs(30);
    verdict(
        2,
        "elliptic manufactured solutions",
        ok,
        &format!("r^2 errors {e1:?} orders {p1:?}; mapped errors {e2:?} orders {p2:?}; {elapsed:?}"),
    );
}

fn timed_simulate(cfg: &SimConfig) -> (RunSummary, Duration) {
    let start = Instant::now();
    let s = simulate(cfg, &mut Silent).expect("simulation runs");
    (s, start.elapsed())
}

#[test]
fn criterion_03_screw_pinch_equilibrium() {
    let (s, elapsed) = timed_simulate(&config(64, "screw_pinch(0.5, 0.5)", 0.25));
    let v = s.trajectory.snapshots.iter().map(|x| x.kin.sup_norm()).fold(0.0, f64::max);
    let dr = s.trajectory.snapshots.iter().map(|x| x.map.r_disp.max_abs()).fold(0.0, f64::max);
    let e0 = s.records[0].energy;
    let e_max = s.records.iter().map(|r| r.energy).fold(0.0, f64::max);
    let ok = s.converged && v <= 1e-2 && dr <= 1e-2 && e_max <= e0 * 1.05 && elapsed < Duration::from_secs(300);
    verdict(
        3,
        "screw pinch stays in equilibrium",
        ok,
        &format!("max|v| {v:.3e}, max|R-r| {dr:.3e}, E(0) {e0:.6e}, max E {e_max:.6e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_04_rigid_rotation() {
    let omega = 1.0;
    let (s, elapsed) = timed_simulate(&config(64, "rigid_rotation(1.0)", 0.25));
    let g = square(64);
    let mut swirl_err: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for x in &s.trajectory.snapshots {
        for i in 0..g.nr {
            for j in 0..g.nz {
                swirl_err = swirl_err.max((x.kin.vth.at(i, j) - omega * g.r(i)).abs());
            }
        }
        spread = spread.max(x.map.theta_hat.max() - x.map.theta_hat.min());
    }
    let ok = s.converged && swirl_err <= 1e-2 && spread <= 1e-3 && elapsed < Duration::from_secs(300);
    verdict(
        4,
        "rigid rotation is preserved",
        ok,
        &format!("max|v^theta - omega r| {swirl_err:.3e}, Theta_hat spread {spread:.3e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_05_vacuum_law() {
    let start = Instant::now();
    let dt = 1e-3;
    let mut vs = VacuumState::new(1.0, 2.0, 0.0);
    for k in 1..=1000 {
        vs = advance_c(&vs, k as f64 * dt, dt).unwrap();
    }
    // C(1) = C(0) exp(∫₀¹ τ dτ)
    let exact = 0.5_f64.exp();
    let err = (vs.c - exact).abs();
    let elapsed = start.elapsed();
    let ok = err <= 1e-6 && (vs.time() - 1.0).abs() < 1e-9 && elapsed < Duration::from_secs(1);
    verdict(5, "vacuum amplitude law", ok, &format!("C(1) = {:.12}, error {err:.3e}, {elapsed:?}", vs.c));
}

fn perturbed(n: usize) -> &'static (RunSummary, Duration) {
    static RUNS: [OnceLock<(RunSummary, Duration)>; 2] = [OnceLock::new(), OnceLock::new()];
    let slot = if n == 32 { &RUNS[0] } else { &RUNS[1] };
    slot.get_or_init(|| timed_simulate(&config(n, "perturbed_pinch(0.5, 0.5, 0.01)", 0.05)))
}

#[test]
fn criterion_06_picard_contraction() {
    let (s, elapsed) = perturbed(64);
    let psi = &s.psi_history;
    // ratios Ψ⁽ⁿ⁺¹⁾/Ψ⁽ⁿ⁾ for n ≥ 2
    let ratios: Vec<f64> = psi.windows(2).skip(1).map(|w| w[1] / w[0]).collect();
    let ok = s.converged
        && psi.len() <= 12
        && *psi.last().unwrap() < 1e-8
        && ratios.iter().all(|&q| q <= 0.5)
        && *elapsed < Duration::from_secs(600);
    verdict(
        6,
        "Picard contraction",
        ok,
        &format!("psi {psi:?}, ratios {ratios:?}, {elapsed:?}"),
    );
}

#[test]
fn criterion_07_frozen_in_consistency() {
    let mut maxima = Vec::new();
    let mut within = true;
    for n in [32, 64] {
        let (s, _) = perturbed(n);
        assert!(s.converged);
        let h = square(n).h_max();
        let worst = s.records.iter().map(|r| r.frozen_div).fold(0.0, f64::max);
        within &= s.records.iter().all(|r| r.frozen_div <= 10.0 * h * h);
        maxima.push(worst);
    }
    let ratio = maxima[0] / maxima[1];
    let ok = within && (3.5..=4.5).contains(&ratio);
    verdict(
        7,
        "frozen-in divergence",
        ok,
        &format!("max residual {maxima:?}, ratio {ratio:.3}"),
    );
}

#[test]
fn criterion_08_divergence_relation() {
    let mut constants = Vec::new();
    for n in [32, 64] {
        let (s, _) = perturbed(n);
        assert!(s.converged);
        let h = square(n).h_max();
        let dt = s.trajectory.dt;
        let c = s
            .records
            .iter()
            .map(|r| r.div_v / (h * h + dt * dt))
            .fold(0.0, f64::max);
        constants.push(c);
    }
    let drift = constants[1] / constants[0];
    let ok = constants.iter().all(|&c| c <= 10.0) && (0.5..=1.5).contains(&drift);
    verdict(
        8,
        "divergence-relation residual",
        ok,
        &format!("C {constants:?}, C64/C32 {drift:.3}"),
    );
}

#[test]
fn criterion_09_monitors() {
    // Seed with b0^z = 0 on the boundary.
    let s = simulate(&config(16, "screw_pinch(0.5, 0.0)", 0.02), &mut Silent).unwrap();
    let startup = !s.seed.noncollinear_ok && s.flags.noncollinear.first() == Some(&0.0);

    // Injected map (2r, z): |F - I| = 1 > 1/8.
    let g = square(16);
    let mut state = SimState::rest(g, 1.0, 3.0);
    state.map = FlowMapState::from_maps(g, |r, _| 2.0 * r, |_, z| z);
    let b0 = MagneticSeed::screw_pinch(g, 0.5, 0.5);
    let rec = residual_report(&state, &TimeIntegrals::new(g), &b0, 2, None).unwrap();
    let th = MonitorThresholds {
        m0: rec.energy,
        energy_margin: 0.0,
        delta_min: 1e-6,
    };
    let flags = wellposedness_monitor(&[rec], &th);
    let assumption = flags.assumption == vec![0.0] && flags.noncollinear.is_empty();
    verdict(
        9,
        "well-posedness monitors",
        startup && assumption,
        &format!("non-collinearity at startup {startup}, assumption flag {assumption}"),
    );
}

#[test]
fn criterion_10_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for dir in [&a, &b] {
        let mut cfg = config(32, "perturbed_pinch(0.5, 0.5, 0.01)", 0.05);
        cfg.output.directory = dir.path().to_path_buf();
        cfg.output.snapshot_every = 1;
        let s = run_simulation(&cfg, &mut Silent).unwrap();
        files.push(s.files);
    }
    let mut identical = files[0].len() == files[1].len() && !files[0].is_empty();
    for (x, y) in files[0].iter().zip(&files[1]) {
        identical &= x.file_name() == y.file_name() && fs::read(x).unwrap() == fs::read(y).unwrap();
    }
    verdict(
        10,
        "byte-identical reruns",
        identical,
        &format!("{} files compared", files[0].len()),
    );
}
