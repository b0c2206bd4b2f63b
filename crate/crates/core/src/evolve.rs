//! Time integration of the two linearized subsystems and the outer Picard
//! iteration.
//!
//! Each iterate is a full trajectory on a uniform time grid. The next
//! iterate freezes its coefficients from the stored previous one, linearly
//! interpolated to the stage times of a two-stage explicit midpoint scheme.

use serde::{Deserialize, Serialize};

use crate::error::{EvolveError, GeometryError};
use crate::geometry::{build_geometry, cofactor_rate, lagrangian_gradient, FlowMapState, GeometryCache, Tensor2};
use crate::grid::{weighted_norm_sq, Grid, Parity, ScalarField};
use crate::magnetics::{advance_c, boundary_pressure, vacuum_a, MagneticSeed, VacuumState};
use crate::pressure::{assemble_system, body_force, solve_pressure_from};

/// Safety factor in the explicit stability bound.
pub const STABILITY_SAFETY: f64 = 0.4;

/// Velocity `(v^r, v^θ, v^z)` on the reference grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub vr: ScalarField,
    pub vth: ScalarField,
    pub vz: ScalarField,
}

impl Kinematics {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            vr: ScalarField::zeros(grid, Parity::Odd),
            vth: ScalarField::zeros(grid, Parity::Odd),
            vz: ScalarField::zeros(grid, Parity::Even),
        }
    }

    pub fn from_fn(
        grid: Grid,
        vr: impl Fn(f64, f64) -> f64,
        vth: impl Fn(f64, f64) -> f64,
        vz: impl Fn(f64, f64) -> f64,
    ) -> Self {
        Self {
            vr: ScalarField::from_fn(grid, Parity::Odd, vr),
            vth: ScalarField::from_fn(grid, Parity::Odd, vth),
            vz: ScalarField::from_fn(grid, Parity::Even, vz),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.vr.grid()
    }

    pub fn lerp(&self, other: &Self, w: f64) -> Self {
        let blend = |a: &ScalarField, b: &ScalarField| a.zip_with(b, a.parity(), |x, y| x + w * (y - x));
        Self {
            vr: blend(&self.vr, &other.vr),
            vth: blend(&self.vth, &other.vth),
            vz: blend(&self.vz, &other.vz),
        }
    }

    /// Nodewise maximum of `|v|`.
    pub fn sup_norm(&self) -> f64 {
        let (a, b, c) = (self.vr.values(), self.vth.values(), self.vz.values());
        (0..a.len()).fold(0.0_f64, |m, k| m.max((a[k] * a[k] + b[k] * b[k] + c[k] * c[k]).sqrt()))
    }
}

/// State tuple `(R, Z, Θ̂, v, q)` at one time, with the vacuum amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub map: FlowMapState,
    pub kin: Kinematics,
    pub q: ScalarField,
    /// Dirichlet datum the pressure was solved with.
    pub q_gamma: Vec<f64>,
    pub vacuum: VacuumState,
    pub t: f64,
}

impl SimState {
    /// Identity map, zero velocity and pressure.
    pub fn rest(grid: Grid, c0: f64, rs: f64) -> Self {
        Self {
            map: FlowMapState::identity(grid),
            kin: Kinematics::zeros(grid),
            q: ScalarField::zeros(grid, Parity::Even),
            q_gamma: vec![0.0; grid.nz],
            vacuum: VacuumState::new(c0, rs, 0.0),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.map.grid()
    }

    /// Solves for `q` against `frozen`, starting from the stored pressure.
    pub fn with_pressure(
        mut self,
        frozen: &FrozenCoefficients,
        b0: &MagneticSeed,
        rel_tol: f64,
    ) -> Result<Self, EvolveError> {
        let q_gamma = frozen.q_gamma()?;
        let sys = assemble_system(frozen, &self.map, &self.kin, b0, q_gamma.clone())?;
        self.q = solve_pressure_from(&sys, rel_tol, Some(&self.q))?.0;
        self.q_gamma = q_gamma;
        Ok(self)
    }
}

/// Coefficients frozen from the previous iterate at one time.
#[derive(Debug, Clone)]
pub struct FrozenCoefficients {
    pub map: FlowMapState,
    pub geometry: GeometryCache,
    pub kin: Kinematics,
    pub c: f64,
    /// `R̄`.
    pub radius: ScalarField,
    /// `(v̄^θ)² / R̄ − R̄ (b₀·∇Θ̄)²`.
    pub centrifugal: ScalarField,
    /// `∂_t 𝔞̄` along `v̄`.
    pub cofactor_rate: Tensor2,
    /// `b₀·∇R̄`.
    pub b_dot_radius: ScalarField,
    /// `b₀·∇Θ̄`.
    pub b_dot_angle: ScalarField,
}

impl FrozenCoefficients {
    pub fn new(map: FlowMapState, kin: Kinematics, c: f64, b0: &MagneticSeed) -> Result<Self, GeometryError> {
        let geometry = build_geometry(&map)?;
        let radius = map.radius();
        let b_dot_angle = b0.dot_grad_angle(&map);
        let b_dot_radius = b0.dot_grad_radius(&map);
        let swirl = (&kin.vth * &kin.vth).div(&radius);
        let hoop = &radius * &(&b_dot_angle * &b_dot_angle);
        let centrifugal = &swirl - &hoop;
        let cofactor_rate = cofactor_rate(&geometry.cofactor, &kin.vr, &kin.vz);
        Ok(Self {
            map,
            geometry,
            kin,
            c,
            radius,
            centrifugal,
            cofactor_rate,
            b_dot_radius,
            b_dot_angle,
        })
    }

    /// Interface pressure `C̄² / (2 R̄²)` on the frozen boundary.
    pub fn q_gamma(&self) -> Result<Vec<f64>, GeometryError> {
        boundary_pressure(self.c, &self.map.radius_trace())
    }
}

/// Frozen coefficients at the start, midpoint and end of one step.
#[derive(Debug, Clone)]
pub struct FrozenStep {
    pub start: FrozenCoefficients,
    pub mid: FrozenCoefficients,
    pub end: FrozenCoefficients,
}

impl FrozenStep {
    /// Time-independent coefficients.
    pub fn steady(f: FrozenCoefficients) -> Self {
        Self {
            start: f.clone(),
            mid: f.clone(),
            end: f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub dt: f64,
    pub eps: f64,
    pub rel_tol: f64,
}

/// Explicit stability bound
/// `0.4 min(h) / max(1, ‖b₀‖∞, ‖v‖∞)`, further limited by the parabolic
/// bound `0.4 min(h)² / (ε ‖b₀‖∞²)` when `ε > 0`.
pub fn stability_bound(grid: &Grid, b0: &MagneticSeed, kin: &Kinematics, eps: f64) -> f64 {
    let h = grid.h_min();
    let b = b0.sup_norm();
    let hyperbolic = STABILITY_SAFETY * h / 1.0_f64.max(b).max(kin.sup_norm());
    if eps > 0.0 && b > 0.0 {
        hyperbolic.min(STABILITY_SAFETY * h * h / (eps * b * b))
    } else {
        hyperbolic
    }
}

/// Uniform step `T / ⌈T / dt_max⌉` and the number of steps.
pub fn uniform_step(t_final: f64, dt_max: f64) -> (f64, usize) {
    let steps = (t_final / dt_max).ceil().max(1.0) as usize;
    (t_final / steps as f64, steps)
}

fn check_step(state: &SimState, b0: &MagneticSeed, p: &StepParams) -> Result<(), EvolveError> {
    let bound = stability_bound(state.grid(), b0, &state.kin, p.eps);
    if !(p.dt > 0.0) || p.dt > bound * (1.0 + 1e-12) {
        return Err(EvolveError::StepSize { dt: p.dt, bound });
    }
    Ok(())
}

struct Sub1Rates {
    r: ScalarField,
    z: ScalarField,
    vr: ScalarField,
    vz: ScalarField,
}

fn sub1_rates(
    map: &FlowMapState,
    kin: &Kinematics,
    q: &ScalarField,
    frozen: &FrozenCoefficients,
    b0: &MagneticSeed,
    eps: f64,
) -> Sub1Rates {
    let [f1, f2] = body_force(frozen, map, b0);
    let [g1, g2] = lagrangian_gradient(&frozen.geometry.cofactor, q);
    let (mut r, mut z) = (kin.vr.clone(), kin.vz.clone());
    if eps > 0.0 {
        r = r.axpy(eps, &b0.dot_grad(&b0.dot_grad_radius(map)));
        z = z.axpy(eps, &b0.dot_grad(&b0.dot_grad_axial(map)));
    }
    Sub1Rates {
        r,
        z,
        vr: &f1 - &g1,
        vz: &f2 - &g2,
    }
}

fn advance_sub1(state: &SimState, rates: &Sub1Rates, dt: f64) -> (FlowMapState, Kinematics) {
    let mut map = state.map.clone();
    map.r_disp = map.r_disp.axpy(dt, &rates.r);
    map.z_disp = map.z_disp.axpy(dt, &rates.z);
    map.t += dt;
    let mut kin = state.kin.clone();
    kin.vr = kin.vr.axpy(dt, &rates.vr);
    kin.vz = kin.vz.axpy(dt, &rates.vz);
    (map, kin)
}

fn solve_at(
    map: &FlowMapState,
    kin: &Kinematics,
    guess: &ScalarField,
    frozen: &FrozenCoefficients,
    b0: &MagneticSeed,
    rel_tol: f64,
) -> Result<(ScalarField, Vec<f64>), EvolveError> {
    let q_gamma = frozen.q_gamma()?;
    let sys = assemble_system(frozen, map, kin, b0, q_gamma.clone())?;
    let (q, _) = solve_pressure_from(&sys, rel_tol, Some(guess))?;
    Ok((q, q_gamma))
}

/// Advances `(ζ, ν)` by one midpoint step. Each stage solves the pressure
/// problem against the frozen coefficients; the returned state carries the
/// pressure re-solved at the end of the step.
pub fn step_sub1(
    state: &SimState,
    frozen: &FrozenStep,
    b0: &MagneticSeed,
    p: &StepParams,
) -> Result<SimState, EvolveError> {
    check_step(state, b0, p)?;
    let (q1, _) = solve_at(&state.map, &state.kin, &state.q, &frozen.start, b0, p.rel_tol)?;
    let k1 = sub1_rates(&state.map, &state.kin, &q1, &frozen.start, b0, p.eps);
    let (map_h, kin_h) = advance_sub1(state, &k1, 0.5 * p.dt);
    let (q2, _) = solve_at(&map_h, &kin_h, &q1, &frozen.mid, b0, p.rel_tol)?;
    let k2 = sub1_rates(&map_h, &kin_h, &q2, &frozen.mid, b0, p.eps);
    let (map, kin) = advance_sub1(state, &k2, p.dt);
    let (q, q_gamma) = solve_at(&map, &kin, &q2, &frozen.end, b0, p.rel_tol)?;
    Ok(SimState {
        map,
        kin,
        q,
        q_gamma,
        vacuum: state.vacuum.clone(),
        t: state.t + p.dt,
    })
}

fn sub2_rates(
    theta_hat: &ScalarField,
    vth: &ScalarField,
    radius: &ScalarField,
    frozen: &FrozenCoefficients,
    b0: &MagneticSeed,
) -> (ScalarField, ScalarField) {
    let angle = vth.div(radius);
    let b_theta = &b0.dot_grad(theta_hat) + &b0.b0th.div_r();
    let wave = b0.dot_grad(&(radius * &b_theta));
    let advect = (&frozen.kin.vth * &frozen.kin.vr).div(&frozen.radius);
    let shear = &frozen.b_dot_radius * &frozen.b_dot_angle;
    let accel = &(&wave - &advect) + &shear;
    (angle, accel)
}

/// Advances `(Θ̂, v^θ)` from `before` by one midpoint step. The radius `R`
/// is interpolated linearly between `before` and `after_sub1`, whose
/// poloidal fields are kept.
pub fn step_sub2(
    before: &SimState,
    after_sub1: &SimState,
    frozen: &FrozenStep,
    b0: &MagneticSeed,
    p: &StepParams,
) -> Result<SimState, EvolveError> {
    check_step(before, b0, p)?;
    let r0 = before.map.radius();
    let r_mid = r0.zip_with(&after_sub1.map.radius(), Parity::Odd, |a, b| 0.5 * (a + b));
    for radius in [&r0, &r_mid] {
        if let Some(k) = radius.values().iter().position(|&v| !(v > 0.0)) {
            let g = before.grid();
            return Err(GeometryError::NonPositiveRadius {
                i: k / g.nz,
                j: k % g.nz,
                value: radius.values()[k],
            }
            .into());
        }
    }
    let (th, vth) = (&before.map.theta_hat, &before.kin.vth);
    let (d_th1, d_v1) = sub2_rates(th, vth, &r0, &frozen.start, b0);
    let th_h = th.axpy(0.5 * p.dt, &d_th1);
    let vth_h = vth.axpy(0.5 * p.dt, &d_v1);
    let (d_th2, d_v2) = sub2_rates(&th_h, &vth_h, &r_mid, &frozen.mid, b0);
    let mut next = after_sub1.clone();
    next.map.theta_hat = th.axpy(p.dt, &d_th2);
    next.kin.vth = vth.axpy(p.dt, &d_v2);
    Ok(next)
}

/// One iterate: states at the uniform nodes `t_k = k dt`, `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrajectory {
    pub snapshots: Vec<SimState>,
    pub dt: f64,
}

impl IterateTrajectory {
    /// The startup iterate: rest at every node.
    pub fn rest(grid: Grid, steps: usize, dt: f64, c0: f64, rs: f64) -> Self {
        let snapshots = (0..=steps)
            .map(|k| {
                let mut s = SimState::rest(grid, c0, rs);
                s.t = k as f64 * dt;
                s.map.t = s.t;
                s
            })
            .collect();
        Self { snapshots, dt }
    }

    pub fn steps(&self) -> usize {
        self.snapshots.len().saturating_sub(1)
    }

    pub fn final_time(&self) -> f64 {
        self.snapshots.last().map(|s| s.t).unwrap_or(0.0)
    }

    /// Frozen coefficients at `t_k + w dt`, `w ∈ [0, 1]`.
    pub fn frozen_at(&self, k: usize, w: f64, b0: &MagneticSeed) -> Result<FrozenCoefficients, GeometryError> {
        let a = &self.snapshots[k];
        if w == 0.0 {
            return FrozenCoefficients::new(a.map.clone(), a.kin.clone(), a.vacuum.c, b0);
        }
        let b = &self.snapshots[k + 1];
        FrozenCoefficients::new(
            a.map.lerp(&b.map, w),
            a.kin.lerp(&b.kin, w),
            a.vacuum.c + w * (b.vacuum.c - a.vacuum.c),
            b0,
        )
    }
}

/// Parameters shared by every pass of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassParams {
    pub step: StepParams,
    pub steps: usize,
    pub c0: f64,
    pub rs: f64,
}

fn check_coverage(prev: &IterateTrajectory, p: &PassParams) -> Result<(), EvolveError> {
    if prev.snapshots.len() != p.steps + 1 {
        return Err(EvolveError::Coverage(format!(
            "{} snapshots for {} steps",
            prev.snapshots.len(),
            p.steps
        )));
    }
    for (k, s) in prev.snapshots.iter().enumerate() {
        let t = k as f64 * p.step.dt;
        if (s.t - t).abs() > 1e-9 * p.step.dt.max(t) {
            return Err(EvolveError::Coverage(format!("node {k} at t = {} instead of {t}", s.t)));
        }
    }
    Ok(())
}

/// Produces the next iterate from `initial` with coefficients frozen from
/// `prev`: sub1 then sub2 at every node, and the vacuum amplitude of the
/// new iterate accumulated from its own boundary motion.
pub fn run_linear_pass(
    prev: &IterateTrajectory,
    initial: &SimState,
    b0: &MagneticSeed,
    p: &PassParams,
) -> Result<IterateTrajectory, EvolveError> {
    check_coverage(prev, p)?;
    let dt = p.step.dt;
    let at_node = |node: usize, e: EvolveError| EvolveError::AtNode {
        node,
        t: node as f64 * dt,
        source: Box::new(e),
    };

    let mut start = prev.frozen_at(0, 0.0, b0).map_err(|e| at_node(0, e.into()))?;
    let mut state = SimState {
        t: 0.0,
        ..initial.clone()
    };
    state.map.t = 0.0;
    let a0 = vacuum_a(&state.kin, &state.map, p.rs).map_err(|e| at_node(0, e.into()))?;
    state.vacuum = VacuumState::new(p.c0, p.rs, a0);
    state = state
        .with_pressure(&start, b0, p.step.rel_tol)
        .map_err(|e| at_node(0, e))?;

    let mut snapshots = Vec::with_capacity(p.steps + 1);
    snapshots.push(state.clone());
    for n in 0..p.steps {
        let node = n + 1;
        let step = (|| -> Result<(SimState, FrozenCoefficients), EvolveError> {
            let window = FrozenStep {
                start,
                mid: prev.frozen_at(n, 0.5, b0)?,
                end: prev.frozen_at(n + 1, 0.0, b0)?,
            };
            let after1 = step_sub1(&state, &window, b0, &p.step)?;
            let mut next = step_sub2(&state, &after1, &window, b0, &p.step)?;
            next.t = node as f64 * dt;
            next.map.t = next.t;
            let a = vacuum_a(&next.kin, &next.map, p.rs)?;
            next.vacuum = advance_c(&state.vacuum, a, dt)?;
            Ok((next, window.end))
        })();
        let (next, end) = step.map_err(|e| at_node(node, e))?;
        snapshots.push(next.clone());
        state = next;
        start = end;
    }
    Ok(IterateTrajectory { snapshots, dt })
}

/// Norm orders used in the difference norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsiOrders {
    pub high: usize,
    pub low: usize,
}

impl Default for PsiOrders {
    fn default() -> Self {
        Self { high: 3, low: 2 }
    }
}

/// Difference norm between consecutive iterates: the supremum over time of
/// squared order-3 norms of `ν̃, ζ̃, b₀·∇ζ̃, ṽ^θ, R b₀·∇Θ̃` plus squared
/// order-2 norms of `𝔞̃` (lagged one iterate) and `Θ̃`.
pub fn psi_norm(
    next: &IterateTrajectory,
    current: &IterateTrajectory,
    previous: &IterateTrajectory,
    b0: &MagneticSeed,
    orders: PsiOrders,
) -> Result<f64, EvolveError> {
    let n = next.snapshots.len();
    if current.snapshots.len() != n || previous.snapshots.len() != n {
        return Err(EvolveError::Coverage("iterates differ in length".into()));
    }
    let mut sup = 0.0_f64;
    for k in 0..n {
        let (a, b, c) = (&next.snapshots[k], &current.snapshots[k], &previous.snapshots[k]);
        let dvr = &a.kin.vr - &b.kin.vr;
        let dvz = &a.kin.vz - &b.kin.vz;
        let dvth = &a.kin.vth - &b.kin.vth;
        let dr = &a.map.r_disp - &b.map.r_disp;
        let dz = &a.map.z_disp - &b.map.z_disp;
        let dth = &a.map.theta_hat - &b.map.theta_hat;
        let bdr = b0.dot_grad(&dr);
        let bdz = b0.dot_grad(&dz);
        let rbth = &a.map.radius() * &b0.dot_grad(&dth);
        let mut s = 0.0;
        for f in [&dvr, &dvz, &dr, &dz, &bdr, &bdz, &dvth, &rbth] {
            s += weighted_norm_sq(f, orders.high)?;
        }
        let ga = build_geometry(&b.map)?;
        let gb = build_geometry(&c.map)?;
        let da = ga.cofactor.zip(&gb.cofactor, |x, y| x - y);
        for f in da.components() {
            s += weighted_norm_sq(f, orders.low)?;
        }
        s += weighted_norm_sq(&dth, orders.low)?;
        sup = sup.max(s);
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardParams {
    pub pass: PassParams,
    pub n_max: usize,
    pub psi_tol: f64,
    pub orders: PsiOrders,
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub trajectory: IterateTrajectory,
    pub psi_history: Vec<f64>,
    pub converged: bool,
}

/// Iterates [`run_linear_pass`] from two rest iterates until the difference
/// norm drops below `psi_tol` or `n_max` passes have run. `observe` is called
/// with the pass number and its `Ψ`.
pub fn picard_iterate(
    initial: &SimState,
    b0: &MagneticSeed,
    p: &PicardParams,
    mut observe: impl FnMut(usize, f64),
) -> Result<PicardOutcome, EvolveError> {
    if p.n_max < 2 {
        return Err(EvolveError::BadIterationCount(p.n_max));
    }
    let grid = *initial.grid();
    let rest = IterateTrajectory::rest(grid, p.pass.steps, p.pass.step.dt, p.pass.c0, p.pass.rs);
    let mut previous = rest.clone();
    let mut current = rest;
    let mut psi_history = Vec::new();
    for n in 1..=p.n_max {
        let next = run_linear_pass(&current, initial, b0, &p.pass)?;
        let psi = psi_norm(&next, &current, &previous, b0, p.orders)?;
        psi_history.push(psi);
        observe(n, psi);
        if psi < p.psi_tol {
            return Ok(PicardOutcome {
                trajectory: next,
                psi_history,
                converged: true,
            });
        }
        if let [.., x, y, z] = psi_history[..] {
            if x <= y && y <= z {
                return Err(EvolveError::Divergence { psi_history });
            }
        }
        previous = std::mem::replace(&mut current, next);
    }
    Ok(PicardOutcome {
        trajectory: current,
        psi_history,
        converged: false,
    })
}
