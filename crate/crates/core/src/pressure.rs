//! Variable-coefficient elliptic pressure problem
//! `(1/R̄) ∂_i (R̄ Ē_ij ∂_j q) = g` with Dirichlet data on `r = R0`.
//!
//! The operator is discretized as the Hessian of a discrete energy
//! `½ Σ K_ij ∂_i q ∂_j q` with `K = R̄ Ē`. Radial and axial differences live
//! on cell faces, the mixed term on cell corners, and every coefficient is an
//! arithmetic average of nodal values. The boundary face sits half a cell
//! outside the last radial node. The axis face carries no flux because `R̄`
//! vanishes there, so no condition is imposed at `r = 0`.

use crate::error::PressureError;
use crate::evolve::{FrozenCoefficients, Kinematics};
use crate::geometry::{lagrangian_divergence, FlowMapState, Tensor2};
use crate::grid::{Grid, Parity, ScalarField};
use crate::magnetics::MagneticSeed;

pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Maximum number of CG iterations for a grid: `20 √(Nr Nz)`.
pub fn iteration_cap(grid: &Grid) -> usize {
    (20.0 * (grid.len() as f64).sqrt()).ceil() as usize
}

/// Assembled pressure problem.
#[derive(Debug, Clone)]
pub struct EllipticSystem {
    grid: Grid,
    /// Nodal `Ē11, Ē12, Ē22`.
    pub coeff: [ScalarField; 3],
    /// The frozen radial map `R̄`.
    pub weight: ScalarField,
    pub rhs: ScalarField,
    pub bc: Vec<f64>,
    stencil: Vec<[f64; 9]>,
    boundary_load: Vec<f64>,
    mass: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Var {
    Node(usize),
    Wall(usize),
}

struct Assembler<'a> {
    grid: Grid,
    bc: &'a [f64],
    stencil: Vec<[f64; 9]>,
    load: Vec<f64>,
}

impl Assembler<'_> {
    fn slot(&self, k: usize, m: usize) -> usize {
        let g = &self.grid;
        let (ik, jk) = (k / g.nz, k % g.nz);
        let (im, jm) = (m / g.nz, m % g.nz);
        let di = im as isize - ik as isize;
        let dj = if jm == jk {
            0
        } else if jm == g.jp(jk) {
            1
        } else {
            debug_assert_eq!(jm, g.jm(jk));
            -1
        };
        ((di + 1) * 3 + (dj + 1)) as usize
    }

    /// Adds `w (l1·x)(l2·x) / 2`, symmetrized, to the discrete energy.
    fn add(&mut self, w: f64, l1: &[(Var, f64)], l2: &[(Var, f64)]) {
        let wall = |l: &[(Var, f64)]| -> f64 {
            l.iter()
                .map(|&(v, c)| match v {
                    Var::Wall(j) => c * self.bc[j],
                    Var::Node(_) => 0.0,
                })
                .sum()
        };
        let (s1, s2) = (wall(l1), wall(l2));
        for (x, y, s) in [(l1, l2, s2), (l2, l1, s1)] {
            for &(vk, ak) in x {
                let Var::Node(k) = vk else { continue };
                for &(vm, am) in y {
                    if let Var::Node(m) = vm {
                        let slot = self.slot(k, m);
                        self.stencil[k][slot] += 0.5 * w * ak * am;
                    }
                }
                self.load[k] -= 0.5 * w * ak * s;
            }
        }
    }
}

impl EllipticSystem {
    /// Builds the system from the frozen radius `R̄`, the nodal tensor
    /// `Ē = (Ē11, Ē12, Ē22)`, the source `g` and the boundary trace.
    pub fn from_parts(
        weight: ScalarField,
        coeff: [ScalarField; 3],
        rhs: ScalarField,
        bc: Vec<f64>,
    ) -> Result<Self, PressureError> {
        let g = *weight.grid();
        if bc.len() != g.nz {
            return Err(PressureError::BoundaryLength {
                expected: g.nz,
                got: bc.len(),
            });
        }
        for k in 0..g.len() {
            let (e11, e12, e22) = (coeff[0].values()[k], coeff[1].values()[k], coeff[2].values()[k]);
            let radius = weight.values()[k];
            let det = e11 * e22 - e12 * e12;
            if !(e11 > 0.0 && det > 0.0 && radius > 0.0) {
                return Err(PressureError::NotPositive {
                    i: k / g.nz,
                    j: k % g.nz,
                    detail: format!("E11 = {e11:e}, det E = {det:e}, R = {radius:e}"),
                });
            }
        }
        let k11 = &weight * &coeff[0];
        let k12 = &weight * &coeff[1];
        let k22 = &weight * &coeff[2];
        let (stencil, boundary_load) = assemble(&g, &k11, &k12, &k22, &bc);
        let mass = weight.values().iter().map(|r| r * g.hr() * g.hz()).collect();
        Ok(Self {
            grid: g,
            coeff,
            weight,
            rhs,
            bc,
            stencil,
            boundary_load,
            mass,
        })
    }

    /// Cylindrical Laplacian `(1/r) ∂_r (r ∂_r q) + ∂_z² q` (identity frozen map).
    pub fn laplacian(rhs: ScalarField, bc: Vec<f64>) -> Result<Self, PressureError> {
        let g = *rhs.grid();
        Self::from_parts(
            ScalarField::radius(g),
            [
                ScalarField::constant(g, 1.0),
                ScalarField::zeros(g, Parity::Odd),
                ScalarField::constant(g, 1.0),
            ],
            rhs,
            bc,
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn matvec(&self, q: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        for i in 0..g.nr {
            for j in 0..g.nz {
                let k = g.idx(i, j);
                let row = &self.stencil[k];
                let cols = [g.jm(j), j, g.jp(j)];
                let mut s = 0.0;
                for di in 0..3 {
                    let ii = i as isize + di as isize - 1;
                    if ii < 0 || ii >= g.nr as isize {
                        continue;
                    }
                    let base = ii as usize * g.nz;
                    for (dj, &jj) in cols.iter().enumerate() {
                        s += row[di * 3 + dj] * q[base + jj];
                    }
                }
                out[k] = s;
            }
        }
    }

    /// The positive operator `−(1/R̄) ∂_i (R̄ Ē_ij ∂_j q)` with zero
    /// Dirichlet data.
    pub fn apply(&self, q: &ScalarField) -> ScalarField {
        let mut out = vec![0.0; self.grid.len()];
        self.matvec(q.values(), &mut out);
        for (o, m) in out.iter_mut().zip(&self.mass) {
            *o /= m;
        }
        ScalarField::from_values(self.grid, Parity::Even, out).expect("length matches grid")
    }

    /// `(1/R̄) ∂_i (R̄ Ē_ij ∂_j q)` with the system's Dirichlet data.
    pub fn evaluate(&self, q: &ScalarField) -> ScalarField {
        let mut out = vec![0.0; self.grid.len()];
        self.matvec(q.values(), &mut out);
        for k in 0..out.len() {
            out[k] = (self.boundary_load[k] - out[k]) / self.mass[k];
        }
        ScalarField::from_values(self.grid, Parity::Even, out).expect("length matches grid")
    }

    /// Inner product `Σ R̄ f g h_r h_z` under which [`Self::apply`] is symmetric.
    pub fn inner(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        f.values()
            .iter()
            .zip(g.values())
            .zip(&self.mass)
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    fn load(&self) -> Vec<f64> {
        self.boundary_load
            .iter()
            .zip(self.rhs.values())
            .zip(&self.mass)
            .map(|((b, g), m)| b - m * g)
            .collect()
    }

    fn residual_norm(&self, r: &[f64]) -> f64 {
        r.iter().zip(&self.mass).map(|(v, m)| v * v / m).sum::<f64>().sqrt()
    }
}

fn assemble(
    g: &Grid,
    k11: &ScalarField,
    k12: &ScalarField,
    k22: &ScalarField,
    bc: &[f64],
) -> (Vec<[f64; 9]>, Vec<f64>) {
    let (nr, nz, hr, hz) = (g.nr, g.nz, g.hr(), g.hz());
    let mut a = Assembler {
        grid: *g,
        bc,
        stencil: vec![[0.0; 9]; g.len()],
        load: vec![0.0; g.len()],
    };
    let node = |i: usize, j: usize| Var::Node(g.idx(i, j));
    let k11_wall = k11.boundary_trace();
    let k12_wall = k12.boundary_trace();
    let last = nr - 1;

    for i in 0..nr {
        for j in 0..nz {
            let jp = g.jp(j);
            // axial face between (i, j) and (i, j+1)
            let kf = 0.5 * (k22.at(i, j) + k22.at(i, jp));
            let dz = [(node(i, jp), 1.0 / hz), (node(i, j), -1.0 / hz)];
            a.add(hr * hz * kf, &dz, &dz);

            if i + 1 < nr {
                // radial face at r = (i + 1) h_r
                let kf = 0.5 * (k11.at(i, j) + k11.at(i + 1, j));
                let dr = [(node(i + 1, j), 1.0 / hr), (node(i, j), -1.0 / hr)];
                a.add(hr * hz * kf, &dr, &dr);

                // corner at (r, z) = ((i + 1) h_r, (j + 1/2) h_z)
                let kc = 0.25 * (k12.at(i, j) + k12.at(i + 1, j) + k12.at(i, jp) + k12.at(i + 1, jp));
                let (cr, cz) = (0.5 / hr, 0.5 / hz);
                let dr = [
                    (node(i + 1, j), cr),
                    (node(i, j), -cr),
                    (node(i + 1, jp), cr),
                    (node(i, jp), -cr),
                ];
                let dz = [
                    (node(i, jp), cz),
                    (node(i, j), -cz),
                    (node(i + 1, jp), cz),
                    (node(i + 1, j), -cz),
                ];
                a.add(2.0 * kc * hr * hz, &dr, &dz);
            }
        }
    }

    // half cell between the last node and the wall
    let hw = 0.5 * hr;
    for j in 0..nz {
        let jp = g.jp(j);
        let dr = [(Var::Wall(j), 1.0 / hw), (node(last, j), -1.0 / hw)];
        a.add(hw * hz * k11_wall[j], &dr, &dr);

        let kc = 0.5 * (k12_wall[j] + k12_wall[jp]);
        let cr = 0.5 / hw;
        let dr = [
            (Var::Wall(j), cr),
            (node(last, j), -cr),
            (Var::Wall(jp), cr),
            (node(last, jp), -cr),
        ];
        let dz = [(Var::Wall(jp), 1.0 / hz), (Var::Wall(j), -1.0 / hz)];
        a.add(2.0 * kc * hw * hz, &dr, &dz);
    }
    (a.stencil, a.load)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Solves the system by Jacobi-preconditioned conjugate gradients starting
/// from the mean of the Dirichlet data.
pub fn solve_pressure(sys: &EllipticSystem, rel_tol: f64) -> Result<ScalarField, PressureError> {
    solve_pressure_from(sys, rel_tol, None).map(|(q, _)| q)
}

/// As [`solve_pressure`], with an optional initial guess.
pub fn solve_pressure_from(
    sys: &EllipticSystem,
    rel_tol: f64,
    guess: Option<&ScalarField>,
) -> Result<(ScalarField, SolveStats), PressureError> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(PressureError::BadTolerance(rel_tol));
    }
    let g = sys.grid;
    let n = g.len();
    let b = sys.load();
    let b_norm = sys.residual_norm(&b);
    let mut x = match guess {
        Some(q) => q.values().to_vec(),
        None => {
            let mean = sys.bc.iter().sum::<f64>() / sys.bc.len() as f64;
            vec![mean; n]
        }
    };
    let field = |v: Vec<f64>| ScalarField::from_values(g, Parity::Even, v).expect("length matches grid");
    if b_norm == 0.0 {
        return Ok((
            field(vec![0.0; n]),
            SolveStats {
                iterations: 0,
                rel_residual: 0.0,
            },
        ));
    }

    let diag: Vec<f64> = sys.stencil.iter().map(|row| row[4]).collect();
    let mut ax = vec![0.0; n];
    sys.matvec(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut rel = sys.residual_norm(&r) / b_norm;
    let mut history = vec![rel];
    let cap = iteration_cap(&g);
    if rel <= rel_tol {
        return Ok((field(x), SolveStats { iterations: 0, rel_residual: rel }));
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 1..=cap {
        sys.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(PressureError::Breakdown(pap));
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rel = sys.residual_norm(&r) / b_norm;
        history.push(rel);
        if rel <= rel_tol {
            return Ok((field(x), SolveStats { iterations: it, rel_residual: rel }));
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(PressureError::NoConvergence {
        rel_tol,
        iterations: cap,
        last: rel,
        history,
    })
}

/// `Ē_ij = J̄ 𝔞̄_ℓi 𝔞̄_ℓj` as `(Ē11, Ē12, Ē22)`.
pub fn pressure_tensor(a: &Tensor2, jacobian: &ScalarField) -> [ScalarField; 3] {
    let grid = *jacobian.grid();
    let mut e = [
        ScalarField::zeros(grid, Parity::Even),
        ScalarField::zeros(grid, Parity::Odd),
        ScalarField::zeros(grid, Parity::Even),
    ];
    for k in 0..grid.len() {
        let (a11, a12, a21, a22) = (
            a.c11.values()[k],
            a.c12.values()[k],
            a.c21.values()[k],
            a.c22.values()[k],
        );
        let j = jacobian.values()[k];
        e[0].values_mut()[k] = j * (a11 * a11 + a21 * a21);
        e[1].values_mut()[k] = j * (a11 * a12 + a21 * a22);
        e[2].values_mut()[k] = j * (a12 * a12 + a22 * a22);
    }
    e
}

/// Momentum forcing `(b₀·∇)² ζ + (F, 0)` where `F` is the frozen
/// centrifugal and magnetic-hoop term.
pub fn body_force(
    frozen: &FrozenCoefficients,
    map: &FlowMapState,
    b0: &MagneticSeed,
) -> [ScalarField; 2] {
    let tension_r = b0.dot_grad(&b0.dot_grad_radius(map));
    let tension_z = b0.dot_grad(&b0.dot_grad_axial(map));
    [&tension_r + &frozen.centrifugal, tension_z]
}

/// Source `J̄ [Div_𝔞̄ (body force) + ∂_t𝔞̄_ij ∂_j ν_i − v^r ∂_t R̄ / R̄²]`,
/// obtained by applying `J̄ Div_𝔞̄` to the momentum equation and using that
/// `Div_𝔞̄ ν` is conserved.
pub fn pressure_source(
    frozen: &FrozenCoefficients,
    map: &FlowMapState,
    kin: &Kinematics,
    b0: &MagneticSeed,
) -> ScalarField {
    let [f1, f2] = body_force(frozen, map, b0);
    let a = &frozen.geometry.cofactor;
    let div = lagrangian_divergence(a, &frozen.radius, &f1, &f2);
    let da = &frozen.cofactor_rate;
    let dv = [[kin.vr.d_r(), kin.vr.d_z()], [kin.vz.d_r(), kin.vz.d_z()]];
    let grid = *map.grid();
    let mut out = ScalarField::zeros(grid, Parity::Even);
    let jac = frozen.geometry.jacobian.values();
    let rbar = frozen.radius.values();
    let vbar_r = frozen.kin.vr.values();
    for k in 0..grid.len() {
        let mut transport = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                transport += da.get(i, j).values()[k] * dv[i][j].values()[k];
            }
        }
        let stretch = kin.vr.values()[k] * vbar_r[k] / (rbar[k] * rbar[k]);
        out.values_mut()[k] = jac[k] * (div.values()[k] + transport - stretch);
    }
    out
}

/// Assembles the pressure problem for the current `(ζ, ν)` against frozen
/// coefficients, with interface data `q_Γ`.
pub fn assemble_system(
    frozen: &FrozenCoefficients,
    map: &FlowMapState,
    kin: &Kinematics,
    b0: &MagneticSeed,
    q_gamma: Vec<f64>,
) -> Result<EllipticSystem, PressureError> {
    let coeff = pressure_tensor(&frozen.geometry.cofactor, &frozen.geometry.jacobian);
    let rhs = pressure_source(frozen, map, kin, b0);
    EllipticSystem::from_parts(frozen.radius.clone(), coeff, rhs, q_gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_geometry;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 1.0, 2.0 * PI).unwrap()
    }

    fn r2_error(n: usize) -> f64 {
        let g = grid(n);
        let sys = EllipticSystem::laplacian(ScalarField::constant(g, 4.0), vec![1.0; n]).unwrap();
        let q = solve_pressure(&sys, 1e-12).unwrap();
        let exact = ScalarField::from_fn(g, Parity::Even, |r, _| r * r);
        (&q - &exact).max_abs()
    }

    #[test]
    fn laplacian_of_r_squared() {
        let g = grid(32);
        let sys = EllipticSystem::laplacian(ScalarField::zeros(g, Parity::Even), vec![1.0; 32]).unwrap();
        let q = ScalarField::from_fn(g, Parity::Even, |r, _| r * r);
        let lq = sys.evaluate(&q);
        for i in g.interior_rows() {
            for j in 0..g.nz {
                assert!((lq.at(i, j) - 4.0).abs() < 1e-10, "{}", lq.at(i, j));
            }
        }
        let c = ScalarField::constant(g, 3.0);
        let sys = EllipticSystem::laplacian(ScalarField::zeros(g, Parity::Even), vec![3.0; 32]).unwrap();
        assert!(sys.evaluate(&c).max_abs() < 1e-10);
    }

    #[test]
    fn solves_r_squared_at_second_order() {
        let errs: Vec<f64> = [32, 64].iter().map(|&n| r2_error(n)).collect();
        assert!(errs[1] <= 5e-3);
        assert!((errs[0] / errs[1]).log2() > 1.9, "{errs:?}");
    }

    #[test]
    fn constants_are_harmonic() {
        let g = grid(16);
        let sys = EllipticSystem::laplacian(ScalarField::zeros(g, Parity::Even), vec![2.5; 16]).unwrap();
        let q = solve_pressure(&sys, 1e-10).unwrap();
        assert!(q.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn screw_pinch_pressure() {
        let g = grid(32);
        let (c0, cc) = (0.5, 1.0);
        let bc = vec![0.5 * cc * cc; g.nz];
        let sys = EllipticSystem::laplacian(ScalarField::constant(g, -2.0 * c0 * c0), bc).unwrap();
        let q = solve_pressure(&sys, 1e-12).unwrap();
        let exact =
            ScalarField::from_fn(g, Parity::Even, |r, _| 0.5 * cc * cc + 0.5 * c0 * c0 * (1.0 - r * r));
        assert!((&q - &exact).max_abs() < 1e-3);
        // the discrete solution differs from the quadratic by a constant only
        let diff = &q - &exact;
        assert!((diff.max() - diff.min()) < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = grid(16);
        let rhs = ScalarField::zeros(g, Parity::Even);
        assert!(matches!(
            EllipticSystem::laplacian(rhs.clone(), vec![0.0; 3]),
            Err(PressureError::BoundaryLength { .. })
        ));
        let sys = EllipticSystem::laplacian(rhs.clone(), vec![0.0; 16]).unwrap();
        assert!(matches!(solve_pressure(&sys, 0.0), Err(PressureError::BadTolerance(_))));
        let bad = EllipticSystem::from_parts(
            ScalarField::radius(g),
            [
                ScalarField::constant(g, 1.0),
                ScalarField::constant(g, 2.0).with_parity(Parity::Odd),
                ScalarField::constant(g, 1.0),
            ],
            rhs,
            vec![0.0; 16],
        );
        assert!(matches!(bad, Err(PressureError::NotPositive { i: 0, j: 0, .. })));
    }

    #[test]
    fn tensor_of_identity_and_stretch() {
        let g = grid(16);
        let geo = build_geometry(&FlowMapState::identity(g)).unwrap();
        let e = pressure_tensor(&geo.cofactor, &geo.jacobian);
        assert!(e[0].values().iter().all(|&v| v == 1.0));
        assert_eq!(e[1].max_abs(), 0.0);
        let geo = build_geometry(&FlowMapState::from_maps(g, |r, _| 2.0 * r, |_, z| z)).unwrap();
        let e = pressure_tensor(&geo.cofactor, &geo.jacobian);
        assert!(e[0].values().iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!(e[2].values().iter().all(|v| (v - 2.0).abs() < 1e-12));
    }
}
