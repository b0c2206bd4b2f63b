//! Reference-cylinder discretization and the weighted Sobolev norms built on it.
//!
//! The radial grid is half-offset, `r_i = (i + 1/2) h_r`, so no node sits on
//! the axis. Axis regularity is carried by a parity tag on every field: the
//! ghost value across `r = 0` is the mirror image for even fields and the
//! negated mirror image for odd ones. The axial direction is periodic.
//!
//! Storage is row-major in `(i, j)`, radial index outermost.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// Smallest admissible node count per direction.
pub const MIN_NODES: usize = 8;

/// Highest derivative order the norms support.
pub const MAX_NORM_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nr: usize,
    pub nz: usize,
    pub r0: f64,
    pub lz: f64,
}

impl Grid {
    pub fn new(nr: usize, nz: usize, r0: f64, lz: f64) -> Result<Self, GridError> {
        if nr < MIN_NODES || nz < MIN_NODES {
            return Err(GridError::TooCoarse { nr, nz });
        }
        if !(r0 > 0.0 && r0.is_finite()) || !(lz > 0.0 && lz.is_finite()) {
            return Err(GridError::BadExtent { r0, lz });
        }
        Ok(Self { nr, nz, r0, lz })
    }

    #[inline]
    pub fn hr(&self) -> f64 {
        self.r0 / self.nr as f64
    }

    #[inline]
    pub fn hz(&self) -> f64 {
        self.lz / self.nz as f64
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hr()
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.hz()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }

    #[inline]
    pub fn jp(&self, j: usize) -> usize {
        if j + 1 == self.nz {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    pub fn jm(&self, j: usize) -> usize {
        if j == 0 {
            self.nz - 1
        } else {
            j - 1
        }
    }

    /// Largest of the two mesh widths.
    pub fn h_max(&self) -> f64 {
        self.hr().max(self.hz())
    }

    pub fn h_min(&self) -> f64 {
        self.hr().min(self.hz())
    }

    /// Radial indices that are at least two layers away from both the axis
    /// and the outer boundary.
    pub fn interior_rows(&self) -> std::ops::Range<usize> {
        2..self.nr - 2
    }

    pub fn is_interior_row(&self, i: usize) -> bool {
        i >= 2 && i + 2 < self.nr
    }

    fn check_same(&self, other: &Grid) -> Result<(), GridError> {
        if self == other {
            Ok(())
        } else {
            Err(GridError::Mismatch)
        }
    }
}

/// Behaviour of a field under reflection through the axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    #[inline]
    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    #[inline]
    pub fn times(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// A real field sampled on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    parity: Parity,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid, parity: Parity) -> Self {
        Self {
            grid,
            parity,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            parity: Parity::Even,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, parity: Parity, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nr {
            let r = grid.r(i);
            for j in 0..grid.nz {
                values.push(f(r, grid.z(j)));
            }
        }
        Self {
            grid,
            parity,
            values,
        }
    }

    pub fn from_values(grid: Grid, parity: Parity, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid,
            parity,
            values,
        })
    }

    /// The radial coordinate `r` itself (odd).
    pub fn radius(grid: Grid) -> Self {
        Self::from_fn(grid, Parity::Odd, |r, _| r)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    pub fn map(&self, parity: Parity, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            parity,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Nodewise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Self, parity: Parity, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Self {
            grid: self.grid,
            parity,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(self.parity, |v| s * v)
    }

    /// `self + s * other`, parity of `self`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.zip_with(other, self.parity, |a, b| a + s * b)
    }

    /// Pointwise quotient, parity is the product of the operands' parities.
    pub fn div(&self, other: &Self) -> Self {
        self.zip_with(other, self.parity.times(other.parity), |a, b| a / b)
    }

    /// Divide nodewise by `r` (flips parity).
    pub fn div_r(&self) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        out.parity = self.parity.flip();
        for i in 0..g.nr {
            let r = g.r(i);
            for v in &mut out.values[i * g.nz..(i + 1) * g.nz] {
                *v /= r;
            }
        }
        out
    }

    /// Multiply nodewise by `r` (flips parity).
    pub fn mul_r(&self) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        out.parity = self.parity.flip();
        for i in 0..g.nr {
            let r = g.r(i);
            for v in &mut out.values[i * g.nz..(i + 1) * g.nz] {
                *v *= r;
            }
        }
        out
    }

    /// Centered radial derivative. Parity ghosts close the stencil at the
    /// axis; the outermost node uses the one-sided second-order formula.
    pub fn d_r(&self) -> Self {
        let g = self.grid;
        let (nr, nz) = (g.nr, g.nz);
        let inv2h = 0.5 / g.hr();
        let s = self.parity.sign();
        let f = &self.values;
        let mut out = vec![0.0; g.len()];
        for j in 0..nz {
            out[j] = (f[nz + j] - s * f[j]) * inv2h;
        }
        for i in 1..nr - 1 {
            let (lo, hi) = ((i - 1) * nz, (i + 1) * nz);
            for j in 0..nz {
                out[i * nz + j] = (f[hi + j] - f[lo + j]) * inv2h;
            }
        }
        let (a, b, c) = ((nr - 1) * nz, (nr - 2) * nz, (nr - 3) * nz);
        for j in 0..nz {
            out[a + j] = (3.0 * f[a + j] - 4.0 * f[b + j] + f[c + j]) * inv2h;
        }
        Self {
            grid: g,
            parity: self.parity.flip(),
            values: out,
        }
    }

    /// Centered periodic axial derivative.
    pub fn d_z(&self) -> Self {
        let g = self.grid;
        let inv2h = 0.5 / g.hz();
        let f = &self.values;
        let mut out = vec![0.0; g.len()];
        for i in 0..g.nr {
            let row = i * g.nz;
            for j in 0..g.nz {
                out[row + j] = (f[row + g.jp(j)] - f[row + g.jm(j)]) * inv2h;
            }
        }
        Self {
            grid: g,
            parity: self.parity,
            values: out,
        }
    }

    /// Value at `r = R0` for every axial station, by quadratic extrapolation
    /// from the three outermost nodes.
    pub fn boundary_trace(&self) -> Vec<f64> {
        let g = self.grid;
        let n = g.nr;
        (0..g.nz)
            .map(|j| {
                (15.0 * self.at(n - 1, j) - 10.0 * self.at(n - 2, j) + 3.0 * self.at(n - 3, j))
                    / 8.0
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Max-norm split into interior rows and the two layers next to each
    /// radial boundary.
    pub fn max_abs_split(&self) -> ResidualMax {
        let g = self.grid;
        let mut out = ResidualMax::default();
        for i in 0..g.nr {
            let row = &self.values[i * g.nz..(i + 1) * g.nz];
            let m = row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if g.is_interior_row(i) {
                out.interior = out.interior.max(m);
            } else {
                out.boundary = out.boundary.max(m);
            }
        }
        out
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ 2π r f g h_r h_z`, summed in storage order.
    pub fn weighted_dot(&self, other: &Self) -> f64 {
        let g = self.grid;
        let mut total = 0.0;
        for i in 0..g.nr {
            let r = g.r(i);
            let mut row = 0.0;
            for j in 0..g.nz {
                let k = g.idx(i, j);
                row += self.values[k] * other.values[k];
            }
            total += r * row;
        }
        2.0 * PI * g.hr() * g.hz() * total
    }
}

/// Interior / near-boundary split of a max-norm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualMax {
    pub interior: f64,
    pub boundary: f64,
}

impl ResidualMax {
    pub fn overall(&self) -> f64 {
        self.interior.max(self.boundary)
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        assert_eq!(self.parity, rhs.parity, "adding fields of different parity");
        self.zip_with(rhs, self.parity, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        assert_eq!(self.parity, rhs.parity, "subtracting fields of different parity");
        self.zip_with(rhs, self.parity, |a, b| a - b)
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, self.parity.times(rhs.parity), |a, b| a * b)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(self.parity, |v| -v)
    }
}

fn check_order(k: usize) -> Result<(), GridError> {
    if k > MAX_NORM_ORDER {
        Err(GridError::OrderTooHigh(k))
    } else {
        Ok(())
    }
}

/// Weighted Sobolev norm `(Σ_{|α|≤k} 2π ∫∫ r |D^α f|² dr dz)^{1/2}`.
///
/// Mixed derivatives are built by repeated first differences, so every
/// multi-index is realized once.
pub fn weighted_norm(f: &ScalarField, k: usize) -> Result<f64, GridError> {
    Ok(weighted_norm_sq(f, k)?.sqrt())
}

pub fn weighted_norm_sq(f: &ScalarField, k: usize) -> Result<f64, GridError> {
    check_order(k)?;
    let mut total = 0.0;
    let mut radial = f.clone();
    for a in 0..=k {
        if a > 0 {
            radial = radial.d_r();
        }
        let mut mixed = radial.clone();
        for b in 0..=(k - a) {
            if b > 0 {
                mixed = mixed.d_z();
            }
            total += mixed.weighted_dot(&mixed);
        }
    }
    Ok(total)
}

/// Sum of squared weighted norms of several fields.
pub fn weighted_norm_sq_all(fields: &[&ScalarField], k: usize) -> Result<f64, GridError> {
    let mut total = 0.0;
    for f in fields {
        total += weighted_norm_sq(f, k)?;
    }
    Ok(total)
}

/// Boundary norm `(Σ_{β≤s} 2π R0 ∫ |∂_z^β w|² dz)^{1/2}` of a trace at `r = R0`.
pub fn boundary_norm(grid: &Grid, w: &[f64], s: usize) -> Result<f64, GridError> {
    check_order(s)?;
    if w.len() != grid.nz {
        return Err(GridError::Length {
            expected: grid.nz,
            got: w.len(),
        });
    }
    let inv2h = 0.5 / grid.hz();
    let mut current = w.to_vec();
    let mut total = 0.0;
    for beta in 0..=s {
        if beta > 0 {
            current = (0..grid.nz)
                .map(|j| (current[grid.jp(j)] - current[grid.jm(j)]) * inv2h)
                .collect();
        }
        total += current.iter().map(|v| v * v).sum::<f64>();
    }
    Ok((2.0 * PI * grid.r0 * grid.hz() * total).sqrt())
}

/// Ratio `‖g/r‖_{s-1} / ‖g‖_s` for a field vanishing on the axis.
pub fn hardy_ratio(g: &ScalarField, s: usize) -> Result<f64, GridError> {
    if s < 1 {
        return Err(GridError::Precondition("Hardy ratio needs s >= 1".into()));
    }
    check_order(s)?;
    if g.parity() != Parity::Odd {
        return Err(GridError::Precondition(
            "Hardy ratio needs an odd field (g = 0 on the axis)".into(),
        ));
    }
    let denom = weighted_norm(g, s)?;
    if denom == 0.0 {
        return Err(GridError::Precondition("Hardy ratio of the zero field".into()));
    }
    Ok(weighted_norm(&g.div_r(), s - 1)? / denom)
}

/// Checks that two fields share a grid.
pub fn same_grid(a: &ScalarField, b: &ScalarField) -> Result<(), GridError> {
    a.grid.check_same(&b.grid)
}
