//! Discrete integral fractional Laplacian on D = (-1, 1) with zero exterior data.
//!
//! The operator is split into the interior Gagliardo double integral over D×D
//! and the exterior interaction weight
//!
//! ```text
//! rho(x) = ∫_{D^c} 2 |x - y|^{-1-alpha} dy = (2/alpha) [(1+x)^{-alpha} + (1-x)^{-alpha}]
//! ```
//!
//! with the kernel constant normalized to one. Conforming hat functions on a
//! uniform mesh are used, so the exterior condition holds exactly.
//!
//! On a uniform mesh every element-pair integral depends only on the offset
//! `d = b - a` between the two cells. Each offset is reduced to a single
//! integral in `s = ξ - η` whose inner factor is a cubic polynomial; the two
//! singular offsets (d = 0 and d = 1) are then integrated in closed form and
//! the remaining offsets by Gauss–Legendre.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;

/// Fractional order `alpha` of the operator `(-Δ)^{alpha/2}`, 0 < alpha < 2.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha < 2.0 {
            Ok(FractionalOrder(alpha))
        } else {
            Err(Error::Parameter(format!(
                "alpha = {alpha} outside (0, 2)"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True when 1 < alpha < 2, the range covered by the existence theory.
    pub fn theorem_range(self) -> bool {
        self.0 > 1.0 && self.0 < 2.0
    }
}

/// Uniform partition of (-1, 1) into `n_cells` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mesh {
    n_cells: usize,
}

impl Mesh {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::Parameter(format!(
                "n_cells = {n_cells}: need at least two cells"
            )));
        }
        Ok(Mesh { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        2.0 / self.n_cells as f64
    }

    /// Number of interior nodes (degrees of freedom).
    pub fn dofs(&self) -> usize {
        self.n_cells - 1
    }

    /// Coordinate of global node `j` (0 and `n_cells` are the endpoints ∓1).
    pub fn node(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.h()
    }

    /// Interior node coordinates, dof `i` sits at global node `i + 1`.
    pub fn nodes(&self) -> Vec<f64> {
        (1..self.n_cells).map(|j| self.node(j)).collect()
    }
}

/// Piecewise-linear function on a [`Mesh`], zero on ∂D and outside D.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    mesh: Mesh,
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.dofs() {
            return Err(Error::Dimension {
                expected: mesh.dofs(),
                got: values.len(),
            });
        }
        Ok(Field { mesh, values })
    }

    pub fn zeros(mesh: Mesh) -> Self {
        Field {
            mesh,
            values: vec![0.0; mesh.dofs()],
        }
    }

    /// Nodal interpolant of `f` at the interior nodes.
    pub fn interpolate<F: Fn(f64) -> f64>(mesh: Mesh, f: F) -> Self {
        Field {
            mesh,
            values: mesh.nodes().into_iter().map(f).collect(),
        }
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at global node `j`, including the zero boundary nodes.
    pub fn node_value(&self, j: usize) -> f64 {
        if j == 0 || j >= self.mesh.n_cells {
            0.0
        } else {
            self.values[j - 1]
        }
    }

    /// Point evaluation; zero outside D.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= -1.0 || x >= 1.0 {
            return 0.0;
        }
        let h = self.mesh.h();
        let t = (x + 1.0) / h;
        let cell = (t.floor() as usize).min(self.mesh.n_cells - 1);
        let xi = t - cell as f64;
        (1.0 - xi) * self.node_value(cell) + xi * self.node_value(cell + 1)
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            mesh: self.mesh,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * v[i + 1];
            }
            out[i] = s;
        }
        out
    }

    pub fn quadratic(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(self.matvec(v)).map(|(a, b)| a * b).sum()
    }

    /// Thomas algorithm; the matrices built here are diagonally dominant.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        c[0] = if n > 1 { self.off[0] / denom } else { 0.0 };
        d[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }
}

/// Assembled weighted nonlocal stiffness `A = A_int + W` and mass `M`.
#[derive(Debug, Clone)]
pub struct NonlocalForm {
    mesh: Mesh,
    alpha: FractionalOrder,
    stiffness: DMatrix<f64>,
    interior: DMatrix<f64>,
    weight: Tridiagonal,
    mass: Tridiagonal,
}

impl NonlocalForm {
    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn alpha(&self) -> FractionalOrder {
        self.alpha
    }

    /// Full matrix `A`, `vᵀAv = [v]²_{D×D} + ∫ rho v²`.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// Gagliardo (D×D) part of `A`.
    pub fn interior(&self) -> &DMatrix<f64> {
        &self.interior
    }

    /// `W_ij = ∫_D rho φ_i φ_j`.
    pub fn weight(&self) -> &Tridiagonal {
        &self.weight
    }

    pub fn mass(&self) -> &Tridiagonal {
        &self.mass
    }

    fn check(&self, u: &Field) -> Result<()> {
        if u.mesh != self.mesh {
            return Err(Error::Dimension {
                expected: self.mesh.dofs(),
                got: u.values.len(),
            });
        }
        Ok(())
    }

    /// `uᵀ A v`.
    pub fn energy_product(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check(u)?;
        let av = apply_operator(self, v)?;
        Ok(u.values.iter().zip(&av).map(|(a, b)| a * b).sum())
    }

    /// `uᵀ M v`.
    pub fn l2_product(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.mass.quadratic(&u.values, &v.values))
    }

    /// Writes `A` as a dense row-major text matrix, 17 significant digits.
    pub fn write_stiffness<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.stiffness.nrows() {
            let row: Vec<String> = (0..self.stiffness.ncols())
                .map(|j| format!("{:.16e}", self.stiffness[(i, j)]))
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Exterior interaction weight `(2/alpha)[(1+x)^{-alpha} + (1-x)^{-alpha}]`.
pub fn rho_weight(x: f64, alpha: FractionalOrder) -> Result<f64> {
    if !(x.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "rho(x) undefined for |x| >= 1 (x = {x})"
        )));
    }
    let a = alpha.0;
    Ok(2.0 / a * ((1.0 + x).powf(-a) + (1.0 - x).powf(-a)))
}

/// `2^α Γ(α/2+1) Γ((α+1)/2) / Γ(1/2)`: the constant value of the standard
/// fractional Laplacian applied to `(1-x²)_+^{α/2}` in one dimension.
pub fn getoor_constant(alpha: FractionalOrder) -> f64 {
    let a = alpha.0;
    2f64.powf(a) * gamma(a / 2.0 + 1.0) * gamma((a + 1.0) / 2.0) / gamma(0.5)
}

/// Normalization constant `C_{1,α}` for which `C_{1,α} ∫ (u(x)-u(y))|x-y|^{-1-α} dy`
/// has Fourier symbol `|ξ|^α`.
pub fn standard_constant(alpha: FractionalOrder) -> f64 {
    let a = alpha.0;
    a * 2f64.powf(a - 1.0) * gamma((1.0 + a) / 2.0)
        / (std::f64::consts::PI.sqrt() * gamma(1.0 - a / 2.0))
}

/// Factor mapping the strong image `M⁻¹Au` to the standard-normalized operator.
///
/// `A` carries the unit kernel constant and counts every pair (x, y) twice,
/// so `A` is twice the weak form of the unit-constant operator.
pub fn standard_scale(alpha: FractionalOrder) -> f64 {
    0.5 * standard_constant(alpha)
}

/// Quadrature controls for [`assemble_form_with`].
#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions {
    /// Gauss order for non-singular element pairs and weight integrals.
    pub order: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { order: 16 }
    }
}

/// Assembles `A` and `M` with default quadrature.
pub fn assemble_form(mesh: Mesh, alpha: FractionalOrder) -> Result<NonlocalForm> {
    assemble_form_with(mesh, alpha, AssemblyOptions::default())
}

pub fn assemble_form_with(
    mesh: Mesh,
    alpha: FractionalOrder,
    opts: AssemblyOptions,
) -> Result<NonlocalForm> {
    let n = mesh.n_cells;
    if n < 4 {
        return Err(Error::Parameter(format!(
            "n_cells = {n}: assembly needs at least 4 cells"
        )));
    }
    let a = alpha.0;
    let h = mesh.h();
    let rule = GaussRule::new(opts.order);
    let scale = h.powf(1.0 - a);

    let offsets: Vec<OffsetBlock> = (0..n)
        .into_par_iter()
        .map(|d| offset_block(d, a, &rule))
        .collect::<Result<_>>()?;

    let nd = mesh.dofs();
    let mut interior = DMatrix::<f64>::zeros(nd, nd);
    for (d, block) in offsets.iter().enumerate() {
        let mult = if d == 0 { scale } else { 2.0 * scale };
        for cell in 0..n - d {
            let nodes = block.nodes(cell, d);
            for (p, &np) in nodes.iter().enumerate() {
                if np == 0 || np >= n {
                    continue;
                }
                for (q, &nq) in nodes.iter().enumerate() {
                    if nq == 0 || nq >= n || nq < np {
                        continue;
                    }
                    interior[(np - 1, nq - 1)] += mult * block.get(p, q);
                }
            }
        }
    }
    mirror_upper(&mut interior);

    let weight = weight_matrix(mesh, a, &rule);
    let mut stiffness = interior.clone();
    for i in 0..nd {
        stiffness[(i, i)] += weight.diag[i];
        if i + 1 < nd {
            stiffness[(i, i + 1)] += weight.off[i];
            stiffness[(i + 1, i)] += weight.off[i];
        }
    }

    Ok(NonlocalForm {
        mesh,
        alpha,
        stiffness,
        interior,
        weight,
        mass: mass_matrix(mesh),
    })
}

fn mirror_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// Exact hat-function mass matrix `h/6 · tridiag(1, 4, 1)`.
pub fn mass_matrix(mesh: Mesh) -> Tridiagonal {
    let h = mesh.h();
    let nd = mesh.dofs();
    Tridiagonal {
        diag: vec![2.0 * h / 3.0; nd],
        off: vec![h / 6.0; nd.saturating_sub(1)],
    }
}

/// Discrete weak image `A u` of the operator.
pub fn apply_operator(form: &NonlocalForm, u: &Field) -> Result<Vec<f64>> {
    form.check(u)?;
    let v = DVector::from_column_slice(&u.values);
    Ok((&form.stiffness * v).as_slice().to_vec())
}

/// Discrete strong image: the field `w` with `M w = A u`.
pub fn strong_image(form: &NonlocalForm, u: &Field) -> Result<Field> {
    let au = apply_operator(form, u)?;
    Ok(Field {
        mesh: form.mesh,
        values: form.mass.solve(&au),
    })
}

/// Strong image rescaled to the standard normalization of `(-Δ)^{α/2}`.
pub fn standard_strong_image(form: &NonlocalForm, u: &Field) -> Result<Field> {
    Ok(strong_image(form, u)?.scaled(standard_scale(form.alpha)))
}

fn weight_matrix(mesh: Mesh, a: f64, rule: &GaussRule) -> Tridiagonal {
    let n = mesh.n_cells;
    let h = mesh.h();
    let nd = mesh.dofs();
    let mut w = Tridiagonal {
        diag: vec![0.0; nd],
        off: vec![0.0; nd.saturating_sub(1)],
    };
    let boundary = 2.0 / a * h.powf(1.0 - a) / (3.0 - a);
    for cell in 0..n {
        let x0 = mesh.node(cell);
        // local [N0N0, N0N1, N1N1]
        let mut local = [0.0f64; 3];
        for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
            let x = x0 + h * t;
            let mut r = 0.0;
            if cell != 0 {
                r += (1.0 + x).powf(-a);
            }
            if cell != n - 1 {
                r += (1.0 - x).powf(-a);
            }
            let r = 2.0 / a * r * wt * h;
            local[0] += r * (1.0 - t) * (1.0 - t);
            local[1] += r * (1.0 - t) * t;
            local[2] += r * t * t;
        }
        // singular endpoint factors, integrated exactly against the one
        // hat that does not vanish there
        if cell == 0 {
            local[2] += boundary;
        }
        if cell == n - 1 {
            local[0] += boundary;
        }
        let left = cell; // global node numbers
        let right = cell + 1;
        if left >= 1 {
            w.diag[left - 1] += local[0];
        }
        if right <= nd {
            w.diag[right - 1] += local[2];
        }
        if left >= 1 && right <= nd {
            w.off[left - 1] += local[1];
        }
    }
    w
}

/// Reference interaction block for cell offset `d` on the unit cell,
/// before the `h^{1-α}` scaling.
#[derive(Debug, Clone)]
struct OffsetBlock {
    size: usize,
    values: [[f64; 4]; 4],
}

impl OffsetBlock {
    fn get(&self, p: usize, q: usize) -> f64 {
        self.values[p][q]
    }

    fn nodes(&self, cell: usize, d: usize) -> Vec<usize> {
        match self.size {
            2 => vec![cell, cell + 1],
            3 => vec![cell, cell + 1, cell + 2],
            _ => vec![cell, cell + 1, cell + d, cell + d + 1],
        }
    }
}

/// Linear form `c + bx·ξ + by·η` representing `f_p(ξ) - g_p(η)`.
#[derive(Debug, Clone, Copy, Default)]
struct LinearForm {
    c: f64,
    bx: f64,
    by: f64,
}

/// Local differences `φ_p(x) - φ_p(y)` for x in cell a and y in cell a + d.
fn local_forms(d: usize) -> Vec<LinearForm> {
    // hat pieces: N0(t) = 1 - t, N1(t) = t
    let n0 = (1.0, -1.0);
    let n1 = (0.0, 1.0);
    let on_x = |p: (f64, f64)| LinearForm {
        c: p.0,
        bx: p.1,
        by: 0.0,
    };
    let on_y = |p: (f64, f64)| LinearForm {
        c: -p.0,
        bx: 0.0,
        by: -p.1,
    };
    let both = |px: (f64, f64), py: (f64, f64)| LinearForm {
        c: px.0 - py.0,
        bx: px.1,
        by: -py.1,
    };
    match d {
        0 => vec![both(n0, n0), both(n1, n1)],
        1 => vec![on_x(n0), both(n1, n0), on_y(n1)],
        _ => vec![on_x(n0), on_x(n1), on_y(n0), on_y(n1)],
    }
}

/// Dense polynomial in one variable, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn mul(&self, o: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly(
            (0..n)
                .map(|i| self.0.get(i).copied().unwrap_or(0.0) + o.0.get(i).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    fn scale(&self, c: f64) -> Poly {
        Poly(self.0.iter().map(|v| v * c).collect())
    }

    fn pow(&self, k: usize) -> Poly {
        (0..k).fold(Poly(vec![1.0]), |acc, _| acc.mul(self))
    }

    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Coefficients of `p(s0 + τ)` in powers of τ.
    fn shifted(&self, s0: f64) -> Poly {
        let shift = Poly(vec![s0, 1.0]);
        self.0
            .iter()
            .enumerate()
            .fold(Poly(vec![0.0]), |acc, (k, c)| acc.add(&shift.pow(k).scale(*c)))
    }
}

/// `G(s) = ∫ L_p L_q dη` over the slice of the unit square where ξ - η = s.
/// `upper` selects s ∈ [0,1] (η ∈ [0, 1-s]) versus s ∈ [-1,0] (η ∈ [-s, 1]).
fn slice_poly(lp: LinearForm, lq: LinearForm, upper: bool) -> Poly {
    // with ξ = η + s: L = (c + bx s) + (bx + by) η
    let up = Poly(vec![lp.c, lp.bx]);
    let uq = Poly(vec![lq.c, lq.bx]);
    let vp = lp.bx + lp.by;
    let vq = lq.bx + lq.by;
    let (hi, lo) = if upper {
        (Poly(vec![1.0, -1.0]), Poly(vec![0.0]))
    } else {
        (Poly(vec![1.0]), Poly(vec![0.0, -1.0]))
    };
    let d1 = hi.add(&lo.scale(-1.0));
    let d2 = hi.pow(2).add(&lo.pow(2).scale(-1.0));
    let d3 = hi.pow(3).add(&lo.pow(3).scale(-1.0));
    up.mul(&uq)
        .mul(&d1)
        .add(&up.scale(vq).add(&uq.scale(vp)).mul(&d2).scale(0.5))
        .add(&d3.scale(vp * vq / 3.0))
}

/// `∫ G(s) |s - s0|^{-1-α} ds` over the unit interval on side `dir` of `s0`,
/// in closed form. The constant and linear Taylor terms must vanish.
fn singular_half(g: &Poly, s0: f64, dir: f64, a: f64, panel: &str) -> Result<f64> {
    let t = g.shifted(s0);
    let mag = t.0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for k in 0..t.0.len().min(2) {
        if t.0[k].abs() > 1e-12 * mag {
            return Err(Error::Assembly {
                panel: panel.to_string(),
                reason: format!(
                    "non-integrable Taylor term of order {k} ({:.3e}) at the kernel singularity",
                    t.0[k]
                ),
            });
        }
    }
    Ok(t.0
        .iter()
        .enumerate()
        .skip(2)
        .map(|(k, c)| c * dir.powi(k as i32) / (k as f64 - a))
        .sum())
}

fn smooth_half(g: &Poly, d: f64, a: f64, upper: bool, rule: &GaussRule) -> f64 {
    let (lo, hi) = if upper { (0.0, 1.0) } else { (-1.0, 0.0) };
    rule.integrate(lo, hi, |s| g.eval(s) * (s - d).abs().powf(-1.0 - a))
}

fn offset_block(d: usize, a: f64, rule: &GaussRule) -> Result<OffsetBlock> {
    let forms = local_forms(d);
    let size = forms.len();
    let mut values = [[0.0; 4]; 4];
    for p in 0..size {
        for q in p..size {
            let gp = slice_poly(forms[p], forms[q], true);
            let gm = slice_poly(forms[p], forms[q], false);
            let panel = format!("cell offset {d}, local pair ({p}, {q})");
            let v = match d {
                0 => singular_half(&gp, 0.0, 1.0, a, &panel)?
                    + singular_half(&gm, 0.0, -1.0, a, &panel)?,
                1 => singular_half(&gp, 1.0, -1.0, a, &panel)?
                    + smooth_half(&gm, 1.0, a, false, rule),
                _ => smooth_half(&gp, d as f64, a, true, rule)
                    + smooth_half(&gm, d as f64, a, false, rule),
            };
            if !v.is_finite() {
                return Err(Error::Assembly {
                    panel,
                    reason: "non-finite element integral".into(),
                });
            }
            values[p][q] = v;
            values[q][p] = v;
        }
    }
    Ok(OffsetBlock { size, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    #[test]
    fn rho_values() {
        assert!((rho_weight(0.0, order(1.0)).unwrap() - 4.0).abs() < 1e-15);
        assert!((rho_weight(0.0, order(1.5)).unwrap() - 8.0 / 3.0).abs() < 1e-15);
        for &x in &[0.1, 0.5, 0.93] {
            let a = order(0.7);
            assert_eq!(rho_weight(x, a).unwrap(), rho_weight(-x, a).unwrap());
        }
        assert!(rho_weight(1.0, order(1.0)).is_err());
        assert!(rho_weight(-1.5, order(1.0)).is_err());
    }

    #[test]
    fn order_validation() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(2.0).is_err());
        assert!(FractionalOrder::new(f64::NAN).is_err());
        assert!(order(1.5).theorem_range());
        assert!(!order(1.0).theorem_range());
    }

    #[test]
    fn getoor_constant_values() {
        assert!((getoor_constant(order(1.0)) - 1.0).abs() < 1e-14);
        assert!((getoor_constant(order(1e-9)) - 1.0).abs() < 1e-8);
        // C_{1,1} = 1/π
        assert!((standard_constant(order(1.0)) - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
    }

    #[test]
    fn same_cell_block_closed_form() {
        // both hats differ by ±(ξ-η): 2[1/(2-α) - 1/(3-α)]
        let a = 1.3;
        let b = offset_block(0, a, &GaussRule::new(16)).unwrap();
        let k = 2.0 * (1.0 / (2.0 - a) - 1.0 / (3.0 - a));
        assert!((b.get(0, 0) - k).abs() < 1e-14);
        assert!((b.get(1, 1) - k).abs() < 1e-14);
        assert!((b.get(0, 1) + k).abs() < 1e-14);
    }

    #[test]
    fn symmetric_exactly() {
        let form = assemble_form(Mesh::new(33).unwrap(), order(0.8)).unwrap();
        let a = form.stiffness();
        assert_eq!(a, &a.transpose());
    }

    #[test]
    fn rejects_tiny_mesh() {
        assert!(assemble_form(Mesh::new(3).unwrap(), order(1.0)).is_err());
    }

    #[test]
    fn apply_rejects_mesh_mismatch() {
        let form = assemble_form(Mesh::new(8).unwrap(), order(1.0)).unwrap();
        let u = Field::zeros(Mesh::new(16).unwrap());
        assert!(matches!(apply_operator(&form, &u), Err(Error::Dimension { .. })));
    }

    #[test]
    fn tridiagonal_solve_inverts_matvec() {
        let m = mass_matrix(Mesh::new(12).unwrap());
        let x: Vec<f64> = (0..11).map(|i| (i as f64).sin()).collect();
        let y = m.solve(&m.matvec(&x));
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn field_eval_is_piecewise_linear() {
        let mesh = Mesh::new(4).unwrap();
        let f = Field::new(mesh, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.eval(-0.5), 1.0);
        assert!((f.eval(-0.75) - 0.5).abs() < 1e-15);
        assert!((f.eval(0.75) - 1.5).abs() < 1e-15);
        assert_eq!(f.eval(1.2), 0.0);
    }
}
