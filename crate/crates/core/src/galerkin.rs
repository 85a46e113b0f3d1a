//! Spectral Galerkin machinery: discrete eigenbasis of the nonlocal operator,
//! projection onto its leading modes, the convection tensor, and the
//! deterministic exponential time integrators.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernel::{Field, Mesh, NonlocalForm, Tridiagonal};

/// Leading eigenpairs of `A φ = λ M φ`, M-orthonormal, λ ascending.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    mesh: Mesh,
    mass: Tridiagonal,
    lambdas: Vec<f64>,
    /// Column `k` holds the nodal values of φ_k.
    modes: DMatrix<f64>,
}

impl EigenBasis {
    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> Field {
        Field::new(self.mesh, self.modes.column(k).iter().copied().collect())
            .expect("mode length matches mesh")
    }

    /// Same basis restricted to its first `n` modes.
    pub fn truncated(&self, n: usize) -> Result<EigenBasis> {
        if n == 0 || n > self.n_modes() {
            return Err(Error::Parameter(format!(
                "cannot truncate {} modes to {n}",
                self.n_modes()
            )));
        }
        Ok(EigenBasis {
            mesh: self.mesh,
            mass: self.mass.clone(),
            lambdas: self.lambdas[..n].to_vec(),
            modes: self.modes.columns(0, n).into_owned(),
        })
    }

    /// Nodal field `Σ c_k φ_k`.
    pub fn reconstruct(&self, c: &[f64]) -> Field {
        let nd = self.mesh.dofs();
        let mut v = vec![0.0; nd];
        for (k, &ck) in c.iter().enumerate().take(self.n_modes()) {
            if ck == 0.0 {
                continue;
            }
            for (i, vi) in v.iter_mut().enumerate() {
                *vi += ck * self.modes[(i, k)];
            }
        }
        Field::new(self.mesh, v).expect("length matches mesh")
    }

    /// Modal coefficients `φ_kᵀ w` of a dual vector (e.g. `A u`).
    pub fn dual_coefficients(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.mesh.dofs() {
            return Err(Error::Dimension {
                expected: self.mesh.dofs(),
                got: w.len(),
            });
        }
        Ok((0..self.n_modes())
            .map(|k| self.modes.column(k).iter().zip(w).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Modal coefficients of `u^n(t)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub c: Vec<f64>,
    pub t: f64,
}

impl ModalState {
    pub fn zeros(n: usize) -> Self {
        ModalState {
            c: vec![0.0; n],
            t: 0.0,
        }
    }

    /// `‖u‖²_H = Σ c_k²` (M-orthonormal basis).
    pub fn h2(&self) -> f64 {
        self.c.iter().map(|v| v * v).sum()
    }

    /// `‖u‖²_V = Σ λ_k c_k²`.
    pub fn v2(&self, lambdas: &[f64]) -> f64 {
        self.c.iter().zip(lambdas).map(|(c, l)| l * c * c).sum()
    }

    /// Sup norm of the coefficients; NaN if any coefficient is NaN.
    pub fn max_abs(&self) -> f64 {
        self.c
            .iter()
            .fold(0.0f64, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v.abs()) })
    }
}

/// Solves the generalized symmetric-definite eigenproblem by Cholesky
/// reduction with the mass matrix.
pub fn solve_eigenbasis(form: &NonlocalForm, n_modes: usize) -> Result<EigenBasis> {
    let mesh = form.mesh();
    let nd = mesh.dofs();
    if n_modes == 0 || n_modes > nd {
        return Err(Error::Parameter(format!(
            "n_modes = {n_modes} must lie in 1..={nd}"
        )));
    }
    let a = form.stiffness();
    let chol = form
        .mass()
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::Eigen {
            reason: "mass matrix not positive definite".into(),
            residual: f64::NAN,
        })?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ
    let y = l
        .solve_lower_triangular(a)
        .ok_or_else(|| eigen_err("singular Cholesky factor"))?;
    let mut c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| eigen_err("singular Cholesky factor"))?;
    // symmetrize against round-off before the dense symmetric solve
    for i in 0..nd {
        for j in i + 1..nd {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..nd).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let mut lambdas = Vec::with_capacity(n_modes);
    let mut modes = DMatrix::<f64>::zeros(nd, n_modes);
    for (k, &idx) in order.iter().take(n_modes).enumerate() {
        let yk = eig.eigenvectors.column(idx).into_owned();
        let mut phi = lt
            .solve_upper_triangular(&yk)
            .ok_or_else(|| eigen_err("singular Cholesky factor"))?;
        let sum: f64 = phi.iter().sum();
        let scale: f64 = phi.iter().map(|v| v.abs()).sum();
        let flip = if sum.abs() > 1e-8 * scale {
            sum < 0.0
        } else {
            phi.iter().find(|v| v.abs() > 1e-12 * scale).is_some_and(|v| *v < 0.0)
        };
        if flip {
            phi.neg_mut();
        }
        lambdas.push(eig.eigenvalues[idx]);
        modes.set_column(k, &phi);
    }

    if lambdas[0] <= 0.0 {
        return Err(Error::Eigen {
            reason: format!("non-positive leading eigenvalue {}", lambdas[0]),
            residual: f64::NAN,
        });
    }

    let basis = EigenBasis {
        mesh,
        mass: form.mass().clone(),
        lambdas,
        modes,
    };
    let worst = eigen_residual(form, &basis);
    if worst > 1e-9 {
        return Err(Error::Eigen {
            reason: "eigenpair residual above 1e-9".into(),
            residual: worst,
        });
    }
    Ok(basis)
}

fn eigen_err(reason: &str) -> Error {
    Error::Eigen {
        reason: reason.into(),
        residual: f64::NAN,
    }
}

/// Largest `‖Aφ_k − λ_k Mφ_k‖ / ‖Aφ_k‖` over the basis.
pub fn eigen_residual(form: &NonlocalForm, basis: &EigenBasis) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..basis.n_modes() {
        let phi: Vec<f64> = basis.modes.column(k).iter().copied().collect();
        let aphi = form.stiffness() * nalgebra::DVector::from_column_slice(&phi);
        let mphi = form.mass().matvec(&phi);
        let lam = basis.lambdas[k];
        let res: f64 = aphi
            .iter()
            .zip(&mphi)
            .map(|(a, m)| (a - lam * m).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(res / aphi.norm());
    }
    worst
}

/// Galerkin projection `c_k = φ_kᵀ M u`.
pub fn project(basis: &EigenBasis, u: &Field) -> Result<ModalState> {
    if u.mesh() != basis.mesh {
        return Err(Error::Dimension {
            expected: basis.mesh.dofs(),
            got: u.values().len(),
        });
    }
    let mu = basis.mass.matvec(u.values());
    Ok(ModalState {
        c: basis.dual_coefficients(&mu)?,
        t: 0.0,
    })
}

/// Explicit part of the modal drift, `N_k(c) = −(u u_x, φ_k)` for `u = Σ c_i φ_i`.
pub trait Nonlinearity: Sync {
    fn n_modes(&self) -> usize;
    fn eval(&self, c: &[f64], out: &mut [f64]);
}

/// Dense skew-symmetrized convection tensor `T_{kij}`.
///
/// `T_{kij} = ⅓[(φ_i φ_j', φ_k) − (φ_i φ_k', φ_j)]`, antisymmetric under
/// `k ↔ j`, so `Σ T_{kij} c_k c_i c_j` vanishes identically while the
/// contraction over `(i, j)` reproduces `(u u_x, φ_k)`.
#[derive(Debug, Clone)]
pub struct ConvectionTensor {
    n: usize,
    data: Vec<f64>,
}

impl ConvectionTensor {
    pub fn n_modes(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    /// `Σ_{k,i,j} T_{kij} c_k c_i c_j` together with the sum of absolute terms.
    pub fn cubic_contraction(&self, c: &[f64]) -> (f64, f64) {
        let n = self.n;
        let mut total = 0.0;
        let mut scale = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let v = self.get(k, i, j) * c[k] * c[i] * c[j];
                    total += v;
                    scale += v.abs();
                }
            }
        }
        (total, scale)
    }
}

impl Nonlinearity for ConvectionTensor {
    fn n_modes(&self) -> usize {
        self.n
    }

    fn eval(&self, c: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (k, o) in out.iter_mut().enumerate().take(n) {
            let block = &self.data[k * n * n..(k + 1) * n * n];
            let mut s = 0.0;
            for i in 0..n {
                if c[i] == 0.0 {
                    continue;
                }
                let row = &block[i * n..(i + 1) * n];
                let inner: f64 = row.iter().zip(c).map(|(t, cj)| t * cj).sum();
                s += c[i] * inner;
            }
            *o = -s;
        }
    }
}

/// Nodal values of every mode including the two zero boundary nodes.
fn padded_modes(basis: &EigenBasis) -> Vec<Vec<f64>> {
    let nd = basis.mesh.dofs();
    (0..basis.n_modes())
        .map(|k| {
            let mut v = vec![0.0; nd + 2];
            for i in 0..nd {
                v[i + 1] = basis.modes[(i, k)];
            }
            v
        })
        .collect()
}

/// Builds the convection tensor by exact element-wise integration.
pub fn convection_tensor(basis: &EigenBasis) -> ConvectionTensor {
    let n = basis.n_modes();
    let h = basis.mesh.h();
    let cells = basis.mesh.n_cells();
    let phi = padded_modes(basis);
    // P[k][i][j] = (φ_i φ_j', φ_k)
    let mut p = vec![0.0; n * n * n];
    let mut slope = vec![0.0; n];
    let mut mloc = vec![0.0; n * n];
    for e in 0..cells {
        for j in 0..n {
            slope[j] = (phi[j][e + 1] - phi[j][e]) / h;
        }
        for i in 0..n {
            let (ai, bi) = (phi[i][e], phi[i][e + 1]);
            for k in 0..n {
                let (ak, bk) = (phi[k][e], phi[k][e + 1]);
                mloc[i * n + k] = h / 6.0 * (2.0 * ai * ak + ai * bk + bi * ak + 2.0 * bi * bk);
            }
        }
        for k in 0..n {
            for i in 0..n {
                let m = mloc[i * n + k];
                if m == 0.0 {
                    continue;
                }
                let dst = &mut p[(k * n + i) * n..(k * n + i + 1) * n];
                for (d, s) in dst.iter_mut().zip(&slope) {
                    *d += m * s;
                }
            }
        }
    }
    let mut data = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                data[(k * n + i) * n + j] =
                    (p[(k * n + i) * n + j] - p[(j * n + i) * n + k]) / 3.0;
            }
        }
    }
    ConvectionTensor { n, data }
}

/// Same drift as [`ConvectionTensor`] evaluated through nodal values:
/// O(n_modes · dofs) per call instead of O(n_modes³).
#[derive(Debug, Clone)]
pub struct NodalConvection {
    h: f64,
    phi: Vec<Vec<f64>>,
}

impl NodalConvection {
    pub fn new(basis: &EigenBasis) -> Self {
        NodalConvection {
            h: basis.mesh.h(),
            phi: padded_modes(basis),
        }
    }
}

impl Nonlinearity for NodalConvection {
    fn n_modes(&self) -> usize {
        self.phi.len()
    }

    fn eval(&self, c: &[f64], out: &mut [f64]) {
        let len = self.phi.first().map_or(0, |p| p.len());
        let mut u = vec![0.0; len];
        for (ck, phi) in c.iter().zip(&self.phi) {
            if *ck == 0.0 {
                continue;
            }
            for (ui, p) in u.iter_mut().zip(phi) {
                *ui += ck * p;
            }
        }
        // load vector f_i = (u u_x, φ_i) on global nodes
        let mut f = vec![0.0; len];
        for e in 0..len - 1 {
            let (a, b) = (u[e], u[e + 1]);
            let ux = (b - a) / self.h;
            f[e] += ux * self.h / 6.0 * (2.0 * a + b);
            f[e + 1] += ux * self.h / 6.0 * (a + 2.0 * b);
        }
        for (o, phi) in out.iter_mut().zip(&self.phi) {
            *o = -phi.iter().zip(&f).map(|(p, v)| p * v).sum::<f64>();
        }
    }
}

/// Drift with the convection switched off (linear dynamics only).
#[derive(Debug, Clone, Copy)]
pub struct ZeroDrift(pub usize);

impl Nonlinearity for ZeroDrift {
    fn n_modes(&self) -> usize {
        self.0
    }

    fn eval(&self, _c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
}

/// Skew trilinear form `b(u, v, w) = ⅓[(u v_x, w) − (u w_x, v)]`, exact.
///
/// `b(u, u, w) = (u u_x, w) = −½(u², w_x)` for fields vanishing on ∂D, and
/// `b(u, v, v) = 0` for all fields.
pub fn skew_form(u: &Field, v: &Field, w: &Field) -> f64 {
    let mesh = u.mesh();
    let h = mesh.h();
    let mut s = 0.0;
    for e in 0..mesh.n_cells() {
        let (ua, ub) = (u.node_value(e), u.node_value(e + 1));
        let (va, vb) = (v.node_value(e), v.node_value(e + 1));
        let (wa, wb) = (w.node_value(e), w.node_value(e + 1));
        let uw = h / 6.0 * (2.0 * ua * wa + ua * wb + ub * wa + 2.0 * ub * wb);
        let uv = h / 6.0 * (2.0 * ua * va + ua * vb + ub * va + 2.0 * ub * vb);
        s += (vb - va) / h * uw - (wb - wa) / h * uv;
    }
    s / 3.0
}

/// Time integrator for the deterministic Galerkin system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// First-order exponential Euler.
    ExponentialEuler,
    /// Second-order exponential Runge–Kutta (Cox–Matthews ETD2RK).
    #[default]
    Etd2,
}

impl std::str::FromStr for Integrator {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exp_euler" => Ok(Integrator::ExponentialEuler),
            "etd2" => Ok(Integrator::Etd2),
            other => Err(format!("unknown integrator `{other}` (exp_euler | etd2)")),
        }
    }
}

impl std::fmt::Display for Integrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Integrator::ExponentialEuler => "exp_euler",
            Integrator::Etd2 => "etd2",
        })
    }
}

/// `(e^z − 1)/z`.
pub(crate) fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// `(e^z − 1 − z)/z²`.
pub(crate) fn phi2(z: f64) -> f64 {
    if z.abs() < 0.5 {
        // Σ z^k/(k+2)!
        let mut term = 0.5;
        let mut sum = 0.5;
        for k in 1..16 {
            term *= z / (k as f64 + 2.0);
            sum += term;
        }
        sum
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// Blow-up threshold on `‖c‖_∞`.
pub const BLOW_UP: f64 = 1e8;

pub(crate) fn check_finite(state: &ModalState, path: Option<u64>) -> Result<()> {
    let norm = state.max_abs();
    if !norm.is_finite() || norm > BLOW_UP {
        return Err(Error::BlowUp {
            t: state.t,
            norm,
            path,
        });
    }
    Ok(())
}

/// Precomputed exponential factors for a fixed step size.
#[derive(Debug, Clone)]
pub struct ExpFactors {
    dt: f64,
    decay: Vec<f64>,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
}

impl ExpFactors {
    pub fn new(lambdas: &[f64], dt: f64) -> Self {
        ExpFactors {
            dt,
            decay: lambdas.iter().map(|l| (-l * dt).exp()).collect(),
            phi1: lambdas.iter().map(|l| phi1(-l * dt)).collect(),
            phi2: lambdas.iter().map(|l| phi2(-l * dt)).collect(),
        }
    }
}

/// One exponential-IMEX step of `dc/dt = −Λc + N(c)`.
pub fn step_deterministic<N: Nonlinearity + ?Sized>(
    state: &ModalState,
    dt: f64,
    basis: &EigenBasis,
    nl: &N,
    integrator: Integrator,
) -> Result<ModalState> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("dt = {dt} must be positive")));
    }
    let f = ExpFactors::new(&basis.lambdas[..state.c.len()], dt);
    step_with(state, &f, nl, integrator)
}

pub fn step_with<N: Nonlinearity + ?Sized>(
    state: &ModalState,
    f: &ExpFactors,
    nl: &N,
    integrator: Integrator,
) -> Result<ModalState> {
    let n = state.c.len();
    let dt = f.dt;
    let mut n0 = vec![0.0; n];
    nl.eval(&state.c, &mut n0);
    let a: Vec<f64> = (0..n)
        .map(|k| f.decay[k] * state.c[k] + dt * f.phi1[k] * n0[k])
        .collect();
    let c = match integrator {
        Integrator::ExponentialEuler => a,
        Integrator::Etd2 => {
            let mut na = vec![0.0; n];
            nl.eval(&a, &mut na);
            (0..n)
                .map(|k| a[k] + dt * f.phi2[k] * (na[k] - n0[k]))
                .collect()
        }
    };
    let next = ModalState {
        c,
        t: state.t + dt,
    };
    check_finite(&next, None)?;
    Ok(next)
}

/// Modal trajectory sampled at a uniform stride.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub lambdas: Vec<f64>,
    pub times: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(lambdas: Vec<f64>) -> Self {
        Trajectory {
            lambdas,
            times: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    pub fn push(&mut self, s: &ModalState) {
        self.times.push(s.t);
        self.coeffs.push(s.c.clone());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn h2(&self, m: usize) -> f64 {
        self.coeffs[m].iter().map(|c| c * c).sum()
    }

    pub fn v2(&self, m: usize) -> f64 {
        self.coeffs[m]
            .iter()
            .zip(&self.lambdas)
            .map(|(c, l)| l * c * c)
            .sum()
    }

    pub fn state(&self, m: usize) -> ModalState {
        ModalState {
            c: self.coeffs[m].clone(),
            t: self.times[m],
        }
    }
}

/// Integrates from `c0` to `t_final`, recording every `stride` steps
/// (the final state is always recorded).
pub fn run_deterministic<N: Nonlinearity + ?Sized>(
    basis: &EigenBasis,
    nl: &N,
    c0: &ModalState,
    dt: f64,
    t_final: f64,
    stride: usize,
    integrator: Integrator,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_final > 0.0) {
        return Err(Error::Parameter(format!(
            "dt = {dt} and t_final = {t_final} must be positive"
        )));
    }
    let stride = stride.max(1);
    let steps = step_count(t_final, dt);
    let lambdas = basis.lambdas[..c0.c.len()].to_vec();
    let f = ExpFactors::new(&lambdas, dt);
    let mut traj = Trajectory::new(lambdas);
    let mut state = ModalState {
        c: c0.c.clone(),
        t: 0.0,
    };
    traj.push(&state);
    for m in 1..=steps {
        state = step_with(&state, &f, nl, integrator)?;
        state.t = m as f64 * dt;
        if m % stride == 0 || m == steps {
            traj.push(&state);
        }
    }
    Ok(traj)
}

/// Number of steps of size `dt` covering `t_final` (rounded to nearest).
pub fn step_count(t_final: f64, dt: f64) -> usize {
    ((t_final / dt).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{assemble_form, FractionalOrder};

    fn setup(n_cells: usize, alpha: f64, n_modes: usize) -> (NonlocalForm, EigenBasis) {
        let form = assemble_form(
            Mesh::new(n_cells).unwrap(),
            FractionalOrder::new(alpha).unwrap(),
        )
        .unwrap();
        let basis = solve_eigenbasis(&form, n_modes).unwrap();
        (form, basis)
    }

    #[test]
    fn eigenbasis_invariants() {
        let (form, basis) = setup(48, 1.2, 20);
        assert!(basis.lambdas()[0] >= 4.0 / 1.2);
        assert!(basis.lambdas().windows(2).all(|w| w[0] <= w[1]));
        assert!(eigen_residual(&form, &basis) < 1e-9);
        for j in 0..20 {
            for k in 0..20 {
                let g = form.l2_product(&basis.mode(j), &basis.mode(k)).unwrap();
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10);
            }
        }
        // positive mean for the symmetric ground state
        assert!(basis.mode(0).values().iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn eigenbasis_rejects_bad_count() {
        let form = assemble_form(Mesh::new(8).unwrap(), FractionalOrder::new(1.0).unwrap()).unwrap();
        assert!(solve_eigenbasis(&form, 8).is_err());
        assert!(solve_eigenbasis(&form, 0).is_err());
    }

    #[test]
    fn project_mode_gives_unit_vector() {
        let (_, basis) = setup(32, 1.5, 8);
        let c = project(&basis, &basis.mode(2)).unwrap();
        for (k, v) in c.c.iter().enumerate() {
            let e = if k == 2 { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-12);
        }
        let c = vec![0.3, -1.0, 0.0, 2.0, 0.1, 0.0, 0.0, 0.5];
        let back = project(&basis, &basis.reconstruct(&c)).unwrap();
        for (a, b) in c.iter().zip(&back.c) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_tensor_entry_vanishes() {
        let (_, basis) = setup(16, 1.5, 1);
        let t = convection_tensor(&basis);
        assert_eq!(t.get(0, 0, 0), 0.0);
    }

    #[test]
    fn nodal_and_tensor_drifts_agree() {
        let (_, basis) = setup(40, 1.5, 12);
        let t = convection_tensor(&basis);
        let nodal = NodalConvection::new(&basis);
        let c: Vec<f64> = (0..12).map(|k| ((k * 7 + 3) as f64).sin()).collect();
        let mut a = vec![0.0; 12];
        let mut b = vec![0.0; 12];
        t.eval(&c, &mut a);
        nodal.eval(&c, &mut b);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-11 * scale);
        }
    }

    #[test]
    fn skew_form_identities() {
        let mesh = Mesh::new(24).unwrap();
        let u = Field::interpolate(mesh, |x| (1.0 - x * x) * (3.0 * x).cos());
        let w = Field::interpolate(mesh, |x| (1.0 - x * x) * (x + 0.3));
        // −½(u², w_x) integrated exactly: u² piecewise quadratic, w_x constant
        let h = mesh.h();
        let mut rhs = 0.0;
        for e in 0..mesh.n_cells() {
            let (a, b) = (u.node_value(e), u.node_value(e + 1));
            let u2 = h / 3.0 * (a * a + a * b + b * b);
            rhs += -0.5 * u2 * (w.node_value(e + 1) - w.node_value(e)) / h;
        }
        assert!((skew_form(&u, &u, &w) - rhs).abs() < 1e-13);
        assert!(skew_form(&w, &u, &u).abs() < 1e-14);
    }

    #[test]
    fn zero_state_is_fixed() {
        let (_, basis) = setup(16, 1.5, 6);
        let t = convection_tensor(&basis);
        let s = step_deterministic(&ModalState::zeros(6), 1e-3, &basis, &t, Integrator::Etd2).unwrap();
        assert!(s.c.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_mode_decays_exactly() {
        let (_, basis) = setup(16, 1.5, 6);
        let zero = ZeroDrift(6);
        let mut c = vec![0.0; 6];
        c[3] = 0.7;
        let s0 = ModalState { c, t: 0.0 };
        for integ in [Integrator::ExponentialEuler, Integrator::Etd2] {
            let s = step_deterministic(&s0, 1e-3, &basis, &zero, integ).unwrap();
            let expect = 0.7 * (-basis.lambdas()[3] * 1e-3).exp();
            assert!((s.c[3] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let s = ModalState {
            c: vec![f64::NAN],
            t: 0.25,
        };
        assert!(matches!(check_finite(&s, None), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn phi_functions_match_direct_formula() {
        for &z in &[-0.49f64, -0.1, -1e-4, -0.51, -3.0] {
            let direct = (z.exp() - 1.0 - z) / (z * z);
            assert!((phi2(z) - direct).abs() < 1e-9);
            assert!((phi1(z) - (z.exp() - 1.0) / z).abs() < 1e-12);
        }
    }
}
