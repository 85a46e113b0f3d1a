//! Executable versions of the a priori estimates: energy ledgers, Gronwall
//! envelopes, a Besov–Slobodetski time-regularity estimator, the weak-form
//! residual and Galerkin self-convergence studies.
//!
//! Negative-order space norms are always the discrete spectral ones from
//! [`crate::spaces::SpectralScale`]; report headers say so.

use std::io::Write;

use crate::error::{Error, Result};
use crate::galerkin::{
    run_deterministic, EigenBasis, Integrator, ModalState, Nonlinearity, Trajectory,
};
use crate::kernel::{apply_operator, rho_weight, Field, FractionalOrder, NonlocalForm};
use crate::quadrature::GaussRule;
use crate::spaces::SpectralScale;
use crate::stochastic::{Estimate, MomentRow};

pub const SPECTRAL_NOTE: &str =
    "negative-order norms realized through powers of the discrete operator eigenvalues";

/// Machine-readable pass/fail line.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub check_id: String,
    pub quantity: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Verdict {
    /// `quantity ≤ threshold` (NaN fails).
    pub fn at_most(id: impl Into<String>, quantity: f64, threshold: f64) -> Self {
        Verdict {
            check_id: id.into(),
            quantity,
            threshold,
            passed: quantity <= threshold,
        }
    }

    /// `quantity ≥ threshold` (NaN fails).
    pub fn at_least(id: impl Into<String>, quantity: f64, threshold: f64) -> Self {
        Verdict {
            check_id: id.into(),
            quantity,
            threshold,
            passed: quantity >= threshold,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {} quantity={:.6e} threshold={:.6e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.check_id,
            self.quantity,
            self.threshold
        )
    }
}

/// CSV `check_id, quantity, threshold, verdict`.
pub fn write_verdicts<W: Write>(mut out: W, verdicts: &[Verdict]) -> Result<()> {
    writeln!(out, "check_id,quantity,threshold,verdict")?;
    for v in verdicts {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{}",
            v.check_id,
            v.quantity,
            v.threshold,
            if v.passed { "pass" } else { "fail" }
        )?;
    }
    Ok(())
}

/// Per-sample energy accounting of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    pub h2: Vec<f64>,
    /// trapezoidal `∫_0^t ‖u‖²_V ds`
    pub v2_integral: Vec<f64>,
    /// trapezoidal `∫_0^t ‖g‖²_HS ds` (zero for deterministic runs)
    pub hs_integral: Vec<f64>,
    /// `h2 + 2 v2_integral − hs_integral − h2(0)`
    pub balance_residual: Vec<f64>,
}

impl EnergyLedger {
    /// Builds the ledger of a deterministic trajectory by trapezoid in time
    /// over the recorded samples.
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let n = traj.len();
        let h2: Vec<f64> = (0..n).map(|m| traj.h2(m)).collect();
        let v2: Vec<f64> = (0..n).map(|m| traj.v2(m)).collect();
        Self::from_series(&traj.times, &h2, &v2, None)
    }

    /// Same from raw series; `hs` is the per-sample `‖g‖²_HS` if present.
    pub fn from_series(times: &[f64], h2: &[f64], v2: &[f64], hs: Option<&[f64]>) -> Self {
        let n = times.len();
        let mut v2_integral = vec![0.0; n];
        let mut hs_integral = vec![0.0; n];
        for m in 1..n {
            let dt = times[m] - times[m - 1];
            v2_integral[m] = v2_integral[m - 1] + 0.5 * dt * (v2[m - 1] + v2[m]);
            if let Some(hs) = hs {
                hs_integral[m] = hs_integral[m - 1] + 0.5 * dt * (hs[m - 1] + hs[m]);
            }
        }
        let h0 = h2.first().copied().unwrap_or(0.0);
        let balance_residual = (0..n)
            .map(|m| h2[m] + 2.0 * v2_integral[m] - hs_integral[m] - h0)
            .collect();
        EnergyLedger {
            times: times.to_vec(),
            h2: h2.to_vec(),
            v2_integral,
            hs_integral,
            balance_residual,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_t |residual| / h2(0)` (absolute when `h2(0) = 0`).
    pub fn max_relative_residual(&self) -> f64 {
        let scale = self.h2.first().copied().unwrap_or(0.0);
        let worst = self
            .balance_residual
            .iter()
            .fold(0.0f64, |m, r| m.max(r.abs()));
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// Whether `h2` never increases by more than `tol` between samples.
    pub fn dissipative(&self, tol: f64) -> bool {
        self.h2.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceCheck {
    pub passed: bool,
    pub max_residual: f64,
}

/// Deterministic ledger: `max_t |h2 + 2∫V − h2(0)| ≤ rel_tol · h2(0)`.
pub fn check_energy_balance(ledger: &EnergyLedger, rel_tol: f64) -> Result<BalanceCheck> {
    if ledger.is_empty() {
        return Err(Error::Check("empty energy ledger".into()));
    }
    let r = ledger.max_relative_residual();
    Ok(BalanceCheck {
        passed: r <= rel_tol,
        max_residual: r,
    })
}

/// Stochastic mean ledger: at every row `|E balance| ≤ k·SE + E bias_bound`.
/// `max_residual` is the largest ratio `|mean| / (k·SE + band)`.
pub fn check_mean_energy_balance(rows: &[MomentRow], k_se: f64) -> Result<BalanceCheck> {
    if rows.is_empty() {
        return Err(Error::Check("empty moment table".into()));
    }
    let mut worst = 0.0f64;
    for r in rows {
        let allowance = k_se * r.balance.se + r.bias_bound.mean;
        let m = r.balance.mean.abs();
        let ratio = if allowance > 0.0 {
            m / allowance
        } else if m == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
    }
    Ok(BalanceCheck {
        passed: worst <= 1.0,
        max_residual: worst,
    })
}

/// Gronwall majorant `e^{CT}(E‖u_0‖² + λT)`; bounds both `sup_t E‖u‖²_H` and
/// `2E∫_0^T ‖u‖²_V`.
pub fn gronwall_envelope(growth_c: f64, growth_lambda: f64, t_final: f64, h2_0: f64) -> f64 {
    (growth_c * t_final).exp() * (h2_0 + growth_lambda * t_final)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovEstimate {
    pub gamma: f64,
    pub delta: f64,
    /// `Σ_{m≠l} ‖u_m − u_l‖²_(−δ) |t_m − t_l|^{−1−2γ} Δt²`
    pub seminorm_sq: f64,
    /// `Σ_m ‖u_m‖²_(−δ) Δt`
    pub l2_part: f64,
}

impl BesovEstimate {
    pub fn total(&self) -> f64 {
        self.seminorm_sq + self.l2_part
    }
}

/// Discrete Besov–Slobodetski norm `W^{γ,2}(0,T; W^{−δ,2})` of a trajectory
/// sampled at uniform Δt.
pub fn besov_estimate(
    traj: &Trajectory,
    scale: &SpectralScale<'_>,
    gamma: f64,
    delta: f64,
) -> Result<BesovEstimate> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::Parameter(format!("gamma = {gamma} outside (0, 1/2)")));
    }
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("delta = {delta} must be positive")));
    }
    let m = traj.len();
    if m < 2 {
        return Err(Error::Parameter("Besov estimate needs at least two samples".into()));
    }
    let dt = traj.times[1] - traj.times[0];
    for w in traj.times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::Parameter("trajectory samples are not uniform in time".into()));
        }
    }
    let n = traj.n_modes();
    let weights: Vec<f64> = scale.dual_weights(delta)[..n].to_vec();
    let norm_sq = |c: &[f64]| -> f64 { c.iter().zip(&weights).map(|(c, w)| w * c * c).sum() };
    let l2_part = traj.coeffs.iter().map(|c| norm_sq(c)).sum::<f64>() * dt;
    let kernel: Vec<f64> = (0..m)
        .map(|d| {
            if d == 0 {
                0.0
            } else {
                (d as f64 * dt).powf(-1.0 - 2.0 * gamma)
            }
        })
        .collect();
    let mut double = 0.0;
    let mut diff = vec![0.0; n];
    for a in 0..m {
        for b in a + 1..m {
            for (k, d) in diff.iter_mut().enumerate() {
                *d = traj.coeffs[a][k] - traj.coeffs[b][k];
            }
            double += 2.0 * norm_sq(&diff) * kernel[b - a];
        }
    }
    Ok(BesovEstimate {
        gamma,
        delta,
        seminorm_sq: double * dt * dt,
        l2_part,
    })
}

/// Test function for the weak formulation.
pub trait TestFunction {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    /// Second derivative if known analytically.
    fn second_derivative(&self, _x: f64) -> Option<f64> {
        None
    }
    fn id(&self) -> String;
}

/// Analytic test function given with its first two derivatives.
pub struct AnalyticTest<F, G, H> {
    pub name: String,
    pub f: F,
    pub df: G,
    pub d2f: H,
}

impl<F, G, H> TestFunction for AnalyticTest<F, G, H>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        (self.df)(x)
    }
    fn second_derivative(&self, x: f64) -> Option<f64> {
        Some((self.d2f)(x))
    }
    fn id(&self) -> String {
        self.name.clone()
    }
}

/// `(1 − x²)²`.
pub fn quartic_bump() -> impl TestFunction {
    AnalyticTest {
        name: "quartic_bump".to_string(),
        f: |x: f64| (1.0 - x * x).powi(2),
        df: |x: f64| -4.0 * x * (1.0 - x * x),
        d2f: |x: f64| 12.0 * x * x - 4.0,
    }
}

/// A piecewise-linear field used as test function.
pub struct FieldTest {
    pub name: String,
    pub field: Field,
}

impl TestFunction for FieldTest {
    fn value(&self, x: f64) -> f64 {
        self.field.eval(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        let mesh = self.field.mesh();
        if x <= -1.0 || x >= 1.0 {
            return 0.0;
        }
        let h = mesh.h();
        let cell = (((x + 1.0) / h).floor() as usize).min(mesh.n_cells() - 1);
        (self.field.node_value(cell + 1) - self.field.node_value(cell)) / h
    }
    fn id(&self) -> String {
        self.name.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakResidualReport {
    pub test_id: String,
    pub times: Vec<f64>,
    pub residual: Vec<f64>,
    /// Whether `rho·φ''` stays bounded towards ±1 (None if φ'' unknown).
    pub rho_curvature_bounded: Option<bool>,
}

impl WeakResidualReport {
    pub fn max(&self) -> f64 {
        self.residual.iter().fold(0.0f64, |m, r| m.max(*r))
    }
}

fn validate_test_function(phi: &dyn TestFunction, alpha: FractionalOrder) -> Result<Option<bool>> {
    let reject = |why: String| Err(Error::Parameter(format!("test function `{}` rejected: {why}", phi.id())));
    for &x in &[-1.0, 1.0] {
        let v = phi.value(x);
        if !v.is_finite() || v.abs() > 1e-12 {
            return reject(format!("value {v} at x = {x}, must vanish on the boundary"));
        }
    }
    let probe: Vec<f64> = (0..=200).map(|i| -1.0 + 0.01 * i as f64).collect();
    for &x in &probe {
        if !phi.value(x).is_finite() || !phi.derivative(x).is_finite() {
            return reject(format!("non-finite value or derivative at x = {x}"));
        }
        if let Some(d2) = phi.second_derivative(x) {
            if !d2.is_finite() {
                return reject(format!("non-finite second derivative at x = {x}"));
            }
        }
    }
    if phi.second_derivative(0.0).is_none() {
        return Ok(None);
    }
    // growth of rho φ'' approaching both endpoints
    let mut bounded = true;
    for sign in [-1.0, 1.0] {
        let near = |k: i32| {
            let x = sign * (1.0 - 10f64.powi(-k));
            rho_weight(x, alpha).unwrap() * phi.second_derivative(x).unwrap().abs()
        };
        let (a, b) = (near(2), near(8));
        if b > 10.0 * a.max(1e-300) && b > 1e-8 {
            bounded = false;
        }
    }
    Ok(Some(bounded))
}

/// Weak-form residual
/// `|(u,φ) + ∫(u,(−Δ)^{α/2}φ) − ½∫(u²,φ_x) − (u_0,φ)|` along a trajectory.
///
/// `(u, (−Δ)^{α/2}φ)` uses the discrete strong image of the interpolant of φ,
/// i.e. `uᵀ A φ_I`; the remaining pairings are integrated against φ exactly
/// per cell; time integrals are trapezoidal over the samples.
pub fn weak_residual(
    traj: &Trajectory,
    basis: &EigenBasis,
    form: &NonlocalForm,
    phi: &dyn TestFunction,
) -> Result<WeakResidualReport> {
    let rho_bounded = validate_test_function(phi, form.alpha())?;
    if basis.mesh() != form.mesh() {
        return Err(Error::Dimension {
            expected: form.mesh().dofs(),
            got: basis.mesh().dofs(),
        });
    }
    let mesh = form.mesh();
    let h = mesh.h();
    let rule = GaussRule::new(6);
    let phi_i = Field::interpolate(mesh, |x| phi.value(x));
    let a_phi = apply_operator(form, &phi_i)?;

    let pairings = |c: &[f64]| -> (f64, f64, f64) {
        let u = basis.reconstruct(c);
        let lin: f64 = u.values().iter().zip(&a_phi).map(|(a, b)| a * b).sum();
        let mut up = 0.0;
        let mut u2px = 0.0;
        for e in 0..mesh.n_cells() {
            let (ua, ub) = (u.node_value(e), u.node_value(e + 1));
            if ua == 0.0 && ub == 0.0 {
                continue;
            }
            let x0 = mesh.node(e);
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let x = x0 + h * t;
                let uv = ua * (1.0 - t) + ub * t;
                up += w * h * uv * phi.value(x);
                u2px += w * h * uv * uv * phi.derivative(x);
            }
        }
        (up, lin, u2px)
    };

    let rows: Vec<(f64, f64, f64)> = traj.coeffs.iter().map(|c| pairings(c)).collect();
    let mut residual = Vec::with_capacity(rows.len());
    let mut int_lin = 0.0;
    let mut int_conv = 0.0;
    let up0 = rows.first().map_or(0.0, |r| r.0);
    for (m, r) in rows.iter().enumerate() {
        if m > 0 {
            let dt = traj.times[m] - traj.times[m - 1];
            int_lin += 0.5 * dt * (rows[m - 1].1 + r.1);
            int_conv += 0.5 * dt * (rows[m - 1].2 + r.2);
        }
        residual.push((r.0 + int_lin - 0.5 * int_conv - up0).abs());
    }
    Ok(WeakResidualReport {
        test_id: phi.id(),
        times: traj.times.clone(),
        residual,
        rho_curvature_bounded: rho_bounded,
    })
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub coarse: usize,
    pub fine: usize,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Successive differences strictly decrease.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].difference < w[0].difference)
    }
}

/// `‖a − b‖_{L²(0,T;H)}` for trajectories on the same time grid; missing
/// modes count as zero.
pub fn l2_time_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.n_modes().max(b.n_modes());
    let d2: Vec<f64> = (0..a.len())
        .map(|m| {
            (0..n)
                .map(|k| {
                    let x = a.coeffs[m].get(k).copied().unwrap_or(0.0);
                    let y = b.coeffs[m].get(k).copied().unwrap_or(0.0);
                    (x - y).powi(2)
                })
                .sum()
        })
        .collect();
    let mut s = 0.0;
    for m in 1..a.len() {
        s += 0.5 * (a.times[m] - a.times[m - 1]) * (d2[m - 1] + d2[m]);
    }
    Ok(s.sqrt())
}

/// Deterministic Galerkin self-convergence in the number of modes: runs the
/// system with the first `n` modes of `basis` for each `n` in `n_list`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_in_modes(
    basis: &EigenBasis,
    make_nl: &dyn Fn(&EigenBasis) -> Box<dyn Nonlinearity>,
    u0: &Field,
    n_list: &[usize],
    dt: f64,
    t_final: f64,
    stride: usize,
    integrator: Integrator,
) -> Result<(ConvergenceTable, Vec<Trajectory>)> {
    if n_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("n_list must be ascending".into()));
    }
    let mut trajs = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let b = basis.truncated(n)?;
        let nl = make_nl(&b);
        let c0 = crate::galerkin::project(&b, u0)?;
        trajs.push(run_deterministic(&b, nl.as_ref(), &c0, dt, t_final, stride, integrator)?);
    }
    let mut rows = Vec::new();
    for i in 1..n_list.len() {
        rows.push(ConvergenceRow {
            coarse: n_list[i - 1],
            fine: n_list[i],
            difference: l2_time_distance(&trajs[i - 1], &trajs[i])?,
        });
    }
    Ok((ConvergenceTable { rows }, trajs))
}

/// Builds a deterministic trajectory's ledger and checks dissipation; handy
/// for callers that only need the verdict pair.
pub fn deterministic_ledger_verdicts(traj: &Trajectory, rel_tol: f64) -> Result<(BalanceCheck, bool)> {
    let ledger = EnergyLedger::from_trajectory(traj);
    Ok((check_energy_balance(&ledger, rel_tol)?, ledger.dissipative(0.0)))
}

/// Mean modal trajectory over sampled paths.
pub fn mean_trajectory(samples: &[&Trajectory]) -> Result<Trajectory> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Parameter("no sampled paths".into()))?;
    let mut out = Trajectory::new(first.lambdas.clone());
    for m in 0..first.len() {
        let n = first.n_modes();
        let mut c = vec![0.0; n];
        for tr in samples {
            for (k, v) in c.iter_mut().enumerate() {
                *v += tr.coeffs[m][k];
            }
        }
        c.iter_mut().for_each(|v| *v /= samples.len() as f64);
        out.push(&ModalState { c, t: first.times[m] });
    }
    Ok(out)
}

/// Uniform-in-n ladder test: every level below `factor ×` the larger of the
/// two coarsest levels, and every level's 3-SE interval overlapping that
/// reference level's interval.
pub fn ladder_bounded(levels: &[Estimate], factor: f64) -> (bool, f64) {
    if levels.len() < 2 {
        return (true, 0.0);
    }
    let reference = if levels[0].mean >= levels[1].mean {
        levels[0]
    } else {
        levels[1]
    };
    let mut worst = 0.0f64;
    let mut ok = true;
    for l in levels {
        worst = worst.max(l.mean / reference.mean);
        if l.mean > factor * reference.mean || !l.overlaps(&reference, 3.0) {
            ok = false;
        }
    }
    (ok, worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj_from(times: &[f64], coeffs: Vec<Vec<f64>>, lambdas: Vec<f64>) -> Trajectory {
        let mut t = Trajectory::new(lambdas);
        for (time, c) in times.iter().zip(coeffs) {
            t.push(&ModalState { c, t: *time });
        }
        t
    }

    #[test]
    fn zero_ledger_has_zero_residual() {
        let tr = traj_from(&[0.0, 0.1, 0.2], vec![vec![0.0, 0.0]; 3], vec![1.0, 2.0]);
        let l = EnergyLedger::from_trajectory(&tr);
        assert!(l.balance_residual.iter().all(|r| *r == 0.0));
        assert!(check_energy_balance(&l, 0.0).unwrap().passed);
        let empty = EnergyLedger::from_series(&[], &[], &[], None);
        assert!(check_energy_balance(&empty, 1.0).is_err());
    }

    #[test]
    fn gronwall_closed_forms() {
        assert_eq!(gronwall_envelope(0.0, 0.0, 1.0, 0.7), 0.7);
        let lam = 0.01 * 49.0 / 36.0;
        assert!((gronwall_envelope(0.0, lam, 1.0, 0.7) - (0.7 + lam)).abs() < 1e-15);
    }

    #[test]
    fn ladder_rule() {
        let e = |m: f64, se: f64| Estimate { mean: m, se };
        assert!(ladder_bounded(&[e(1.0, 0.01), e(1.02, 0.01), e(1.03, 0.01)], 1.1).0);
        assert!(!ladder_bounded(&[e(1.0, 0.01), e(1.0, 0.01), e(1.5, 0.01)], 1.1).0);
    }

    #[test]
    fn verdict_csv_schema() {
        let mut buf = Vec::new();
        write_verdicts(&mut buf, &[Verdict::at_most("x", 0.5, 1.0)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("check_id,quantity,threshold,verdict\n"));
        assert!(s.trim_end().ends_with(",pass"));
    }
}
