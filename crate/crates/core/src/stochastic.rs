//! Q-Wiener forcing and the drift-implicit Euler–Maruyama scheme for the
//! Galerkin SDE.
//!
//! The covariance `Q` is diagonal in the operator eigenmodes: `Q φ_i = q_i φ_i`
//! for `i ≤ m`, so the noise projection onto the first `n` modes is a
//! coordinate truncation and Hilbert–Schmidt norms are diagonal sums.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::galerkin::{check_finite, ModalState, Nonlinearity, Trajectory};

/// Noise intensity `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intensity {
    /// `g(u) h = σ h`.
    Additive { sigma: f64 },
    /// `g(u) h = σ Σ_i c_i ⟨h, φ_i⟩ φ_i` (diagonal multiplication by the state).
    Multiplicative { sigma: f64 },
}

impl Intensity {
    pub fn sigma(&self) -> f64 {
        match *self {
            Intensity::Additive { sigma } | Intensity::Multiplicative { sigma } => sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    q: Vec<f64>,
    intensity: Intensity,
}

impl NoiseModel {
    pub fn new(q: Vec<f64>, intensity: Intensity) -> Result<Self> {
        if q.is_empty() || q.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Parameter(
                "covariance spectrum must be non-empty and strictly positive".into(),
            ));
        }
        if !(intensity.sigma().is_finite() && intensity.sigma() >= 0.0) {
            return Err(Error::Parameter(format!(
                "sigma = {} must be finite and non-negative",
                intensity.sigma()
            )));
        }
        Ok(NoiseModel { q, intensity })
    }

    /// `q_i = i^{-(1+ε)}`, `i = 1..=m`.
    pub fn power_law(m: usize, epsilon: f64, intensity: Intensity) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Parameter(format!("epsilon = {epsilon} must be positive")));
        }
        Self::new(
            (1..=m).map(|i| (i as f64).powf(-(1.0 + epsilon))).collect(),
            intensity,
        )
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.q
    }

    pub fn intensity(&self) -> Intensity {
        self.intensity
    }

    pub fn trace(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn q_max(&self) -> f64 {
        self.q.iter().fold(0.0f64, |m, v| m.max(*v))
    }

    /// Growth constants `(C, λ)` with `‖g(u)‖²_HS ≤ C‖u‖²_H + λ`.
    pub fn growth_constants(&self) -> (f64, f64) {
        match self.intensity {
            Intensity::Additive { sigma } => (0.0, sigma * sigma * self.trace()),
            Intensity::Multiplicative { sigma } => (sigma * sigma * self.q_max(), 0.0),
        }
    }

    /// Lipschitz constant `L` with `‖g(u) − g(v)‖_HS ≤ L‖u − v‖_H`.
    pub fn lipschitz(&self) -> f64 {
        match self.intensity {
            Intensity::Additive { .. } => 0.0,
            Intensity::Multiplicative { sigma } => sigma * self.q_max().sqrt(),
        }
    }
}

/// `ζ(1+ε)`-type bound on the partial sums of `i^{-(1+ε)}`: `1 + 1/ε`.
pub fn power_law_trace_bound(epsilon: f64) -> f64 {
    1.0 + 1.0 / epsilon
}

/// Per-path random stream: ChaCha8 keyed by `seed`, stream id = path id.
#[derive(Debug, Clone)]
pub struct PathRng {
    rng: ChaCha8Rng,
}

impl PathRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        PathRng { rng }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// `ΔW_i = sqrt(q_i dt) ξ_i`, `i = 1..=m`.
pub fn wiener_increment(model: &NoiseModel, dt: f64, rng: &mut PathRng) -> Vec<f64> {
    let mut out = vec![0.0; model.dim()];
    fill_increment(model, dt, rng, &mut out);
    out
}

fn fill_increment(model: &NoiseModel, dt: f64, rng: &mut PathRng, out: &mut [f64]) {
    for (o, q) in out.iter_mut().zip(&model.q) {
        *o = (q * dt).sqrt() * rng.standard_normal();
    }
}

/// `‖P_n g(u) P̃_n‖²_HS` with the noise truncated to `i ≤ min(m, n)`.
pub fn hs_norm_sq(model: &NoiseModel, state: &ModalState) -> f64 {
    let k = model.dim().min(state.c.len());
    match model.intensity {
        Intensity::Additive { sigma } => sigma * sigma * model.q[..k].iter().sum::<f64>(),
        Intensity::Multiplicative { sigma } => {
            sigma * sigma
                * model.q[..k]
                    .iter()
                    .zip(&state.c)
                    .map(|(q, c)| q * c * c)
                    .sum::<f64>()
        }
    }
}

/// `(g(c) ΔW)_k` for `k ≤ min(m, n)`.
fn noise_term(model: &NoiseModel, c: &[f64], dw: &[f64], k: usize) -> f64 {
    match model.intensity {
        Intensity::Additive { sigma } => sigma * dw[k],
        Intensity::Multiplicative { sigma } => sigma * c[k] * dw[k],
    }
}

/// One drift-implicit Euler–Maruyama step:
/// `c⁺_k = [c_k + dt N_k(c) + (g(c)ΔW)_k] / (1 + λ_k dt)`.
pub fn step_sde<N: Nonlinearity + ?Sized>(
    state: &ModalState,
    dt: f64,
    lambdas: &[f64],
    nl: &N,
    model: &NoiseModel,
    rng: &mut PathRng,
) -> Result<ModalState> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("dt = {dt} must be positive")));
    }
    let mut scratch = StepScratch::new(state.c.len(), model.dim());
    let mut next = state.clone();
    advance(&mut next, dt, lambdas, nl, model, rng, &mut scratch, None)?;
    Ok(next)
}

struct StepScratch {
    drift: Vec<f64>,
    dw: Vec<f64>,
}

impl StepScratch {
    fn new(n: usize, m: usize) -> Self {
        StepScratch {
            drift: vec![0.0; n],
            dw: vec![0.0; m],
        }
    }
}

/// In-place step; returns the bias-bound increment of the energy ledger
/// (see [`PathCheckpoint::bias_bound`]).
#[allow(clippy::too_many_arguments)]
fn advance<N: Nonlinearity + ?Sized>(
    state: &mut ModalState,
    dt: f64,
    lambdas: &[f64],
    nl: &N,
    model: &NoiseModel,
    rng: &mut PathRng,
    scratch: &mut StepScratch,
    path: Option<u64>,
) -> Result<f64> {
    let n = state.c.len();
    let k_noise = model.dim().min(n);
    nl.eval(&state.c, &mut scratch.drift);
    // all m increments are drawn each step so that nested truncations share noise
    fill_increment(model, dt, rng, &mut scratch.dw);
    let sigma = model.intensity.sigma();
    let mut bias = 0.0;
    for k in 0..n {
        let c = state.c[k];
        let nk = scratch.drift[k];
        let lam = lambdas[k];
        let mut rhs = c + dt * nk;
        let mut s2 = 0.0;
        if k < k_noise {
            rhs += noise_term(model, &state.c, &scratch.dw, k);
            s2 = match model.intensity {
                Intensity::Additive { .. } => sigma * sigma * model.q[k] * dt,
                Intensity::Multiplicative { .. } => sigma * sigma * model.q[k] * c * c * dt,
            };
        }
        bias += dt * dt * ((lam * c.abs() + nk.abs()).powi(2) + 2.0 * lam * (nk * c).abs() + 2.0 * nk * nk)
            + (lam * dt).powi(2) * s2;
        state.c[k] = rhs / (1.0 + lam * dt);
    }
    state.t += dt;
    check_finite(state, path)?;
    Ok(bias)
}

/// Everything a stochastic run needs besides the random stream.
pub struct SdeProblem<'a> {
    pub lambdas: &'a [f64],
    pub nl: &'a (dyn Nonlinearity + 'a),
    pub model: &'a NoiseModel,
    pub c0: &'a [f64],
    pub dt: f64,
    pub steps: usize,
}

/// Path statistics at one checkpoint.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PathCheckpoint {
    pub t: f64,
    /// `‖u(t)‖²_H`
    pub h2: f64,
    /// trapezoidal `∫_0^t ‖u‖²_V ds`
    pub v2_int: f64,
    /// trapezoidal `∫_0^t ‖g(u)‖²_HS ds`
    pub hs_int: f64,
    /// `sup_{s ≤ t} ‖u(s)‖⁴_H` over all steps
    pub sup_h4: f64,
    /// Upper bound on the conditional bias of the scheme's energy balance:
    /// `Σ dt²[(λ|c|+|N|)² + 2λ|Nc| + 2N²] + (λdt)² E(gΔW)²`, plus the
    /// trapezoid-vs-endpoint terms `dt|V(0) − V(t)| + dt/2 |HS(t) − HS(0)|`.
    pub bias_bound: f64,
}

impl PathCheckpoint {
    /// `‖u‖² + 2∫‖u‖²_V − ∫‖g‖²_HS − ‖u_0‖²`.
    pub fn balance(&self, h2_0: f64) -> f64 {
        self.h2 + 2.0 * self.v2_int - self.hs_int - h2_0
    }
}

/// Result of one simulated path.
#[derive(Debug, Clone)]
pub struct PathOutcome {
    pub path_id: u64,
    pub checkpoints: Vec<PathCheckpoint>,
    pub samples: Option<Trajectory>,
}

/// Simulates one path, recording checkpoints every `checkpoint_every` steps
/// (plus t = 0) and, if requested, the modal state every `sample_every` steps.
pub fn simulate_path(
    problem: &SdeProblem<'_>,
    seed: u64,
    path_id: u64,
    checkpoint_every: usize,
    sample_every: Option<usize>,
) -> Result<PathOutcome> {
    let n = problem.c0.len();
    let lambdas = &problem.lambdas[..n];
    let dt = problem.dt;
    let mut rng = PathRng::new(seed, path_id);
    let mut state = ModalState {
        c: problem.c0.to_vec(),
        t: 0.0,
    };
    let mut scratch = StepScratch::new(n, problem.model.dim());
    let v0 = state.v2(lambdas);
    let hs0 = hs_norm_sq(problem.model, &state);
    let h0 = state.h2();
    let mut cp = PathCheckpoint {
        t: 0.0,
        h2: h0,
        v2_int: 0.0,
        hs_int: 0.0,
        sup_h4: h0 * h0,
        bias_bound: 0.0,
    };
    let mut checkpoints = vec![cp];
    let mut samples = sample_every.map(|_| {
        let mut t = Trajectory::new(lambdas.to_vec());
        t.push(&state);
        t
    });
    let mut v_prev = v0;
    let mut hs_prev = hs0;
    let mut bias_acc = 0.0;
    let checkpoint_every = checkpoint_every.max(1);
    for step in 1..=problem.steps {
        bias_acc += advance(
            &mut state,
            dt,
            lambdas,
            problem.nl,
            problem.model,
            &mut rng,
            &mut scratch,
            Some(path_id),
        )?;
        state.t = step as f64 * dt;
        let v = state.v2(lambdas);
        let hs = hs_norm_sq(problem.model, &state);
        let h2 = state.h2();
        cp.t = state.t;
        cp.h2 = h2;
        cp.v2_int += 0.5 * dt * (v_prev + v);
        cp.hs_int += 0.5 * dt * (hs_prev + hs);
        cp.sup_h4 = cp.sup_h4.max(h2 * h2);
        v_prev = v;
        hs_prev = hs;
        if step % checkpoint_every == 0 || step == problem.steps {
            cp.bias_bound = bias_acc + dt * (v0 - v).abs() + 0.5 * dt * (hs - hs0).abs();
            checkpoints.push(cp);
        }
        if let (Some(every), Some(tr)) = (sample_every, samples.as_mut()) {
            if step % every.max(1) == 0 {
                tr.push(&state);
            }
        }
    }
    Ok(PathOutcome {
        path_id,
        checkpoints,
        samples,
    })
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Mean and standard error, summed in input order.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Estimate { mean, se: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        Estimate {
            mean,
            se: (var / n as f64).sqrt(),
        }
    }

    /// Confidence interval `mean ± k·se`.
    pub fn interval(&self, k: f64) -> (f64, f64) {
        (self.mean - k * self.se, self.mean + k * self.se)
    }

    pub fn overlaps(&self, other: &Estimate, k: f64) -> bool {
        let (a0, a1) = self.interval(k);
        let (b0, b1) = other.interval(k);
        a0 <= b1 && b0 <= a1
    }
}

/// Monte Carlo moments at one checkpoint time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentRow {
    pub t: f64,
    pub h2: Estimate,
    pub v2_int: Estimate,
    pub sup_h4: Estimate,
    pub hs_int: Estimate,
    pub balance: Estimate,
    pub bias_bound: Estimate,
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub h2_0: f64,
    pub rows: Vec<MomentRow>,
    pub outcomes: Vec<PathOutcome>,
}

/// Runs `paths` independent paths (parallel over paths) and reduces in
/// path-id order, so results do not depend on the worker count.
pub fn run_ensemble(
    problem: &SdeProblem<'_>,
    seed: u64,
    paths: usize,
    checkpoint_every: usize,
    sample_every: Option<usize>,
) -> Result<Ensemble> {
    if paths == 0 {
        return Err(Error::Parameter("mc_paths must be positive".into()));
    }
    let outcomes: Vec<PathOutcome> = (0..paths as u64)
        .into_par_iter()
        .map(|p| simulate_path(problem, seed, p, checkpoint_every, sample_every))
        .collect::<Result<_>>()?;
    let h2_0: f64 = problem.c0.iter().map(|c| c * c).sum();
    let n_cp = outcomes[0].checkpoints.len();
    let rows = (0..n_cp)
        .map(|i| {
            let pick = |f: &dyn Fn(&PathCheckpoint) -> f64| -> Estimate {
                let xs: Vec<f64> = outcomes.iter().map(|o| f(&o.checkpoints[i])).collect();
                Estimate::from_samples(&xs)
            };
            MomentRow {
                t: outcomes[0].checkpoints[i].t,
                h2: pick(&|c| c.h2),
                v2_int: pick(&|c| c.v2_int),
                sup_h4: pick(&|c| c.sup_h4),
                hs_int: pick(&|c| c.hs_int),
                balance: pick(&|c| c.balance(h2_0)),
                bias_bound: pick(&|c| c.bias_bound),
            }
        })
        .collect();
    Ok(Ensemble {
        h2_0,
        rows,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::ZeroDrift;

    #[test]
    fn hs_norm_examples() {
        let zero = NoiseModel::new(vec![1.0, 0.25, 1.0 / 9.0], Intensity::Additive { sigma: 0.0 }).unwrap();
        assert_eq!(hs_norm_sq(&zero, &ModalState::zeros(3)), 0.0);
        let m = NoiseModel::new(vec![1.0, 0.25, 1.0 / 9.0], Intensity::Additive { sigma: 1.0 }).unwrap();
        assert!((hs_norm_sq(&m, &ModalState::zeros(3)) - 49.0 / 36.0).abs() < 1e-15);
        assert_eq!(m.growth_constants(), (0.0, m.trace()));
    }

    #[test]
    fn rng_streams_are_reproducible() {
        let m = NoiseModel::power_law(4, 0.1, Intensity::Additive { sigma: 1.0 }).unwrap();
        let mut a = PathRng::new(7, 3);
        let mut b = PathRng::new(7, 3);
        let mut c = PathRng::new(7, 4);
        let x = wiener_increment(&m, 0.01, &mut a);
        assert_eq!(x, wiener_increment(&m, 0.01, &mut b));
        assert_ne!(x, wiener_increment(&m, 0.01, &mut c));
    }

    #[test]
    fn zero_noise_step_is_implicit_decay() {
        let m = NoiseModel::power_law(2, 0.1, Intensity::Additive { sigma: 0.0 }).unwrap();
        let s = ModalState { c: vec![1.0, -2.0], t: 0.0 };
        let lam = [3.0, 10.0];
        let mut rng = PathRng::new(1, 0);
        let out = step_sde(&s, 0.01, &lam, &ZeroDrift(2), &m, &mut rng).unwrap();
        assert!((out.c[0] - 1.0 / 1.03).abs() < 1e-15);
        assert!((out.c[1] + 2.0 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(NoiseModel::new(vec![], Intensity::Additive { sigma: 1.0 }).is_err());
        assert!(NoiseModel::new(vec![1.0, -1.0], Intensity::Additive { sigma: 1.0 }).is_err());
        assert!(NoiseModel::power_law(3, 0.0, Intensity::Additive { sigma: 1.0 }).is_err());
    }

    #[test]
    fn estimate_of_constant_sample() {
        let e = Estimate::from_samples(&[2.0; 5]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
    }
}
