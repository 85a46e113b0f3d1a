//! The ten acceptance criteria as executable checks. `run_all` is what the
//! `check-all` subcommand and the `acceptance` test target execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::time::Instant;

use crate::config::{InitialCondition, NoiseConfig, NoiseKind, RunConfig};
use crate::diagnostics::{
    check_energy_balance, check_mean_energy_balance, gronwall_envelope, ladder_bounded,
    quartic_bump, weak_residual, EnergyLedger, Verdict,
};
use crate::error::{Error, Result};
use crate::galerkin::{convection_tensor, solve_eigenbasis, Integrator};
use crate::harness::{
    deterministic_run, ensemble_besov, stochastic_run, write_eigs,
    write_moments, write_path_trajectories, write_trajectory, write_weak_residual, Setup,
};
use crate::kernel::{
    assemble_form, getoor_constant, rho_weight, standard_strong_image, Field, FractionalOrder,
    Mesh,
};
use crate::oracle::exterior_weight_quadrature;
use crate::spaces::norms;
use crate::stochastic::{Ensemble, Estimate};

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl CriterionResult {
    fn new(id: u8, title: &'static str, verdicts: Vec<Verdict>, notes: Vec<String>, start: Instant) -> Self {
        let passed = !verdicts.is_empty() && verdicts.iter().all(|v| v.passed);
        CriterionResult {
            id,
            title,
            verdicts,
            passed,
            notes,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    fn failed(id: u8, title: &'static str, err: Error, start: Instant) -> Self {
        CriterionResult {
            id,
            title,
            verdicts: vec![Verdict {
                check_id: format!("c{id}.error"),
                quantity: f64::NAN,
                threshold: f64::NAN,
                passed: false,
            }],
            passed: false,
            notes: vec![err.to_string()],
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    /// One-line summary: `criterion N [PASS|FAIL] title: check=quantity (threshold) ...`.
    pub fn line(&self) -> String {
        let parts: Vec<String> = self
            .verdicts
            .iter()
            .map(|v| format!("{}={:.3e} ({}{:.3e})", v.check_id, v.quantity, if v.passed { "ok " } else { "X " }, v.threshold))
            .collect();
        let mut s = format!(
            "criterion {:>2} [{}] {} ({:.1}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.seconds,
            parts.join(", ")
        );
        if !self.notes.is_empty() {
            s.push_str(" | ");
            s.push_str(&self.notes.join("; "));
        }
        s
    }
}

fn wrap(id: u8, title: &'static str, f: impl FnOnce() -> Result<(Vec<Verdict>, Vec<String>)>) -> CriterionResult {
    let start = Instant::now();
    match f() {
        Ok((v, n)) => CriterionResult::new(id, title, v, n, start),
        Err(e) => CriterionResult::failed(id, title, e, start),
    }
}

const ALPHAS: [f64; 3] = [0.5, 1.0, 1.5];

/// Strong image of `(1−x²)^{α/2}` against the closed-form constant on the
/// interior third, across four meshes.
pub fn criterion_1() -> CriterionResult {
    wrap(1, "operator oracle", || {
        let mut verdicts = Vec::new();
        let mut notes = Vec::new();
        for a in ALPHAS {
            let alpha = FractionalOrder::new(a)?;
            let target = getoor_constant(alpha);
            let mut errs = Vec::new();
            for n in [128, 256, 512, 1024] {
                let form = assemble_form(Mesh::new(n)?, alpha)?;
                let u = Field::interpolate(form.mesh(), |x| (1.0 - x * x).powf(a / 2.0));
                let img = standard_strong_image(&form, &u)?;
                let mesh = form.mesh();
                let err = (1..n)
                    .filter(|&j| mesh.node(j).abs() <= 1.0 / 3.0 + 1e-12)
                    .map(|j| (img.node_value(j) - target).abs())
                    .fold(0.0f64, f64::max);
                errs.push(err);
            }
            let ratio = errs.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min);
            notes.push(format!("alpha={a}: err@1024={:.2e}", errs[3]));
            verdicts.push(Verdict::at_least(format!("c1.halving_ratio.alpha={a}"), ratio, 1.3));
        }
        Ok((verdicts, notes))
    })
}

/// `rho_weight` against adaptive quadrature of the exterior integral.
pub fn criterion_2() -> CriterionResult {
    wrap(2, "weight exactness", || {
        let mut worst = 0.0f64;
        for a in ALPHAS {
            let alpha = FractionalOrder::new(a)?;
            for i in 0..20 {
                let x = -0.95 + 1.9 * i as f64 / 19.0;
                let r = rho_weight(x, alpha)?;
                let q = exterior_weight_quadrature(x, a)?;
                worst = worst.max((r - q).abs() / q);
            }
        }
        Ok((vec![Verdict::at_most("c2.max_rel_err", worst, 1e-10)], vec![]))
    })
}

/// `‖u‖²_V = [u]² + ∫ρu²` on random fields, the seminorm from independent quadrature.
pub fn criterion_3() -> CriterionResult {
    wrap(3, "energy-identity split", || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut verdicts = Vec::new();
        for n in [32, 64] {
            let forms: Vec<_> = ALPHAS
                .iter()
                .map(|&a| assemble_form(Mesh::new(n)?, FractionalOrder::new(a)?))
                .collect::<Result<_>>()?;
            let mut worst = 0.0f64;
            for f in 0..50 {
                let form = &forms[f % 3];
                let v: Vec<f64> = (1..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let u = Field::new(form.mesh(), v)?;
                worst = worst.max(norms(&u, form)?.split_defect());
            }
            verdicts.push(Verdict::at_most(format!("c3.max_rel_defect.n_cells={n}"), worst, 1e-8));
        }
        Ok((verdicts, vec![]))
    })
}

/// Cubic contraction of the skew convection tensor on random modal states.
pub fn criterion_4() -> CriterionResult {
    wrap(4, "convection cancellation", || {
        let form = assemble_form(Mesh::new(64)?, FractionalOrder::new(1.5)?)?;
        let basis = solve_eigenbasis(&form, 32)?;
        let t = convection_tensor(&basis);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let c: Vec<f64> = (0..32).map(|_| StandardNormal.sample(&mut rng)).collect();
            let (total, scale) = t.cubic_contraction(&c);
            worst = worst.max(total.abs() / scale);
        }
        Ok((vec![Verdict::at_most("c4.max_rel_contraction", worst, 1e-12)], vec![]))
    })
}

pub fn energy_config(dt: f64) -> RunConfig {
    RunConfig {
        alpha: 1.5,
        n_cells: 64,
        n_modes: 32,
        dt,
        t_final: 1.0,
        initial: InitialCondition::SinBump,
        integrator: Integrator::Etd2,
        stride: 1,
        ..RunConfig::default()
    }
}

/// Deterministic ledger at dt and dt/2.
pub fn criterion_5() -> CriterionResult {
    wrap(5, "deterministic energy balance", || {
        let mut res = Vec::new();
        let mut dissipative = true;
        for dt in [1e-4, 5e-5] {
            let cfg = energy_config(dt);
            let setup = Setup::new(&cfg)?;
            let ledger = EnergyLedger::from_trajectory(&deterministic_run(&cfg, &setup)?);
            dissipative &= ledger.dissipative(0.0);
            res.push(check_energy_balance(&ledger, 1e-4)?.max_residual);
        }
        Ok((
            vec![
                Verdict::at_most("c5.max_rel_residual.dt=1e-4", res[0], 1e-4),
                Verdict::at_least("c5.halving_ratio", res[0] / res[1], 3.0),
            ],
            vec![format!("h2 non-increasing: {dissipative}")],
        ))
    })
}

pub fn ito_config() -> RunConfig {
    RunConfig {
        alpha: 1.5,
        n_cells: 64,
        n_modes: 8,
        dt: 2e-4,
        t_final: 1.0,
        initial: InitialCondition::SinBump,
        noise: Some(NoiseConfig {
            kind: NoiseKind::Additive,
            sigma: 0.1,
            epsilon: 0.1,
            m: None,
        }),
        mc_paths: 10_000,
        seed: 2024,
        checkpoints: 10,
        ..RunConfig::default()
    }
}

pub fn multiplicative_config() -> RunConfig {
    RunConfig {
        n_modes: 8,
        dt: 1e-3,
        noise: Some(NoiseConfig {
            kind: NoiseKind::Multiplicative,
            sigma: 0.5,
            epsilon: 0.1,
            m: None,
        }),
        mc_paths: 2000,
        seed: 7,
        ..ito_config()
    }
}

pub const LADDER: [usize; 4] = [8, 16, 32, 64];

pub fn ladder_config(n: usize) -> RunConfig {
    RunConfig {
        alpha: 1.5,
        n_cells: 128,
        n_modes: n,
        dt: 1e-3,
        t_final: 1.0,
        initial: InitialCondition::SinBump,
        stride: 10,
        noise: Some(NoiseConfig {
            kind: NoiseKind::Additive,
            sigma: 0.5,
            epsilon: 0.1,
            m: Some(64),
        }),
        mc_paths: 500,
        seed: 11,
        checkpoints: 10,
        gamma: 0.4,
        delta: None,
        ..RunConfig::default()
    }
}

/// Mean Itô balance at 10 checkpoints against 3 SE plus the bias band.
pub fn criterion_6(ens: &Result<Ensemble>) -> CriterionResult {
    wrap(6, "Ito mean-energy balance", || {
        let ens = ens.as_ref().map_err(|e| Error::Check(e.to_string()))?;
        let check = check_mean_energy_balance(&ens.rows, 3.0)?;
        let last = ens.rows.last().expect("rows");
        Ok((
            vec![Verdict::at_most("c6.max_ratio_to_allowance", check.max_residual, 1.0)],
            vec![format!(
                "at T: mean balance {:.2e}, SE {:.2e}, bias band {:.2e}",
                last.balance.mean, last.balance.se, last.bias_bound.mean
            )],
        ))
    })
}

/// Ratio of the MC estimates (lowered by 3 SE) to the Gronwall majorant.
pub fn gronwall_ratio(cfg: &RunConfig, ens: &Ensemble) -> Result<f64> {
    let model = cfg.noise.expect("noisy config").model(cfg.n_modes)?;
    let (c, lam) = model.growth_constants();
    let bound = gronwall_envelope(c, lam, cfg.t_final, ens.h2_0);
    let sup_h2 = ens
        .rows
        .iter()
        .map(|r| r.h2.mean - 3.0 * r.h2.se)
        .fold(f64::NEG_INFINITY, f64::max);
    let last = ens.rows.last().expect("rows");
    let v2 = 2.0 * (last.v2_int.mean - 3.0 * last.v2_int.se);
    Ok(sup_h2.max(v2) / bound)
}

pub fn criterion_7(runs: &[(String, RunConfig, &Result<Ensemble>)]) -> CriterionResult {
    wrap(7, "Gronwall envelope", || {
        let mut verdicts = Vec::new();
        for (name, cfg, ens) in runs {
            let ens = ens.as_ref().map_err(|e| Error::Check(e.to_string()))?;
            verdicts.push(Verdict::at_most(
                format!("c7.ratio_to_majorant.{name}"),
                gronwall_ratio(cfg, ens)?,
                1.0,
            ));
        }
        Ok((verdicts, vec![]))
    })
}

pub fn criterion_8(ladder: &[Result<Ensemble>]) -> CriterionResult {
    wrap(8, "uniform-in-n moment and Besov bounds", || {
        let mut moments = Vec::new();
        let mut besov = Vec::new();
        for (n, ens) in LADDER.iter().zip(ladder) {
            let ens = ens.as_ref().map_err(|e| Error::Check(e.to_string()))?;
            let cfg = ladder_config(*n);
            let basis = solve_eigenbasis(&assemble_form(Mesh::new(cfg.n_cells)?, cfg.order())?, *n)?;
            moments.push(ens.rows.last().expect("rows").sup_h4);
            besov.push(ensemble_besov(ens, &basis, &cfg)?.1);
        }
        let (m_ok, m_ratio) = ladder_bounded(&moments, 1.1);
        let (b_ok, b_ratio) = ladder_bounded(&besov, 1.2);
        let fmt = |v: &[Estimate]| {
            v.iter()
                .map(|e| format!("{:.4e}±{:.1e}", e.mean, e.se))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let verdict = |id: &str, ok: bool, ratio: f64, thr: f64| Verdict {
            check_id: id.into(),
            quantity: ratio,
            threshold: thr,
            passed: ok,
        };
        Ok((
            vec![
                verdict("c8.sup_h4_ratio", m_ok, m_ratio, 1.1),
                verdict("c8.besov_ratio", b_ok, b_ratio, 1.2),
            ],
            vec![format!("E sup|u|^4: {}", fmt(&moments)), format!("Besov: {}", fmt(&besov))],
        ))
    })
}

pub const WEAK_LEVELS: [(usize, f64); 4] = [(16, 4e-3), (32, 2e-3), (64, 1e-3), (128, 5e-4)];

pub fn weak_config(n_cells: usize, dt: f64) -> RunConfig {
    RunConfig {
        alpha: 1.5,
        n_cells,
        n_modes: n_cells - 1,
        dt,
        t_final: 1.0,
        initial: InitialCondition::SinBump,
        stride: 1,
        ..RunConfig::default()
    }
}

/// Maximum weak residual for `φ = (1−x²)²` on each refinement level.
pub fn weak_residual_levels() -> Result<Vec<f64>> {
    WEAK_LEVELS
        .iter()
        .map(|&(n, dt)| {
            let cfg = weak_config(n, dt);
            let setup = Setup::new(&cfg)?;
            let tr = deterministic_run(&cfg, &setup)?;
            Ok(weak_residual(&tr, &setup.basis, &setup.form, &quartic_bump())?.max())
        })
        .collect()
}

pub fn criterion_9() -> CriterionResult {
    wrap(9, "weak residual", || {
        let r = weak_residual_levels()?;
        let ratio = r.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min);
        Ok((
            vec![Verdict::at_least("c9.min_refinement_ratio", ratio, 1.5)],
            vec![format!(
                "residuals {}",
                r.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(" ")
            )],
        ))
    })
}

/// Every CSV a small deterministic and stochastic config produce, in memory.
pub fn render_outputs() -> Result<Vec<(String, Vec<u8>)>> {
    let det = RunConfig {
        n_cells: 32,
        n_modes: 12,
        dt: 1e-3,
        t_final: 0.2,
        stride: 5,
        ..RunConfig::default()
    };
    let sde = RunConfig {
        noise: Some(NoiseConfig {
            kind: NoiseKind::Multiplicative,
            sigma: 0.3,
            epsilon: 0.1,
            m: None,
        }),
        mc_paths: 64,
        initial: InitialCondition::RandomModal { k: 6, seed: 5 },
        ..det.clone()
    };
    let mut out = Vec::new();
    let setup = Setup::new(&det)?;
    let mut b = Vec::new();
    write_eigs(&mut b, &setup.basis)?;
    out.push(("eigs".to_string(), b));
    let tr = deterministic_run(&det, &setup)?;
    let mut b = Vec::new();
    write_trajectory(&mut b, &tr)?;
    out.push(("run-det".to_string(), b));
    let rep = weak_residual(&tr, &setup.basis, &setup.form, &quartic_bump())?;
    let mut b = Vec::new();
    write_weak_residual(&mut b, &rep)?;
    out.push(("weak-residual".to_string(), b));
    let ens = stochastic_run(&sde, &setup, true)?;
    let mut b = Vec::new();
    write_path_trajectories(&mut b, &ens)?;
    out.push(("run-sde".to_string(), b));
    let mut b = Vec::new();
    write_moments(&mut b, &ens.rows)?;
    out.push(("mc-moments".to_string(), b));
    let (per_path, _) = ensemble_besov(&ens, &setup.basis, &sde)?;
    let mut b = Vec::new();
    crate::harness::write_besov(&mut b, &per_path)?;
    out.push(("besov".to_string(), b));
    Ok(out)
}

pub fn criterion_10() -> CriterionResult {
    wrap(10, "reproducibility", || {
        let pool = |k: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Check(format!("thread pool: {e}")))
        };
        let a = pool(1)?.install(render_outputs)?;
        let b = pool(1)?.install(render_outputs)?;
        let c = pool(4)?.install(render_outputs)?;
        let mut mismatches = Vec::new();
        for ((name, x), ((_, y), (_, z))) in a.iter().zip(b.iter().zip(&c)) {
            if x != y {
                mismatches.push(format!("{name}: rerun differs"));
            }
            if x != z {
                mismatches.push(format!("{name}: 1 vs 4 threads differ"));
            }
        }
        Ok((
            vec![Verdict::at_most("c10.mismatched_outputs", mismatches.len() as f64, 0.0)],
            mismatches,
        ))
    })
}

/// Runs all ten criteria; the stochastic ensembles are shared between
/// criteria 6, 7 and 8.
pub fn run_all() -> Vec<CriterionResult> {
    run_all_with(&mut |_| {})
}

/// Same, reporting each result as soon as it is available.
pub fn run_all_with(report: &mut dyn FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut out = Vec::new();
    let mut emit = |r: CriterionResult, out: &mut Vec<CriterionResult>| {
        report(&r);
        out.push(r);
    };
    emit(criterion_1(), &mut out);
    emit(criterion_2(), &mut out);
    emit(criterion_3(), &mut out);
    emit(criterion_4(), &mut out);
    emit(criterion_5(), &mut out);

    let sample_run = |cfg: &RunConfig, samples: bool| Setup::new(cfg).and_then(|s| stochastic_run(cfg, &s, samples));
    let timed = |r: CriterionResult, start: Instant| CriterionResult {
        seconds: start.elapsed().as_secs_f64(),
        ..r
    };
    let start = Instant::now();
    let ito_cfg = ito_config();
    let ito = sample_run(&ito_cfg, false);
    emit(timed(criterion_6(&ito), start), &mut out);

    let start = Instant::now();
    let ladder: Vec<Result<Ensemble>> = LADDER.iter().map(|&n| sample_run(&ladder_config(n), true)).collect();
    let ladder_secs = start.elapsed();
    let start = Instant::now();
    let mult_cfg = multiplicative_config();
    let mult = sample_run(&mult_cfg, false);
    let mut runs: Vec<(String, RunConfig, &Result<Ensemble>)> = vec![
        ("additive_n8".into(), ito_cfg, &ito),
        ("multiplicative_n8".into(), mult_cfg, &mult),
    ];
    for (n, e) in LADDER.iter().zip(&ladder) {
        runs.push((format!("ladder_n{n}"), ladder_config(*n), e));
    }
    emit(timed(criterion_7(&runs), start), &mut out);
    let start = Instant::now() - ladder_secs;
    emit(timed(criterion_8(&ladder), start), &mut out);
    emit(criterion_9(), &mut out);
    emit(criterion_10(), &mut out);
    out
}
