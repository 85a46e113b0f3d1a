//! Pipelines behind the CLI subcommands, the CSV writers and the run
//! manifest. All numbers written are formatted with `{:.16e}`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{EnvOverrides, RunConfig};
use crate::diagnostics::{
    besov_estimate, convergence_in_modes, l2_time_distance, mean_trajectory, quartic_bump,
    weak_residual, write_verdicts, BesovEstimate, ConvergenceRow, ConvergenceTable,
    WeakResidualReport, SPECTRAL_NOTE,
};
use crate::error::{Error, Result};
use crate::galerkin::{
    convection_tensor, run_deterministic, solve_eigenbasis, EigenBasis, NodalConvection,
    Nonlinearity, Trajectory,
};
use crate::kernel::{assemble_form, Mesh, NonlocalForm};
use crate::spaces::SpectralScale;
use crate::stochastic::{run_ensemble, Ensemble, Estimate, MomentRow, SdeProblem};

/// CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Assemble,
    Eigs,
    RunDet,
    RunSde,
    McMoments,
    Besov,
    WeakResidual,
    Convergence,
    CheckAll,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Assemble => "assemble",
            Subcommand::Eigs => "eigs",
            Subcommand::RunDet => "run-det",
            Subcommand::RunSde => "run-sde",
            Subcommand::McMoments => "mc-moments",
            Subcommand::Besov => "besov",
            Subcommand::WeakResidual => "weak-residual",
            Subcommand::Convergence => "convergence",
            Subcommand::CheckAll => "check-all",
        }
    }
}

/// Picks the cheaper of the two equivalent convection evaluators.
pub fn make_nonlinearity(basis: &EigenBasis) -> Box<dyn Nonlinearity> {
    let n = basis.n_modes();
    if n * n <= 4 * basis.mesh().dofs() {
        Box::new(convection_tensor(basis))
    } else {
        Box::new(NodalConvection::new(basis))
    }
}

/// Assembled operator and eigenbasis for a config.
pub struct Setup {
    pub form: NonlocalForm,
    pub basis: EigenBasis,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let form = assemble_form(Mesh::new(cfg.n_cells)?, cfg.order())?;
        let basis = solve_eigenbasis(&form, cfg.n_modes)?;
        Ok(Setup { form, basis })
    }
}

pub fn write_eigs<W: Write>(mut out: W, basis: &EigenBasis) -> Result<()> {
    writeln!(out, "k,lambda_k")?;
    for (k, l) in basis.lambdas().iter().enumerate() {
        writeln!(out, "{},{:.16e}", k + 1, l)?;
    }
    out.flush()?;
    Ok(())
}

fn trajectory_header(n: usize, with_path: bool) -> String {
    let mut cols: Vec<String> = Vec::with_capacity(n + 4);
    if with_path {
        cols.push("path_id".into());
    }
    cols.push("t".into());
    cols.extend((1..=n).map(|k| format!("c_{k}")));
    cols.push("energy_H".into());
    cols.push("energy_V2".into());
    cols.join(",")
}

fn trajectory_rows<W: Write>(out: &mut W, traj: &Trajectory, path: Option<u64>) -> Result<()> {
    for m in 0..traj.len() {
        let mut line = String::new();
        if let Some(p) = path {
            line.push_str(&format!("{p},"));
        }
        line.push_str(&format!("{:.16e}", traj.times[m]));
        for c in &traj.coeffs[m] {
            line.push_str(&format!(",{c:.16e}"));
        }
        line.push_str(&format!(",{:.16e},{:.16e}", traj.h2(m), traj.v2(m)));
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// CSV `t, c_1..c_n, energy_H, energy_V2`.
pub fn write_trajectory<W: Write>(mut out: W, traj: &Trajectory) -> Result<()> {
    writeln!(out, "{}", trajectory_header(traj.n_modes(), false))?;
    trajectory_rows(&mut out, traj, None)?;
    out.flush()?;
    Ok(())
}

/// Same with a leading `path_id` column, paths in id order.
pub fn write_path_trajectories<W: Write>(mut out: W, ens: &Ensemble) -> Result<()> {
    let n = ens
        .outcomes
        .first()
        .and_then(|o| o.samples.as_ref())
        .map_or(0, |t| t.n_modes());
    writeln!(out, "{}", trajectory_header(n, true))?;
    for o in &ens.outcomes {
        if let Some(tr) = &o.samples {
            trajectory_rows(&mut out, tr, Some(o.path_id))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// CSV `t, mean_H2, se_H2, mean_V2_int, se_V2_int, mean_sup_H4, se_sup_H4, hs_int, se_hs_int`.
pub fn write_moments<W: Write>(mut out: W, rows: &[MomentRow]) -> Result<()> {
    writeln!(
        out,
        "t,mean_H2,se_H2,mean_V2_int,se_V2_int,mean_sup_H4,se_sup_H4,hs_int,se_hs_int"
    )?;
    for r in rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.h2.mean, r.h2.se, r.v2_int.mean, r.v2_int.se, r.sup_h4.mean, r.sup_h4.se,
            r.hs_int.mean, r.hs_int.se
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Per-path Besov estimates followed by nothing else; the mean is in the manifest.
pub fn write_besov<W: Write>(mut out: W, estimates: &[(u64, BesovEstimate)]) -> Result<()> {
    writeln!(out, "# {SPECTRAL_NOTE}")?;
    writeln!(out, "path_id,gamma,delta,seminorm_sq,l2_part,total")?;
    for (p, e) in estimates {
        writeln!(
            out,
            "{p},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            e.gamma,
            e.delta,
            e.seminorm_sq,
            e.l2_part,
            e.total()
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_weak_residual<W: Write>(mut out: W, rep: &WeakResidualReport) -> Result<()> {
    writeln!(out, "t,residual")?;
    for (t, r) in rep.times.iter().zip(&rep.residual) {
        writeln!(out, "{t:.16e},{r:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_convergence<W: Write>(mut out: W, table: &ConvergenceTable) -> Result<()> {
    writeln!(out, "n_coarse,n_fine,difference")?;
    for r in &table.rows {
        writeln!(out, "{},{},{:.16e}", r.coarse, r.fine, r.difference)?;
    }
    out.flush()?;
    Ok(())
}

/// Deterministic trajectory for a config.
pub fn deterministic_run(cfg: &RunConfig, setup: &Setup) -> Result<Trajectory> {
    let nl = make_nonlinearity(&setup.basis);
    let c0 = cfg.initial.modal_state(&setup.basis, cfg.order())?;
    run_deterministic(&setup.basis, nl.as_ref(), &c0, cfg.dt, cfg.t_final, cfg.stride, cfg.integrator)
}

/// Checkpoint spacing in steps for `cfg.checkpoints` evenly spaced moments.
pub fn checkpoint_every(cfg: &RunConfig) -> usize {
    (cfg.steps() / cfg.checkpoints).max(1)
}

/// Monte Carlo ensemble for a config with noise; sampling every `stride`
/// steps when `samples` is set.
pub fn stochastic_run(cfg: &RunConfig, setup: &Setup, samples: bool) -> Result<Ensemble> {
    let noise = cfg
        .noise
        .ok_or_else(|| Error::Parameter("config has no noise block (set `noise`)".into()))?;
    let model = noise.model(cfg.n_modes)?;
    let nl = make_nonlinearity(&setup.basis);
    let c0 = cfg.initial.modal_state(&setup.basis, cfg.order())?;
    let problem = SdeProblem {
        lambdas: setup.basis.lambdas(),
        nl: nl.as_ref(),
        model: &model,
        c0: &c0.c,
        dt: cfg.dt,
        steps: cfg.steps(),
    };
    run_ensemble(
        &problem,
        cfg.seed,
        cfg.mc_paths,
        checkpoint_every(cfg),
        samples.then_some(cfg.stride),
    )
}

/// Per-path Besov estimates of a sampled ensemble and their mean.
pub fn ensemble_besov(
    ens: &Ensemble,
    basis: &EigenBasis,
    cfg: &RunConfig,
) -> Result<(Vec<(u64, BesovEstimate)>, Estimate)> {
    let scale = SpectralScale::new(basis, cfg.order());
    let mut out = Vec::with_capacity(ens.outcomes.len());
    for o in &ens.outcomes {
        let tr = o
            .samples
            .as_ref()
            .ok_or_else(|| Error::Parameter("ensemble was run without samples".into()))?;
        out.push((o.path_id, besov_estimate(tr, &scale, cfg.gamma, cfg.besov_delta())?));
    }
    let totals: Vec<f64> = out.iter().map(|(_, e)| e.total()).collect();
    Ok((out, Estimate::from_samples(&totals)))
}

/// Mode ladder `8, 16, ...` capped by and ending at `n_modes`.
pub fn mode_ladder(n_modes: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut n = 8;
    while n < n_modes {
        v.push(n);
        n *= 2;
    }
    v.push(n_modes);
    v
}

/// Mode-convergence table; with noise the mean fields over common-noise
/// paths are compared.
pub fn convergence_run(cfg: &RunConfig, setup: &Setup) -> Result<ConvergenceTable> {
    let ladder = mode_ladder(cfg.n_modes);
    if cfg.noise.is_none() {
        let u0 = setup.basis.reconstruct(&cfg.initial.modal_state(&setup.basis, cfg.order())?.c);
        let (table, _) = convergence_in_modes(
            &setup.basis,
            &|b| make_nonlinearity(b),
            &u0,
            &ladder,
            cfg.dt,
            cfg.t_final,
            cfg.stride,
            cfg.integrator,
        )?;
        return Ok(table);
    }
    let mut means = Vec::with_capacity(ladder.len());
    for &n in &ladder {
        let sub = RunConfig {
            n_modes: n,
            ..cfg.clone()
        };
        let s = Setup {
            form: setup.form.clone(),
            basis: setup.basis.truncated(n)?,
        };
        // the noise spectrum length follows the finest level so all levels share it
        let mut sub = sub;
        if let Some(nc) = sub.noise.as_mut() {
            nc.m = Some(nc.m.unwrap_or(cfg.n_modes));
        }
        let ens = stochastic_run(&sub, &s, true)?;
        let trajs: Vec<&Trajectory> = ens.outcomes.iter().filter_map(|o| o.samples.as_ref()).collect();
        means.push(mean_trajectory(&trajs)?);
    }
    let mut rows = Vec::new();
    for i in 1..ladder.len() {
        rows.push(ConvergenceRow {
            coarse: ladder[i - 1],
            fine: ladder[i],
            difference: l2_time_distance(&means[i - 1], &means[i])?,
        });
    }
    Ok(ConvergenceTable { rows })
}

/// `key: value` manifest.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(cfg: &RunConfig, command: Subcommand, env: EnvOverrides) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let threads = env
            .threads
            .unwrap_or_else(rayon::current_num_threads);
        let entries = vec![
            ("command".into(), command.name().into()),
            ("config_hash".into(), cfg.hash()),
            ("code_version".into(), env!("CARGO_PKG_VERSION").into()),
            ("timestamp".into(), timestamp.to_string()),
            ("seed".into(), cfg.seed.to_string()),
            (
                "seed_source".into(),
                if env.seed.is_some() { "environment" } else { "config" }.into(),
            ),
            ("threads".into(), threads.to_string()),
            ("negative_norms".into(), SPECTRAL_NOTE.into()),
        ];
        Manifest {
            entries,
            files: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "{k}: {v}")?;
        }
        let names: Vec<String> = self.files.iter().map(|p| p.display().to_string()).collect();
        writeln!(out, "files: {}", names.join(", "))?;
        Ok(())
    }
}

fn create(dir: &Path, name: &str, manifest: &mut Manifest) -> Result<BufWriter<fs::File>> {
    let path = dir.join(name);
    let f = fs::File::create(&path)?;
    manifest.files.push(PathBuf::from(name));
    Ok(BufWriter::new(f))
}

/// Outcome of a subcommand: files written and whether all checks passed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
    pub summary: Vec<String>,
}

/// Runs one subcommand, writing its outputs and `manifest.txt` into
/// `cfg.output_dir`. `progress` receives human-readable lines as work completes.
pub fn run(
    command: Subcommand,
    cfg: &RunConfig,
    env: EnvOverrides,
    progress: &mut dyn FnMut(&str),
) -> Result<RunOutcome> {
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir)?;
    let mut manifest = Manifest::new(cfg, command, env);
    let mut passed = true;
    let mut summary = Vec::new();
    match command {
        Subcommand::CheckAll => {
            let results = crate::acceptance::run_all_with(&mut |r| progress(&r.line()));
            let verdicts: Vec<_> = results.iter().flat_map(|r| r.verdicts.clone()).collect();
            for r in &results {
                summary.push(r.line());
            }
            passed = results.iter().all(|r| r.passed);
            write_verdicts(create(&dir, "verdicts.csv", &mut manifest)?, &verdicts)?;
        }
        _ => {
            let setup = Setup::new(cfg)?;
            match command {
                Subcommand::Assemble => {
                    let mut w = create(&dir, "stiffness.txt", &mut manifest)?;
                    setup.form.write_stiffness(&mut w)?;
                    w.flush()?;
                }
                Subcommand::Eigs => write_eigs(create(&dir, "eigs.csv", &mut manifest)?, &setup.basis)?,
                Subcommand::RunDet => {
                    let tr = deterministic_run(cfg, &setup)?;
                    write_trajectory(create(&dir, "trajectory.csv", &mut manifest)?, &tr)?;
                }
                Subcommand::RunSde => {
                    let ens = stochastic_run(cfg, &setup, true)?;
                    write_path_trajectories(create(&dir, "paths.csv", &mut manifest)?, &ens)?;
                    write_moments(create(&dir, "moments.csv", &mut manifest)?, &ens.rows)?;
                }
                Subcommand::McMoments => {
                    let ens = stochastic_run(cfg, &setup, false)?;
                    write_moments(create(&dir, "moments.csv", &mut manifest)?, &ens.rows)?;
                    let check = crate::diagnostics::check_mean_energy_balance(&ens.rows, 3.0)?;
                    manifest.push("energy_balance_ratio", format!("{:.6e}", check.max_residual));
                    summary.push(format!(
                        "mean energy balance: worst |residual| / (3 SE + bias band) = {:.3e}",
                        check.max_residual
                    ));
                    passed = check.passed;
                }
                Subcommand::Besov => {
                    let ens = stochastic_run(cfg, &setup, true)?;
                    let (per_path, mean) = ensemble_besov(&ens, &setup.basis, cfg)?;
                    write_besov(create(&dir, "besov.csv", &mut manifest)?, &per_path)?;
                    manifest.push("besov_mean", format!("{:.16e}", mean.mean));
                    manifest.push("besov_se", format!("{:.16e}", mean.se));
                    summary.push(format!("Besov estimate {:.6e} ± {:.2e}", mean.mean, mean.se));
                }
                Subcommand::WeakResidual => {
                    let tr = deterministic_run(cfg, &setup)?;
                    let rep = weak_residual(&tr, &setup.basis, &setup.form, &quartic_bump())?;
                    write_weak_residual(create(&dir, "weak_residual.csv", &mut manifest)?, &rep)?;
                    manifest.push("weak_residual_max", format!("{:.16e}", rep.max()));
                    if let Some(b) = rep.rho_curvature_bounded {
                        manifest.push("test_function_rho_curvature_bounded", b);
                    }
                    summary.push(format!("max weak residual {:.6e}", rep.max()));
                }
                Subcommand::Convergence => {
                    let table = convergence_run(cfg, &setup)?;
                    write_convergence(create(&dir, "convergence.csv", &mut manifest)?, &table)?;
                    manifest.push("monotone", table.monotone());
                }
                Subcommand::CheckAll => unreachable!(),
            }
        }
    }
    for line in &summary {
        if command != Subcommand::CheckAll {
            progress(line);
        }
    }
    manifest.files.push(PathBuf::from("manifest.txt"));
    manifest.write(BufWriter::new(fs::File::create(dir.join("manifest.txt"))?))?;
    Ok(RunOutcome {
        files: manifest.files.clone(),
        passed,
        summary,
    })
}
