use nlburgers::config::InitialCondition;
use nlburgers::diagnostics::{
    besov_estimate, convergence_in_modes, gronwall_envelope, l2_time_distance, quartic_bump,
    weak_residual, AnalyticTest, EnergyLedger, FieldTest,
};
use nlburgers::galerkin::{
    project, run_deterministic, skew_form, solve_eigenbasis, EigenBasis, Integrator, ModalState,
    Trajectory, ZeroDrift,
};
use nlburgers::harness::make_nonlinearity;
use nlburgers::kernel::{
    apply_operator, assemble_form, getoor_constant, rho_weight, standard_scale,
    standard_strong_image, Field, FractionalOrder, Mesh, NonlocalForm,
};
use nlburgers::oracle::{eigenvalue_asymptotic, exterior_weight_quadrature, implicit_ou_variance};
use nlburgers::spaces::{dual_norm, dual_norm_of_functional, operator_dual_bound_check, SpectralScale};
use nlburgers::stochastic::{
    hs_norm_sq, run_ensemble, step_sde, wiener_increment, Estimate, Intensity, NoiseModel, PathRng,
    SdeProblem,
};
use nlburgers::Error;

fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

fn setup(n_cells: usize, a: f64, n_modes: usize) -> (NonlocalForm, EigenBasis) {
    let form = assemble_form(Mesh::new(n_cells).unwrap(), order(a)).unwrap();
    let basis = solve_eigenbasis(&form, n_modes).unwrap();
    (form, basis)
}

fn sin_bump(x: f64) -> f64 {
    (std::f64::consts::FRAC_PI_2 * (x + 1.0)).sin() * (1.0 - x * x)
}

#[test]
fn rho_closed_values_and_quadrature() {
    assert_eq!(rho_weight(0.0, order(1.0)).unwrap(), 4.0);
    assert!((rho_weight(0.0, order(1.5)).unwrap() - 8.0 / 3.0).abs() < 1e-15);
    for x in [0.1, 0.45, 0.93] {
        assert_eq!(rho_weight(x, order(0.7)).unwrap(), rho_weight(-x, order(0.7)).unwrap());
    }
    let q = exterior_weight_quadrature(0.5, 1.0).unwrap();
    assert!((q - rho_weight(0.5, order(1.0)).unwrap()).abs() < 1e-10 * q);
    assert!(matches!(rho_weight(1.0, order(1.0)), Err(Error::Domain(_))));
}

#[test]
fn getoor_constant_limits() {
    assert!((getoor_constant(order(1.0)) - 1.0).abs() < 1e-14);
    assert!((getoor_constant(order(1e-9)) - 1.0).abs() < 1e-8);
}

#[test]
fn stiffness_is_symmetric_and_positive() {
    let form = assemble_form(Mesh::new(24).unwrap(), order(0.8)).unwrap();
    let a = form.stiffness();
    assert_eq!(a, &a.transpose());
    let u = Field::interpolate(form.mesh(), |x| (3.0 * x).cos() * (1.0 - x * x));
    let v = Field::interpolate(form.mesh(), |x| x * (1.0 - x.abs()));
    assert!(form.energy_product(&u, &u).unwrap() > 0.0);
    let uav = form.energy_product(&u, &v).unwrap();
    let vau = form.energy_product(&v, &u).unwrap();
    assert!((uav - vau).abs() < 1e-14 * uav.abs().max(1.0));
    let zero = apply_operator(&form, &Field::zeros(form.mesh())).unwrap();
    assert!(zero.iter().all(|v| *v == 0.0));
}

#[test]
fn square_root_image_converges_at_half_order() {
    // interior-third error of the α = 1 image against the constant 1, scaled by h^{-1/2}
    let mut scaled = Vec::new();
    for n in [64, 128, 256, 512] {
        let form = assemble_form(Mesh::new(n).unwrap(), order(1.0)).unwrap();
        let u = Field::interpolate(form.mesh(), |x| (1.0 - x * x).sqrt());
        let w = standard_strong_image(&form, &u).unwrap();
        let err = (1..n)
            .filter(|&j| form.mesh().node(j).abs() <= 1.0 / 3.0)
            .map(|j| (w.node_value(j) - 1.0).abs())
            .fold(0.0f64, f64::max);
        scaled.push(err / form.mesh().h().sqrt());
    }
    assert!(scaled.iter().all(|s| *s < scaled[0] * 1.01), "{scaled:?}");
}

#[test]
fn dual_norm_identities() {
    let (form, basis) = setup(32, 1.5, 31);
    let scale = SpectralScale::new(&basis, form.alpha());
    let mode = basis.mode(0);
    assert!((operator_dual_bound_check(&mode, &form, &scale).unwrap() - 1.0).abs() < 1e-10);
    let mut c = vec![0.0; 31];
    for (k, v) in c.iter_mut().enumerate().take(10) {
        *v = ((k * 7 + 3) as f64).sin();
    }
    let mix = basis.reconstruct(&c);
    assert!((operator_dual_bound_check(&mix, &form, &scale).unwrap() - 1.0).abs() < 1e-8);
    let mut spike = vec![0.0; 31];
    spike[15] = 1.0;
    let spike = Field::new(form.mesh(), spike).unwrap();
    assert!((operator_dual_bound_check(&spike, &form, &scale).unwrap() - 1.0).abs() < 1e-8);
    // dual norm of A u equals the energy norm
    let au = apply_operator(&form, &mix).unwrap();
    let d = dual_norm_of_functional(&au, &scale, 0.75).unwrap();
    assert!((d - form.energy_product(&mix, &mix).unwrap().sqrt()).abs() < 1e-8 * d);
    // monotone in s when every eigenvalue exceeds one
    assert!(basis.lambdas()[0] >= 1.0);
    let mut last = f64::INFINITY;
    for s in [0.2, 0.5, 1.0, 2.0, 4.0] {
        let v = dual_norm(&c, &scale, s).unwrap();
        assert!(v <= last);
        last = v;
    }
}

#[test]
fn eigenvalue_bounds_and_asymptotics() {
    for a in [0.5, 1.2] {
        let (_, basis) = setup(16, a, 1);
        assert!(basis.lambdas()[0] >= 4.0 / a);
    }
    let (_, basis) = setup(1024, 1.0, 10);
    let s = standard_scale(order(1.0));
    for k in 3..=10 {
        let l = basis.lambdas()[k - 1] * s;
        let r = eigenvalue_asymptotic(k, 1.0);
        assert!((l - r).abs() < 0.1 * r, "k={k}: {l} vs {r}");
    }
}

#[test]
fn eigenvalues_are_cauchy_in_h() {
    let lam: Vec<Vec<f64>> = [32, 64, 128, 256]
        .iter()
        .map(|&n| setup(n, 1.5, 10).1.lambdas().to_vec())
        .collect();
    for k in 0..10 {
        let d1 = (lam[1][k] - lam[0][k]).abs();
        let d2 = (lam[2][k] - lam[1][k]).abs();
        let d3 = (lam[3][k] - lam[2][k]).abs();
        assert!(d2 < d1 && d3 < d2, "k={k}: {d1} {d2} {d3}");
    }
}

#[test]
fn projection_is_idempotent_and_complete() {
    let (_, basis) = setup(64, 1.5, 63);
    let u = Field::interpolate(basis.mesh(), sin_bump);
    let c = project(&basis, &u).unwrap();
    let again = project(&basis, &basis.reconstruct(&c.c)).unwrap();
    for (a, b) in c.c.iter().zip(&again.c) {
        assert!((a - b).abs() < 1e-12);
    }
    let mut prev = f64::INFINITY;
    for n in [4, 8, 16, 32, 63] {
        let b = basis.truncated(n).unwrap();
        let r = b.reconstruct(&project(&b, &u).unwrap().c);
        let diff = Field::new(
            basis.mesh(),
            u.values().iter().zip(r.values()).map(|(a, b)| a - b).collect(),
        )
        .unwrap();
        let form_mass = nlburgers::kernel::mass_matrix(basis.mesh());
        let err = form_mass.quadratic(diff.values(), diff.values()).sqrt();
        assert!(err < prev || err < 1e-13);
        prev = err;
    }
    assert!(prev < 1e-12);
}

#[test]
fn skew_form_matches_integration_by_parts() {
    let (_, basis) = setup(48, 1.5, 4);
    let u = basis.mode(0);
    let w = Field::interpolate(basis.mesh(), |x| x * (1.0 - x * x));
    // −½(u², w_x) with exact per-cell Gauss quadrature
    let mesh = basis.mesh();
    let h = mesh.h();
    let rule = nlburgers::quadrature::GaussRule::new(4);
    let mut rhs = 0.0;
    for e in 0..mesh.n_cells() {
        let wx = (w.node_value(e + 1) - w.node_value(e)) / h;
        rhs += rule.integrate(0.0, 1.0, |t| {
            let uv = u.node_value(e) * (1.0 - t) + u.node_value(e + 1) * t;
            uv * uv
        }) * h * wx;
    }
    let lhs = skew_form(&u, &u, &w);
    assert!((lhs + 0.5 * rhs).abs() < 1e-10 * rhs.abs().max(1e-3));
}

#[test]
fn energy_ledger_improves_under_two_halvings() {
    let (_, basis) = setup(64, 1.5, 32);
    let nl = make_nonlinearity(&basis);
    let c0 = project(&basis, &Field::interpolate(basis.mesh(), sin_bump)).unwrap();
    let res: Vec<f64> = [1e-4, 2.5e-5]
        .iter()
        .map(|&dt| {
            let tr = run_deterministic(&basis, nl.as_ref(), &c0, dt, 1.0, 1, Integrator::Etd2).unwrap();
            let l = EnergyLedger::from_trajectory(&tr);
            assert!(l.v2_integral.windows(2).all(|w| w[1] >= w[0]));
            l.max_relative_residual()
        })
        .collect();
    assert!(res[0] <= 1e-4);
    assert!(res[0] / res[1] >= 4.0, "{res:?}");
}

#[test]
fn wiener_increments_have_the_right_covariance() {
    let model = NoiseModel::power_law(3, 0.1, Intensity::Additive { sigma: 1.0 }).unwrap();
    let mut rng = PathRng::new(99, 0);
    let dt = 0.01;
    let draws: Vec<Vec<f64>> = (0..100_000).map(|_| wiener_increment(&model, dt, &mut rng)).collect();
    for i in 0..2 {
        let sq: Vec<f64> = draws.iter().map(|d| d[i] * d[i]).collect();
        let e = Estimate::from_samples(&sq);
        assert!((e.mean - model.spectrum()[i] * dt).abs() < 3.0 * e.se);
    }
    let cross: Vec<f64> = draws.iter().map(|d| d[0] * d[1]).collect();
    let e = Estimate::from_samples(&cross);
    assert!(e.mean.abs() < 3.0 * e.se);
    let mut a = PathRng::new(5, 3);
    let mut b = PathRng::new(5, 3);
    for _ in 0..10 {
        assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
    }
}

#[test]
fn hs_norms_and_growth() {
    let q = vec![1.0, 0.25, 1.0 / 9.0];
    let add = NoiseModel::new(q.clone(), Intensity::Additive { sigma: 1.0 }).unwrap();
    let s = ModalState { c: vec![0.3; 5], t: 0.0 };
    assert!((hs_norm_sq(&add, &s) - 49.0 / 36.0).abs() < 1e-15);
    let zero = NoiseModel::new(q.clone(), Intensity::Additive { sigma: 0.0 }).unwrap();
    assert_eq!(hs_norm_sq(&zero, &s), 0.0);
    let mult = NoiseModel::new(q, Intensity::Multiplicative { sigma: 0.7 }).unwrap();
    let (c, lam) = mult.growth_constants();
    assert_eq!(lam, 0.0);
    let mut rng = PathRng::new(1, 1);
    for _ in 0..50 {
        let st = ModalState {
            c: (0..5).map(|_| rng.standard_normal()).collect(),
            t: 0.0,
        };
        assert!(hs_norm_sq(&mult, &st) <= c * st.h2() * (1.0 + 1e-14));
    }
    // closed-form majorant with C = 0
    let sig2 = 0.01;
    assert!((gronwall_envelope(0.0, sig2 * 49.0 / 36.0, 1.0, 0.5) - (0.5 + sig2 * 49.0 / 36.0)).abs() < 1e-15);
}

#[test]
fn zero_noise_step_is_implicit_decay() {
    let model = NoiseModel::power_law(1, 0.1, Intensity::Additive { sigma: 0.0 }).unwrap();
    let s = ModalState { c: vec![0.8], t: 0.0 };
    let mut rng = PathRng::new(0, 0);
    let next = step_sde(&s, 0.01, &[3.0], &ZeroDrift(1), &model, &mut rng).unwrap();
    assert!((next.c[0] - 0.8 / 1.03).abs() < 1e-15);
}

#[test]
fn single_mode_ou_variance_matches_recursion() {
    let lam = [5.0];
    let sigma = 0.4;
    let model = NoiseModel::power_law(1, 0.1, Intensity::Additive { sigma }).unwrap();
    let (dt, steps) = (0.01, 400);
    let problem = SdeProblem {
        lambdas: &lam,
        nl: &ZeroDrift(1),
        model: &model,
        c0: &[0.0],
        dt,
        steps,
    };
    let ens = run_ensemble(&problem, 8, 20_000, steps, None).unwrap();
    let last = ens.rows.last().unwrap();
    let expect = implicit_ou_variance(0.0, lam[0], sigma * sigma, dt, steps);
    assert!((last.h2.mean - expect).abs() < 3.0 * last.h2.se, "{} vs {expect}", last.h2.mean);
}

#[test]
fn weak_residual_examples() {
    let (form, basis) = setup(32, 1.5, 31);
    let nl = make_nonlinearity(&basis);
    // zero data stays zero and the residual vanishes
    let zero = ModalState::zeros(31);
    let tr = run_deterministic(&basis, nl.as_ref(), &zero, 1e-3, 0.2, 1, Integrator::Etd2).unwrap();
    let rep = weak_residual(&tr, &basis, &form, &quartic_bump()).unwrap();
    assert!(rep.residual.iter().all(|r| *r == 0.0));
    // first eigenmode as test function
    let u0 = Field::interpolate(basis.mesh(), sin_bump);
    let c0 = project(&basis, &u0).unwrap();
    let tr = run_deterministic(&basis, nl.as_ref(), &c0, 1e-3, 1.0, 1, Integrator::Etd2).unwrap();
    let phi = FieldTest {
        name: "mode_1".into(),
        field: basis.mode(0),
    };
    let rep = weak_residual(&tr, &basis, &form, &phi).unwrap();
    assert_eq!(rep.residual[0], 0.0);
    assert!(rep.max() <= 1e-3 * c0.h2(), "{}", rep.max());
    // boundary values must vanish
    let bad = AnalyticTest {
        name: "one_minus_x".into(),
        f: |x: f64| 1.0 - x,
        df: |_x: f64| -1.0,
        d2f: |_x: f64| 0.0,
    };
    assert!(matches!(weak_residual(&tr, &basis, &form, &bad), Err(Error::Parameter(_))));
}

#[test]
fn besov_examples() {
    let (form, basis) = setup(32, 1.5, 8);
    let scale = SpectralScale::new(&basis, form.alpha());
    let mut constant = Trajectory::new(basis.lambdas().to_vec());
    for m in 0..11 {
        constant.push(&ModalState {
            c: vec![0.2; 8],
            t: 0.1 * m as f64,
        });
    }
    let e = besov_estimate(&constant, &scale, 0.3, 1.0).unwrap();
    assert_eq!(e.seminorm_sq, 0.0);
    assert!(e.l2_part > 0.0);
    assert!(besov_estimate(&constant, &scale, 0.5, 1.0).is_err());
    assert!(besov_estimate(&constant, &scale, 0.2, 0.0).is_err());
    let nl = make_nonlinearity(&basis);
    let c0 = InitialCondition::SinBump.modal_state(&basis, form.alpha()).unwrap();
    let tr = run_deterministic(&basis, nl.as_ref(), &c0, 1e-3, 1.0, 20, Integrator::Etd2).unwrap();
    let lo = besov_estimate(&tr, &scale, 0.1, 2.0).unwrap();
    let hi = besov_estimate(&tr, &scale, 0.45, 2.0).unwrap();
    assert!(hi.seminorm_sq >= lo.seminorm_sq);
}

#[test]
fn mode_and_mesh_convergence() {
    let (_, basis) = setup(128, 1.5, 64);
    let u0 = Field::interpolate(basis.mesh(), sin_bump);
    let (same, _) = convergence_in_modes(
        &basis, &|b| make_nonlinearity(b), &u0, &[8, 8], 1e-3, 0.5, 10, Integrator::Etd2,
    )
    .unwrap();
    assert_eq!(same.rows[0].difference, 0.0);
    let (table, _) = convergence_in_modes(
        &basis, &|b| make_nonlinearity(b), &u0, &[8, 16, 32, 64], 1e-3, 1.0, 10, Integrator::Etd2,
    )
    .unwrap();
    assert!(table.monotone(), "{:?}", table.rows);

    // fixed n = 8 on refined meshes, eigenvectors share the sign convention
    let trajs: Vec<Trajectory> = [32, 64, 128, 256]
        .iter()
        .map(|&n| {
            let (_, b) = setup(n, 1.5, 8);
            let nl = make_nonlinearity(&b);
            let c0 = project(&b, &Field::interpolate(b.mesh(), sin_bump)).unwrap();
            run_deterministic(&b, nl.as_ref(), &c0, 1e-3, 1.0, 10, Integrator::Etd2).unwrap()
        })
        .collect();
    let d: Vec<f64> = trajs.windows(2).map(|w| l2_time_distance(&w[0], &w[1]).unwrap()).collect();
    assert!(d[1] < d[0] && d[2] < d[1], "{d:?}");
}
