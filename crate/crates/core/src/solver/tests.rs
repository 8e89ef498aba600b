use super::*;
use crate::eigen::{first_eigenpair, EigenOptions};
use crate::ext::ExtReal;
use crate::fem::{build_interval_mesh, build_rectangle_mesh, load_vector, pairing};
use crate::nonlinearity::{paper_example, power_perturbation, scaled_power, zero};
use crate::nonlinearity::{ScalarField, Weight};
use crate::Error;

fn quick() -> SolveOptions {
    SolveOptions {
        random_starts: 0,
        ..Default::default()
    }
}

fn poisson(n: usize) -> (Mesh, SolveResult) {
    let mesh = build_interval_mesh(0.0, 1.0, n).unwrap();
    let h = load_vector(&mesh, |_| 1.0).unwrap();
    let r = minimize_phi(&mesh, &zero(), &h, 2.0, &quick()).unwrap();
    (mesh, r)
}

/// Error at vertices and cell midpoints against x(1-x)/2.
fn poisson_error(mesh: &Mesh, u: &DiscreteField) -> f64 {
    let vv = mesh.vertex_values(u);
    let exact = |x: f64| x * (1.0 - x) / 2.0;
    let mut err = 0.0f64;
    for c in 0..mesh.num_cells() {
        let (a, b) = (mesh.vertex(mesh.cell(c)[0])[0], mesh.vertex(mesh.cell(c)[1])[0]);
        for x in [a, 0.5 * (a + b)] {
            err = err.max((mesh.evaluate_at(&vv, &[x]) - exact(x)).abs());
        }
    }
    err
}

#[test]
fn poisson_matches_closed_form() {
    let (mesh, r) = poisson(256);
    assert!(r.converged, "{:?}", r.stop);
    assert!(poisson_error(&mesh, &r.minimizer) < 1e-4);
    // exact minimum is -1/24 for the continuous problem
    assert!((r.phi_value.to_f64() + 1.0 / 24.0).abs() < 1e-4);
}

#[test]
fn poisson_error_is_second_order() {
    let (m1, r1) = poisson(32);
    let (m2, r2) = poisson(64);
    let ratio = poisson_error(&m1, &r1.minimizer) / poisson_error(&m2, &r2.minimizer);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn resonant_perturbation_has_zero_minimizer() {
    let mesh = build_interval_mesh(0.0, 1.0, 64).unwrap();
    let eig = first_eigenpair(&mesh, 2.0, &EigenOptions::default()).unwrap();
    let spec = power_perturbation(eig.lambda1, 1.5, 2.0).unwrap();
    let r = minimize_phi(&mesh, &spec, &mesh.zero_dual(), 2.0, &SolveOptions::default()).unwrap();
    assert!(r.converged);
    assert_eq!(r.best_start, 0);
    assert!(r.minimizer.max_abs() < 1e-8);
    assert_eq!(r.phi_value, ExtReal::Finite(0.0));
}

#[test]
fn coercive_power_with_load() {
    let mesh = build_interval_mesh(0.0, 1.0, 64).unwrap();
    let p = 3.0;
    let eig = first_eigenpair(&mesh, p, &EigenOptions::default()).unwrap();
    let spec = scaled_power(-eig.lambda1, p).unwrap();
    let h = load_vector(&mesh, |x| 1.0 + x[0]).unwrap();
    let r = minimize_phi(&mesh, &spec, &h, p, &SolveOptions::default()).unwrap();
    assert!(r.converged, "{:?} {}", r.stop, r.stationarity);
    assert!(r.phi_value.to_f64() < 0.0);
    let w = verify_weak_solution(&mesh, &r.minimizer, &spec, &h, p, None, 1e-6).unwrap();
    assert!(w.passed);
    assert!((w.scaled_residual - r.stationarity).abs() <= 1e-10 * r.stationarity.max(1.0));
    assert!(probe_local_minimum(&mesh, &spec, &h, &r.minimizer, p).unwrap().holds);
}

#[test]
fn superresonant_power_is_unbounded() {
    let mesh = build_interval_mesh(0.0, 1.0, 32).unwrap();
    let eig = first_eigenpair(&mesh, 2.0, &EigenOptions::default()).unwrap();
    let spec = scaled_power(1.5 * eig.lambda1, 2.0).unwrap();
    let h = load_vector(&mesh, |_| 1.0).unwrap();
    let err = minimize_phi(&mesh, &spec, &h, 2.0, &quick()).unwrap_err();
    assert!(matches!(err, Error::Unbounded { .. }), "{err}");
}

#[test]
fn minimizer_is_deterministic() {
    let mesh = build_interval_mesh(0.0, 1.0, 48).unwrap();
    let spec = paper_example(Weight::bounded(ScalarField::constant(1.0))).unwrap();
    let h = load_vector(&mesh, |x| 3.0 * x[0]).unwrap();
    let opts = SolveOptions {
        random_starts: 2,
        seed: 7,
        ..Default::default()
    };
    let a = minimize_phi(&mesh, &spec, &h, 2.5, &opts).unwrap();
    let b = minimize_phi(&mesh, &spec, &h, 2.5, &opts).unwrap();
    assert_eq!(a.minimizer.values(), b.minimizer.values());
    assert!(a.converged);
}

#[test]
fn gradient_matches_finite_differences() {
    let mesh = build_rectangle_mesh(0.0, 1.0, 0.0, 1.0, 6, 6).unwrap();
    let p = 2.5;
    let spec = paper_example(Weight::bounded(ScalarField::constant(0.5))).unwrap();
    let h = load_vector(&mesh, |x| x[0] - x[1]).unwrap();
    let u = mesh.interpolate(|x| (3.0 * x[0]).sin() * x[1] + 0.3);
    let g = phi_gradient(&mesh, &spec, &h, &u, p).unwrap();
    let step = 1e-6;
    let mut err = 0.0f64;
    for j in 0..mesh.num_free() {
        let e = mesh.hat(j);
        let plus = assemble_phi(&mesh, &spec, &h, &u.add_scaled(step, &e), p).unwrap().to_f64();
        let minus = assemble_phi(&mesh, &spec, &h, &u.add_scaled(-step, &e), p).unwrap().to_f64();
        err = err.max(((plus - minus) / (2.0 * step) - g.values()[j]).abs());
    }
    assert!(err / g.max_abs() < 1e-5, "{err}");
}

#[test]
fn phi_uses_positive_infinity_convention() {
    let mesh = build_interval_mesh(0.0, 1.0, 4).unwrap();
    let spec = zero().with_potential(|x, _| if x[0] < 0.5 { f64::INFINITY } else { f64::NEG_INFINITY });
    let u = mesh.interpolate(|_| 1.0);
    let v = assemble_phi(&mesh, &spec, &mesh.zero_dual(), &u, 2.0).unwrap();
    assert_eq!(v, ExtReal::PosInfinity);
}

#[test]
fn truncation_shape() {
    let t = make_truncation(2.0).unwrap();
    assert_eq!(t.value(1.9), 1.0);
    assert_eq!(t.value(-4.1), 0.0);
    assert!((t.value(3.0) - 0.5).abs() < 1e-15);
    let worst = (0..4000)
        .map(|k| t.derivative(-5.0 + k as f64 * 0.0025).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1.5 / 2.0 + 1e-12);
    let fd = (t.value(3.3 + 1e-7) - t.value(3.3 - 1e-7)) / 2e-7;
    assert!((fd - t.derivative(3.3)).abs() < 1e-6);
    assert!(make_truncation(0.0).is_err());
    assert!(make_truncation(-1.0).is_err());
}

#[test]
fn truncated_basis_properties() {
    let mesh = build_interval_mesh(0.0, 1.0, 20).unwrap();
    let u = mesh.interpolate(|x| 10.0 * x[0]);
    let b = truncated_test_basis(&mesh, &u, 2.0).unwrap();
    for (j, &c) in b.coefficients.iter().enumerate() {
        assert!((0.0..=1.0).contains(&c));
        if u.values()[j].abs() >= 4.0 {
            assert_eq!(c, 0.0);
        }
    }
    let full = truncated_test_basis(&mesh, &u, 20.0).unwrap();
    assert!(full.coefficients.iter().all(|&c| c == 1.0));
    assert_eq!(full.member(&mesh, 3).unwrap().values(), mesh.hat(3).values());
}

#[test]
fn eigenfunction_is_weak_solution() {
    for p in [1.5, 2.0, 3.0] {
        let mesh = build_interval_mesh(0.0, 1.0, 128).unwrap();
        let eig = first_eigenpair(&mesh, p, &EigenOptions::default()).unwrap();
        let spec = scaled_power(eig.lambda1, p).unwrap();
        let w = verify_weak_solution(&mesh, &eig.phi1, &spec, &mesh.zero_dual(), p, None, 1e-6).unwrap();
        assert!(w.passed, "p = {p}: {}", w.relative_residual);
    }
}

#[test]
fn lambda_u_is_monotone_under_refinement() {
    let coarse = build_interval_mesh(0.0, 1.0, 8).unwrap();
    let levels = vec![coarse.clone(), coarse.refine(), coarse.refine().refine()];
    let fine = &levels[2];
    let spec = paper_example(Weight::bounded(ScalarField::constant(1.0))).unwrap();
    let u = fine.interpolate(|x| 4.0 * x[0] * (1.0 - x[0]));
    let est = estimate_lambda_u_hierarchical(&levels, &u, &spec, 2.0, 2.0).unwrap();
    assert!(est.windows(2).all(|w| w[1] >= w[0]), "{est:?}");
    assert_eq!(est[2], estimate_lambda_u_hierarchical(&levels, &u, &spec, 2.0, 2.0).unwrap()[2]);
    assert!(est[0].to_f64() > 0.0);
    let single = estimate_lambda_u(fine, &u, &spec, 2.0, 2.0).unwrap();
    assert!(single <= est[2]);
}

#[test]
fn pairing_with_load_matches_integral() {
    let mesh = build_interval_mesh(0.0, 1.0, 16).unwrap();
    let h = load_vector(&mesh, |_| 1.0).unwrap();
    let u = mesh.interpolate(|x| x[0] * (1.0 - x[0]));
    let exact = 1.0 / 6.0;
    assert!((pairing(&h, &u).unwrap() - exact).abs() < 1e-3);
}
