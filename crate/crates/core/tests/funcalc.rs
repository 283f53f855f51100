use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::Arc;

use proptest::prelude::*;
use psido::funcalc::*;
use psido::group::{Su2, Torus};
use psido::linalg::{max_abs_diff, CMat, C64};
use psido::resolvent::{default_eps, shell_decay, Sector};
use psido::symbol::{Symbol, Workspace, XBand};
use psido::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_pd<R: Rng>(d: usize, rng: &mut R) -> CMat {
    let a = CMat::from_fn(d, d, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    (&a * a.adjoint()) / c(d as f64, 0.0) + CMat::identity(d, d) * c(0.2, 0.0)
}

/// Hermitian positive definite of order 2 with x-dependent, non-commuting coefficients.
fn su2_pd(ws: &Arc<Workspace<Su2>>, amp: f64) -> Symbol<Su2> {
    Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
        let u = x.matrix();
        let w = xi.weight();
        let mut m = CMat::identity(xi.dim, xi.dim) * c((2.0 + amp * u[0].re) * w * w, 0.0);
        let z = c(u[2].im, u[2].re) * (0.3 * w);
        for i in 0..xi.dim.saturating_sub(1) {
            m[(i, i + 1)] = z;
            m[(i + 1, i)] = z.conj();
        }
        m
    })
    .unwrap()
}

fn su2_pd_invariant(ws: &Arc<Workspace<Su2>>) -> Symbol<Su2> {
    Symbol::invariant(ws.clone(), |xi| {
        let w = xi.weight();
        CMat::from_fn(xi.dim, xi.dim, |i, j| {
            if i == j {
                c(w * w * (1.0 + 0.1 * i as f64), 0.0)
            } else if j == i + 1 {
                c(0.2 * w, 0.1 * w)
            } else if i == j + 1 {
                c(0.2 * w, -0.1 * w)
            } else {
                c(0.0, 0.0)
            }
        })
    })
}

fn t1_elliptic(ws: &Arc<Workspace<Torus>>, amp: f64) -> Symbol<Torus> {
    Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
        CMat::from_element(1, 1, c((2.0 + amp * x[0].cos()) * xi.weight() + 0.5 * x[0].sin(), 0.0))
    })
    .unwrap()
}

#[test]
fn presets_parse_by_name() {
    for (name, expect) in
        [("sqrt", "sqrt"), ("inv-sqrt", "inv-sqrt"), ("power:-0.25", "power:-0.25"), ("log-power:-1.5", "log-power:-1.5")]
    {
        assert_eq!(HoloFunction::parse(name).unwrap().name(), expect);
    }
    assert!(HoloFunction::parse("cosh").is_err());
    assert!(HoloFunction::parse("power:x").is_err());
    let f = HoloFunction::sqrt().shifted(1);
    assert_eq!(f.decay(), -0.5);
    assert_eq!(f.default_factor(), 0);
    assert_eq!(HoloFunction::power(2.0).default_factor(), 3);
}

#[test]
fn spectral_route_known_values() {
    let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(4.0, 0.0), c(9.0, 0.0)]));
    let r = matrix_function_spectral(&d, &HoloFunction::sqrt()).unwrap();
    assert!(max_abs_diff(&r, &CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0, 0.0), c(3.0, 0.0)]))) < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = random_pd(5, &mut rng);
    let inv = matrix_function_spectral(&m, &HoloFunction::power(-1.0)).unwrap();
    assert!(max_abs_diff(&(&inv * &m), &CMat::identity(5, 5)) < 1e-12);
    let sq = matrix_function_spectral(&m, &HoloFunction::power(2.0)).unwrap();
    assert!(max_abs_diff(&sq, &(&m * &m)) < 1e-12);

    // diagonalizable, non-normal
    let v = CMat::from_fn(3, 3, |i, j| c(if i == j { 1.0 } else { 0.3 * (i + 2 * j) as f64 }, 0.1 * i as f64));
    let dg = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 1.0), c(2.0, -0.5), c(5.0, 0.0)]));
    let a = &v * dg * v.clone().try_inverse().unwrap();
    let r = matrix_function_spectral(&a, &HoloFunction::sqrt()).unwrap();
    assert!(max_abs_diff(&(&r * &r), &a) < 1e-12);

    let neg = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
    assert!(matches!(matrix_function_spectral(&neg, &HoloFunction::sqrt()), Err(Error::BranchCut(_))));
}

#[test]
fn contour_reproduces_inverse_and_orientation() {
    let four = CMat::identity(3, 3) * c(4.0, 0.0);
    let f = HoloFunction::inv_sqrt();
    let contour = matrix_contour(&four, &f, &ContourOptions::default()).unwrap();
    let r = contour_matrix(&four, &f, &contour).unwrap();
    assert!(max_abs_diff(&r, &(CMat::identity(3, 3) * c(0.5, 0.0))) < 1e-8);
    let s = contour.integrate_scalar(&HoloFunction::power(-1.0), c(5.0, 1.0));
    assert!((s - c(5.0, 1.0).inv()).norm() < 1e-9, "{s}");
    // a point inside the sector is not enclosed
    let wide = Contour::keyhole(PI, 0.5 * PI, 1.0, 1e12, &ContourOptions::default()).unwrap();
    assert!(wide.integrate_scalar(&HoloFunction::power(-1.0), c(-3.0, 0.0)).norm() < 1e-9);
    assert!((wide.integrate_scalar(&HoloFunction::power(-1.0), c(3.0, 0.0)) - 1.0 / 3.0).norm() < 1e-9);
    assert!(contour.distance_to(c(contour.r0, 0.0)) < 1e-12);
}

#[test]
fn contour_matches_spectral_on_random_positive_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let fs = [HoloFunction::power(-0.5), HoloFunction::power(-0.25), HoloFunction::power(-1.0)];
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let d = 1 + trial % 9;
        let m = random_pd(d, &mut rng);
        for f in &fs {
            let a = matrix_function_spectral(&m, f).unwrap();
            let contour = matrix_contour(&m, f, &ContourOptions::default()).unwrap();
            let b = contour_matrix(&m, f, &contour).unwrap();
            worst = worst.max(max_abs_diff(&a, &b));
        }
    }
    assert!(worst <= 1e-6, "worst deviation {worst:e}");
}

#[test]
fn defective_matrix_falls_back_to_contour() {
    let j = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
    let inv = matrix_function_spectral(&j, &HoloFunction::power(-1.0)).unwrap();
    let exact = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(-0.25, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
    assert!(max_abs_diff(&inv, &exact) < 1e-8, "{inv}");
    let r = matrix_function_spectral(&j, &HoloFunction::sqrt()).unwrap();
    assert!(max_abs_diff(&(&r * &r), &j) < 1e-8);
    // sqrt(2 + N) = sqrt2 + N / (2 sqrt2)
    assert!((r[(0, 1)] - c(1.0 / (2.0 * 2f64.sqrt()), 0.0)).norm() < 1e-8);
}

#[test]
fn powers_form_a_semigroup() {
    let ws = Workspace::new(Su2, 8.0, 1, 1).unwrap();
    let s = su2_pd(&ws, 0.5);
    let (a, b) = (0.3, -0.8);
    let pa = symbol_power(&s, a).unwrap();
    let pb = symbol_power(&s, b).unwrap();
    let pab = symbol_power(&s, a + b).unwrap();
    let scale = pab.sup_op_norm().max(1.0);
    assert!(pa.mul(&pb).max_abs_diff(&pab) <= 1e-10 * scale);
    let r = symbol_sqrt(&s).unwrap();
    assert!(r.mul(&r).max_abs_diff(&s) <= 1e-10 * s.sup_op_norm());
    assert!(symbol_power(&s, 0.0).unwrap().max_abs_diff(&Symbol::identity(ws.clone())) == 0.0);
    assert!(symbol_power(&s, 1.0).unwrap().max_abs_diff(&s) <= 1e-10 * s.sup_op_norm());
    let inv = symbol_power(&s, -1.0).unwrap();
    assert!(inv.mul(&s).max_abs_diff(&Symbol::identity(ws.clone())) <= 1e-10);
}

#[test]
fn power_rejects_indefinite_symbols_with_witness() {
    let ws = Workspace::new(Torus::new(1), 8.0, 1, 1).unwrap();
    let s =
        Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| CMat::from_element(1, 1, c(xi.weight() - 2.0 + x[0].cos(), 0.0)))
            .unwrap();
    match symbol_power(&s, 0.5) {
        Err(Error::NotPositiveDefinite(w)) => assert!(w.contains("x[") && w.contains("xi="), "{w}"),
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn square_root_halves_the_order() {
    let ws = Workspace::new(Su2, 16.0, 1, 1).unwrap();
    let s = su2_pd(&ws, 0.5);
    let m = shell_decay(&s).unwrap();
    let h = shell_decay(&symbol_sqrt(&s).unwrap()).unwrap();
    assert!((m - 2.0).abs() < 0.2, "{m}");
    assert!((h - 0.5 * m).abs() <= 0.2 * 0.5 * m, "{h} vs {m}");
}

#[test]
fn factorization_choice_does_not_matter() {
    let ws = Workspace::new(Su2, 4.0, 1, 1).unwrap();
    let s = su2_pd(&ws, 0.5);
    let sector = Sector::new(FRAC_PI_4, 0.0, 2.0).unwrap();
    let f = HoloFunction::sqrt();
    let r1 = symbol_function(&s, &f, &sector, Some(1)).unwrap();
    let r2 = symbol_function(&s, &f, &sector, Some(2)).unwrap();
    let r3 = symbol_function(&s, &f, &sector, Some(3)).unwrap();
    let exact = symbol_sqrt(&s).unwrap();
    let scale = exact.sup_op_norm();
    assert!(r1.max_abs_diff(&r2) <= 1e-8 * scale, "{:e}", r1.max_abs_diff(&r2));
    assert!(r1.max_abs_diff(&r3) <= 1e-8 * scale, "{:e}", r1.max_abs_diff(&r3));
    assert!(r1.max_abs_diff(&exact) <= 1e-8 * scale, "{:e}", r1.max_abs_diff(&exact));
    assert!(symbol_function(&s, &f, &sector, Some(0)).is_err());
}

#[test]
fn pointwise_contour_inverse() {
    let ws = Workspace::new(Torus::new(2), 8.0, 1, 1).unwrap();
    let s = Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
        CMat::from_element(1, 1, c((2.0 + x[0].cos()) * xi.weight(), 0.3 * x[1].sin()))
    })
    .unwrap();
    let sector = Sector::new(FRAC_PI_4, 0.0, 1.0).unwrap();
    let f = HoloFunction::power(-1.0);
    let contour = symbol_contour(&s, &sector, &f, &ContourOptions::default()).unwrap();
    let r = contour_integrate(&s, &f, &contour).unwrap();
    let inv = s.map_blocks(s.x_band, |_, _, b| b.clone().try_inverse().unwrap());
    assert!(r.max_abs_diff(&inv) < 1e-8, "{:e}", r.max_abs_diff(&inv));
    assert!(contour_integrate(&s, &HoloFunction::sqrt(), &contour).is_err());
}

#[test]
fn invariant_operator_function_is_the_spectral_function() {
    let ws = Workspace::new(Su2, 6.0, 1, 2).unwrap();
    let s = su2_pd_invariant(&ws);
    let sector = Sector::new(FRAC_PI_4, 0.0, 2.0).unwrap();
    for p in [-0.5, -1.5, 0.5] {
        let f = HoloFunction::power(p);
        let a = operator_function(&s, &f, &sector, 2).unwrap();
        let b = symbol_power(&s, p).unwrap();
        let scale = b.sup_op_norm().max(1.0);
        let err = a.max_abs_diff(&b.with_margin(a.margin));
        assert!(err <= 1e-6 * scale, "p = {p}: {err:e}");
    }
}

#[test]
fn log_power_of_invariant_symbol() {
    let ws = Workspace::new(Torus::new(1), 8.0, 1, 1).unwrap();
    let s = Symbol::bessel(ws.clone(), 1.0).scale(c(2.0, 0.0));
    let sector = Sector::new(0.0, 0.0, 1.0).unwrap();
    let a = operator_function(&s, &HoloFunction::log_power(-1.0), &sector, 1).unwrap();
    for k in a.valid_indices() {
        let v = s.block(0, k)[(0, 0)].re;
        assert!((a.block(0, k)[(0, 0)] - c(v.ln() / v, 0.0)).norm() < 1e-8);
    }
}

#[test]
fn squared_function_is_the_composition_square() {
    let ws = Workspace::new(Torus::new(1), 32.0, 4, 2).unwrap();
    let s = t1_elliptic(&ws, 0.5);
    let sector = Sector::new(FRAC_PI_4, 0.0, 1.0).unwrap();
    let inv = HoloFunction::custom("inverse", -1.0, |_, log| (-log).exp());
    let direct = operator_function(&s, &inv, &sector, 2).unwrap();
    let g = operator_function(&s, &HoloFunction::inv_sqrt(), &sector, 2).unwrap();
    let gg = psido::calculus::compose(&g, &g, 2).unwrap();
    let margin = direct.margin.max(gg.margin);
    let diff = direct.sub(&gg).with_margin(margin);
    let d = shell_decay(&diff).unwrap();
    let main = shell_decay(&direct.clone().with_margin(margin)).unwrap();
    assert!((main + 1.0).abs() < 0.1, "{main}");
    assert!(d < main - 1.0, "difference slope {d} vs {main}");

    // raising the parametrix order only changes lower-order terms
    let low = operator_function(&s, &HoloFunction::inv_sqrt(), &sector, 0).unwrap();
    let margin = g.margin.max(low.margin);
    let gap = shell_decay(&g.sub(&low).with_margin(margin)).unwrap();
    let top = shell_decay(&g.clone().with_margin(margin)).unwrap();
    assert!(gap < top - 0.8, "{gap} vs {top}");
}

#[test]
fn resolvent_identity_defect() {
    let ws = Workspace::new(Su2, 6.0, 1, 2).unwrap();
    let s = su2_pd_invariant(&ws);
    let sector = Sector::new(FRAC_PI_4, 0.0, 2.0).unwrap();
    let rep = approx_resolvent_identity_defect(&s, &sector, c(-1.0, 0.5), c(-2.0, -1.0), 2).unwrap();
    assert!(rep.sup < 1e-12, "{:e}", rep.sup);

    let ws = Workspace::new(Torus::new(1), 64.0, 8, 3).unwrap();
    let s = t1_elliptic(&ws, 0.5);
    let sector = Sector::new(FRAC_PI_4, 0.0, 1.0).unwrap();
    let rep = approx_resolvent_identity_defect(&s, &sector, c(-0.1, 0.0), C64::from_polar(0.2, PI - FRAC_PI_4), 2).unwrap();
    assert!(rep.lower_order(1.0), "{:?} vs {:?}", rep.slope, rep.reference_slope);
    let rep = resolvent_derivative_defect(&s, &sector, c(-0.1, 0.0), 2, 1e-4).unwrap();
    assert!(rep.lower_order(1.0), "{:?} vs {:?}", rep.slope, rep.reference_slope);
}

#[test]
fn complex_powers_compose_additively() {
    let ws = Workspace::new(Su2, 6.0, 1, 2).unwrap();
    let s = su2_pd_invariant(&ws);
    let sector = Sector::new(FRAC_PI_4, 0.0, 2.0).unwrap();
    let zero = power_group_defect(&s, &sector, 0.0, 0.0, 2).unwrap();
    assert_eq!(zero.sup, 0.0);
    let rep = power_group_defect(&s, &sector, -0.25, -0.25, 2).unwrap();
    assert!(rep.sup <= 1e-6, "{:e}", rep.sup);

    let ws = Workspace::new(Torus::new(1), 32.0, 4, 2).unwrap();
    let s = t1_elliptic(&ws, 0.5);
    let sector = Sector::new(FRAC_PI_4, 0.0, 1.0).unwrap();
    let rep = power_group_defect(&s, &sector, -0.25, -0.25, 2).unwrap();
    assert!(rep.lower_order(1.0), "{:?} vs {:?}", rep.slope, rep.reference_slope);
}

#[test]
fn default_arc_radius_is_half_the_spectrum() {
    let ws = Workspace::new(Su2, 4.0, 1, 1).unwrap();
    let s = Symbol::bessel(ws.clone(), 2.0).scale(c(3.0, 0.0));
    assert!((default_eps(&s) - 1.5).abs() < 1e-12);
    let sector = Sector::new(0.0, 0.0, 2.0).unwrap();
    let contour = symbol_contour(&s, &sector, &HoloFunction::inv_sqrt(), &ContourOptions::default()).unwrap();
    assert!((contour.r0 - 1.5).abs() < 1e-12);
    assert!(contour.r_max > 1e15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn semigroup_on_random_matrices(seed in 0u64..1000, a in -1.5f64..1.5, b in -1.5f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_pd(1 + (seed as usize) % 6, &mut rng);
        let pa = matrix_function_spectral(&m, &HoloFunction::power(a)).unwrap();
        let pb = matrix_function_spectral(&m, &HoloFunction::power(b)).unwrap();
        let pab = matrix_function_spectral(&m, &HoloFunction::power(a + b)).unwrap();
        let scale = psido::linalg::op_norm(&pab).max(1.0);
        prop_assert!(max_abs_diff(&(&pa * &pb), &pab) <= 1e-10 * scale);
    }
}
