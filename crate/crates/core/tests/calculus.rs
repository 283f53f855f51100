use std::sync::Arc;

use psido::calculus::{
    adjoint_symbol, compose, freeze, freeze_limit, l2_distance, project, quantize_adjoint_apply, quantize_apply,
    random_band_function, random_test_function,
};
use psido::fourier::GroupFunction;
use psido::group::{CompactGroup, DualLabel, Su2, Torus};
use psido::linalg::{CMat, C64};
use psido::symbol::{Symbol, Workspace, XBand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn sup_diff<G: CompactGroup>(a: &GroupFunction<G>, b: &GroupFunction<G>) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Real band-1 function on SU(2): Re U_00.
fn su2_a(x: &psido::group::Su2Point) -> f64 {
    x.matrix()[0].re
}

/// Real band-1 function on SU(2): Im U_10.
fn su2_b(x: &psido::group::Su2Point) -> f64 {
    x.matrix()[2].im
}

#[test]
fn identity_and_multiplication_operators() {
    let ws = Workspace::new(Su2, 9.0, 1, 1).unwrap();
    let grid = Arc::new(Su2.grid_for_degree(18).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random_test_function(&ws, grid.clone(), 7, &mut rng).unwrap();
    let id = Symbol::identity(ws.clone());
    assert!(sup_diff(&quantize_apply(&id, &f).unwrap(), &f) < 1e-12);
    let a = Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| CMat::identity(xi.dim, xi.dim) * c(su2_a(x), su2_b(x))).unwrap();
    let af = quantize_apply(&a, &f).unwrap();
    let expect: Vec<C64> = grid.points.iter().zip(&f.values).map(|(x, v)| v * c(su2_a(x), su2_b(x))).collect();
    let err = af.values.iter().zip(&expect).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    assert!(err < 1e-11, "{err:e}");
}

#[test]
fn bessel_square_on_spin_one_is_three() {
    let ws = Workspace::new(Su2, 6.0, 2, 1).unwrap();
    let grid = Arc::new(Su2.grid_for_degree(4).unwrap());
    let e = CMat::from_fn(3, 3, |i, j| c(i as f64 - 0.5 * j as f64, 1.0 + j as f64));
    let spin1 = psido::group::DualIndex { label: DualLabel::Spin(2), dim: 3, weight_sq: 3.0 };
    let f = GroupFunction::from_fn(Su2, grid.clone(), 2, |x| (Su2.rep_matrix(&spin1, x) * &e).trace()).unwrap();
    let lap = Symbol::bessel(ws.clone(), 2.0);
    let af = quantize_apply(&lap, &f).unwrap();
    let three_f = f.scale(c(3.0, 0.0));
    assert!(sup_diff(&af, &three_f) < 1e-12);
    // independent route: (1 - sum X_i^2) f through spectral derivatives in x
    let fs = Symbol::from_fn(ws.clone(), XBand::Exact(2), |x, xi| {
        CMat::identity(xi.dim, xi.dim) * (Su2.rep_matrix(&spin1, x) * &e).trace()
    })
    .unwrap();
    let mut lhs = fs.clone();
    for i in 0..3 {
        let mut a = [0u8; 3];
        a[i] = 2;
        lhs = lhs.sub(&fs.invariant_derivative(&a).unwrap());
    }
    assert!(lhs.max_abs_diff(&fs.scale(c(3.0, 0.0))) < 1e-11);
}

#[test]
fn quantization_is_bilinear() {
    let t = Torus::new(2);
    let ws = Workspace::new(t.clone(), 7.0, 1, 1).unwrap();
    let grid = Arc::new(t.grid_for_degree(12).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s1 = Symbol::random(ws.clone(), 1, 1.0, &mut rng).unwrap();
    let s2 = Symbol::random(ws.clone(), 1, 0.0, &mut rng).unwrap();
    let f = random_test_function(&ws, grid.clone(), 4, &mut rng).unwrap();
    let g = random_test_function(&ws, grid.clone(), 4, &mut rng).unwrap();
    let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
    let lhs = quantize_apply(&s1.scale(a).add(&s2.scale(b)), &f).unwrap();
    let r1 = quantize_apply(&s1, &f).unwrap();
    let r2 = quantize_apply(&s2, &f).unwrap();
    let err = lhs
        .values
        .iter()
        .zip(r1.values.iter().zip(&r2.values))
        .map(|(l, (p, q))| (l - (p * a + q * b)).norm())
        .fold(0.0, f64::max);
    assert!(err < 1e-12);
    let fg = GroupFunction::new(t.clone(), grid.clone(), f.values.iter().zip(&g.values).map(|(x, y)| x * a + y * b).collect(), 4)
        .unwrap();
    let lhs = quantize_apply(&s1, &fg).unwrap();
    let rf = quantize_apply(&s1, &f).unwrap();
    let rg = quantize_apply(&s1, &g).unwrap();
    let err = lhs
        .values
        .iter()
        .zip(rf.values.iter().zip(&rg.values))
        .map(|(l, (p, q))| (l - (p * a + q * b)).norm())
        .fold(0.0, f64::max);
    assert!(err < 1e-12);
}

#[test]
fn band_overflow_is_rejected() {
    let t = Torus::new(1);
    let ws = Workspace::new(t.clone(), 5.0, 1, 1).unwrap();
    let grid = Arc::new(t.grid_for_degree(16).unwrap());
    let f = GroupFunction::from_fn(t.clone(), grid, 7, |x| C64::from_polar(1.0, 7.0 * x[0])).unwrap();
    assert!(quantize_apply(&Symbol::identity(ws), &f).is_err());
}

#[test]
fn invariant_right_factor_composes_exactly() {
    let ws = Workspace::new(Su2, 8.0, 1, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = Symbol::random(ws.clone(), 1, 1.0, &mut rng).unwrap();
    let b = Symbol::random(ws.clone(), 0, 1.0, &mut rng).unwrap();
    for n in 0..=3 {
        assert!(compose(&a, &b, n).unwrap().max_abs_diff(&a.mul(&b)) < 1e-12);
    }
    assert!(compose(&a, &b, 4).is_err());
}

#[test]
fn torus1_product_rule_is_exact_at_first_order() {
    let t = Torus::new(1);
    let ws = Workspace::new(t.clone(), 21.0, 2, 2).unwrap();
    let grid = Arc::new(t.grid_for_degree(40).unwrap());
    let k_sym = Symbol::invariant(ws.clone(), |xi| {
        let DualLabel::Lattice(k) = &xi.label else { unreachable!() };
        CMat::from_element(1, 1, c(k[0] as f64, 0.0))
    });
    let e = Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, _| CMat::from_element(1, 1, C64::from_polar(1.0, x[0]))).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random_test_function(&ws, grid.clone(), 17, &mut rng).unwrap();
    let exact = quantize_apply(&k_sym, &quantize_apply(&e, &f).unwrap()).unwrap();
    let d0 = l2_distance(&quantize_apply(&compose(&k_sym, &e, 0).unwrap(), &f).unwrap(), &exact);
    let d1 = l2_distance(&quantize_apply(&compose(&k_sym, &e, 1).unwrap(), &f).unwrap(), &exact);
    let d2 = l2_distance(&quantize_apply(&compose(&k_sym, &e, 2).unwrap(), &f).unwrap(), &exact);
    assert!((d0 - 1.0).abs() < 1e-10, "zeroth order misses exactly f: {d0}");
    assert!(d1 < 1e-10 && d2 < 1e-10, "{d1:e} {d2:e}");
}

fn su2_order_one(ws: &Arc<Workspace<Su2>>, s: f64) -> (Symbol<Su2>, Symbol<Su2>) {
    let a = Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
        let j3 = Su2.derived_rep(xi, 2) * c(0.0, 1.0);
        CMat::identity(xi.dim, xi.dim) * c(xi.weight() * (1.5 + su2_a(x)), 0.0) + j3 * c(0.4 * su2_b(x), 0.0)
    })
    .unwrap();
    let b = Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
        let j1 = Su2.derived_rep(xi, 0) * c(0.0, 1.0);
        CMat::identity(xi.dim, xi.dim) * c(xi.weight() * (2.0 + s * su2_b(x)), 0.0) + j1 * c(0.0, 0.3 * su2_a(x))
    })
    .unwrap();
    (a, b)
}

fn torus1_order_one(ws: &Arc<Workspace<Torus>>) -> (Symbol<Torus>, Symbol<Torus>) {
    let a = Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
        let DualLabel::Lattice(k) = &xi.label else { unreachable!() };
        CMat::from_element(1, 1, c(xi.weight() * (1.5 + x[0].cos()), 0.3 * k[0] as f64 * x[0].sin()))
    })
    .unwrap();
    let b = Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
        let DualLabel::Lattice(k) = &xi.label else { unreachable!() };
        CMat::from_element(1, 1, c(xi.weight() * (2.0 + x[0].sin()), 0.5 * k[0] as f64 * x[0].cos()))
    })
    .unwrap();
    (a, b)
}

fn composition_defects<G: CompactGroup>(
    ws: &Arc<Workspace<G>>,
    a: &Symbol<G>,
    b: &Symbol<G>,
    grid: Arc<psido::group::QuadratureGrid<G::Point>>,
    fdeg: u32,
    trials: usize,
    seed: u64,
) {
    let comps: Vec<Symbol<G>> = (0..=2).map(|n| compose(a, b, n).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let f = random_band_function(ws, grid.clone(), fdeg / 2, fdeg, &mut rng).unwrap();
        let exact = quantize_apply(a, &quantize_apply(b, &f).unwrap()).unwrap();
        let d: Vec<f64> = comps.iter().map(|s| l2_distance(&quantize_apply(s, &f).unwrap(), &exact)).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "composition defects {d:?}");
    }
}

#[test]
fn composition_converges_su2() {
    let ws = Workspace::new(Su2, 15.0, 2, 2).unwrap();
    let (a, b) = su2_order_one(&ws, 0.5);
    let grid = Arc::new(Su2.grid_for_degree(26).unwrap());
    composition_defects(&ws, &a, &b, grid, 11, 20, 5);
}

#[test]
fn composition_converges_torus1() {
    let t = Torus::new(1);
    let ws = Workspace::new(t.clone(), 33.0, 2, 2).unwrap();
    let (a, b) = torus1_order_one(&ws);
    let grid = Arc::new(t.grid_for_degree(64).unwrap());
    composition_defects(&ws, &a, &b, grid, 29, 20, 6);
}

fn adjoint_defects<G: CompactGroup>(
    ws: &Arc<Workspace<G>>,
    s: &Symbol<G>,
    grid: Arc<psido::group::QuadratureGrid<G::Point>>,
    deg: u32,
    trials: usize,
    seed: u64,
) {
    let adj: Vec<Symbol<G>> = (0..=2).map(|n| adjoint_symbol(s, n).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let g = random_band_function(ws, grid.clone(), deg / 2, deg, &mut rng).unwrap();
        let exact = quantize_adjoint_apply(s, &g, deg).unwrap();
        let d: Vec<f64> =
            adj.iter().map(|t| l2_distance(&project(ws, &quantize_apply(t, &g).unwrap(), deg).unwrap(), &exact)).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "adjoint defects {d:?}");
    }
}

#[test]
fn adjoint_converges_su2() {
    let ws = Workspace::new(Su2, 15.0, 2, 2).unwrap();
    let (a, _) = su2_order_one(&ws, 0.5);
    let grid = Arc::new(Su2.grid_for_degree(26).unwrap());
    adjoint_defects(&ws, &a, grid, 12, 20, 7);
}

#[test]
fn adjoint_converges_torus1() {
    let t = Torus::new(1);
    let ws = Workspace::new(t.clone(), 33.0, 2, 2).unwrap();
    let (a, _) = torus1_order_one(&ws);
    let grid = Arc::new(t.grid_for_degree(64).unwrap());
    adjoint_defects(&ws, &a, grid, 30, 20, 8);
}

#[test]
fn adjoint_of_invariant_hermitian_is_itself() {
    let ws = Workspace::new(Su2, 8.0, 1, 2).unwrap();
    let s = Symbol::invariant(ws.clone(), |xi| {
        let m = CMat::from_fn(xi.dim, xi.dim, |i, j| c((i + j) as f64, i as f64 - j as f64));
        &m + m.adjoint()
    });
    assert!(adjoint_symbol(&s, 2).unwrap().max_abs_diff(&s) < 1e-13);
}

#[test]
fn double_adjoint_defect_decays() {
    let t = Torus::new(1);
    let ws = Workspace::new(t.clone(), 33.0, 3, 3).unwrap();
    let (a, _) = torus1_order_one(&ws);
    let mut sup_high = Vec::new();
    for n in 1..=3 {
        let back = adjoint_symbol(&adjoint_symbol(&a, n).unwrap(), n).unwrap();
        let diff = back.sub(&a);
        let shells = diff.shell_op_norms();
        let tail: Vec<(f64, f64)> = shells.iter().copied().filter(|s| s.0 >= 8.0).collect();
        sup_high.push(tail.iter().map(|s| s.1).fold(0.0, f64::max));
    }
    assert!(sup_high[0] > sup_high[1] && sup_high[1] > sup_high[2], "{sup_high:?}");
}

#[test]
fn freeze_interpolates_and_matches_mollifier_limit() {
    let t = Torus::new(1);
    let ws = Workspace::new(t.clone(), 13.0, 2, 1).unwrap();
    let inv = Symbol::bessel(ws.clone(), 1.0);
    let x0 = vec![0.77];
    assert!(freeze(&inv, &x0).unwrap().max_abs_diff(&inv.freeze_index(0)) == 0.0);
    let a = |x: &Vec<f64>| c(1.0 + 0.5 * x[0].cos(), 0.25 * (2.0 * x[0]).sin());
    let s = Symbol::from_fn(ws.clone(), XBand::Exact(2), |x, xi| {
        let DualLabel::Lattice(k) = &xi.label else { unreachable!() };
        CMat::from_element(1, 1, a(x) * c(xi.weight(), 0.2 * k[0] as f64))
    })
    .unwrap();
    let fr = freeze(&s, &x0).unwrap();
    for (k, xi) in ws.dual.iter().enumerate() {
        let DualLabel::Lattice(l) = &xi.label else { unreachable!() };
        let expect = a(&x0) * c(xi.weight(), 0.2 * l[0] as f64);
        assert!((fr.block(k)[(0, 0)] - expect).norm() < 1e-12);
    }
    let grid = Arc::new(t.grid_for_degree(64).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = random_test_function(&ws, grid.clone(), 12, &mut rng).unwrap();
    let frozen = Symbol::from_sequence(ws.clone(), &fr).unwrap();
    let direct = quantize_apply(&frozen, &f).unwrap();
    let eps = 2.0 * std::f64::consts::PI / 65.0;
    let limit = freeze_limit(&s, &x0, &f, eps, 24).unwrap();
    let rel = l2_distance(&direct, &limit) / direct.l2_norm_sq().sqrt();
    assert!(rel < 1e-3, "mollifier limit disagrees: {rel:e}");
}

#[test]
fn freeze_limit_su2() {
    let ws = Workspace::new(Su2, 5.0, 1, 1).unwrap();
    let s = Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
        CMat::identity(xi.dim, xi.dim) * c(xi.weight() * (2.0 + su2_a(x)), su2_b(x))
    })
    .unwrap();
    let x0 = Su2.mul(&Su2.exp(0, 0.4), &Su2.exp(2, 1.1));
    let grid = Arc::new(Su2.grid_for_degree(8).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let f = random_test_function(&ws, grid, 4, &mut rng).unwrap();
    let direct = quantize_apply(&Symbol::from_sequence(ws.clone(), &freeze(&s, &x0).unwrap()).unwrap(), &f).unwrap();
    let limit = freeze_limit(&s, &x0, &f, 0.05, 10).unwrap();
    let rel = l2_distance(&direct, &limit) / direct.l2_norm_sq().sqrt();
    assert!(rel < 1e-3, "{rel:e}");
}
