//! Command implementations. Each returns a [`Report`]; writing it out is the caller's job.

use std::sync::Arc;
use std::time::Instant;

use psido::calculus::{adjoint_symbol, compose, freeze, quantize_apply, random_test_function};
use psido::fourier::{inverse, inverse_on, schatten_lp_norm, weighted_hs_sq, GroupFunction, MatrixSequence, Transform};
use psido::funcalc::{
    contour_integrate, matrix_function_spectral, operator_function_with, symbol_contour, symbol_power, symbol_sqrt,
    ContourOptions, HoloFunction,
};
use psido::garding::{garding_decompose, garding_verify, higher_order_sqrt_series, l2_bound_certificate, trial_degree};
use psido::group::{CompactGroup, Su2, Torus};
use psido::io::{self, sha256_hex, Backend, Container};
use psido::linalg::C64;
use psido::resolvent::{
    default_eps, ellipticity_check, param_ellipticity_check, parametrix_build, shell_decay, Sector, NEAR_SINGULAR_COND,
};
use psido::symbol::{class_diagnose, Symbol, Workspace, XBand, MAX_ORDER_CAP};
use psido::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Opts;
use crate::presets::{Preset, Presets};
use crate::report::{num, opt, Report, Table};

/// Relative tolerance of contour against spectral evaluation.
const SPECTRAL_TOL: f64 = 1e-6;
/// Largest accepted constant ratio under band halving in class diagnostics.
const CLASS_RATIO: f64 = 1.5;
/// Largest accepted constant ratio under sample doubling in parameter ellipticity.
const DOUBLING_RATIO: f64 = 1.5;
/// Garding margin floor.
const GARDING_MARGIN: f64 = -1e-9;
/// Allowed excess of the power-iteration norm over `M`.
const L2_SLACK: f64 = 0.1;

fn read_file(path: &std::path::Path) -> Result<Container> {
    io::read_container(path)
}

/// Backend from the first input file, else `--backend`; a conflicting `--backend` is an error.
fn backend(o: &Opts) -> Result<Backend> {
    let flag = o.backend.as_deref().map(Backend::parse).transpose()?;
    if let Some(path) = [&o.symbol, &o.input].into_iter().flatten().next() {
        let c = read_file(path)?;
        if let Some(b) = flag {
            if b != c.manifest.backend {
                return Err(Error::InvalidArgument(format!(
                    "--backend {} conflicts with {} in {}",
                    b.id(),
                    c.manifest.backend.id(),
                    path.display()
                )));
            }
        }
        return Ok(c.manifest.backend);
    }
    Ok(flag.unwrap_or(Backend::Su2))
}

pub fn execute(command: &str, o: &Opts) -> Result<Report> {
    match backend(o)? {
        Backend::Su2 => run(Su2, command, o),
        Backend::Torus(n) => run(Torus::new(n), command, o),
    }
}

fn run<G: Presets>(g: G, command: &str, o: &Opts) -> Result<Report> {
    let mut r = Report::default();
    r.set("command", command);
    r.set("backend", g.id());
    match command {
        "dual list" => dual_list(g, o, &mut r)?,
        "fourier fwd" => fourier_fwd(g, o, &mut r)?,
        "fourier inv" => fourier_inv(g, o, &mut r)?,
        "op apply" => op_apply(g, o, &mut r)?,
        "symbol make" => symbol_make(g, o, &mut r)?,
        "symbol compose" => symbol_compose(g, o, &mut r)?,
        "symbol adjoint" => symbol_adjoint(g, o, &mut r)?,
        "symbol sqrt" => symbol_sqrt_cmd(g, o, &mut r)?,
        "symbol power" => symbol_power_cmd(g, o, &mut r)?,
        "symbol freeze" => symbol_freeze(g, o, &mut r)?,
        "parametrix" => parametrix(g, o, &mut r)?,
        "funcalc contour" => funcalc_contour(g, o, &mut r)?,
        "funcalc operator" => funcalc_operator(g, o, &mut r)?,
        "diagnose class" => diagnose_class(g, o, &mut r)?,
        "diagnose elliptic" => diagnose_elliptic(g, o, &mut r)?,
        "diagnose param-elliptic" => diagnose_param(g, o, &mut r)?,
        "garding decompose" => garding_decompose_cmd(g, o, &mut r)?,
        "garding verify" => garding_verify_cmd(g, o, &mut r)?,
        "garding l2" => garding_l2(g, o, &mut r)?,
        "bench" => bench(g, o, &mut r)?,
        other => return Err(Error::InvalidArgument(format!("unknown command {other:?}"))),
    }
    Ok(r)
}

/// A loaded symbol and its order.
struct Loaded<G: CompactGroup> {
    sigma: Symbol<G>,
    m: f64,
    m_source: &'static str,
}

fn workspace<G: CompactGroup>(g: G, o: &Opts, preset: &Preset) -> Result<Arc<Workspace<G>>> {
    let max_order = (o.order() + 1).clamp(1, MAX_ORDER_CAP);
    Workspace::new(g, o.band(), o.x_capacity().max(preset.x_degree()), max_order)
}

fn fitted_order<G: CompactGroup>(sigma: &Symbol<G>) -> Option<f64> {
    let shells = sigma.shell_op_norms();
    let top = shells.last()?.0;
    psido::fit::loglog_slope(&psido::fit::fit_window(&shells, top))
}

fn load<G: Presets>(g: G, o: &Opts, default_preset: &str) -> Result<Loaded<G>> {
    let (sigma, preset_order) = match &o.symbol {
        Some(path) => {
            let c = read_file(path)?;
            let ws = io::workspace_for(g, &c.manifest)?;
            (io::symbol_from_container(ws, &c)?, None)
        }
        None => {
            let p = Preset::parse(o.preset.as_deref().unwrap_or(default_preset))?;
            let ws = workspace(g, o, &p)?;
            (p.build(&ws, o.seed())?, Some(p.order()))
        }
    };
    let (m, m_source) = match (o.m, preset_order) {
        (Some(m), _) => (m, "option"),
        (None, Some(m)) => (m, "preset"),
        (None, None) => {
            let s =
                fitted_order(&sigma).ok_or_else(|| Error::InvalidArgument("band too small to fit the order; pass --m".into()))?;
            ((2.0 * s).round() / 2.0, "fit")
        }
    };
    Ok(Loaded { sigma, m, m_source })
}

fn describe<G: CompactGroup>(r: &mut Report, l: &Loaded<G>) {
    let ws = &l.sigma.ws;
    r.set_num("band", ws.band);
    r.set("classes", ws.dual.len());
    r.set("x_capacity", ws.x_capacity);
    r.set("x_grid", ws.xgrid.descriptor());
    r.set("max_order", ws.max_order);
    r.set(
        "x_band",
        match l.sigma.x_band {
            XBand::Exact(b) => format!("exact:{b}"),
            XBand::Smooth => "smooth".into(),
        },
    );
    r.set_num("m", l.m);
    r.set("m_source", l.m_source);
}

fn x_degree<G: CompactGroup>(s: &Symbol<G>) -> u32 {
    match s.x_band {
        XBand::Exact(b) => b,
        XBand::Smooth => s.ws.x_capacity,
    }
}

fn sector<G: CompactGroup>(o: &Opts, sigma: &Symbol<G>, m: f64, default_disk: bool) -> Result<Sector> {
    let eps = match o.eps {
        Some(e) => e,
        None if default_disk => default_eps(sigma),
        None => 0.0,
    };
    Sector::with_direction(o.theta0(), o.phi(), eps, m)
}

fn sector_report(r: &mut Report, s: &Sector) {
    r.set_num("sector.theta0", s.theta0);
    r.set_num("sector.phi", s.phi);
    r.set_num("sector.eps", s.eps);
}

fn contour_opts(o: &Opts) -> ContourOptions {
    ContourOptions { tol: o.contour_tol(), ..ContourOptions::default() }
}

/// Largest relative block difference over valid blocks, scaled by `max(1, sup ||b||)`.
fn rel_diff<G: CompactGroup>(a: &Symbol<G>, b: &Symbol<G>) -> f64 {
    a.max_abs_diff(b) / b.sup_op_norm().max(1.0)
}

fn rng(o: &Opts) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(o.seed())
}

// ---- dual / fourier / op ----

fn dual_list<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let dual = g.dual_enumerate(o.band());
    r.set_num("band", o.band());
    r.set("classes", dual.len());
    r.set("entries", dual.total_len());
    let mut t = Table::new("dual", &["index", "label", "degree", "dim", "bracket", "bracket_sq"]);
    for (k, xi) in dual.iter().enumerate() {
        t.push(vec![
            k.to_string(),
            xi.label_string(),
            xi.degree().to_string(),
            xi.dim.to_string(),
            num(xi.weight()),
            num(xi.weight_sq),
        ]);
    }
    r.table(t);
    Ok(())
}

fn read_function<G: CompactGroup>(g: G, path: &std::path::Path) -> Result<GroupFunction<G>> {
    io::function_from_container(g, &read_file(path)?)
}

fn fourier_fwd<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let band = o.band();
    let dual = Arc::new(g.dual_enumerate(band));
    let f = match &o.input {
        Some(p) => read_function(g.clone(), p)?,
        None => {
            // coefficients on exactly this dual, so the function is band-limited to it
            let grid = Arc::new(g.grid_for_degree(2 * dual.max_degree())?);
            let f = inverse_on(&g, grid, &MatrixSequence::random(dual.clone(), &mut rng(o)))?;
            r.artifact("function.bin", io::encode_function(&f)?);
            f
        }
    };
    let tr = Transform::new(g.clone(), f.grid.clone(), dual.clone());
    let s = tr.forward(&f)?;
    let norm = f.l2_norm_sq();
    let parseval = (norm - weighted_hs_sq(&s, 0.0)).abs() / norm.max(f64::MIN_POSITIVE);
    let back = tr.inverse(&s)?;
    let round_trip =
        back.values.iter().zip(&f.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / norm.sqrt().max(f64::MIN_POSITIVE);
    let tol = o.identity_tol();
    r.set_num("band", band);
    r.set("classes", dual.len());
    r.set("grid", f.grid.descriptor());
    r.set("function_degree", f.degree);
    r.set_num("l2_norm_sq", norm);
    r.set_num("parseval_defect", parseval);
    r.set_num("round_trip_defect", round_trip);
    r.tol("identity", tol);
    r.set("pass", parseval <= tol && round_trip <= tol);
    r.artifact("coefficients.bin", io::encode_sequence(&g, band, &s)?);
    Ok(())
}

fn fourier_inv<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (s, band) = match &o.input {
        Some(p) => {
            let c = read_file(p)?;
            (io::sequence_from_container(&g, &c)?, c.manifest.band)
        }
        None => {
            let band = o.band();
            let s = MatrixSequence::random(Arc::new(g.dual_enumerate(band)), &mut rng(o));
            r.artifact("coefficients.bin", io::encode_sequence(&g, band, &s)?);
            (s, band)
        }
    };
    let f = inverse(&g, &s)?;
    let hs = weighted_hs_sq(&s, 0.0);
    let parseval = (f.l2_norm_sq() - hs).abs() / hs.max(f64::MIN_POSITIVE);
    r.set_num("band", band);
    r.set("classes", s.dual.len());
    r.set("grid", f.grid.descriptor());
    r.set_num("l2_norm_sq", f.l2_norm_sq());
    r.set_num("parseval_defect", parseval);
    r.tol("identity", o.identity_tol());
    r.set("pass", parseval <= o.identity_tol());
    r.artifact("function.bin", io::encode_function(&f)?);
    Ok(())
}

fn op_apply<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let l = load(g.clone(), o, "elliptic:1")?;
    describe(r, &l);
    let sigma = &l.sigma;
    let f = match &o.input {
        Some(p) => read_function(g, p)?,
        None => {
            let degree = trial_degree(sigma);
            let grid = Arc::new(sigma.ws.group.grid_for_degree(2 * (degree + x_degree(sigma)))?);
            let f = random_test_function(&sigma.ws, grid, degree, &mut rng(o))?;
            r.artifact("function.bin", io::encode_function(&f)?);
            f
        }
    };
    let af = quantize_apply(sigma, &f)?;
    r.set("function_degree", f.degree);
    r.set("grid", f.grid.descriptor());
    r.set_num("input_l2_norm", f.l2_norm_sq().sqrt());
    r.set_num("output_l2_norm", af.l2_norm_sq().sqrt());
    r.artifact("result.bin", io::encode_function(&af)?);
    Ok(())
}

// ---- symbol ----

fn symbol_out<G: CompactGroup>(r: &mut Report, prefix: &str, s: &Symbol<G>, name: &str) -> Result<()> {
    r.set_num(&format!("{prefix}.sup_norm"), s.sup_op_norm());
    r.set(&format!("{prefix}.fitted_order"), opt(fitted_order(s)));
    r.set(&format!("{prefix}.margin"), s.margin);
    r.artifact(name, io::encode_symbol(s)?);
    Ok(())
}

fn symbol_make<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let l = load(g, o, "elliptic:1")?;
    describe(r, &l);
    symbol_out(r, "symbol", &l.sigma, "symbol.bin")
}

fn symbol_compose<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (rho, delta) = o.rho_delta(true)?;
    let a = load(g, o, "elliptic:1")?;
    describe(r, &a);
    let ws = a.sigma.ws.clone();
    let (b, mb) = match (&o.symbol2, &o.preset2) {
        (Some(p), _) => (io::symbol_from_container(ws, &read_file(p)?)?, None),
        (None, Some(spec)) => {
            let p = Preset::parse(spec)?;
            (p.build(&ws, o.seed().wrapping_add(1))?, Some(p.order()))
        }
        (None, None) => (a.sigma.clone(), Some(a.m)),
    };
    let n = o.order();
    let c = compose(&a.sigma, &b, n)?;
    r.set_num("rho", rho);
    r.set_num("delta", delta);
    r.set("order", n);
    r.set("expected_order", opt(mb.map(|mb| a.m + mb)));
    symbol_out(r, "composed", &c, "composed.bin")
}

fn symbol_adjoint<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (rho, delta) = o.rho_delta(true)?;
    let l = load(g, o, "elliptic:1")?;
    describe(r, &l);
    let n = o.order();
    let adj = adjoint_symbol(&l.sigma, n)?;
    let back = adjoint_symbol(&adj, n)?;
    r.set_num("rho", rho);
    r.set_num("delta", delta);
    r.set("order", n);
    let twice = back.sub(&l.sigma).with_margin(back.margin);
    r.set_num("double_adjoint_defect", twice.sup_op_norm() / l.sigma.sup_op_norm().max(1.0));
    r.set("double_adjoint_defect_order", opt(shell_decay(&twice)));
    symbol_out(r, "adjoint", &adj, "adjoint.bin")
}

fn symbol_sqrt_cmd<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (rho, delta) = o.rho_delta(false)?;
    let l = load(g, o, "positive")?;
    describe(r, &l);
    let root = symbol_sqrt(&l.sigma)?;
    let defect = rel_diff(&root.mul(&root), &l.sigma);
    r.set_num("rho", rho);
    r.set_num("delta", delta);
    r.set_num("square_defect", defect);
    r.tol("identity", o.identity_tol());
    r.set("pass", defect <= o.identity_tol());
    symbol_out(r, "sqrt", &root, "sqrt.bin")
}

fn symbol_power_cmd<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (rho, delta) = o.rho_delta(false)?;
    let l = load(g, o, "positive")?;
    describe(r, &l);
    let s = o.exponent.unwrap_or(0.5);
    let p = symbol_power(&l.sigma, s)?;
    let q = symbol_power(&l.sigma, 1.0 - s)?;
    let defect = rel_diff(&p.mul(&q), &l.sigma);
    r.set_num("rho", rho);
    r.set_num("delta", delta);
    r.set_num("exponent", s);
    r.set_num("expected_order", s * l.m);
    r.set_num("semigroup_defect", defect);
    r.tol("identity", o.identity_tol());
    r.set("pass", defect <= o.identity_tol());
    symbol_out(r, "power", &p, "power.bin")
}

fn symbol_freeze<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let l = load(g.clone(), o, "elliptic:1")?;
    describe(r, &l);
    let x0 = match o.point()? {
        Some(c) => g.from_coords(&c)?,
        None => g.identity(),
    };
    let s = freeze(&l.sigma, &x0)?;
    r.set("point", format!("{:?}", g.coords(&x0)));
    let mut t = Table::new("schatten", &["p", "norm"]);
    for p in [1.0, 2.0, f64::INFINITY] {
        t.push(vec![num(p), num(schatten_lp_norm(&s, p)?)]);
    }
    r.table(t);
    r.artifact("frozen.bin", io::encode_sequence(&g, l.sigma.ws.band, &s)?);
    Ok(())
}

// ---- parametrix ----

fn lambdas(o: &Opts, s: &Sector) -> Result<Vec<C64>> {
    Ok(match o.lambda()? {
        Some(z) => vec![z],
        None => {
            let rho = o.lambda_modulus.unwrap_or(0.1);
            s.rays().iter().map(|&th| C64::from_polar(rho, th)).collect()
        }
    })
}

fn parametrix<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (rho, delta) = o.rho_delta(true)?;
    let l = load(g, o, "elliptic:1")?;
    describe(r, &l);
    let sec = sector(o, &l.sigma, l.m, false)?;
    sector_report(r, &sec);
    let n_max = o.order();
    let tol = o.slope_tol();
    r.set_num("rho", rho);
    r.set_num("delta", delta);
    r.set("order", n_max);
    r.tol("slope_relative", tol);
    let mut t = Table::new(
        "residuals",
        &["lambda_re", "lambda_im", "n", "theory", "residual_order", "cross_order", "pass", "cross_pass"],
    );
    let (mut pass, mut cross_pass) = (true, true);
    let mut first = None;
    for lam in lambdas(o, &sec)? {
        let p = parametrix_build(&l.sigma, &sec, n_max, lam)?;
        for n in 0..=n_max {
            let theory = -(rho - delta) * (n as f64 + 1.0);
            let own = shell_decay(&p.residual(n)?);
            let cross = shell_decay(&p.cross_residual(n)?);
            let ok = |s: Option<f64>| s.is_some_and(|s| (s - theory).abs() <= tol * theory.abs());
            pass &= ok(own);
            cross_pass &= ok(cross);
            t.push(vec![
                num(lam.re),
                num(lam.im),
                n.to_string(),
                num(theory),
                opt(own),
                opt(cross),
                ok(own).to_string(),
                ok(cross).to_string(),
            ]);
        }
        first.get_or_insert(p.partial_sum(n_max));
    }
    r.table(t);
    r.set("pass", pass);
    r.set("cross_pass", cross_pass);
    if let Some(s) = first {
        r.artifact("parametrix.bin", io::encode_symbol(&s)?);
    }
    Ok(())
}

// ---- funcalc ----

fn holo(o: &Opts) -> Result<HoloFunction> {
    HoloFunction::parse(o.function.as_deref().unwrap_or("sqrt"))
}

/// `F(sigma)` block by block through the spectral decomposition.
fn spectral<G: CompactGroup>(sigma: &Symbol<G>, f: &HoloFunction) -> Result<Symbol<G>> {
    sigma.try_map_blocks(sigma.x_band.nonlinear(), |_, k, b| {
        if sigma.is_valid(k) {
            matrix_function_spectral(b, f)
        } else {
            Ok(b.clone() * C64::new(0.0, 0.0))
        }
    })
}

fn funcalc_contour<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (rho, delta) = o.rho_delta(false)?;
    let l = load(g, o, "positive")?;
    describe(r, &l);
    let f = holo(o)?;
    let sec = sector(o, &l.sigma, l.m, false)?;
    sector_report(r, &sec);
    let k = f.default_factor();
    let shifted = f.shifted(k);
    let opts = contour_opts(o);
    let contour = symbol_contour(&l.sigma, &sec, &shifted, &opts)?;
    let mut out = contour_integrate(&l.sigma, &shifted, &contour)?;
    for _ in 0..k {
        out = out.mul(&l.sigma);
    }
    let defect = rel_diff(&out, &spectral(&l.sigma, &f)?);
    r.set_num("rho", rho);
    r.set_num("delta", delta);
    r.set("function", f.name());
    r.set("factor_power", k);
    r.set("contour_nodes", contour.len());
    r.set_num("spectral_defect", defect);
    r.tol("contour", opts.tol);
    r.tol("spectral", SPECTRAL_TOL);
    r.set("pass", defect <= SPECTRAL_TOL);
    symbol_out(r, "result", &out, "funcalc.bin")
}

fn funcalc_operator<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (rho, delta) = o.rho_delta(true)?;
    let l = load(g, o, "positive")?;
    describe(r, &l);
    let f = holo(o)?;
    let sec = sector(o, &l.sigma, l.m, false)?;
    sector_report(r, &sec);
    let n = o.order();
    let opts = contour_opts(o);
    let out = operator_function_with(&l.sigma, &f, &sec, n, &opts)?;
    r.set_num("rho", rho);
    r.set_num("delta", delta);
    r.set("order", n);
    r.set("function", f.name());
    r.tol("contour", opts.tol);
    if l.sigma.is_invariant() {
        let defect = rel_diff(&out, &spectral(&l.sigma, &f)?);
        r.set_num("spectral_defect", defect);
        r.tol("spectral", SPECTRAL_TOL);
        r.set("pass", defect <= SPECTRAL_TOL);
    }
    symbol_out(r, "result", &out, "operator.bin")
}

// ---- diagnose ----

fn diagnose_class<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (rho, delta) = o.rho_delta(false)?;
    let l = load(g, o, "elliptic:1")?;
    describe(r, &l);
    let (am, bm) = (o.alpha_max.unwrap_or(1), o.beta_max.unwrap_or(1));
    let rep = class_diagnose(&l.sigma, l.m, rho, delta, am, bm)?;
    r.set_num("rho", rho);
    r.set_num("delta", delta);
    r.set("alpha_max", am);
    r.set("beta_max", bm);
    r.set_num("worst_ratio", rep.worst_ratio);
    r.set("fitted_rho", opt(rep.fitted_rho));
    r.set("fitted_delta", opt(rep.fitted_delta));
    r.tol("ratio", CLASS_RATIO);
    r.set("verdict", rep.verdict);
    let mut t = Table::new("class", &["alpha", "beta", "constant", "constant_half", "ratio", "slope"]);
    let idx = |v: &[u8]| v.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",");
    for e in &rep.entries {
        t.push(vec![idx(&e.alpha), idx(&e.beta), num(e.constant), num(e.constant_half), num(e.ratio), opt(e.slope)]);
    }
    r.table(t);
    Ok(())
}

fn diagnose_elliptic<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let l = load(g, o, "elliptic:1")?;
    describe(r, &l);
    let rep = ellipticity_check(&l.sigma, l.m)?;
    r.set_num("constant", rep.constant);
    r.set_num("excision_radius", rep.excision_radius);
    r.set("flagged_blocks", rep.flagged.len());
    r.set("elliptic", rep.constant.is_finite());
    let mut t = Table::new("shells", &["bracket", "min_singular_value"]);
    for (w, s) in &rep.shells {
        t.push(vec![num(*w), num(*s)]);
    }
    r.table(t);
    Ok(())
}

fn diagnose_param<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let l = load(g, o, "elliptic:1")?;
    describe(r, &l);
    let sec = sector(o, &l.sigma, l.m, true)?;
    sector_report(r, &sec);
    let samples = sec.default_samples(&l.sigma);
    let rep = param_ellipticity_check(&l.sigma, &sec, &samples)?;
    r.set("samples", rep.samples);
    r.set_num("constant", rep.constant);
    r.set_num("constant_doubled", rep.constant_doubled);
    r.set("stable", rep.stable);
    r.set("witness", rep.witness.as_ref().map_or_else(|| "none".into(), |w| w.to_string()));
    r.tol("doubling_ratio", DOUBLING_RATIO);
    r.tol("near_singular_condition", NEAR_SINGULAR_COND);
    r.set("parameter_elliptic", rep.parameter_elliptic);
    Ok(())
}

// ---- garding ----

fn garding_decompose_cmd<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (rho, delta) = o.rho_delta(true)?;
    let l = load(g, o, "positive")?;
    describe(r, &l);
    let d = garding_decompose(&l.sigma, rho, delta)?;
    r.set_num("rho", rho);
    r.set_num("delta", delta);
    r.set_num("lower_bound", d.lower_bound);
    r.set_num("excision", d.excision);
    r.set("modified_blocks", d.modified_blocks);
    r.set("residual_order", opt(d.residual_slope));
    r.set("residual_hermitian_order", opt(d.residual_herm_slope));
    r.set("uncorrected_order", opt(d.uncorrected_slope));
    r.set("sigma0_order", opt(d.sigma0_slope));
    r.set_num("sigma0_sup", d.sigma0_sup);
    r.set_num("skew_ratio", d.skew_ratio);
    r.artifact("b.bin", io::encode_symbol(&d.b)?);
    r.artifact("sigma0.bin", io::encode_symbol(&d.sigma0)?);
    r.artifact("residual.bin", io::encode_symbol(&d.residual)?);
    let k = o.k.unwrap_or(0);
    if k > 0 {
        let s = higher_order_sqrt_series(&l.sigma, 0.5 * l.m, k, rho, delta)?;
        r.set("series.achieved_k", s.achieved_k);
        r.set_num("series.lower_bound", s.lower_bound);
        r.set_num("series.hermitian_defect", s.hermitian_defect);
        let mut t = Table::new("series", &["j", "fit_from", "residual_order", "hermitian_residual_order"]);
        for j in 0..s.residual_slopes.len() {
            t.push(vec![
                j.to_string(),
                s.fit_from.get(j).map_or_else(|| "none".into(), |v| num(*v)),
                opt(s.residual_slopes[j]),
                opt(s.herm_residual_slopes.get(j).copied().flatten()),
            ]);
        }
        r.table(t);
    }
    Ok(())
}

fn garding_verify_cmd<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (rho, delta) = o.rho_delta(true)?;
    let l = load(g, o, "positive")?;
    describe(r, &l);
    let rep = garding_verify(&l.sigma, l.m, o.trials(), o.seed())?;
    r.set_num("rho", rho);
    r.set_num("delta", delta);
    r.set("trials", rep.trials.len());
    r.set("seed", rep.seed);
    r.set("degree", rep.degree);
    r.set_num("c1", rep.c1);
    r.set_num("c2", rep.c2);
    r.set_num("c1_least_squares", rep.c1_ls);
    r.set_num("c2_least_squares", rep.c2_ls);
    r.set_num("margin", rep.margin);
    r.set("witness", rep.witness);
    r.set("residual_order", opt(rep.residual_slope));
    r.tol("margin", GARDING_MARGIN);
    r.set("pass", rep.pass);
    let mut t = Table::new("trials", &["trial", "re_form", "sobolev_sq", "l2_sq"]);
    for (i, tr) in rep.trials.iter().enumerate() {
        t.push(vec![i.to_string(), num(tr.re_form), num(tr.sobolev_sq), num(tr.l2_sq)]);
    }
    r.table(t);
    Ok(())
}

fn garding_l2<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let (rho, delta) = o.rho_delta(true)?;
    let l = load(g, o, "elliptic:0")?;
    describe(r, &l);
    let c = l2_bound_certificate(&l.sigma, rho, delta, o.seed())?;
    r.set_num("rho", rho);
    r.set_num("delta", delta);
    r.set_num("sup_norm", c.sup_norm);
    r.set_num("m_bound", c.m_bound);
    r.set_num("residual_sup", c.residual_sup);
    r.set("residual_order", opt(c.residual_slope));
    r.set_num("power_norm", c.power_norm);
    r.set("iterations", c.iterations);
    r.set_num("slack", c.slack);
    r.tol("slack", L2_SLACK);
    r.set("pass", c.pass);
    Ok(())
}

// ---- bench ----

/// Timings go to stderr; the files carry sizes and output checksums so repeated runs stay
/// byte-identical.
fn bench<G: Presets>(g: G, o: &Opts, r: &mut Report) -> Result<()> {
    let band = o.band();
    let mut t = Table::new("bench", &["kernel", "size", "output_sha256"]);
    let mut timings = Vec::new();
    let mut time = |name: &str, size: usize, f: &mut dyn FnMut() -> Result<Vec<u8>>| -> Result<()> {
        let start = Instant::now();
        let bytes = f()?;
        timings.push((name.to_string(), start.elapsed().as_secs_f64()));
        t.push(vec![name.into(), size.to_string(), sha256_hex(&bytes)]);
        Ok(())
    };

    let dual = Arc::new(g.dual_enumerate(band));
    let d = dual.max_degree();
    let grid = Arc::new(g.grid_for_degree(2 * d)?);
    let f = GroupFunction::random(g.clone(), grid.clone(), d, &mut rng(o))?;
    time("fourier_forward", grid.len(), &mut || {
        let s = Transform::new(g.clone(), grid.clone(), dual.clone()).forward(&f)?;
        io::encode_sequence(&g, band, &s)
    })?;

    let p = Preset::Elliptic(1.0);
    let ws = workspace(g.clone(), o, &p)?;
    let a = p.build(&ws, o.seed())?;
    let n = o.order().min(ws.max_order);
    time("compose", ws.nx() * ws.dual.len(), &mut || io::encode_symbol(&compose(&a, &a, n)?))?;
    let pos = Preset::Positive.build(&ws, o.seed())?;
    time("symbol_sqrt", ws.nx() * ws.dual.len(), &mut || io::encode_symbol(&symbol_sqrt(&pos)?))?;
    let sec = Sector::new(o.phi(), 0.0, 1.0)?;
    time("parametrix", ws.nx() * ws.dual.len(), &mut || {
        io::encode_symbol(&parametrix_build(&a, &sec, n, C64::from_polar(0.1, sec.theta0))?.partial_sum(n))
    })?;
    r.set_num("band", band);
    r.set("order", n);
    r.table(t);
    for (name, secs) in timings {
        eprintln!("timing.{name}.seconds = {secs:.6}");
    }
    Ok(())
}
