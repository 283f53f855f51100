//! Quantization `Op(sigma)`, composition and adjoint expansions, coefficient freezing.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::{GroupFunction, MatrixSequence, Transform};
use crate::group::{CompactGroup, Dual, QuadratureGrid};
use crate::linalg::{CMat, C64};
use crate::symbol::{abs, factorial, Symbol, Workspace, XBand};

fn sub_dual<G: CompactGroup>(ws: &Workspace<G>, degree: u32) -> (Arc<Dual>, Vec<usize>) {
    let keep: Vec<usize> = (0..ws.dual.len()).filter(|&k| ws.dual.get(k).degree() <= degree).collect();
    let dual = Dual::new(ws.group.id(), keep.iter().map(|&k| ws.dual.get(k).clone()).collect());
    (Arc::new(dual), keep)
}

fn same_grid<P: PartialEq>(a: &QuadratureGrid<P>, b: &QuadratureGrid<P>) -> bool {
    std::ptr::eq(a, b) || (a.degree == b.degree && a.layout == b.layout && a.points == b.points)
}

/// Random function whose coefficients live on workspace classes of degree `<= degree`.
pub fn random_test_function<G: CompactGroup, R: Rng + ?Sized>(
    ws: &Workspace<G>,
    grid: Arc<QuadratureGrid<G::Point>>,
    degree: u32,
    rng: &mut R,
) -> Result<GroupFunction<G>> {
    let (dual, _) = sub_dual(ws, degree);
    let s = MatrixSequence::random(dual, rng);
    let mut f = crate::fourier::inverse_on(&ws.group, grid, &s)?;
    f.degree = degree;
    let n = f.l2_norm_sq().sqrt();
    Ok(f.scale(C64::new(1.0 / n, 0.0)))
}

/// Random unit-norm function with coefficients on workspace classes whose degree lies in
/// `[lo, hi]`.
pub fn random_band_function<G: CompactGroup, R: Rng + ?Sized>(
    ws: &Workspace<G>,
    grid: Arc<QuadratureGrid<G::Point>>,
    lo: u32,
    hi: u32,
    rng: &mut R,
) -> Result<GroupFunction<G>> {
    let (dual, _) = sub_dual(ws, hi);
    let mut s = MatrixSequence::random(dual.clone(), rng);
    for (k, xi) in dual.iter().enumerate() {
        if xi.degree() < lo {
            s.set_block(k, &CMat::zeros(xi.dim, xi.dim));
        }
    }
    let mut f = crate::fourier::inverse_on(&ws.group, grid, &s)?;
    f.degree = hi;
    let n = f.l2_norm_sq().sqrt();
    Ok(f.scale(C64::new(1.0 / n, 0.0)))
}

/// `A f(x) = sum_xi d_xi tr(xi(x) sigma(x, xi) f^(xi))` at the grid points of `f`.
pub fn quantize_apply<G: CompactGroup>(sigma: &Symbol<G>, f: &GroupFunction<G>) -> Result<GroupFunction<G>> {
    let ws = &sigma.ws;
    let (dual, keep) = sub_dual(ws, f.degree);
    let tr = Transform::new(ws.group.clone(), f.grid.clone(), dual.clone());
    let fh = tr.forward_raw(&f.values);
    let captured: f64 = dual
        .iter()
        .enumerate()
        .map(|(k, xi)| {
            let off = dual.offset(k);
            xi.dim as f64 * fh[off..off + xi.dim * xi.dim].iter().map(|z| z.norm_sqr()).sum::<f64>()
        })
        .sum();
    let norm = f.l2_norm_sq();
    if (norm - captured).abs() > 1e-9 * norm.max(1e-300) {
        return Err(Error::BandMismatch("function has components outside the symbol's dual".into()));
    }
    if keep.iter().any(|&k| !sigma.is_valid(k)) {
        return Err(Error::BandMismatch(format!(
            "function of degree {} reaches blocks invalidated by difference margin {}",
            f.degree, sigma.margin
        )));
    }
    let out_degree = match sigma.x_band {
        XBand::Exact(b) => f.degree + b,
        XBand::Smooth => f.grid.degree / 2,
    };
    if 2 * out_degree > f.grid.degree {
        return Err(Error::BandMismatch(format!(
            "output degree {out_degree} overflows the grid (exact to degree {})",
            f.grid.degree
        )));
    }
    let blocks_of = |slice: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); dual.total_len()];
        for (j, &k) in keep.iter().enumerate() {
            let d = dual.get(j).dim;
            let (src, dst) = (ws.dual.offset(k), dual.offset(j));
            let s = CMat::from_column_slice(d, d, &slice[src..src + d * d]);
            let fb = CMat::from_column_slice(d, d, &fh[dst..dst + d * d]);
            out[dst..dst + d * d].copy_from_slice((s * fb).as_slice());
        }
        out
    };
    let values: Vec<C64> = if sigma.is_invariant() {
        tr.inverse_raw(&blocks_of(sigma.slice(0)))
    } else if same_grid(&f.grid, &ws.xgrid) {
        f.grid
            .points
            .par_iter()
            .enumerate()
            .map(|(ix, x)| {
                let prod = blocks_of(sigma.slice(ix));
                let reps = ws.group.rep_matrices(&dual, x);
                let mut acc = C64::new(0.0, 0.0);
                for (j, xi) in dual.iter().enumerate() {
                    let d = xi.dim;
                    let off = dual.offset(j);
                    let r = &reps[j];
                    let mut t = C64::new(0.0, 0.0);
                    for a in 0..d {
                        for b in 0..d {
                            t += r[(a, b)] * prod[off + b + a * d];
                        }
                    }
                    acc += t * d as f64;
                }
                acc
            })
            .collect()
    } else {
        // sigma(x, xi) = sum_{eta,p,q} d_eta eta(x)_{pq} S_{eta,qp}(xi)
        let modes = XModes::new(sigma, &keep)?;
        let etas = modes.eta_values(&f.grid.points);
        let parts: Vec<Vec<C64>> = modes
            .list
            .par_iter()
            .map(|(_, _, _, s_blocks)| {
                let mut seq = vec![C64::new(0.0, 0.0); dual.total_len()];
                for j in 0..dual.len() {
                    let d = dual.get(j).dim;
                    let o = dual.offset(j);
                    let fb = CMat::from_column_slice(d, d, &fh[o..o + d * d]);
                    seq[o..o + d * d].copy_from_slice((&s_blocks[j] * fb).as_slice());
                }
                tr.inverse_raw(&seq)
            })
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); f.grid.len()];
        for (m, part) in parts.iter().enumerate() {
            for (ix, o) in out.iter_mut().enumerate() {
                *o += etas[m][ix] * part[ix];
            }
        }
        out
    };
    GroupFunction::new(f.group.clone(), f.grid.clone(), values, out_degree)
}

fn check_order<G: CompactGroup>(ws: &Workspace<G>, n: usize) -> Result<Vec<Vec<u8>>> {
    if n > ws.max_order {
        return Err(Error::OrderOverflow { requested: n, max: ws.max_order });
    }
    Ok(ws.alphas().iter().filter(|a| abs(a) <= n).cloned().collect())
}

/// `sum_{|alpha| <= n} (1/alpha!) (D^alpha sigma_a)(d^(alpha) sigma_b)`.
pub fn compose<G: CompactGroup>(a: &Symbol<G>, b: &Symbol<G>, n: usize) -> Result<Symbol<G>> {
    let alphas = check_order(&a.ws, n)?;
    let margin = (a.margin + n as u32).max(b.margin);
    if b.is_invariant() || n == 0 {
        return Ok(a.mul(b).with_margin(if n == 0 { a.margin.max(b.margin) } else { margin }));
    }
    let da = a.differences(&alphas)?;
    let db = b.taylor_derivatives(&alphas)?;
    let mut sum = da[0].mul(&db[0]);
    for ((alpha, x), y) in alphas.iter().zip(&da).zip(&db).skip(1) {
        sum = sum.add(&x.mul(y).scale(C64::new(1.0 / factorial(alpha), 0.0)));
    }
    Ok(sum.with_margin(margin))
}

/// `sum_{|alpha| <= n} (1/alpha!) d^(alpha) D^alpha (sigma^*)`.
pub fn adjoint_symbol<G: CompactGroup>(sigma: &Symbol<G>, n: usize) -> Result<Symbol<G>> {
    let alphas = check_order(&sigma.ws, n)?;
    let star = sigma.adjoint_pointwise();
    if star.is_invariant() || n == 0 {
        return Ok(star);
    }
    let diffs = star.differences(&alphas)?;
    let mut sum = star.clone();
    for (alpha, d) in alphas.iter().zip(&diffs).skip(1) {
        sum = sum.add(&d.taylor_derivative(alpha)?.scale(C64::new(1.0 / factorial(alpha), 0.0)));
    }
    Ok(sum.with_margin(sigma.margin + n as u32))
}

/// `xi -> sigma(x0, xi)`: exact interpolation for band-limited x-dependence, nearest grid
/// point otherwise.
pub fn freeze<G: CompactGroup>(sigma: &Symbol<G>, x0: &G::Point) -> Result<MatrixSequence> {
    let ws = &sigma.ws;
    match sigma.x_band {
        XBand::Exact(0) => Ok(sigma.freeze_index(0)),
        XBand::Exact(_) => Ok(MatrixSequence { dual: ws.dual.clone(), data: sigma.interpolant()?.eval(x0) }),
        XBand::Smooth => {
            let g = &ws.group;
            let ix = (0..ws.nx())
                .min_by(|&i, &j| {
                    let di = g.distance_from_identity(&g.mul(&g.inv(&ws.xgrid.points[i]), x0));
                    let dj = g.distance_from_identity(&g.mul(&g.inv(&ws.xgrid.points[j]), x0));
                    di.total_cmp(&dj)
                })
                .unwrap();
            Ok(sigma.freeze_index(ix))
        }
    }
}

/// The frozen operator via its mollifier characterisation at finite `eps`:
/// `int phi_eps(x0^{-1} x') A[f(x x'^{-1} .)](x') dx'`, with `phi_eps` the normalised bump
/// `exp(-1/(1 - r^2))`, `r = |v| / eps`, on the chart `x' = x0 exp(v_1 X_1) ... exp(v_n X_n)`
/// sampled by a tensor Gauss-Legendre rule with `nodes` points per axis.
pub fn freeze_limit<G: CompactGroup>(
    sigma: &Symbol<G>,
    x0: &G::Point,
    f: &GroupFunction<G>,
    eps: f64,
    nodes: usize,
) -> Result<GroupFunction<G>> {
    let ws = &sigma.ws;
    let g = &ws.group;
    let dim = g.dim();
    let (gl, gw) = crate::group::gauss_legendre(nodes);
    let mut samples: Vec<(G::Point, f64)> = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let v: Vec<f64> = idx.iter().map(|&i| eps * gl[i]).collect();
        let r2 = v.iter().map(|t| t * t).sum::<f64>() / (eps * eps);
        if r2 < 1.0 {
            let w: f64 = idx.iter().map(|&i| gw[i]).product::<f64>() * (-1.0 / (1.0 - r2)).exp();
            let mut p = x0.clone();
            for (i, t) in v.iter().enumerate() {
                p = g.mul(&p, &g.exp(i, *t));
            }
            samples.push((p, w));
        }
        let mut k = 0;
        while k < dim {
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == dim {
            break;
        }
    }
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let (dual, keep) = sub_dual(ws, f.degree);
    let tr = Transform::new(g.clone(), f.grid.clone(), dual.clone());
    let fh = tr.forward_raw(&f.values);
    let interp = sigma.interpolant()?;
    // sigma(x', .) restricted to the support of f^
    let local: Vec<(Vec<CMat>, Vec<CMat>, f64)> = samples
        .par_iter()
        .map(|(p, w)| {
            let all = interp.eval(p);
            let blocks = keep
                .iter()
                .map(|&k| {
                    let d = ws.dual.get(k).dim;
                    let off = ws.dual.offset(k);
                    CMat::from_column_slice(d, d, &all[off..off + d * d])
                })
                .collect();
            (g.rep_matrices(&dual, p), blocks, w / total)
        })
        .collect();
    let fblocks: Vec<CMat> = (0..dual.len())
        .map(|j| {
            let d = dual.get(j).dim;
            let off = dual.offset(j);
            CMat::from_column_slice(d, d, &fh[off..off + d * d])
        })
        .collect();
    let values: Vec<C64> = f
        .grid
        .points
        .par_iter()
        .map(|x| {
            let reps_x = g.rep_matrices(&dual, x);
            let mut acc = C64::new(0.0, 0.0);
            for (reps_p, sig, w) in &local {
                // A applied to the translate f(x x'^{-1} .), evaluated at x'
                let mut h = C64::new(0.0, 0.0);
                for (j, xi) in dual.iter().enumerate() {
                    let translated = &fblocks[j] * (&reps_p[j] * reps_x[j].adjoint()).adjoint();
                    h += (&reps_p[j] * &sig[j] * translated).trace() * xi.dim as f64;
                }
                acc += h * *w;
            }
            acc
        })
        .collect();
    GroupFunction::new(f.group.clone(), f.grid.clone(), values, f.degree)
}

/// Exact formal adjoint `A^* g` projected onto classes of degree `<= degree`:
/// `(A^* g)^(xi) = int g(x) sigma(x, xi)^* xi(x)^* dx`, by quadrature on the grid of `g`.
pub fn quantize_adjoint_apply<G: CompactGroup>(sigma: &Symbol<G>, g: &GroupFunction<G>, degree: u32) -> Result<GroupFunction<G>> {
    let ws = &sigma.ws;
    let b = match sigma.x_band {
        XBand::Exact(b) => b,
        XBand::Smooth => return Err(Error::Exactness("the adjoint oracle needs a band-limited symbol".into())),
    };
    if g.grid.degree < g.degree + b + degree || 2 * degree > g.grid.degree {
        return Err(Error::Exactness(format!(
            "grid degree {} cannot integrate degree {} x {b} x {degree}",
            g.grid.degree, g.degree
        )));
    }
    let (dual, keep) = sub_dual(ws, degree);
    if keep.iter().any(|&k| !sigma.is_valid(k)) {
        return Err(Error::BandMismatch("projection reaches blocks invalidated by the difference margin".into()));
    }
    let tr = Transform::new(ws.group.clone(), g.grid.clone(), dual.clone());
    let mut coeffs = vec![C64::new(0.0, 0.0); dual.total_len()];
    let add = |coeffs: &mut Vec<C64>, s_blocks: &[CMat], gh: &[C64]| {
        for j in 0..dual.len() {
            let d = dual.get(j).dim;
            let o = dual.offset(j);
            let gb = CMat::from_column_slice(d, d, &gh[o..o + d * d]);
            let m = s_blocks[j].adjoint() * gb;
            for (c, v) in coeffs[o..o + d * d].iter_mut().zip(m.iter()) {
                *c += v;
            }
        }
    };
    if sigma.is_invariant() {
        let blocks: Vec<CMat> = keep.iter().map(|&k| sigma.block(0, k)).collect();
        add(&mut coeffs, &blocks, &tr.forward_raw(&g.values));
    } else {
        // (A^* g)^ = sum_{eta,p,q} S_{eta,qp}^* F[g conj(d_eta eta_pq)]
        let modes = XModes::new(sigma, &keep)?;
        let etas = modes.eta_values(&g.grid.points);
        let parts: Vec<Vec<C64>> = etas
            .par_iter()
            .map(|e| {
                let prod: Vec<C64> = g.values.iter().zip(e).map(|(v, w)| v * w.conj()).collect();
                tr.forward_raw(&prod)
            })
            .collect();
        for (m, gh) in parts.iter().enumerate() {
            add(&mut coeffs, &modes.list[m].3, gh);
        }
    }
    let dual = dual.clone();
    let mut h = crate::fourier::inverse_on(&ws.group, g.grid.clone(), &MatrixSequence { dual, data: coeffs })?;
    h.degree = degree;
    Ok(h)
}

/// `||f - g||_{L^2}` for functions on the same grid.
pub fn l2_distance<G: CompactGroup>(f: &GroupFunction<G>, g: &GroupFunction<G>) -> f64 {
    f.values.iter().zip(&g.values).zip(&f.grid.weights).map(|((a, b), w)| w * (a - b).norm_sqr()).sum::<f64>().sqrt()
}

/// Orthogonal projection onto classes of degree `<= degree`.
pub fn project<G: CompactGroup>(ws: &Workspace<G>, f: &GroupFunction<G>, degree: u32) -> Result<GroupFunction<G>> {
    let (dual, _) = sub_dual(ws, degree);
    let tr = Transform::new(ws.group.clone(), f.grid.clone(), dual.clone());
    if f.grid.degree < f.degree + degree {
        return Err(Error::Exactness("grid cannot resolve the projection".into()));
    }
    let values = tr.inverse_raw(&tr.forward_raw(&f.values));
    GroupFunction::new(f.group.clone(), f.grid.clone(), values, degree.min(f.degree))
}

/// x-Fourier modes of a symbol restricted to a set of dual classes.
struct XModes<'a, G: CompactGroup> {
    ws: &'a Workspace<G>,
    /// `(x-dual class, p, q, S_{eta,qp})`.
    list: Vec<(usize, usize, usize, Vec<CMat>)>,
}

impl<'a, G: CompactGroup> XModes<'a, G> {
    fn new(sigma: &'a Symbol<G>, keep: &[usize]) -> Result<Self> {
        let ws = &*sigma.ws;
        let degree = match sigma.x_band {
            XBand::Exact(b) => b,
            XBand::Smooth => ws.x_capacity,
        };
        let coeffs = sigma.x_coeffs()?;
        let mut list = Vec::new();
        for (h, eta) in ws.x_dual.iter().enumerate() {
            if eta.degree() > degree {
                continue;
            }
            let off = ws.x_dual.offset(h);
            let de = eta.dim;
            for p in 0..de {
                for q in 0..de {
                    let blocks = keep
                        .iter()
                        .map(|&k| {
                            let d = ws.dual.get(k).dim;
                            let base = ws.dual.offset(k);
                            // entry (a, b) of xi sits at base + a + b d; coefficient (q, p) at off + q + p de
                            CMat::from_fn(d, d, |a, b| coeffs[base + a + b * d][off + q + p * de])
                        })
                        .collect();
                    list.push((h, p, q, blocks));
                }
            }
        }
        Ok(XModes { ws, list })
    }

    /// `d_eta eta(x)_{pq}` for each mode at each point.
    fn eta_values(&self, points: &[G::Point]) -> Vec<Vec<C64>> {
        let reps: Vec<Vec<CMat>> =
            points.par_iter().map(|x| self.ws.x_dual.iter().map(|eta| self.ws.group.rep_matrix(eta, x)).collect()).collect();
        self.list
            .iter()
            .map(|&(h, p, q, _)| {
                let d = self.ws.x_dual.get(h).dim as f64;
                reps.iter().map(|r| r[h][(p, q)] * d).collect()
            })
            .collect()
    }
}
