//! Symbols `sigma(x, xi)`, difference operators, Taylor-dual derivatives and
//! class diagnostics.
//!
//! A [`Workspace`] fixes the session: group, truncated dual, the x-grid on
//! which symbols are sampled, the difference family and the Taylor-dual
//! operators. Symbols share it through an `Arc`.

mod class;
mod family;
mod taylor;
mod xspec;

pub use class::{class_diagnose, ClassEntry, SymbolClassReport};
pub use family::{
    abs, conj_duality_check, difference_apply_seq, factorial, leibniz_defect, multi_indices, DifferenceFamily, MultiIndex,
};
pub use taylor::TaylorDualOperators;
pub use xspec::XInterpolant;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::{MatrixSequence, Transform};
use crate::group::{CompactGroup, Dual, DualIndex, QuadratureGrid};
use crate::linalg::{op_norm, CMat, C64};

/// Maximum expansion order supported by a workspace.
pub const MAX_ORDER_CAP: usize = 4;

/// Declared x-dependence of a symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XBand {
    /// Every entry is a band-limited function of x of this harmonic degree.
    /// Degree 0 means x-independent.
    Exact(u32),
    /// Smooth but not band-limited (square roots, powers, resolvents); spectral
    /// operations in x are then approximations on the x-grid.
    Smooth,
}

impl XBand {
    pub fn plus(self, other: XBand) -> XBand {
        match (self, other) {
            (XBand::Exact(a), XBand::Exact(b)) => XBand::Exact(a + b),
            _ => XBand::Smooth,
        }
    }

    pub fn is_invariant(self) -> bool {
        self == XBand::Exact(0)
    }

    /// Pointwise nonlinear maps keep invariance and lose band-limitedness.
    pub fn nonlinear(self) -> XBand {
        if self.is_invariant() {
            self
        } else {
            XBand::Smooth
        }
    }
}

pub struct Workspace<G: CompactGroup> {
    pub group: G,
    pub band: f64,
    pub dual: Arc<Dual>,
    /// Largest label radius in the dual; a block is valid when its radius plus the
    /// symbol's difference margin stays within it.
    pub r_max: f64,
    pub xgrid: Arc<QuadratureGrid<G::Point>>,
    pub x_capacity: u32,
    pub x_dual: Arc<Dual>,
    pub max_order: usize,
    pub family: DifferenceFamily,
    pub taylor: TaylorDualOperators,
    pub(crate) x_transform: Transform<G>,
    pub(crate) kernel: Transform<G>,
    pub(crate) qpow: Vec<Vec<C64>>,
    pub(crate) alphas: Vec<MultiIndex>,
    /// `d eta(X_i)` for `eta` in the x-dual.
    pub(crate) x_derived: Vec<Vec<CMat>>,
    /// `sum_w C_alpha[w] d eta(X_w)` for each alpha and `eta` in the x-dual.
    pub(crate) x_taylor: Vec<Vec<CMat>>,
}

impl<G: CompactGroup> std::fmt::Debug for Workspace<G> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workspace")
            .field("group", &self.group.id())
            .field("band", &self.band)
            .field("dual", &self.dual.len())
            .field("x_capacity", &self.x_capacity)
            .field("x_points", &self.xgrid.len())
            .field("max_order", &self.max_order)
            .finish()
    }
}

impl<G: CompactGroup> Workspace<G> {
    /// `band`: dual truncation `<xi> <= band`; `x_capacity`: harmonic degree of x-dependence
    /// handled exactly (the x-grid integrates degree `2 * x_capacity`); `max_order`: cap on
    /// difference and expansion orders.
    pub fn new(group: G, band: f64, x_capacity: u32, max_order: usize) -> Result<Arc<Self>> {
        if max_order > MAX_ORDER_CAP {
            return Err(Error::OrderOverflow { requested: max_order, max: MAX_ORDER_CAP });
        }
        if !(band >= 1.0) {
            return Err(Error::InvalidArgument(format!("band {band} must be >= 1")));
        }
        let dual = Arc::new(group.dual_enumerate(band));
        let jmax = dual.max_degree();
        let xgrid = Arc::new(group.grid_for_degree(2 * x_capacity)?);
        let x_dual = Arc::new(group.dual_by_degree(x_capacity));
        let kgrid = Arc::new(group.grid_for_degree(2 * jmax + max_order as u32)?);
        let family = DifferenceFamily::new(&group);
        let taylor = TaylorDualOperators::build(&group, &family, max_order)?;
        let alphas = multi_indices(family.len(), max_order);
        let samples = family.sample(&group, &kgrid.points);
        let qpow = alphas.iter().map(|a| family.power(&samples, a)).collect();
        let x_derived: Vec<Vec<CMat>> =
            x_dual.iter().map(|eta| (0..group.dim()).map(|i| group.derived_rep(eta, i)).collect()).collect();
        let x_taylor = taylor
            .alphas
            .iter()
            .enumerate()
            .map(|(ai, _)| x_dual.iter().enumerate().map(|(k, eta)| taylor.operator_matrix(ai, eta.dim, &x_derived[k])).collect())
            .collect();
        Ok(Arc::new(Workspace {
            x_transform: Transform::new(group.clone(), xgrid.clone(), x_dual.clone()),
            kernel: Transform::new(group.clone(), kgrid, dual.clone()),
            r_max: dual.max_radius(),
            group,
            band,
            dual,
            xgrid,
            x_capacity,
            x_dual,
            max_order,
            family,
            taylor,
            qpow,
            alphas,
            x_derived,
            x_taylor,
        }))
    }

    pub fn nx(&self) -> usize {
        self.xgrid.len()
    }

    pub fn alpha_index(&self, alpha: &[u8]) -> Result<usize> {
        self.alphas
            .iter()
            .position(|a| a.as_slice() == alpha)
            .ok_or(Error::OrderOverflow { requested: alpha.iter().map(|&v| v as usize).sum(), max: self.max_order })
    }

    pub fn alphas(&self) -> &[MultiIndex] {
        &self.alphas
    }
}

#[derive(Clone)]
pub struct Symbol<G: CompactGroup> {
    pub ws: Arc<Workspace<G>>,
    data: Vec<C64>,
    /// Number of difference steps already applied; blocks within this distance of
    /// the band edge are not trustworthy.
    pub margin: u32,
    pub x_band: XBand,
}

impl<G: CompactGroup> std::fmt::Debug for Symbol<G> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Symbol").field("margin", &self.margin).field("x_band", &self.x_band).finish()
    }
}

impl<G: CompactGroup> Symbol<G> {
    /// Raw constructor: `data` holds one dual-sized slice per x-grid point, or a single
    /// slice when `x_band` is `Exact(0)`.
    pub fn from_raw(ws: Arc<Workspace<G>>, data: Vec<C64>, margin: u32, x_band: XBand) -> Result<Self> {
        let nx = if x_band.is_invariant() { 1 } else { ws.nx() };
        if data.len() != nx * ws.dual.total_len() {
            return Err(Error::InvalidArgument(format!(
                "symbol storage has {} entries, expected {}",
                data.len(),
                nx * ws.dual.total_len()
            )));
        }
        if let XBand::Exact(b) = x_band {
            if b > ws.x_capacity {
                return Err(Error::XBandOverflow(format!("x-band {b} exceeds capacity {}", ws.x_capacity)));
            }
        }
        Ok(Symbol { ws, data, margin, x_band })
    }

    pub(crate) fn raw(ws: Arc<Workspace<G>>, data: Vec<C64>, margin: u32, x_band: XBand) -> Self {
        Symbol { ws, data, margin, x_band }
    }

    pub fn from_fn(ws: Arc<Workspace<G>>, x_band: XBand, f: impl Fn(&G::Point, &DualIndex) -> CMat + Sync) -> Result<Self> {
        let total = ws.dual.total_len();
        let pts: Vec<G::Point> = if x_band.is_invariant() { vec![ws.group.identity()] } else { ws.xgrid.points.clone() };
        let data: Vec<C64> = pts
            .par_iter()
            .map(|x| {
                let mut out = vec![C64::new(0.0, 0.0); total];
                for (k, xi) in ws.dual.iter().enumerate() {
                    let m = f(x, xi);
                    assert_eq!((m.nrows(), m.ncols()), (xi.dim, xi.dim), "symbol block has the wrong size");
                    let off = ws.dual.offset(k);
                    out[off..off + xi.dim * xi.dim].copy_from_slice(m.as_slice());
                }
                out
            })
            .collect::<Vec<_>>()
            .concat();
        Symbol::from_raw(ws, data, 0, x_band)
    }

    pub fn invariant(ws: Arc<Workspace<G>>, f: impl Fn(&DualIndex) -> CMat + Sync) -> Self {
        Symbol::from_fn(ws, XBand::Exact(0), |_, xi| f(xi)).expect("invariant symbols always fit")
    }

    pub fn identity(ws: Arc<Workspace<G>>) -> Self {
        Symbol::invariant(ws, |xi| CMat::identity(xi.dim, xi.dim))
    }

    pub fn zeros(ws: Arc<Workspace<G>>) -> Self {
        Symbol::invariant(ws, |xi| CMat::zeros(xi.dim, xi.dim))
    }

    /// `<xi>^m I`.
    pub fn bessel(ws: Arc<Workspace<G>>, m: f64) -> Self {
        Symbol::invariant(ws, |xi| CMat::identity(xi.dim, xi.dim) * C64::new(xi.weight().powf(m), 0.0))
    }

    pub fn from_sequence(ws: Arc<Workspace<G>>, s: &MatrixSequence) -> Result<Self> {
        if !s.dual.same_as(&ws.dual) {
            return Err(Error::BandMismatch("sequence dual differs from the workspace dual".into()));
        }
        Symbol::from_raw(ws, s.data.clone(), 0, XBand::Exact(0))
    }

    pub fn is_invariant(&self) -> bool {
        self.x_band.is_invariant()
    }

    /// Number of stored x-slices (1 for invariant symbols).
    pub fn nx(&self) -> usize {
        if self.is_invariant() {
            1
        } else {
            self.ws.nx()
        }
    }

    pub fn slice(&self, ix: usize) -> &[C64] {
        let t = self.ws.dual.total_len();
        let ix = if self.is_invariant() { 0 } else { ix };
        &self.data[ix * t..(ix + 1) * t]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn block(&self, ix: usize, k: usize) -> CMat {
        let d = self.ws.dual.get(k).dim;
        let off = self.ws.dual.offset(k);
        CMat::from_column_slice(d, d, &self.slice(ix)[off..off + d * d])
    }

    /// Values at every x-grid point (replicating invariant symbols).
    pub fn expanded(&self) -> Vec<C64> {
        if self.is_invariant() {
            let mut v = Vec::with_capacity(self.ws.nx() * self.data.len());
            for _ in 0..self.ws.nx() {
                v.extend_from_slice(&self.data);
            }
            v
        } else {
            self.data.clone()
        }
    }

    pub fn freeze_index(&self, ix: usize) -> MatrixSequence {
        MatrixSequence { dual: self.ws.dual.clone(), data: self.slice(ix).to_vec() }
    }

    pub fn is_valid(&self, k: usize) -> bool {
        self.ws.dual.get(k).radius() + self.margin as f64 <= self.ws.r_max + 1e-9
    }

    pub fn valid_indices(&self) -> Vec<usize> {
        (0..self.ws.dual.len()).filter(|&k| self.is_valid(k)).collect()
    }

    /// Blockwise map, parallel over x.
    pub fn map_blocks(&self, x_band: XBand, f: impl Fn(usize, usize, &CMat) -> CMat + Sync) -> Symbol<G> {
        let ws = &self.ws;
        let total = ws.dual.total_len();
        let nx = if x_band.is_invariant() { 1 } else { ws.nx() };
        assert!(self.nx() == 1 || nx == self.nx(), "cannot map an x-dependent symbol to an invariant one");
        let data = (0..nx)
            .into_par_iter()
            .map(|ix| {
                let mut out = vec![C64::new(0.0, 0.0); total];
                for k in 0..ws.dual.len() {
                    let m = f(ix, k, &self.block(ix, k));
                    let off = ws.dual.offset(k);
                    out[off..off + m.len()].copy_from_slice(m.as_slice());
                }
                out
            })
            .collect::<Vec<_>>()
            .concat();
        Symbol { ws: ws.clone(), data, margin: self.margin, x_band }
    }

    /// Fallible blockwise map; the first error in (x, xi) order is returned.
    pub fn try_map_blocks(&self, x_band: XBand, f: impl Fn(usize, usize, &CMat) -> Result<CMat> + Sync) -> Result<Symbol<G>> {
        let ws = &self.ws;
        let total = ws.dual.total_len();
        let nx = if x_band.is_invariant() { 1 } else { ws.nx() };
        let parts: Vec<Result<Vec<C64>>> = (0..nx)
            .into_par_iter()
            .map(|ix| {
                let mut out = vec![C64::new(0.0, 0.0); total];
                for k in 0..ws.dual.len() {
                    let m = f(ix, k, &self.block(ix, k))?;
                    let off = ws.dual.offset(k);
                    out[off..off + m.len()].copy_from_slice(m.as_slice());
                }
                Ok(out)
            })
            .collect();
        let mut data = Vec::with_capacity(nx * total);
        for p in parts {
            data.extend(p?);
        }
        Ok(Symbol { ws: ws.clone(), data, margin: self.margin, x_band })
    }

    /// Blockwise binary operation; the result is invariant only if both inputs are.
    pub fn zip_blocks(&self, other: &Symbol<G>, x_band: XBand, f: impl Fn(&CMat, &CMat) -> CMat + Sync) -> Symbol<G> {
        assert!(Arc::ptr_eq(&self.ws, &other.ws), "symbols from different workspaces");
        let ws = &self.ws;
        let total = ws.dual.total_len();
        let nx = if x_band.is_invariant() { 1 } else { ws.nx() };
        let data = (0..nx)
            .into_par_iter()
            .map(|ix| {
                let mut out = vec![C64::new(0.0, 0.0); total];
                for k in 0..ws.dual.len() {
                    let m = f(&self.block(ix, k), &other.block(ix, k));
                    let off = ws.dual.offset(k);
                    out[off..off + m.len()].copy_from_slice(m.as_slice());
                }
                out
            })
            .collect::<Vec<_>>()
            .concat();
        Symbol { ws: ws.clone(), data, margin: self.margin.max(other.margin), x_band }
    }

    /// Pointwise product `sigma(x, xi) tau(x, xi)`.
    pub fn mul(&self, other: &Symbol<G>) -> Symbol<G> {
        self.zip_blocks(other, self.x_band.plus(other.x_band), |a, b| a * b)
    }

    pub fn add(&self, other: &Symbol<G>) -> Symbol<G> {
        let xb = join(self.x_band, other.x_band);
        self.zip_blocks(other, xb, |a, b| a + b)
    }

    pub fn sub(&self, other: &Symbol<G>) -> Symbol<G> {
        let xb = join(self.x_band, other.x_band);
        self.zip_blocks(other, xb, |a, b| a - b)
    }

    pub fn scale(&self, s: C64) -> Symbol<G> {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Pointwise conjugate transpose `sigma(x, xi)^*`.
    pub fn adjoint_pointwise(&self) -> Symbol<G> {
        self.map_blocks(self.x_band, |_, _, m| m.adjoint())
    }

    pub fn with_margin(mut self, margin: u32) -> Self {
        self.margin = margin;
        self
    }

    /// Largest entrywise difference over valid blocks.
    pub fn max_abs_diff(&self, other: &Symbol<G>) -> f64 {
        let valid: Vec<usize> = (0..self.ws.dual.len()).filter(|&k| self.is_valid(k) && other.is_valid(k)).collect();
        let nx = self.nx().max(other.nx());
        let mut worst: f64 = 0.0;
        for ix in 0..nx {
            let (a, b) = (self.slice(ix), other.slice(ix));
            for &k in &valid {
                let off = self.ws.dual.offset(k);
                let n = self.ws.dual.get(k).dim.pow(2);
                for j in off..off + n {
                    worst = worst.max((a[j] - b[j]).norm());
                }
            }
        }
        worst
    }

    /// Largest operator norm over x and valid blocks.
    pub fn sup_op_norm(&self) -> f64 {
        self.shell_op_norms().iter().map(|s| s.1).fold(0.0, f64::max)
    }

    /// `(<xi>, max_x max_{xi in shell} ||sigma(x, xi)||_op)` over valid shells, ascending.
    pub fn shell_op_norms(&self) -> Vec<(f64, f64)> {
        let valid = self.valid_indices();
        let per: Vec<Vec<f64>> =
            (0..self.nx()).into_par_iter().map(|ix| valid.iter().map(|&k| op_norm(&self.block(ix, k))).collect()).collect();
        let mut shells: Vec<(f64, f64)> = Vec::new();
        for (j, &k) in valid.iter().enumerate() {
            let w = self.ws.dual.get(k).weight();
            let v = per.iter().map(|p| p[j]).fold(0.0, f64::max);
            match shells.last_mut() {
                Some(last) if (last.0 - w).abs() < 1e-12 => last.1 = last.1.max(v),
                _ => shells.push((w, v)),
            }
        }
        shells
    }
}

fn join(a: XBand, b: XBand) -> XBand {
    match (a, b) {
        (XBand::Exact(x), XBand::Exact(y)) => XBand::Exact(x.max(y)),
        _ => XBand::Smooth,
    }
}
