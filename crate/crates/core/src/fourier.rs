//! Nonabelian Fourier transform, Parseval, Sobolev and Schatten norms.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::group::{CompactGroup, Dual, DualIndex, FourierPlan, QuadratureGrid};
use crate::linalg::{op_norm, CMat, C64};

/// A complex function sampled on a quadrature grid, of harmonic degree at most `degree`.
#[derive(Clone, Debug)]
pub struct GroupFunction<G: CompactGroup> {
    pub group: G,
    pub grid: Arc<QuadratureGrid<G::Point>>,
    pub values: Vec<C64>,
    pub degree: u32,
}

impl<G: CompactGroup> GroupFunction<G> {
    /// The grid must integrate `|f|^2` exactly, i.e. have degree `>= 2 * degree`.
    pub fn new(group: G, grid: Arc<QuadratureGrid<G::Point>>, values: Vec<C64>, degree: u32) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("{} values for a grid of {} points", values.len(), grid.len())));
        }
        if 2 * degree > grid.degree {
            return Err(Error::BandMismatch(format!("function of degree {degree} on a grid exact to degree {}", grid.degree)));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite function value".into()));
        }
        Ok(GroupFunction { group, grid, values, degree })
    }

    pub fn from_fn(group: G, grid: Arc<QuadratureGrid<G::Point>>, degree: u32, f: impl Fn(&G::Point) -> C64) -> Result<Self> {
        let values = grid.points.iter().map(f).collect();
        Self::new(group, grid, values, degree)
    }

    /// Random function with complex Gaussian coefficients on every class of degree `<= degree`.
    pub fn random<R: Rng + ?Sized>(group: G, grid: Arc<QuadratureGrid<G::Point>>, degree: u32, rng: &mut R) -> Result<Self> {
        let dual = Arc::new(group.dual_by_degree(degree));
        let seq = MatrixSequence::random(dual, rng);
        inverse_on(&group, grid, &seq)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().zip(&self.grid.weights).map(|(v, w)| w * v.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &GroupFunction<G>) -> C64 {
        self.values.iter().zip(&other.values).zip(&self.grid.weights).map(|((a, b), w)| a * b.conj() * *w).sum()
    }

    pub fn scale(&self, s: C64) -> GroupFunction<G> {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }
}

/// Fourier coefficients: one `d x d` block per class, column-major.
#[derive(Clone, Debug)]
pub struct MatrixSequence {
    pub dual: Arc<Dual>,
    pub data: Vec<C64>,
}

impl MatrixSequence {
    pub fn zeros(dual: Arc<Dual>) -> Self {
        let n = dual.total_len();
        MatrixSequence { dual, data: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn from_fn(dual: Arc<Dual>, f: impl Fn(&DualIndex) -> CMat) -> Self {
        let mut s = Self::zeros(dual.clone());
        for (k, xi) in dual.iter().enumerate() {
            s.set_block(k, &f(xi));
        }
        s
    }

    pub fn identity(dual: Arc<Dual>) -> Self {
        Self::from_fn(dual, |xi| CMat::identity(xi.dim, xi.dim))
    }

    pub fn random<R: Rng + ?Sized>(dual: Arc<Dual>, rng: &mut R) -> Self {
        let n = dual.total_len();
        let data = (0..n).map(|_| C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))).collect();
        MatrixSequence { dual, data }
    }

    pub fn block(&self, k: usize) -> CMat {
        let d = self.dual.get(k).dim;
        let off = self.dual.offset(k);
        CMat::from_column_slice(d, d, &self.data[off..off + d * d])
    }

    pub fn set_block(&mut self, k: usize, m: &CMat) {
        let d = self.dual.get(k).dim;
        assert_eq!((m.nrows(), m.ncols()), (d, d), "block dimension mismatch");
        let off = self.dual.offset(k);
        self.data[off..off + d * d].copy_from_slice(m.as_slice());
    }

    pub fn max_abs_diff(&self, other: &MatrixSequence) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Cached transform between one grid and one dual.
pub struct Transform<G: CompactGroup> {
    pub group: G,
    pub grid: Arc<QuadratureGrid<G::Point>>,
    pub dual: Arc<Dual>,
    plan: Box<dyn FourierPlan>,
}

impl<G: CompactGroup> Transform<G> {
    pub fn new(group: G, grid: Arc<QuadratureGrid<G::Point>>, dual: Arc<Dual>) -> Self {
        let plan = group.plan(&grid, &dual);
        Transform { group, grid, dual, plan }
    }

    pub fn forward_raw(&self, values: &[C64]) -> Vec<C64> {
        self.plan.forward(values)
    }

    pub fn inverse_raw(&self, coeffs: &[C64]) -> Vec<C64> {
        self.plan.inverse(coeffs)
    }

    pub fn forward(&self, f: &GroupFunction<G>) -> Result<MatrixSequence> {
        check_forward(f, &self.dual)?;
        Ok(MatrixSequence { dual: self.dual.clone(), data: self.plan.forward(&f.values) })
    }

    pub fn inverse(&self, s: &MatrixSequence) -> Result<GroupFunction<G>> {
        if !s.dual.same_as(&self.dual) {
            return Err(Error::BandMismatch("sequence dual differs from the transform dual".into()));
        }
        GroupFunction::new(self.group.clone(), self.grid.clone(), self.plan.inverse(&s.data), self.dual.max_degree())
    }
}

fn check_forward<G: CompactGroup>(f: &GroupFunction<G>, dual: &Dual) -> Result<()> {
    if dual.group_id() != f.group.id() {
        return Err(Error::BandMismatch(format!("dual of {} applied to a {} function", dual.group_id(), f.group.id())));
    }
    if f.degree + dual.max_degree() > f.grid.degree {
        return Err(Error::BandMismatch(format!(
            "degree {} function against dual degree {} needs a grid of degree {}, have {}",
            f.degree,
            dual.max_degree(),
            f.degree + dual.max_degree(),
            f.grid.degree
        )));
    }
    Ok(())
}

/// `f_hat(xi) = int f(x) xi(x)^* dx` for every class of `dual`.
pub fn forward<G: CompactGroup>(f: &GroupFunction<G>, dual: Arc<Dual>) -> Result<MatrixSequence> {
    check_forward(f, &dual)?;
    let plan = f.group.plan(&f.grid, &dual);
    Ok(MatrixSequence { dual, data: plan.forward(&f.values) })
}

/// `f(x) = sum d_xi tr(xi(x) s(xi))` on `grid`.
pub fn inverse_on<G: CompactGroup>(
    group: &G,
    grid: Arc<QuadratureGrid<G::Point>>,
    s: &MatrixSequence,
) -> Result<GroupFunction<G>> {
    let plan = group.plan(&grid, &s.dual);
    let values = plan.inverse(&s.data);
    GroupFunction::new(group.clone(), grid, values, s.dual.max_degree())
}

/// Inverse transform onto the standard grid exact for the sequence's band.
pub fn inverse<G: CompactGroup>(group: &G, s: &MatrixSequence) -> Result<GroupFunction<G>> {
    let grid = Arc::new(group.grid_for_degree(2 * s.dual.max_degree())?);
    inverse_on(group, grid, s)
}

/// `sum d_xi ||s(xi)||_HS^2`, optionally weighted by `<xi>^{2 s}`.
pub fn weighted_hs_sq(s: &MatrixSequence, sobolev: f64) -> f64 {
    let mut acc = 0.0;
    for (k, xi) in s.dual.iter().enumerate() {
        let off = s.dual.offset(k);
        let n = xi.dim * xi.dim;
        let hs: f64 = s.data[off..off + n].iter().map(|z| z.norm_sqr()).sum();
        acc += xi.dim as f64 * xi.weight_sq.powf(sobolev) * hs;
    }
    acc
}

/// `| ||f||_L2^2 - sum d_xi ||f_hat(xi)||_HS^2 |`.
pub fn parseval_defect<G: CompactGroup>(f: &GroupFunction<G>) -> Result<f64> {
    let dual = Arc::new(f.group.dual_by_degree(f.degree));
    let fh = forward(f, dual)?;
    Ok((f.l2_norm_sq() - weighted_hs_sq(&fh, 0.0)).abs())
}

/// `sqrt(sum d_xi <xi>^{2s} ||f_hat(xi)||_HS^2)`.
pub fn sobolev_norm<G: CompactGroup>(f: &GroupFunction<G>, s: f64) -> Result<f64> {
    let dual = Arc::new(f.group.dual_by_degree(f.degree));
    let fh = forward(f, dual)?;
    Ok(weighted_hs_sq(&fh, s).sqrt())
}

/// `sum d_xi tr(a(xi) b(xi)^*)`, the spectral side of the L2 inner product.
pub fn spectral_inner(a: &MatrixSequence, b: &MatrixSequence) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (k, xi) in a.dual.iter().enumerate() {
        let off = a.dual.offset(k);
        let n = xi.dim * xi.dim;
        let tr: C64 = a.data[off..off + n].iter().zip(&b.data[off..off + n]).map(|(x, y)| x * y.conj()).sum();
        acc += tr * xi.dim as f64;
    }
    acc
}

/// `(sum d_xi ||s(xi)||_{S_p}^p)^{1/p}`; `p = inf` gives `sup ||s(xi)||_op`.
pub fn schatten_lp_norm(s: &MatrixSequence, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("Schatten exponent p = {p} must be >= 1")));
    }
    if p.is_infinite() {
        return Ok((0..s.dual.len()).map(|k| op_norm(&s.block(k))).fold(0.0, f64::max));
    }
    let mut acc = 0.0;
    for (k, xi) in s.dual.iter().enumerate() {
        let b = s.block(k);
        let sp: f64 = if xi.dim == 1 { b[(0, 0)].norm().powf(p) } else { b.singular_values().iter().map(|v| v.powf(p)).sum() };
        acc += xi.dim as f64 * sp;
    }
    Ok(acc.powf(1.0 / p))
}
