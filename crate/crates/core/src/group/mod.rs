//! Compact group backends: unitary dual, representation matrices, derived
//! representations, group arithmetic and exact quadrature.

mod gauss;
mod su2;
mod torus;
pub mod wigner;

pub use gauss::gauss_legendre;
pub use su2::{Su2, Su2Point};
pub use torus::Torus;

use std::collections::HashMap;
use std::fmt::Debug;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// Default cap on the number of quadrature points a grid may have.
pub const GRID_POINT_CAP: usize = 4_000_000;

/// Label of an irreducible representation class.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DualLabel {
    /// Twice the spin, `2l`.
    Spin(u32),
    /// Lattice frequency `k`.
    Lattice(Vec<i32>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualIndex {
    pub label: DualLabel,
    pub dim: usize,
    /// `<xi>^2`, the eigenvalue of `1 - Laplacian`.
    pub weight_sq: f64,
}

impl DualIndex {
    pub fn weight(&self) -> f64 {
        self.weight_sq.sqrt()
    }

    /// Harmonic degree: `2l` on SU(2), `max |k_j|` on the torus. Products of
    /// matrix coefficients of degrees `a` and `b` have degree at most `a + b`.
    pub fn degree(&self) -> u32 {
        match &self.label {
            DualLabel::Spin(t) => *t,
            DualLabel::Lattice(k) => k.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0),
        }
    }

    /// Distance a single difference step can move the label: `2l` on SU(2),
    /// the Euclidean `|k|` on the torus.
    pub fn radius(&self) -> f64 {
        match &self.label {
            DualLabel::Spin(t) => *t as f64,
            DualLabel::Lattice(k) => k.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        match &self.label {
            DualLabel::Spin(t) => *t == 0,
            DualLabel::Lattice(k) => k.iter().all(|&v| v == 0),
        }
    }

    pub fn label_string(&self) -> String {
        match &self.label {
            DualLabel::Spin(t) => format!("{t}"),
            DualLabel::Lattice(k) => k.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"),
        }
    }
}

/// A truncated, sorted unitary dual with block offsets into flat storage.
#[derive(Clone, Debug)]
pub struct Dual {
    group_id: String,
    indices: Vec<DualIndex>,
    offsets: Vec<usize>,
    total: usize,
    lookup: HashMap<DualLabel, usize>,
}

impl Dual {
    pub fn new(group_id: String, mut indices: Vec<DualIndex>) -> Self {
        indices.sort_by(|a, b| a.weight_sq.total_cmp(&b.weight_sq).then_with(|| a.label.cmp(&b.label)));
        let mut offsets = Vec::with_capacity(indices.len());
        let mut total = 0;
        let mut lookup = HashMap::with_capacity(indices.len());
        for (k, xi) in indices.iter().enumerate() {
            offsets.push(total);
            total += xi.dim * xi.dim;
            lookup.insert(xi.label.clone(), k);
        }
        Dual { group_id, indices, offsets, total, lookup }
    }

    pub fn group_id(&self) -> &str {
        &self.group_id
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, k: usize) -> &DualIndex {
        &self.indices[k]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DualIndex> {
        self.indices.iter()
    }

    pub fn offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    /// Number of complex entries across all blocks, `sum d_xi^2`.
    pub fn total_len(&self) -> usize {
        self.total
    }

    pub fn find(&self, label: &DualLabel) -> Option<usize> {
        self.lookup.get(label).copied()
    }

    pub fn max_degree(&self) -> u32 {
        self.indices.iter().map(|x| x.degree()).max().unwrap_or(0)
    }

    pub fn max_radius(&self) -> f64 {
        self.indices.iter().map(|x| x.radius()).fold(0.0, f64::max)
    }

    pub fn max_weight(&self) -> f64 {
        self.indices.iter().map(|x| x.weight()).fold(0.0, f64::max)
    }

    pub fn same_as(&self, other: &Dual) -> bool {
        self.group_id == other.group_id
            && self.indices.len() == other.indices.len()
            && self.indices.iter().zip(&other.indices).all(|(a, b)| a.label == b.label)
    }
}

/// Tensor structure of a grid, used by the fast transforms.
#[derive(Clone, Debug, PartialEq)]
pub enum GridLayout {
    /// Points ordered `(beta, alpha, gamma)` with gamma fastest.
    Su2 {
        n_alpha: usize,
        n_gamma: usize,
        cos_beta: Vec<f64>,
        beta_weights: Vec<f64>,
    },
    /// `n^dims` uniform points, last coordinate fastest.
    Torus {
        n: usize,
        dims: usize,
    },
    Scattered,
}

#[derive(Clone, Debug)]
pub struct QuadratureGrid<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    /// Integrates every function of harmonic degree `<= degree` exactly.
    pub degree: u32,
    pub layout: GridLayout,
}

impl<P> QuadratureGrid<P> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn descriptor(&self) -> String {
        match &self.layout {
            GridLayout::Su2 { .. } => format!("su2-euler:degree={}", self.degree),
            GridLayout::Torus { n, dims } => format!("torus-uniform:dims={dims}:n={n}:degree={}", self.degree),
            GridLayout::Scattered => format!("scattered:points={}", self.points.len()),
        }
    }
}

/// Precomputed forward/inverse transform between a grid and a dual.
/// Coefficient blocks are stored column-major in dual order.
pub trait FourierPlan: Send + Sync {
    /// `f_hat(xi) = sum_x w(x) f(x) xi(x)^*`.
    fn forward(&self, values: &[C64]) -> Vec<C64>;
    /// `f(x) = sum_xi d_xi tr(xi(x) f_hat(xi))` at the grid points.
    fn inverse(&self, coeffs: &[C64]) -> Vec<C64>;
}

pub trait CompactGroup: Clone + Send + Sync + Debug + 'static {
    type Point: Clone + Debug + Send + Sync + PartialEq;

    /// Backend id: `su2` or `torus:n`.
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn identity(&self) -> Self::Point;
    fn mul(&self, x: &Self::Point, y: &Self::Point) -> Self::Point;
    fn inv(&self, x: &Self::Point) -> Self::Point;
    /// `exp(t X_i)`.
    fn exp(&self, i: usize, t: f64) -> Self::Point;
    /// Riemannian-style distance from the identity, used for mollifiers.
    fn distance_from_identity(&self, x: &Self::Point) -> f64;
    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point;
    fn coords(&self, x: &Self::Point) -> Vec<f64>;
    fn from_coords(&self, c: &[f64]) -> Result<Self::Point>;

    /// All classes with `<xi> <= band`, sorted by `(<xi>, label)`.
    fn dual_enumerate(&self, band: f64) -> Dual;
    /// All classes of harmonic degree `<= degree`.
    fn dual_by_degree(&self, degree: u32) -> Dual;

    fn rep_matrix(&self, xi: &DualIndex, x: &Self::Point) -> CMat;
    /// Representation matrices of every class of `dual` at `x`.
    fn rep_matrices(&self, dual: &Dual, x: &Self::Point) -> Vec<CMat> {
        dual.iter().map(|xi| self.rep_matrix(xi, x)).collect()
    }
    /// `d/dt xi(exp(t X_i))` at `t = 0`.
    fn derived_rep(&self, xi: &DualIndex, i: usize) -> CMat;

    /// Grid exact for every function of harmonic degree `<= degree`.
    fn grid_for_degree_capped(&self, degree: u32, cap: usize) -> Result<QuadratureGrid<Self::Point>>;
    fn grid_for_degree(&self, degree: u32) -> Result<QuadratureGrid<Self::Point>> {
        self.grid_for_degree_capped(degree, GRID_POINT_CAP)
    }
    /// Grid exact on products of matrix coefficients with `<xi>, <eta> <= band`.
    fn quadrature_grid(&self, band: f64) -> Result<QuadratureGrid<Self::Point>> {
        let d = self.dual_enumerate(band).max_degree();
        self.grid_for_degree(2 * d)
    }

    fn plan(&self, grid: &QuadratureGrid<Self::Point>, dual: &Dual) -> Box<dyn FourierPlan>;

    /// Representations whose matrix entries generate the default difference family.
    fn difference_reps(&self) -> Vec<DualIndex>;
}

/// Direct summation over arbitrary points; used for scattered grids.
pub struct DensePlan<G: CompactGroup> {
    group: G,
    points: Vec<G::Point>,
    weights: Vec<f64>,
    dual: Dual,
}

impl<G: CompactGroup> DensePlan<G> {
    pub fn new(group: G, grid: &QuadratureGrid<G::Point>, dual: &Dual) -> Self {
        DensePlan { group, points: grid.points.clone(), weights: grid.weights.clone(), dual: dual.clone() }
    }
}

impl<G: CompactGroup> FourierPlan for DensePlan<G> {
    fn forward(&self, values: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dual.total_len()];
        for ((x, w), f) in self.points.iter().zip(&self.weights).zip(values) {
            let reps = self.group.rep_matrices(&self.dual, x);
            for (k, r) in reps.iter().enumerate() {
                let d = r.nrows();
                let off = self.dual.offset(k);
                let s = f * *w;
                for j in 0..d {
                    for i in 0..d {
                        out[off + i + j * d] += s * r[(j, i)].conj();
                    }
                }
            }
        }
        out
    }

    fn inverse(&self, coeffs: &[C64]) -> Vec<C64> {
        self.points
            .iter()
            .map(|x| {
                let reps = self.group.rep_matrices(&self.dual, x);
                let mut acc = C64::new(0.0, 0.0);
                for (k, r) in reps.iter().enumerate() {
                    let d = r.nrows();
                    let off = self.dual.offset(k);
                    let mut tr = C64::new(0.0, 0.0);
                    for a in 0..d {
                        for b in 0..d {
                            tr += r[(a, b)] * coeffs[off + b + a * d];
                        }
                    }
                    acc += tr * d as f64;
                }
                acc
            })
            .collect()
    }
}

pub(crate) fn check_cap(points: usize, cap: usize) -> Result<()> {
    if points > cap {
        Err(Error::GridTooLarge { points, cap })
    } else {
        Ok(())
    }
}
