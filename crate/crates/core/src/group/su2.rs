//! SU(2) in Euler angles with Wigner D-matrices.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::gauss::gauss_legendre;
use super::wigner::wigner_d_all;
use super::{check_cap, CompactGroup, Dual, DualIndex, DualLabel, FourierPlan, GridLayout, QuadratureGrid};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

const TWO_PI: f64 = 2.0 * PI;
const FOUR_PI: f64 = 4.0 * PI;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Su2;

/// Euler angles with `alpha in [0, 2pi)`, `beta in [0, pi]`, `gamma in [0, 4pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Su2Point {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Su2Point {
    /// The fundamental matrix `exp(-i a s_z/2) exp(-i b s_y/2) exp(-i g s_z/2)`,
    /// returned as `[u00, u01, u10, u11]`.
    pub fn matrix(&self) -> [C64; 4] {
        let (c, s) = ((self.beta / 2.0).cos(), (self.beta / 2.0).sin());
        let sum = (self.alpha + self.gamma) / 2.0;
        let dif = (self.alpha - self.gamma) / 2.0;
        [C64::from_polar(c, -sum), -C64::from_polar(s, -dif), C64::from_polar(s, dif), C64::from_polar(c, sum)]
    }

    pub fn from_matrix(u: [C64; 4]) -> Su2Point {
        let a = u[0];
        let b = u[2];
        let beta = 2.0 * b.norm().atan2(a.norm());
        let tiny = 1e-15;
        let (alpha, gamma) = if b.norm() <= tiny {
            (0.0, -2.0 * a.arg())
        } else if a.norm() <= tiny {
            (0.0, -2.0 * b.arg())
        } else {
            (b.arg() - a.arg(), -a.arg() - b.arg())
        };
        let k = (alpha / TWO_PI).floor();
        let mut alpha = alpha - TWO_PI * k;
        let mut gamma = gamma + TWO_PI * k;
        if alpha >= TWO_PI {
            alpha -= TWO_PI;
            gamma += TWO_PI;
        }
        gamma = gamma.rem_euclid(FOUR_PI);
        if gamma >= FOUR_PI {
            gamma = 0.0;
        }
        Su2Point { alpha, beta, gamma }
    }
}

fn mat_mul(x: [C64; 4], y: [C64; 4]) -> [C64; 4] {
    [x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3], x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3]]
}

fn spin_index(t: u32) -> DualIndex {
    let l = t as f64 / 2.0;
    DualIndex { label: DualLabel::Spin(t), dim: t as usize + 1, weight_sq: 1.0 + l * (l + 1.0) }
}

fn spin_of(xi: &DualIndex) -> u32 {
    match xi.label {
        DualLabel::Spin(t) => t,
        _ => panic!("SU(2) backend given a lattice label"),
    }
}

fn assemble(t: u32, d: &[f64], p: &Su2Point) -> CMat {
    let n = t as usize + 1;
    let ea: Vec<C64> = (0..n).map(|a| C64::from_polar(1.0, -(t as f64 / 2.0 - a as f64) * p.alpha)).collect();
    let eg: Vec<C64> = (0..n).map(|b| C64::from_polar(1.0, -(t as f64 / 2.0 - b as f64) * p.gamma)).collect();
    CMat::from_fn(n, n, |a, b| ea[a] * d[a * n + b] * eg[b])
}

impl CompactGroup for Su2 {
    type Point = Su2Point;

    fn id(&self) -> String {
        "su2".into()
    }

    fn dim(&self) -> usize {
        3
    }

    fn identity(&self) -> Su2Point {
        Su2Point { alpha: 0.0, beta: 0.0, gamma: 0.0 }
    }

    fn mul(&self, x: &Su2Point, y: &Su2Point) -> Su2Point {
        Su2Point::from_matrix(mat_mul(x.matrix(), y.matrix()))
    }

    fn inv(&self, x: &Su2Point) -> Su2Point {
        let u = x.matrix();
        Su2Point::from_matrix([u[0].conj(), u[2].conj(), u[1].conj(), u[3].conj()])
    }

    fn exp(&self, i: usize, t: f64) -> Su2Point {
        let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
        let z = C64::new(0.0, 0.0);
        let u = match i {
            0 => [C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0)],
            1 => [C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)],
            2 => [C64::new(c, -s), z, z, C64::new(c, s)],
            _ => panic!("SU(2) has three basis vector fields"),
        };
        Su2Point::from_matrix(u)
    }

    fn distance_from_identity(&self, x: &Su2Point) -> f64 {
        let u = x.matrix();
        let half_tr = ((u[0] + u[3]).re / 2.0).clamp(-1.0, 1.0);
        2.0 * half_tr.acos()
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Su2Point {
        let q: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let a = C64::new(q[0] / n, q[1] / n);
        let b = C64::new(q[2] / n, q[3] / n);
        Su2Point::from_matrix([a, -b.conj(), b, a.conj()])
    }

    fn coords(&self, x: &Su2Point) -> Vec<f64> {
        vec![x.alpha, x.beta, x.gamma]
    }

    fn from_coords(&self, c: &[f64]) -> Result<Su2Point> {
        if c.len() != 3 || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("SU(2) points need three finite Euler angles".into()));
        }
        let p = Su2Point { alpha: c[0], beta: c[1], gamma: c[2] };
        if (0.0..TWO_PI).contains(&p.alpha) && (0.0..=PI).contains(&p.beta) && (0.0..FOUR_PI).contains(&p.gamma) {
            Ok(p)
        } else {
            Ok(Su2Point::from_matrix(p.matrix()))
        }
    }

    fn dual_enumerate(&self, band: f64) -> Dual {
        let mut v = Vec::new();
        let mut t = 0u32;
        loop {
            let xi = spin_index(t);
            if xi.weight_sq > band * band * (1.0 + 1e-12) {
                break;
            }
            v.push(xi);
            t += 1;
        }
        Dual::new(self.id(), v)
    }

    fn dual_by_degree(&self, degree: u32) -> Dual {
        Dual::new(self.id(), (0..=degree).map(spin_index).collect())
    }

    fn rep_matrix(&self, xi: &DualIndex, x: &Su2Point) -> CMat {
        let t = spin_of(xi);
        let d = wigner_d_all(t, x.beta);
        assemble(t, &d[t as usize], x)
    }

    fn rep_matrices(&self, dual: &Dual, x: &Su2Point) -> Vec<CMat> {
        let d = wigner_d_all(dual.max_degree(), x.beta);
        dual.iter()
            .map(|xi| {
                let t = spin_of(xi);
                assemble(t, &d[t as usize], x)
            })
            .collect()
    }

    fn derived_rep(&self, xi: &DualIndex, i: usize) -> CMat {
        let t = spin_of(xi);
        let n = t as usize + 1;
        let l = t as f64 / 2.0;
        let m = |a: usize| l - a as f64;
        let mut jp = CMat::zeros(n, n);
        for a in 1..n {
            let ma = m(a);
            jp[(a - 1, a)] = C64::new((l * (l + 1.0) - ma * (ma + 1.0)).sqrt(), 0.0);
        }
        let jm = jp.transpose();
        let j = match i {
            0 => (&jp + &jm).scale(0.5),
            1 => (&jp - &jm) * C64::new(0.0, -0.5),
            2 => CMat::from_fn(n, n, |a, b| if a == b { C64::new(m(a), 0.0) } else { C64::new(0.0, 0.0) }),
            _ => panic!("SU(2) has three basis vector fields"),
        };
        j * C64::new(0.0, -1.0)
    }

    fn grid_for_degree_capped(&self, degree: u32, cap: usize) -> Result<QuadratureGrid<Su2Point>> {
        let dd = degree as usize;
        let n_alpha = dd / 2 + 1;
        let n_gamma = dd + 1;
        let n_beta = (dd + 5) / 4;
        check_cap(n_alpha * n_gamma * n_beta, cap)?;
        let (nodes, w) = gauss_legendre(n_beta);
        let mut points = Vec::with_capacity(n_alpha * n_gamma * n_beta);
        let mut weights = Vec::with_capacity(points.capacity());
        for (t, wt) in nodes.iter().zip(&w) {
            let beta = t.clamp(-1.0, 1.0).acos();
            for ia in 0..n_alpha {
                for ig in 0..n_gamma {
                    points.push(Su2Point {
                        alpha: TWO_PI * ia as f64 / n_alpha as f64,
                        beta,
                        gamma: FOUR_PI * ig as f64 / n_gamma as f64,
                    });
                    weights.push(wt / 2.0 / (n_alpha * n_gamma) as f64);
                }
            }
        }
        Ok(QuadratureGrid {
            points,
            weights,
            degree,
            layout: GridLayout::Su2 { n_alpha, n_gamma, cos_beta: nodes, beta_weights: w },
        })
    }

    fn plan(&self, grid: &QuadratureGrid<Su2Point>, dual: &Dual) -> Box<dyn FourierPlan> {
        match &grid.layout {
            GridLayout::Su2 { n_alpha, n_gamma, cos_beta, beta_weights } => {
                Box::new(Su2Plan::new(*n_alpha, *n_gamma, cos_beta, beta_weights, dual))
            }
            _ => Box::new(super::DensePlan::new(*self, grid, dual)),
        }
    }

    fn difference_reps(&self) -> Vec<DualIndex> {
        vec![spin_index(1)]
    }
}

/// Separable transform: DFTs in alpha and gamma, Wigner-d sums per beta node.
struct Su2Plan {
    n_alpha: usize,
    n_gamma: usize,
    spins: Vec<u32>,
    offsets: Vec<usize>,
    total: usize,
    jmax: usize,
    dtab: Vec<Vec<Vec<f64>>>,
    ea: Vec<C64>,
    eg: Vec<C64>,
    wb: Vec<f64>,
}

impl Su2Plan {
    fn new(n_alpha: usize, n_gamma: usize, cos_beta: &[f64], beta_weights: &[f64], dual: &Dual) -> Self {
        let spins: Vec<u32> = dual.iter().map(spin_of).collect();
        let offsets = (0..dual.len()).map(|k| dual.offset(k)).collect();
        let jmax = dual.max_degree() as usize;
        let dtab = cos_beta.par_iter().map(|t| wigner_d_all(jmax as u32, t.clamp(-1.0, 1.0).acos())).collect();
        let width = 2 * jmax + 1;
        let mut ea = Vec::with_capacity(width * n_alpha);
        for p in 0..width {
            let half = (p as f64 - jmax as f64) / 2.0;
            for ia in 0..n_alpha {
                ea.push(C64::from_polar(1.0, half * TWO_PI * ia as f64 / n_alpha as f64));
            }
        }
        let mut eg = Vec::with_capacity(width * n_gamma);
        for q in 0..width {
            let half = (q as f64 - jmax as f64) / 2.0;
            for ig in 0..n_gamma {
                eg.push(C64::from_polar(1.0, half * FOUR_PI * ig as f64 / n_gamma as f64));
            }
        }
        let wb = beta_weights.iter().map(|w| w / 2.0 / (n_alpha * n_gamma) as f64).collect();
        Su2Plan { n_alpha, n_gamma, spins, offsets, total: dual.total_len(), jmax, dtab, ea, eg, wb }
    }
}

impl FourierPlan for Su2Plan {
    fn forward(&self, values: &[C64]) -> Vec<C64> {
        let (na, ng, jm) = (self.n_alpha, self.n_gamma, self.jmax);
        let width = 2 * jm + 1;
        let zero = C64::new(0.0, 0.0);
        let partials: Vec<Vec<C64>> = (0..self.wb.len())
            .into_par_iter()
            .map(|ib| {
                let slab = &values[ib * na * ng..(ib + 1) * na * ng];
                let mut a = vec![zero; na * width];
                for ia in 0..na {
                    let row = &slab[ia * ng..(ia + 1) * ng];
                    for q in 0..width {
                        let tw = &self.eg[q * ng..(q + 1) * ng];
                        let mut acc = zero;
                        for k in 0..ng {
                            acc += row[k] * tw[k];
                        }
                        a[ia * width + q] = acc;
                    }
                }
                let mut b = vec![zero; width * width];
                for p in 0..width {
                    let tw = &self.ea[p * na..(p + 1) * na];
                    for q in (p % 2..width).step_by(2) {
                        let mut acc = zero;
                        for ia in 0..na {
                            acc += tw[ia] * a[ia * width + q];
                        }
                        b[p * width + q] = acc;
                    }
                }
                let w = self.wb[ib];
                let mut out = vec![zero; self.total];
                for (k, &t) in self.spins.iter().enumerate() {
                    let n = t as usize + 1;
                    let dm = &self.dtab[ib][t as usize];
                    let off = self.offsets[k];
                    for j in 0..n {
                        let p = jm + t as usize - 2 * j;
                        for i in 0..n {
                            let q = jm + t as usize - 2 * i;
                            out[off + i + j * n] = b[p * width + q] * (w * dm[j * n + i]);
                        }
                    }
                }
                out
            })
            .collect();
        let mut out = vec![zero; self.total];
        for part in &partials {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        out
    }

    fn inverse(&self, coeffs: &[C64]) -> Vec<C64> {
        let (na, ng, jm) = (self.n_alpha, self.n_gamma, self.jmax);
        let width = 2 * jm + 1;
        let zero = C64::new(0.0, 0.0);
        let slabs: Vec<Vec<C64>> = (0..self.wb.len())
            .into_par_iter()
            .map(|ib| {
                let mut g = vec![zero; width * width];
                for (k, &t) in self.spins.iter().enumerate() {
                    let n = t as usize + 1;
                    let dm = &self.dtab[ib][t as usize];
                    let off = self.offsets[k];
                    let dim = n as f64;
                    for a in 0..n {
                        let p = jm + t as usize - 2 * a;
                        for b in 0..n {
                            let q = jm + t as usize - 2 * b;
                            g[p * width + q] += coeffs[off + b + a * n] * (dim * dm[a * n + b]);
                        }
                    }
                }
                let mut h = vec![zero; na * width];
                for p in 0..width {
                    let tw = &self.ea[p * na..(p + 1) * na];
                    for q in (p % 2..width).step_by(2) {
                        let gv = g[p * width + q];
                        if gv == zero {
                            continue;
                        }
                        for ia in 0..na {
                            h[ia * width + q] += tw[ia].conj() * gv;
                        }
                    }
                }
                let mut f = vec![zero; na * ng];
                for ia in 0..na {
                    for q in 0..width {
                        let hv = h[ia * width + q];
                        if hv == zero {
                            continue;
                        }
                        let tw = &self.eg[q * ng..(q + 1) * ng];
                        let row = &mut f[ia * ng..(ia + 1) * ng];
                        for k in 0..ng {
                            row[k] += tw[k].conj() * hv;
                        }
                    }
                }
                f
            })
            .collect();
        slabs.concat()
    }
}
