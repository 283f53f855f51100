use rayon::prelude::*;

use super::Symbol;
use crate::error::{Error, Result};
use crate::fourier::{GroupFunction, MatrixSequence, Transform};
use crate::group::{CompactGroup, DualIndex, QuadratureGrid};
use crate::linalg::{CMat, C64};

/// Exponents over the members of a [`DifferenceFamily`].
pub type MultiIndex = Vec<u8>;

pub fn abs(alpha: &[u8]) -> usize {
    alpha.iter().map(|&a| a as usize).sum()
}

pub fn factorial(alpha: &[u8]) -> f64 {
    alpha.iter().map(|&a| (1..=a as u32).product::<u32>() as f64).product()
}

/// All multi-indices of length `n` with `|alpha| <= order`, graded, each grade in
/// descending lexicographic order.
pub fn multi_indices(n: usize, order: usize) -> Vec<MultiIndex> {
    fn rec(n: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<MultiIndex>) {
        if cur.len() + 1 == n {
            cur.push(left as u8);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in (0..=left).rev() {
            cur.push(a as u8);
            rec(n, left - a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for k in 0..=order {
        rec(n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Functions `q(x) = (eta(x) - I)_{ji}` for the group's fixed difference representations.
///
/// Member `(r, i, j)` carries the transposed entry so that the finite Leibniz rule reads
/// `D_ij(s t) = (D_ij s) t + s (D_ij t) + sum_k (D_ik s)(D_kj t)` under the transform
/// `f^(xi) = int f(x) xi(x)^* dx`.
#[derive(Clone, Debug)]
pub struct DifferenceFamily {
    pub reps: Vec<DualIndex>,
    pub members: Vec<(usize, usize, usize)>,
    /// Member index of `(r, j, i)` for member `(r, i, j)`.
    pub conj: Vec<usize>,
}

impl DifferenceFamily {
    pub fn new<G: CompactGroup>(group: &G) -> Self {
        let reps = group.difference_reps();
        let mut members = Vec::new();
        for (r, eta) in reps.iter().enumerate() {
            for i in 0..eta.dim {
                for j in 0..eta.dim {
                    members.push((r, i, j));
                }
            }
        }
        let conj = members.iter().map(|&(r, i, j)| members.iter().position(|&m| m == (r, j, i)).unwrap()).collect();
        DifferenceFamily { reps, members, conj }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, r: usize, i: usize, j: usize) -> Option<usize> {
        self.members.iter().position(|&m| m == (r, i, j))
    }

    pub fn unit(&self, m: usize) -> MultiIndex {
        let mut a = vec![0u8; self.len()];
        a[m] = 1;
        a
    }

    pub fn label(&self, m: usize) -> String {
        let (r, i, j) = self.members[m];
        format!("{}[{i}{j}]", self.reps[r].label_string())
    }

    pub fn conj_alpha(&self, alpha: &[u8]) -> MultiIndex {
        let mut out = vec![0u8; alpha.len()];
        for (m, &a) in alpha.iter().enumerate() {
            out[self.conj[m]] += a;
        }
        out
    }

    /// Member values at `x`.
    pub fn values<G: CompactGroup>(&self, group: &G, x: &G::Point) -> Vec<C64> {
        let mats: Vec<CMat> = self.reps.iter().map(|eta| group.rep_matrix(eta, x)).collect();
        self.members
            .iter()
            .map(|&(r, i, j)| mats[r][(j, i)] - if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
            .collect()
    }

    /// `[member][point]` samples.
    pub fn sample<G: CompactGroup>(&self, group: &G, points: &[G::Point]) -> Vec<Vec<C64>> {
        let per_point: Vec<Vec<C64>> = points.par_iter().map(|x| self.values(group, x)).collect();
        (0..self.len()).map(|m| per_point.iter().map(|v| v[m]).collect()).collect()
    }

    /// Samples of `q^alpha` from member samples.
    pub fn power(&self, samples: &[Vec<C64>], alpha: &[u8]) -> Vec<C64> {
        let n = samples.first().map_or(0, |s| s.len());
        let mut out = vec![C64::new(1.0, 0.0); n];
        for (m, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                for (o, q) in out.iter_mut().zip(&samples[m]) {
                    *o *= q;
                }
            }
        }
        out
    }

    /// `(max_j |q_j(e)|, min over non-identity grid points of max_j |q_j(x)|)`.
    pub fn zero_check<G: CompactGroup>(&self, group: &G, grid: &QuadratureGrid<G::Point>) -> (f64, f64) {
        let at_e = self.values(group, &group.identity()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        let min_else = grid
            .points
            .iter()
            .filter(|x| group.distance_from_identity(x) > 1e-9)
            .map(|x| self.values(group, x).iter().map(|v| v.norm()).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        (at_e, min_else)
    }
}

fn shift_radius<G: CompactGroup>(group: &G, degree: u32) -> u32 {
    (group.dual_by_degree(degree).max_radius() - 1e-9).ceil().max(0.0) as u32
}

/// `Delta_q s = F[q F^{-1} s]` for a matrix sequence, with `q` sampled on a grid that is exact
/// for the kernel times `q`.
pub fn difference_apply_seq<G: CompactGroup>(group: &G, s: &MatrixSequence, q: &GroupFunction<G>) -> Result<MatrixSequence> {
    let jmax = s.dual.max_degree();
    let need = 2 * jmax + q.degree;
    if q.grid.degree < need {
        return Err(Error::Exactness(format!("grid degree {} cannot carry the kernel times q (needs {need})", q.grid.degree)));
    }
    let t = Transform::new(group.clone(), q.grid.clone(), s.dual.clone());
    let mut k = t.inverse_raw(&s.data);
    k.iter_mut().zip(&q.values).for_each(|(a, b)| *a *= b);
    Ok(MatrixSequence { dual: s.dual.clone(), data: t.forward_raw(&k) })
}

impl<G: CompactGroup> Symbol<G> {
    /// `D^alpha sigma` for every requested multi-index, sharing one kernel transform per x.
    pub fn differences(&self, alphas: &[MultiIndex]) -> Result<Vec<Symbol<G>>> {
        let ws = &self.ws;
        let idx: Vec<usize> = alphas.iter().map(|a| ws.alpha_index(a)).collect::<Result<_>>()?;
        let total = ws.dual.total_len();
        let per_x: Vec<Vec<Vec<C64>>> = (0..self.nx())
            .into_par_iter()
            .map(|ix| {
                let k = ws.kernel.inverse_raw(self.slice(ix));
                idx.iter()
                    .map(|&a| {
                        if abs(&ws.alphas[a]) == 0 {
                            return self.slice(ix).to_vec();
                        }
                        let prod: Vec<C64> = k.iter().zip(&ws.qpow[a]).map(|(u, v)| u * v).collect();
                        ws.kernel.forward_raw(&prod)
                    })
                    .collect()
            })
            .collect();
        Ok(idx
            .iter()
            .enumerate()
            .map(|(n, &a)| {
                let mut data = Vec::with_capacity(self.nx() * total);
                for p in &per_x {
                    data.extend_from_slice(&p[n]);
                }
                Symbol::raw(ws.clone(), data, self.margin + abs(&ws.alphas[a]) as u32, self.x_band)
            })
            .collect())
    }

    pub fn difference_multi(&self, beta: &[u8]) -> Result<Symbol<G>> {
        Ok(self.differences(&[beta.to_vec()])?.remove(0))
    }

    /// `Delta_q sigma` for an arbitrary grid function `q`.
    pub fn difference_apply(&self, q: &GroupFunction<G>) -> Result<Symbol<G>> {
        let ws = &self.ws;
        let need = 2 * ws.dual.max_degree() + q.degree;
        if q.grid.degree < need {
            return Err(Error::Exactness(format!(
                "grid degree {} cannot carry the kernel times q (needs {need})",
                q.grid.degree
            )));
        }
        let t = Transform::new(ws.group.clone(), q.grid.clone(), ws.dual.clone());
        let data = (0..self.nx())
            .into_par_iter()
            .map(|ix| {
                let mut k = t.inverse_raw(self.slice(ix));
                k.iter_mut().zip(&q.values).for_each(|(a, b)| *a *= b);
                t.forward_raw(&k)
            })
            .collect::<Vec<_>>()
            .concat();
        Ok(Symbol::raw(ws.clone(), data, self.margin + shift_radius(&ws.group, q.degree), self.x_band))
    }
}

/// Max-norm defect of the finite Leibniz rule for the elementary differences of
/// representation `r` at entry `(i, j)`.
pub fn leibniz_defect<G: CompactGroup>(sigma: &Symbol<G>, tau: &Symbol<G>, r: usize, i: usize, j: usize) -> Result<f64> {
    let ws = &sigma.ws;
    let fam = &ws.family;
    let d = fam.reps.get(r).ok_or_else(|| Error::InvalidArgument(format!("no difference representation {r}")))?.dim;
    if i >= d || j >= d {
        return Err(Error::InvalidArgument(format!("entry ({i},{j}) outside dimension {d}")));
    }
    let unit = |a: usize, b: usize| fam.unit(fam.member(r, a, b).unwrap());
    let mut sig_alphas = vec![unit(i, j)];
    let mut tau_alphas = vec![unit(i, j)];
    for k in 0..d {
        sig_alphas.push(unit(i, k));
        tau_alphas.push(unit(k, j));
    }
    let ds = sigma.differences(&sig_alphas)?;
    let dt = tau.differences(&tau_alphas)?;
    let prod = sigma.mul(tau).difference_multi(&unit(i, j))?;
    let mut rhs = ds[0].mul(tau).add(&sigma.mul(&dt[0]));
    for k in 0..d {
        rhs = rhs.add(&ds[k + 1].mul(&dt[k + 1]));
    }
    let rhs = rhs.with_margin(prod.margin);
    Ok(prod.max_abs_diff(&rhs))
}

/// Max-norm defect of `(D^alpha sigma)^* = D^conj(alpha) sigma^*`, together with the
/// summed form over all multi-indices of the same order.
pub fn conj_duality_check<G: CompactGroup>(sigma: &Symbol<G>, alpha: &[u8]) -> Result<(f64, f64)> {
    let ws = &sigma.ws;
    let bar = ws.family.conj_alpha(alpha);
    let lhs = sigma.difference_multi(alpha)?.adjoint_pointwise();
    let star = sigma.adjoint_pointwise();
    let rhs = star.difference_multi(&bar)?;
    let single = lhs.max_abs_diff(&rhs);
    let grade: Vec<MultiIndex> = ws.alphas.iter().filter(|a| abs(a) == abs(alpha)).cloned().collect();
    let mut sum_l = Symbol::zeros(ws.clone());
    let mut sum_r = Symbol::zeros(ws.clone());
    for (a, b) in sigma.differences(&grade)?.iter().zip(star.differences(&grade)?.iter()) {
        sum_l = sum_l.add(&a.adjoint_pointwise());
        sum_r = sum_r.add(b);
    }
    let m = abs(alpha) as u32 + sigma.margin;
    Ok((single, sum_l.with_margin(m).max_abs_diff(&sum_r.with_margin(m))))
}
