use super::family::{abs, factorial, multi_indices, DifferenceFamily, MultiIndex};
use crate::error::{Error, Result};
use crate::group::CompactGroup;
use crate::linalg::{pinv, CMat, C64};

/// Invariant differential operators `d^(alpha)` dual to the difference family, stored as
/// coefficients on words `X_{w1} ... X_{wk}` of left-invariant vector fields.
///
/// Built grade by grade: the grade-k operators are the minimal-norm solution of the
/// jet-matching system for `x -> q^alpha(x^{-1})` after removing the contribution of
/// lower grades, restricted to the span of the family's jets. Grade-1 operators are
/// therefore pure first-order vector fields.
#[derive(Clone, Debug)]
pub struct TaylorDualOperators {
    pub dim: usize,
    pub n_max: usize,
    pub words: Vec<Vec<u8>>,
    pub alphas: Vec<MultiIndex>,
    /// `[alpha][word]`.
    pub coeffs: Vec<Vec<C64>>,
    /// `[alpha][word]`: `X^w (q^alpha o inv)(e)`.
    pub jets: Vec<Vec<C64>>,
}

fn words(dim: usize, n: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for w in &layer {
            for i in 0..dim {
                let mut v: Vec<u8> = w.clone();
                v.push(i as u8);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

impl TaylorDualOperators {
    pub fn build<G: CompactGroup>(group: &G, family: &DifferenceFamily, n_max: usize) -> Result<Self> {
        let dim = group.dim();
        let words = words(dim, n_max);
        let nw = words.len();
        let derived: Vec<Vec<CMat>> =
            family.reps.iter().map(|eta| (0..dim).map(|i| group.derived_rep(eta, i)).collect()).collect();
        // jets of the members composed with inversion
        let member_jets: Vec<Vec<C64>> = family
            .members
            .iter()
            .map(|&(r, i, j)| {
                words
                    .iter()
                    .map(|w| {
                        if w.is_empty() {
                            return C64::new(0.0, 0.0);
                        }
                        let d = family.reps[r].dim;
                        let mut m = CMat::identity(d, d);
                        for &l in w.iter().rev() {
                            m = m * &derived[r][l as usize];
                        }
                        let sign = if w.len() % 2 == 0 { 1.0 } else { -1.0 };
                        m[(j, i)] * sign
                    })
                    .collect()
            })
            .collect();
        let alphas = multi_indices(family.len(), n_max);
        let index = |w: &[u8]| -> usize {
            let mut base = 0;
            let mut p = 1;
            for _ in 0..w.len() {
                base += p;
                p *= dim;
            }
            base + w.iter().fold(0, |acc, &l| acc * dim + l as usize)
        };
        let mut unit = vec![C64::new(0.0, 0.0); nw];
        unit[0] = C64::new(1.0, 0.0);
        let jets: Vec<Vec<C64>> = alphas
            .iter()
            .map(|alpha| {
                let mut jet = unit.clone();
                for (m, &a) in alpha.iter().enumerate() {
                    for _ in 0..a {
                        jet = shuffle_product(&words, &index, &jet, &member_jets[m]);
                    }
                }
                jet
            })
            .collect();
        let na = alphas.len();
        // Q[w][alpha] = jet / alpha!
        let q = CMat::from_fn(nw, na, |w, a| jets[a][w] / factorial(&alphas[a]));
        let mut coeffs = vec![vec![C64::new(0.0, 0.0); nw]; na];
        for k in 0..=n_max {
            let le: Vec<usize> = (0..nw).filter(|&w| words[w].len() <= k).collect();
            let eq: Vec<usize> = (0..nw).filter(|&w| words[w].len() == k).collect();
            let grade: Vec<usize> = (0..na).filter(|&a| abs(&alphas[a]) == k).collect();
            let lower: Vec<usize> = (0..na).filter(|&a| abs(&alphas[a]) < k).collect();
            let a_k = CMat::from_fn(eq.len(), grade.len(), |r, c| q[(eq[r], grade[c])]);
            let m = CMat::from_fn(le.len(), na, |r, c| q[(le[r], c)]);
            let proj = &m * pinv(&m, 1e-10);
            let mut b =
                CMat::from_fn(eq.len(), le.len(), |r, c| if eq[r] == le[c] { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
            for &beta in &lower {
                for r in 0..eq.len() {
                    let qb = q[(eq[r], beta)];
                    if qb == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for c in 0..le.len() {
                        b[(r, c)] -= qb * coeffs[beta][le[c]];
                    }
                }
            }
            let bp = &b * &proj;
            let sol = pinv(&a_k, 1e-10) * &bp;
            let resid = (&a_k * &sol * &m - &b * &m).iter().map(|v| v.norm()).fold(0.0, f64::max);
            let scale = (&b * &m).iter().map(|v| v.norm()).fold(1.0, f64::max);
            if resid > 1e-8 * scale {
                return Err(Error::RankDeficient(k));
            }
            for (r, &a) in grade.iter().enumerate() {
                for (c, &w) in le.iter().enumerate() {
                    let v = sol[(r, c)];
                    coeffs[a][w] = if v.norm() < 1e-14 { C64::new(0.0, 0.0) } else { v };
                }
            }
        }
        Ok(TaylorDualOperators { dim, n_max, words, alphas, coeffs, jets })
    }

    pub fn alpha_index(&self, alpha: &[u8]) -> Option<usize> {
        self.alphas.iter().position(|a| a.as_slice() == alpha)
    }

    /// `sum_w C_alpha[w] deta(X_{w1}) ... deta(X_{wk})` for a representation of dimension `d`
    /// given its derived matrices.
    pub fn operator_matrix(&self, ai: usize, d: usize, derived: &[CMat]) -> CMat {
        let mut out = CMat::zeros(d, d);
        for (w, word) in self.words.iter().enumerate() {
            let c = self.coeffs[ai][w];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let mut m = CMat::identity(d, d);
            for &l in word {
                m *= &derived[l as usize];
            }
            out += m * c;
        }
        out
    }

    /// `D[alpha][beta] = d^(alpha)(q^beta o inv)(e)`; equals `alpha! delta` when the
    /// family is exactly dual (torus).
    pub fn duality_matrix(&self) -> CMat {
        let n = self.alphas.len();
        CMat::from_fn(n, n, |a, b| self.coeffs[a].iter().zip(&self.jets[b]).map(|(c, j)| c * j).sum())
    }

    pub fn duality_defect(&self) -> f64 {
        let d = self.duality_matrix();
        let mut worst: f64 = 0.0;
        for a in 0..self.alphas.len() {
            for b in 0..self.alphas.len() {
                let target = if a == b { factorial(&self.alphas[a]) } else { 0.0 };
                worst = worst.max((d[(a, b)] - target).norm());
            }
        }
        worst
    }

    /// Taylor reproduction `sum_alpha q^alpha(x^{-1})/alpha! d^(alpha) f(e) = f` on the
    /// jets of the family: max-norm of `Q C Q - Q`.
    pub fn reproduction_defect(&self) -> f64 {
        let nw = self.words.len();
        let na = self.alphas.len();
        let q = CMat::from_fn(nw, na, |w, a| self.jets[a][w] / factorial(&self.alphas[a]));
        let c = CMat::from_fn(na, nw, |a, w| self.coeffs[a][w]);
        (&q * c * &q - &q).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Vector-field coefficients of a first-order operator.
    pub fn first_order(&self, ai: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self.coeffs[ai][1 + i]).collect()
    }
}

fn shuffle_product(words: &[Vec<u8>], index: &dyn Fn(&[u8]) -> usize, f: &[C64], g: &[C64]) -> Vec<C64> {
    words
        .iter()
        .map(|w| {
            let k = w.len();
            let mut acc = C64::new(0.0, 0.0);
            for mask in 0..(1u32 << k) {
                let (mut a, mut b) = (Vec::new(), Vec::new());
                for (p, &l) in w.iter().enumerate() {
                    if mask >> p & 1 == 1 {
                        a.push(l);
                    } else {
                        b.push(l);
                    }
                }
                acc += f[index(&a)] * g[index(&b)];
            }
            acc
        })
        .collect()
}
