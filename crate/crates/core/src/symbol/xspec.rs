use std::sync::Arc;

use rayon::prelude::*;

use super::{Symbol, Workspace, XBand};
use crate::error::{Error, Result};
use crate::group::CompactGroup;
use crate::linalg::{CMat, C64};

impl<G: CompactGroup> Symbol<G> {
    fn check_x_band(&self) -> Result<()> {
        match self.x_band {
            XBand::Exact(b) if b > self.ws.x_capacity => {
                Err(Error::XBandOverflow(format!("x-band {b} exceeds the x-grid capacity {}", self.ws.x_capacity)))
            }
            _ => Ok(()),
        }
    }

    /// x-Fourier coefficients of every entry, `[entry][coefficient]`.
    pub(crate) fn x_coeffs(&self) -> Result<Vec<Vec<C64>>> {
        self.check_x_band()?;
        let ws = &self.ws;
        let total = ws.dual.total_len();
        let nx = ws.nx();
        Ok((0..total)
            .into_par_iter()
            .map(|e| {
                let vals: Vec<C64> = (0..nx).map(|ix| self.data()[ix * total + e]).collect();
                ws.x_transform.forward_raw(&vals)
            })
            .collect())
    }

    fn from_x_coeffs(ws: &Arc<Workspace<G>>, coeffs: &[Vec<C64>], mats: &[CMat], margin: u32, x_band: XBand) -> Symbol<G> {
        let total = ws.dual.total_len();
        let nx = ws.nx();
        let columns: Vec<Vec<C64>> = coeffs
            .par_iter()
            .map(|c| {
                let mut out = vec![C64::new(0.0, 0.0); c.len()];
                for (k, eta) in ws.x_dual.iter().enumerate() {
                    let d = eta.dim;
                    let off = ws.x_dual.offset(k);
                    let b = CMat::from_column_slice(d, d, &c[off..off + d * d]);
                    out[off..off + d * d].copy_from_slice((&mats[k] * b).as_slice());
                }
                ws.x_transform.inverse_raw(&out)
            })
            .collect();
        let mut data = vec![C64::new(0.0, 0.0); nx * total];
        for (e, col) in columns.iter().enumerate() {
            for ix in 0..nx {
                data[ix * total + e] = col[ix];
            }
        }
        Symbol::raw(ws.clone(), data, margin, x_band)
    }

    fn word_mats(&self, word: &[u8]) -> Vec<CMat> {
        self.ws
            .x_derived
            .iter()
            .zip(self.ws.x_dual.iter())
            .map(|(der, eta)| {
                let mut m = CMat::identity(eta.dim, eta.dim);
                for &l in word {
                    m *= &der[l as usize];
                }
                m
            })
            .collect()
    }

    /// `X_{w1} ... X_{wk} sigma` in x for each word, by left multiplication of x-Fourier
    /// coefficients with derived representation matrices.
    pub fn x_derivatives(&self, words: &[Vec<u8>]) -> Result<Vec<Symbol<G>>> {
        let dim = self.ws.group.dim();
        if words.iter().flatten().any(|&l| l as usize >= dim) {
            return Err(Error::InvalidArgument(format!("vector-field index out of range for dimension {dim}")));
        }
        if self.is_invariant() {
            return Ok(words
                .iter()
                .map(|w| if w.is_empty() { self.clone() } else { Symbol::zeros(self.ws.clone()).with_margin(self.margin) })
                .collect());
        }
        let coeffs = self.x_coeffs()?;
        Ok(words.iter().map(|w| Symbol::from_x_coeffs(&self.ws, &coeffs, &self.word_mats(w), self.margin, self.x_band)).collect())
    }

    /// Invariant derivative `X^alpha sigma` with `alpha` a multi-index over the vector-field
    /// basis (applied as `X_1^{a_1} X_2^{a_2} ...`).
    pub fn invariant_derivative(&self, alpha: &[u8]) -> Result<Symbol<G>> {
        let word: Vec<u8> = alpha.iter().enumerate().flat_map(|(i, &a)| std::iter::repeat_n(i as u8, a as usize)).collect();
        Ok(self.x_derivatives(&[word])?.remove(0))
    }

    /// `d^(alpha) sigma` in x for each requested difference multi-index.
    pub fn taylor_derivatives(&self, alphas: &[Vec<u8>]) -> Result<Vec<Symbol<G>>> {
        let ws = &self.ws;
        let idx: Vec<usize> = alphas.iter().map(|a| ws.alpha_index(a)).collect::<Result<_>>()?;
        if self.is_invariant() {
            return Ok(alphas
                .iter()
                .map(|a| if super::abs(a) == 0 { self.clone() } else { Symbol::zeros(ws.clone()).with_margin(self.margin) })
                .collect());
        }
        let coeffs = self.x_coeffs()?;
        Ok(idx
            .iter()
            .zip(alphas)
            .map(|(&ai, a)| {
                if super::abs(a) == 0 {
                    self.clone()
                } else {
                    Symbol::from_x_coeffs(ws, &coeffs, &ws.x_taylor[ai], self.margin, self.x_band)
                }
            })
            .collect())
    }

    pub fn taylor_derivative(&self, alpha: &[u8]) -> Result<Symbol<G>> {
        Ok(self.taylor_derivatives(&[alpha.to_vec()])?.remove(0))
    }

    /// Evaluation of `sigma(y, .)` at arbitrary points through the x-Fourier series
    /// truncated at the declared x-band.
    pub fn interpolant(&self) -> Result<XInterpolant<G>> {
        let ws = self.ws.clone();
        if self.is_invariant() {
            return Ok(XInterpolant { ws, coeffs: None, values: self.data().to_vec(), degree: 0 });
        }
        let degree = match self.x_band {
            XBand::Exact(b) => b.min(ws.x_capacity),
            XBand::Smooth => ws.x_capacity,
        };
        let coeffs = self.x_coeffs()?;
        Ok(XInterpolant { ws, coeffs: Some(coeffs), values: Vec::new(), degree })
    }
}

pub struct XInterpolant<G: CompactGroup> {
    ws: Arc<Workspace<G>>,
    coeffs: Option<Vec<Vec<C64>>>,
    values: Vec<C64>,
    degree: u32,
}

impl<G: CompactGroup> XInterpolant<G> {
    /// All dual-ordered entries of `sigma(y, .)`.
    pub fn eval(&self, y: &G::Point) -> Vec<C64> {
        let Some(coeffs) = &self.coeffs else {
            return self.values.clone();
        };
        let ws = &self.ws;
        let active: Vec<usize> = (0..ws.x_dual.len()).filter(|&k| ws.x_dual.get(k).degree() <= self.degree).collect();
        let reps: Vec<(usize, usize, CMat)> = active
            .iter()
            .map(|&k| {
                let eta = ws.x_dual.get(k);
                (ws.x_dual.offset(k), eta.dim, ws.group.rep_matrix(eta, y))
            })
            .collect();
        coeffs
            .iter()
            .map(|c| {
                let mut acc = C64::new(0.0, 0.0);
                for (off, d, r) in &reps {
                    let mut t = C64::new(0.0, 0.0);
                    for a in 0..*d {
                        for b in 0..*d {
                            t += r[(a, b)] * c[off + b + a * d];
                        }
                    }
                    acc += t * *d as f64;
                }
                acc
            })
            .collect()
    }

    pub fn eval_block(&self, y: &G::Point, k: usize) -> CMat {
        let all = self.eval(y);
        let d = self.ws.dual.get(k).dim;
        let off = self.ws.dual.offset(k);
        CMat::from_column_slice(d, d, &all[off..off + d * d])
    }
}

impl<G: CompactGroup> Symbol<G> {
    /// Gaussian symbol whose entries are random band-limited functions of x of degree
    /// `x_band`, with block `xi` scaled by `<xi>^order`.
    pub fn random<R: rand::Rng + ?Sized>(ws: Arc<Workspace<G>>, x_band: u32, order: f64, rng: &mut R) -> Result<Symbol<G>> {
        use rand_distr::StandardNormal;
        if x_band > ws.x_capacity {
            return Err(Error::XBandOverflow(format!("x-band {x_band} exceeds capacity {}", ws.x_capacity)));
        }
        let total = ws.dual.total_len();
        let ncoef = ws.x_dual.total_len();
        let mut scale = vec![0.0; total];
        for (k, xi) in ws.dual.iter().enumerate() {
            let off = ws.dual.offset(k);
            scale[off..off + xi.dim * xi.dim].fill(xi.weight().powf(order));
        }
        let mut gauss = || C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        if x_band == 0 {
            let data = scale.iter().map(|s| gauss() * *s).collect();
            return Symbol::from_raw(ws, data, 0, XBand::Exact(0));
        }
        let mut coeffs = vec![vec![C64::new(0.0, 0.0); ncoef]; total];
        for (e, c) in coeffs.iter_mut().enumerate() {
            for (k, eta) in ws.x_dual.iter().enumerate() {
                if eta.degree() > x_band {
                    continue;
                }
                let off = ws.x_dual.offset(k);
                for v in &mut c[off..off + eta.dim * eta.dim] {
                    *v = gauss() * scale[e];
                }
            }
        }
        let ident: Vec<CMat> = ws.x_dual.iter().map(|eta| CMat::identity(eta.dim, eta.dim)).collect();
        Ok(Symbol::from_x_coeffs(&ws, &coeffs, &ident, 0, XBand::Exact(x_band)))
    }
}
