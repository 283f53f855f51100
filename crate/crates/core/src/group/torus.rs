//! The torus T^n with characters `e^{i k.x}`.

use std::f64::consts::PI;

use rand::Rng;

use super::{check_cap, CompactGroup, Dual, DualIndex, DualLabel, FourierPlan, GridLayout, QuadratureGrid};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Torus {
    pub n: usize,
}

impl Torus {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "torus dimension must be positive");
        Torus { n }
    }
}

fn reduce(v: f64) -> f64 {
    let r = v.rem_euclid(TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

fn lattice(xi: &DualIndex) -> &[i32] {
    match &xi.label {
        DualLabel::Lattice(k) => k,
        _ => panic!("torus backend given a spin label"),
    }
}

fn lattice_index(k: Vec<i32>) -> DualIndex {
    let w = 1.0 + k.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>();
    DualIndex { label: DualLabel::Lattice(k), dim: 1, weight_sq: w }
}

fn cube(n: usize, r: i32) -> Vec<Vec<i32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * (2 * r as usize + 1));
        for p in &out {
            for v in -r..=r {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

impl CompactGroup for Torus {
    type Point = Vec<f64>;

    fn id(&self) -> String {
        format!("torus:{}", self.n)
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn identity(&self) -> Vec<f64> {
        vec![0.0; self.n]
    }

    fn mul(&self, x: &Vec<f64>, y: &Vec<f64>) -> Vec<f64> {
        x.iter().zip(y).map(|(a, b)| reduce(a + b)).collect()
    }

    fn inv(&self, x: &Vec<f64>) -> Vec<f64> {
        x.iter().map(|a| reduce(-a)).collect()
    }

    fn exp(&self, i: usize, t: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        x[i] = reduce(t);
        x
    }

    fn distance_from_identity(&self, x: &Vec<f64>) -> f64 {
        x.iter().map(|&a| a.min(TWO_PI - a).powi(2)).sum::<f64>().sqrt()
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.n).map(|_| rng.random_range(0.0..TWO_PI)).collect()
    }

    fn coords(&self, x: &Vec<f64>) -> Vec<f64> {
        x.clone()
    }

    fn from_coords(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.n || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("torus:{} points need {} finite coordinates", self.n, self.n)));
        }
        Ok(c.iter().map(|&v| reduce(v)).collect())
    }

    fn dual_enumerate(&self, band: f64) -> Dual {
        if band < 1.0 {
            return Dual::new(self.id(), vec![]);
        }
        let lim = band * band - 1.0;
        let r = (lim + 1e-9).sqrt().floor() as i32;
        let v = cube(self.n, r)
            .into_iter()
            .filter(|k| k.iter().map(|&a| (a as f64) * (a as f64)).sum::<f64>() <= lim * (1.0 + 1e-12) + 1e-12)
            .map(lattice_index)
            .collect();
        Dual::new(self.id(), v)
    }

    fn dual_by_degree(&self, degree: u32) -> Dual {
        Dual::new(self.id(), cube(self.n, degree as i32).into_iter().map(lattice_index).collect())
    }

    fn rep_matrix(&self, xi: &DualIndex, x: &Vec<f64>) -> CMat {
        let k = lattice(xi);
        let phase: f64 = k.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum();
        CMat::from_element(1, 1, C64::from_polar(1.0, phase))
    }

    fn derived_rep(&self, xi: &DualIndex, i: usize) -> CMat {
        CMat::from_element(1, 1, C64::new(0.0, lattice(xi)[i] as f64))
    }

    fn grid_for_degree_capped(&self, degree: u32, cap: usize) -> Result<QuadratureGrid<Vec<f64>>> {
        let n = degree as usize + 1;
        let total = n.checked_pow(self.n as u32).unwrap_or(usize::MAX);
        check_cap(total, cap)?;
        let mut points = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut p = vec![0.0; self.n];
            for d in (0..self.n).rev() {
                p[d] = TWO_PI * (rem % n) as f64 / n as f64;
                rem /= n;
            }
            points.push(p);
        }
        Ok(QuadratureGrid {
            points,
            weights: vec![1.0 / total as f64; total],
            degree,
            layout: GridLayout::Torus { n, dims: self.n },
        })
    }

    fn plan(&self, grid: &QuadratureGrid<Vec<f64>>, dual: &Dual) -> Box<dyn FourierPlan> {
        match grid.layout {
            GridLayout::Torus { n, dims } if dims == self.n => Box::new(TorusPlan::new(n, dims, dual)),
            _ => Box::new(super::DensePlan::new(*self, grid, dual)),
        }
    }

    fn difference_reps(&self) -> Vec<DualIndex> {
        (0..self.n)
            .map(|j| {
                let mut k = vec![0; self.n];
                k[j] = 1;
                lattice_index(k)
            })
            .collect()
    }
}

/// Axis-by-axis DFT restricted to the frequency window `[-kmax, kmax]`.
struct TorusPlan {
    n: usize,
    dims: usize,
    kmax: usize,
    freqs: Vec<Vec<i32>>,
    fwd: Vec<C64>,
    inv: Vec<C64>,
}

impl TorusPlan {
    fn new(n: usize, dims: usize, dual: &Dual) -> Self {
        let freqs: Vec<Vec<i32>> = dual.iter().map(|xi| lattice(xi).to_vec()).collect();
        let kmax = dual.max_degree() as usize;
        let width = 2 * kmax + 1;
        let mut fwd = Vec::with_capacity(width * n);
        for r in 0..width {
            let k = r as i64 - kmax as i64;
            for i in 0..n {
                let m = (k * i as i64).rem_euclid(n as i64);
                fwd.push(C64::from_polar(1.0, -TWO_PI * m as f64 / n as f64));
            }
        }
        let mut inv = Vec::with_capacity(width * n);
        for i in 0..n {
            for r in 0..width {
                let k = r as i64 - kmax as i64;
                let m = (k * i as i64).rem_euclid(n as i64);
                inv.push(C64::from_polar(1.0, TWO_PI * m as f64 / n as f64));
            }
        }
        TorusPlan { n, dims, kmax, freqs, fwd, inv }
    }

    fn flat(&self, k: &[i32]) -> usize {
        let width = 2 * self.kmax + 1;
        k.iter().fold(0, |acc, &v| acc * width + (v + self.kmax as i32) as usize)
    }
}

fn apply_axis(data: &[C64], shape: &[usize], axis: usize, mat: &[C64], out_len: usize) -> (Vec<C64>, Vec<usize>) {
    let in_len = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); outer * out_len * inner];
    for o in 0..outer {
        for r in 0..out_len {
            let row = &mat[r * in_len..(r + 1) * in_len];
            let dst = &mut out[(o * out_len + r) * inner..(o * out_len + r + 1) * inner];
            for (c, m) in row.iter().enumerate() {
                let src = &data[(o * in_len + c) * inner..(o * in_len + c + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += m * s;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = out_len;
    (out, new_shape)
}

impl FourierPlan for TorusPlan {
    fn forward(&self, values: &[C64]) -> Vec<C64> {
        let width = 2 * self.kmax + 1;
        let mut data = values.to_vec();
        let mut shape = vec![self.n; self.dims];
        for axis in 0..self.dims {
            let (d, s) = apply_axis(&data, &shape, axis, &self.fwd, width);
            data = d;
            shape = s;
        }
        let scale = 1.0 / (self.n as f64).powi(self.dims as i32);
        self.freqs.iter().map(|k| data[self.flat(k)] * scale).collect()
    }

    fn inverse(&self, coeffs: &[C64]) -> Vec<C64> {
        let width = 2 * self.kmax + 1;
        let mut data = vec![C64::new(0.0, 0.0); width.pow(self.dims as u32)];
        for (k, c) in self.freqs.iter().zip(coeffs) {
            data[self.flat(k)] = *c;
        }
        let mut shape = vec![width; self.dims];
        for axis in 0..self.dims {
            let (d, s) = apply_axis(&data, &shape, axis, &self.inv, self.n);
            data = d;
            shape = s;
        }
        data
    }
}
