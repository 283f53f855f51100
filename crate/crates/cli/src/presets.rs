//! Named test symbols.
//!
//! | name          | symbol                                                            | order |
//! |---------------|-------------------------------------------------------------------|-------|
//! | `identity`    | `I`                                                               | 0     |
//! | `bessel:M`    | `<xi>^M I`                                                        | M     |
//! | `elliptic:M`  | x-dependent, elliptic, not normal on SU(2)                        | M     |
//! | `positive`    | x-dependent, Hermitian positive definite                          | 2     |
//! | `random:M`    | Gaussian entries scaled by `<xi>^M`, x-band 1 (not in a symbol class) | M |

use std::sync::Arc;

use psido::group::{CompactGroup, Su2, Torus};
use psido::linalg::{CMat, C64};
use psido::symbol::{Symbol, Workspace, XBand};
use psido::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Backend-specific preset constructors.
pub trait Presets: CompactGroup {
    /// `(2 + a(x)) <xi>^m I + b(x) D <xi>^{m-1}` with `a`, `b` of x-degree 1 and `D` diagonal.
    fn elliptic(ws: &Arc<Workspace<Self>>, m: f64) -> Result<Symbol<Self>>;
    /// Hermitian positive definite of order 2.
    fn positive(ws: &Arc<Workspace<Self>>) -> Result<Symbol<Self>>;
}

impl Presets for Su2 {
    fn elliptic(ws: &Arc<Workspace<Su2>>, m: f64) -> Result<Symbol<Su2>> {
        Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
            let u = x.matrix();
            let w = xi.weight();
            let mut a = CMat::identity(xi.dim, xi.dim) * c((2.0 + 0.5 * u[0].re) * w.powf(m), 0.0);
            for i in 0..xi.dim {
                a[(i, i)] += c(u[2].im * i as f64 / xi.dim as f64 * w.powf(m - 1.0), 0.0);
            }
            a
        })
    }

    fn positive(ws: &Arc<Workspace<Su2>>) -> Result<Symbol<Su2>> {
        Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
            let u = x.matrix();
            let w2 = xi.weight_sq;
            let mut a = CMat::identity(xi.dim, xi.dim) * c((2.0 + 0.5 * u[0].re) * w2, 0.0);
            for i in 0..xi.dim {
                a[(i, i)] += c(0.5 * w2 * u[2].im * (i as f64 / xi.dim as f64 - 0.5), 0.0);
            }
            let z = c(u[2].re, u[0].im) * (0.3 * w2);
            for i in 0..xi.dim.saturating_sub(1) {
                a[(i, i + 1)] += z;
                a[(i + 1, i)] += z.conj();
            }
            a
        })
    }
}

impl Presets for Torus {
    fn elliptic(ws: &Arc<Workspace<Torus>>, m: f64) -> Result<Symbol<Torus>> {
        Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
            let w = xi.weight();
            let last = x[x.len() - 1];
            CMat::from_element(1, 1, c((2.0 + 0.5 * x[0].cos()) * w.powf(m) + last.sin() * w.powf(m - 1.0), 0.0))
        })
    }

    fn positive(ws: &Arc<Workspace<Torus>>) -> Result<Symbol<Torus>> {
        Symbol::from_fn(ws.clone(), XBand::Exact(1), |x, xi| {
            CMat::from_element(1, 1, c((1.0 + 0.5 * x[0].sin()) * xi.weight_sq, 0.0))
        })
    }
}

/// A parsed preset name.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preset {
    Identity,
    Bessel(f64),
    Elliptic(f64),
    Positive,
    Random(f64),
}

impl Preset {
    pub fn parse(spec: &str) -> Result<Preset> {
        let num = |t: &str| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("bad order {t:?} in preset {spec:?}")))
        };
        match spec.split_once(':') {
            None if spec == "identity" => Ok(Preset::Identity),
            None if spec == "positive" => Ok(Preset::Positive),
            None if spec == "elliptic" => Ok(Preset::Elliptic(1.0)),
            Some(("bessel", m)) => Ok(Preset::Bessel(num(m)?)),
            Some(("elliptic", m)) => Ok(Preset::Elliptic(num(m)?)),
            Some(("random", m)) => Ok(Preset::Random(num(m)?)),
            _ => Err(Error::InvalidArgument(format!(
                "unknown preset {spec:?}; expected identity, bessel:M, elliptic[:M], positive or random:M"
            ))),
        }
    }

    /// Nominal order.
    pub fn order(&self) -> f64 {
        match *self {
            Preset::Identity => 0.0,
            Preset::Bessel(m) | Preset::Elliptic(m) | Preset::Random(m) => m,
            Preset::Positive => 2.0,
        }
    }

    /// Declared x-band of the symbol.
    pub fn x_degree(&self) -> u32 {
        match self {
            Preset::Identity | Preset::Bessel(_) => 0,
            _ => 1,
        }
    }

    pub fn build<G: Presets>(&self, ws: &Arc<Workspace<G>>, seed: u64) -> Result<Symbol<G>> {
        match *self {
            Preset::Identity => Ok(Symbol::identity(ws.clone())),
            Preset::Bessel(m) => Ok(Symbol::bessel(ws.clone(), m)),
            Preset::Elliptic(m) => G::elliptic(ws, m),
            Preset::Positive => G::positive(ws),
            Preset::Random(m) => Symbol::random(ws.clone(), 1, m, &mut ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}
