//! Command-line grammar and run configuration.
//!
//! Every option can also come from a TOML file given with `--config`; command-line values
//! win. The thread count is read from `PSIDO_THREADS` first, then `--threads`, then the
//! config file, and defaults to the available parallelism.

use std::f64::consts::{FRAC_PI_4, PI};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use psido::io::sha256_hex;
use psido::linalg::C64;
use psido::{Error, Result};
use serde::Deserialize;

pub const THREADS_ENV: &str = "PSIDO_THREADS";

#[derive(Parser, Debug)]
#[command(name = "psido", version, about = "Matrix-symbol pseudo-differential calculus on SU(2) and tori")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Enumerate the truncated dual.
    #[command(subcommand)]
    Dual(DualCmd),
    /// Group Fourier transform of sampled functions and coefficient sequences.
    #[command(subcommand)]
    Fourier(FourierCmd),
    /// Apply a quantized symbol to a function.
    #[command(subcommand)]
    Op(OpCmd),
    /// Symbol constructors and the symbolic calculus.
    #[command(subcommand)]
    Symbol(SymbolCmd),
    /// Parametrix of `sigma - lambda` and its residual orders.
    Parametrix(Opts),
    /// Functions of symbols and operators by contour integrals.
    #[command(subcommand)]
    Funcalc(FuncalcCmd),
    /// Symbol-class and ellipticity diagnostics.
    #[command(subcommand)]
    Diagnose(DiagnoseCmd),
    /// Garding decomposition, inequality fits and L2 certificates.
    #[command(subcommand)]
    Garding(GardingCmd),
    /// Time the main kernels.
    Bench(Opts),
}

#[derive(Subcommand, Debug)]
pub enum DualCmd {
    List(Opts),
}

#[derive(Subcommand, Debug)]
pub enum FourierCmd {
    Fwd(Opts),
    Inv(Opts),
}

#[derive(Subcommand, Debug)]
pub enum OpCmd {
    Apply(Opts),
}

#[derive(Subcommand, Debug)]
pub enum SymbolCmd {
    /// Write a preset symbol to a file.
    Make(Opts),
    Compose(Opts),
    Adjoint(Opts),
    Sqrt(Opts),
    Power(Opts),
    Freeze(Opts),
}

#[derive(Subcommand, Debug)]
pub enum FuncalcCmd {
    /// Pointwise `F(sigma(x, xi))`.
    Contour(Opts),
    /// Symbol of `F(Op(sigma))` from the parametrix.
    Operator(Opts),
}

#[derive(Subcommand, Debug)]
pub enum DiagnoseCmd {
    Class(Opts),
    Elliptic(Opts),
    ParamElliptic(Opts),
}

#[derive(Subcommand, Debug)]
pub enum GardingCmd {
    Decompose(Opts),
    Verify(Opts),
    L2(Opts),
}

impl Command {
    /// Space-separated command path and its options.
    pub fn split(&self) -> (&'static str, &Opts) {
        match self {
            Command::Dual(DualCmd::List(o)) => ("dual list", o),
            Command::Fourier(FourierCmd::Fwd(o)) => ("fourier fwd", o),
            Command::Fourier(FourierCmd::Inv(o)) => ("fourier inv", o),
            Command::Op(OpCmd::Apply(o)) => ("op apply", o),
            Command::Symbol(SymbolCmd::Make(o)) => ("symbol make", o),
            Command::Symbol(SymbolCmd::Compose(o)) => ("symbol compose", o),
            Command::Symbol(SymbolCmd::Adjoint(o)) => ("symbol adjoint", o),
            Command::Symbol(SymbolCmd::Sqrt(o)) => ("symbol sqrt", o),
            Command::Symbol(SymbolCmd::Power(o)) => ("symbol power", o),
            Command::Symbol(SymbolCmd::Freeze(o)) => ("symbol freeze", o),
            Command::Parametrix(o) => ("parametrix", o),
            Command::Funcalc(FuncalcCmd::Contour(o)) => ("funcalc contour", o),
            Command::Funcalc(FuncalcCmd::Operator(o)) => ("funcalc operator", o),
            Command::Diagnose(DiagnoseCmd::Class(o)) => ("diagnose class", o),
            Command::Diagnose(DiagnoseCmd::Elliptic(o)) => ("diagnose elliptic", o),
            Command::Diagnose(DiagnoseCmd::ParamElliptic(o)) => ("diagnose param-elliptic", o),
            Command::Garding(GardingCmd::Decompose(o)) => ("garding decompose", o),
            Command::Garding(GardingCmd::Verify(o)) => ("garding verify", o),
            Command::Garding(GardingCmd::L2(o)) => ("garding l2", o),
            Command::Bench(o) => ("bench", o),
        }
    }
}

macro_rules! options {
    ($( $(#[$doc:meta])* $name:ident : $ty:ty ),* $(,)?) => {
        /// Options shared by every command; each command reads the ones it needs.
        #[derive(Args, Deserialize, Clone, Debug, Default, PartialEq)]
        #[serde(default, deny_unknown_fields)]
        pub struct Opts {
            /// TOML file with default values for any option below.
            #[arg(long)]
            #[serde(skip)]
            pub config: Option<PathBuf>,
            $( $(#[$doc])* #[arg(long)] pub $name: Option<$ty>, )*
        }

        impl Opts {
            /// Command-line values, falling back to `other`.
            pub fn or(self, other: Opts) -> Opts {
                Opts { config: self.config, $( $name: self.$name.or(other.$name), )* }
            }

            /// `(key, value)` for every option that is set, in declaration order.
            fn entries(&self) -> Vec<(&'static str, String)> {
                let mut v = Vec::new();
                $( if let Some(x) = &self.$name { v.push((stringify!($name), Show::show(x))); } )*
                v
            }
        }
    };
}

trait Show {
    fn show(&self) -> String;
}

impl Show for f64 {
    fn show(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! show_display {
    ($($t:ty),*) => { $( impl Show for $t { fn show(&self) -> String { self.to_string() } } )* };
}
show_display!(u32, u64, usize, String);

impl Show for PathBuf {
    fn show(&self) -> String {
        self.display().to_string()
    }
}

options! {
    /// Output directory for reports and artifacts [default: psido-out].
    out: PathBuf,
    /// Worker threads; does not affect results.
    threads: usize,
    /// `su2` or `torus:n` [default: su2].
    backend: String,
    /// Band limit on `<xi>` [default: 4].
    band: f64,
    /// x-harmonic capacity of the symbol grid [default: 2].
    x_capacity: u32,
    /// Expansion order N [default: 2].
    order: usize,
    /// Symbol class parameter rho [default: 1].
    rho: f64,
    /// Symbol class parameter delta [default: 0].
    delta: f64,
    /// Order m of the symbol [default: from the preset or a fit].
    m: f64,
    /// Random seed [default: 0].
    seed: u64,
    /// Symbol file.
    symbol: PathBuf,
    /// Second symbol file (composition).
    symbol2: PathBuf,
    /// Preset symbol, used when no symbol file is given.
    preset: String,
    /// Preset for the second symbol.
    preset2: String,
    /// Input function or sequence file.
    input: PathBuf,
    /// Spectral parameter `re,im`.
    lambda: String,
    /// Modulus of the spectral parameters on the sector rays [default: 0.1].
    lambda_modulus: f64,
    /// Sector half-opening [default: pi/4].
    phi: f64,
    /// Sector disk radius [default: 0].
    eps: f64,
    /// Sector direction [default: pi].
    theta0: f64,
    /// Holomorphic function: power:s, sqrt, inv-sqrt, log-power:s [default: sqrt].
    function: String,
    /// Exponent for `symbol power` [default: 0.5].
    exponent: f64,
    /// Point coordinates `c1,c2,...` for `symbol freeze` [default: identity].
    point: String,
    /// Number of random trials [default: 64].
    trials: usize,
    /// Steps of the higher-order square-root series [default: 0].
    k: usize,
    /// Largest |alpha| in class diagnostics [default: 1].
    alpha_max: usize,
    /// Largest |beta| in class diagnostics [default: 1].
    beta_max: usize,
    /// Contour quadrature tolerance [default: 1e-10].
    contour_tol: f64,
    /// Relative tolerance on fitted orders [default: 0.2].
    slope_tol: f64,
    /// Tolerance on pointwise identities [default: 1e-10].
    identity_tol: f64,
}

impl Opts {
    /// Merges the `--config` file, if any, under the command-line values.
    pub fn resolve(self) -> Result<Opts> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let text = std::fs::read_to_string(&path)?;
        let file: Opts =
            toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config {}: {}", path.display(), e.message())))?;
        Ok(self.or(file))
    }

    /// Canonical text identifying the run: the command and every set option except the
    /// output directory and thread count; input files enter by content hash.
    pub fn canonical(&self, command: &str) -> Result<String> {
        let mut s = format!("command = {command}\n");
        for (k, v) in self.entries() {
            match k {
                "out" | "threads" => continue,
                "symbol" | "symbol2" | "input" => {
                    let bytes = std::fs::read(Path::new(&v))
                        .map_err(|e| Error::InvalidArgument(format!("cannot read {k} file {v}: {e}")))?;
                    s.push_str(&format!("{k}_sha256 = {}\n", sha256_hex(&bytes)));
                }
                _ => s.push_str(&format!("{k} = {v}\n")),
            }
        }
        Ok(s)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("psido-out"))
    }

    pub fn thread_count(&self) -> Result<usize> {
        let n = match std::env::var(THREADS_ENV) {
            Ok(v) => {
                v.trim().parse::<usize>().map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a count")))?
            }
            Err(_) => match self.threads {
                Some(n) => n,
                None => std::thread::available_parallelism().map_or(1, |n| n.get()),
            },
        };
        if n == 0 {
            return Err(Error::InvalidArgument("thread count must be positive".into()));
        }
        Ok(n)
    }

    pub fn band(&self) -> f64 {
        self.band.unwrap_or(4.0)
    }

    pub fn x_capacity(&self) -> u32 {
        self.x_capacity.unwrap_or(2)
    }

    pub fn order(&self) -> usize {
        self.order.unwrap_or(2)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(64)
    }

    pub fn slope_tol(&self) -> f64 {
        self.slope_tol.unwrap_or(0.2)
    }

    pub fn identity_tol(&self) -> f64 {
        self.identity_tol.unwrap_or(1e-10)
    }

    pub fn contour_tol(&self) -> f64 {
        self.contour_tol.unwrap_or(1e-10)
    }

    /// `(rho, delta)` with `0 <= rho, delta <= 1`; `strict` also requires `rho > delta`.
    pub fn rho_delta(&self, strict: bool) -> Result<(f64, f64)> {
        let rho = self.rho.unwrap_or(1.0);
        let delta = self.delta.unwrap_or(0.0);
        for (name, v) in [("rho", rho), ("delta", delta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        if strict && rho <= delta {
            return Err(Error::InvalidArgument(format!("this command needs rho > delta, got rho = {rho}, delta = {delta}")));
        }
        Ok((rho, delta))
    }

    pub fn phi(&self) -> f64 {
        self.phi.unwrap_or(FRAC_PI_4)
    }

    pub fn theta0(&self) -> f64 {
        self.theta0.unwrap_or(PI)
    }

    pub fn lambda(&self) -> Result<Option<C64>> {
        let Some(s) = &self.lambda else { return Ok(None) };
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::InvalidArgument(format!("lambda {s:?} must be re,im"));
        if parts.len() != 2 {
            return Err(bad());
        }
        let re: f64 = parts[0].parse().map_err(|_| bad())?;
        let im: f64 = parts[1].parse().map_err(|_| bad())?;
        if !re.is_finite() || !im.is_finite() {
            return Err(bad());
        }
        Ok(Some(C64::new(re, im)))
    }

    pub fn point(&self) -> Result<Option<Vec<f64>>> {
        let Some(s) = &self.point else { return Ok(None) };
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad coordinate {t:?} in point {s:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}
