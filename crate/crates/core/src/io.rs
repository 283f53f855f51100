//! Binary container for symbols, Fourier sequences and sampled functions.
//!
//! A file is a text manifest of `key = value` lines, a `---` separator line, then the
//! payload: little-endian `(re, im)` f64 pairs. Symbol payloads are ordered by class
//! (in dual order), then x-grid point, each block row-major.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fourier::{GroupFunction, MatrixSequence};
use crate::group::{CompactGroup, Dual, Su2, Torus};
use crate::linalg::C64;
use crate::symbol::{Symbol, Workspace, XBand};

const MAGIC: &str = "psido-container 1";
const SEPARATOR: &str = "---";
pub const DTYPE: &str = "c128";
const SYMBOL_ORDERING: &str = "class,grid-point,row-major";
const SEQUENCE_ORDERING: &str = "class,row-major";
const FUNCTION_ORDERING: &str = "grid-point";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Su2,
    Torus(usize),
}

impl Backend {
    pub fn parse(s: &str) -> Result<Backend> {
        if s == "su2" {
            return Ok(Backend::Su2);
        }
        if let Some(n) = s.strip_prefix("torus:") {
            if let Ok(n) = n.parse::<usize>() {
                if (1..=3).contains(&n) {
                    return Ok(Backend::Torus(n));
                }
            }
        }
        Err(Error::InvalidArgument(format!("unknown backend id {s:?} (expected su2 or torus:n, n = 1..3)")))
    }

    pub fn id(&self) -> String {
        match self {
            Backend::Su2 => "su2".into(),
            Backend::Torus(n) => format!("torus:{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Symbol,
    Sequence,
    Function,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Symbol => "symbol",
            Kind::Sequence => "sequence",
            Kind::Function => "function",
        }
    }

    fn ordering(self) -> &'static str {
        match self {
            Kind::Symbol => SYMBOL_ORDERING,
            Kind::Sequence => SEQUENCE_ORDERING,
            Kind::Function => FUNCTION_ORDERING,
        }
    }
}

/// Parsed manifest. Keys unknown to this version are kept in `extra`.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub kind: Kind,
    pub backend: Backend,
    pub band: f64,
    pub x_capacity: u32,
    pub max_order: usize,
    pub margin: u32,
    pub x_band: XBand,
    /// Harmonic degree of a stored function.
    pub degree: u32,
    /// Grid descriptor, or `none` for sequences.
    pub x_grid: String,
    pub grid_degree: u32,
    pub grid_points: usize,
    pub classes: usize,
    pub payload_bytes: u64,
    pub payload_sha256: String,
    pub extra: BTreeMap<String, String>,
}

fn x_band_text(b: XBand) -> String {
    match b {
        XBand::Exact(n) => format!("exact:{n}"),
        XBand::Smooth => "smooth".into(),
    }
}

fn parse_x_band(s: &str) -> Option<XBand> {
    if s == "smooth" {
        return Some(XBand::Smooth);
    }
    s.strip_prefix("exact:").and_then(|n| n.parse().ok()).map(XBand::Exact)
}

impl Manifest {
    fn lines(&self) -> Vec<(String, String)> {
        let mut v = vec![
            ("kind".to_string(), self.kind.name().to_string()),
            ("backend".into(), self.backend.id()),
            ("band".into(), format!("{:?}", self.band)),
            ("x_capacity".into(), self.x_capacity.to_string()),
            ("max_order".into(), self.max_order.to_string()),
            ("margin".into(), self.margin.to_string()),
            ("x_band".into(), x_band_text(self.x_band)),
            ("degree".into(), self.degree.to_string()),
            ("x_grid".into(), self.x_grid.clone()),
            ("grid_degree".into(), self.grid_degree.to_string()),
            ("grid_points".into(), self.grid_points.to_string()),
            ("classes".into(), self.classes.to_string()),
            ("dtype".into(), DTYPE.into()),
            ("endianness".into(), "little".into()),
            ("ordering".into(), self.kind.ordering().into()),
            ("payload_bytes".into(), self.payload_bytes.to_string()),
            ("payload_sha256".into(), self.payload_sha256.clone()),
        ];
        v.extend(self.extra.iter().map(|(k, val)| (k.clone(), val.clone())));
        v
    }

    /// Manifest text up to (excluding) the hash line.
    fn body(&self) -> String {
        let mut s = format!("{MAGIC}\n");
        for (k, v) in self.lines() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.body().as_bytes())
    }
}

/// A decoded container: manifest plus payload in file order.
#[derive(Clone, Debug)]
pub struct Container {
    pub manifest: Manifest,
    pub manifest_sha256: String,
    pub values: Vec<C64>,
}

pub fn encode(manifest: &Manifest, values: &[C64]) -> Vec<u8> {
    let mut payload = Vec::with_capacity(values.len() * 16);
    for v in values {
        payload.extend_from_slice(&v.re.to_le_bytes());
        payload.extend_from_slice(&v.im.to_le_bytes());
    }
    let mut m = manifest.clone();
    m.payload_bytes = payload.len() as u64;
    m.payload_sha256 = sha256_hex(&payload);
    let mut out = m.body();
    out.push_str(&format!("manifest_sha256 = {}\n{SEPARATOR}\n", m.hash()));
    let mut bytes = out.into_bytes();
    bytes.extend_from_slice(&payload);
    bytes
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format { offset: offset as u64, message: message.into() }
}

pub fn decode(bytes: &[u8]) -> Result<Container> {
    let mut pos = 0usize;
    let next_line = |pos: &mut usize| -> Result<(usize, String)> {
        let start = *pos;
        let rel = bytes[start..].iter().position(|&b| b == b'\n').ok_or_else(|| format_err(start, "unterminated manifest"))?;
        let line = std::str::from_utf8(&bytes[start..start + rel]).map_err(|_| format_err(start, "manifest is not UTF-8"))?;
        *pos = start + rel + 1;
        Ok((start, line.to_string()))
    };
    let (off, magic) = next_line(&mut pos)?;
    if magic != MAGIC {
        return Err(format_err(off, format!("expected {MAGIC:?}")));
    }
    let mut fields: Vec<(usize, String, String)> = Vec::new();
    let mut hash: Option<(usize, String)> = None;
    loop {
        let (off, line) = next_line(&mut pos)?;
        if line == SEPARATOR {
            break;
        }
        let (k, v) = line.split_once(" = ").ok_or_else(|| format_err(off, format!("malformed manifest line {line:?}")))?;
        if k == "manifest_sha256" {
            hash = Some((off, v.to_string()));
        } else if hash.is_some() {
            return Err(format_err(off, "manifest entry after the manifest hash"));
        } else if fields.iter().any(|f| f.1 == k) {
            return Err(format_err(off, format!("duplicate key {k}")));
        } else {
            fields.push((off, k.to_string(), v.to_string()));
        }
    }
    let header_end = pos;
    let (hash_off, manifest_sha256) = hash.ok_or_else(|| format_err(header_end, "missing manifest_sha256"))?;

    let take = |key: &str| -> Result<(usize, String)> {
        fields
            .iter()
            .find(|f| f.1 == key)
            .map(|f| (f.0, f.2.clone()))
            .ok_or_else(|| format_err(header_end, format!("missing manifest key {key}")))
    };
    fn num<T: std::str::FromStr>(kv: (usize, String), key: &str) -> Result<T> {
        kv.1.parse().map_err(|_| format_err(kv.0, format!("bad value {:?} for {key}", kv.1)))
    }
    let (koff, kind) = take("kind")?;
    let kind = match kind.as_str() {
        "symbol" => Kind::Symbol,
        "sequence" => Kind::Sequence,
        "function" => Kind::Function,
        other => return Err(format_err(koff, format!("unknown kind {other:?}"))),
    };
    let (boff, backend) = take("backend")?;
    let backend = Backend::parse(&backend).map_err(|e| format_err(boff, e.to_string()))?;
    let (doff, dtype) = take("dtype")?;
    if dtype != DTYPE {
        return Err(format_err(doff, format!("dtype mismatch: {dtype:?}, expected {DTYPE:?}")));
    }
    let (eoff, endian) = take("endianness")?;
    if endian != "little" {
        return Err(format_err(eoff, format!("unsupported endianness {endian:?}")));
    }
    let (ooff, ordering) = take("ordering")?;
    if ordering != kind.ordering() {
        return Err(format_err(ooff, format!("ordering {ordering:?} does not match kind {}", kind.name())));
    }
    let (xoff, xb) = take("x_band")?;
    let x_band = parse_x_band(&xb).ok_or_else(|| format_err(xoff, format!("bad x_band {xb:?}")))?;
    let band: f64 = num(take("band")?, "band")?;
    if !band.is_finite() {
        return Err(format_err(take("band")?.0, "band is not finite"));
    }
    let known = [
        "kind",
        "backend",
        "band",
        "x_capacity",
        "max_order",
        "margin",
        "x_band",
        "degree",
        "x_grid",
        "grid_degree",
        "grid_points",
        "classes",
        "dtype",
        "endianness",
        "ordering",
        "payload_bytes",
        "payload_sha256",
    ];
    let extra = fields.iter().filter(|f| !known.contains(&f.1.as_str())).map(|f| (f.1.clone(), f.2.clone())).collect();
    let manifest = Manifest {
        kind,
        backend,
        band,
        x_capacity: num(take("x_capacity")?, "x_capacity")?,
        max_order: num(take("max_order")?, "max_order")?,
        margin: num(take("margin")?, "margin")?,
        x_band,
        degree: num(take("degree")?, "degree")?,
        x_grid: take("x_grid")?.1,
        grid_degree: num(take("grid_degree")?, "grid_degree")?,
        grid_points: num(take("grid_points")?, "grid_points")?,
        classes: num(take("classes")?, "classes")?,
        payload_bytes: num(take("payload_bytes")?, "payload_bytes")?,
        payload_sha256: take("payload_sha256")?.1,
        extra,
    };
    if manifest.hash() != manifest_sha256 {
        return Err(format_err(hash_off, "manifest hash mismatch"));
    }
    let payload = &bytes[header_end..];
    if (payload.len() as u64) < manifest.payload_bytes {
        return Err(format_err(bytes.len(), format!("truncated payload: {} of {} bytes", payload.len(), manifest.payload_bytes)));
    }
    if payload.len() as u64 > manifest.payload_bytes {
        return Err(format_err(header_end + manifest.payload_bytes as usize, "trailing bytes after the payload"));
    }
    if manifest.payload_bytes % 16 != 0 {
        return Err(format_err(header_end, "payload length is not a multiple of 16"));
    }
    if sha256_hex(payload) != manifest.payload_sha256 {
        return Err(format_err(header_end, "payload hash mismatch"));
    }
    let values = payload
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect();
    Ok(Container { manifest, manifest_sha256, values })
}

pub fn read_container(path: &Path) -> Result<Container> {
    decode(&std::fs::read(path)?)
}

fn expected_len(dual: &Dual, points: usize) -> usize {
    dual.total_len() * points
}

fn check_len(c: &Container, header_hint: usize, want: usize) -> Result<()> {
    if c.values.len() != want {
        return Err(format_err(
            header_hint,
            format!("length mismatch: payload holds {} values, the manifest implies {want}", c.values.len()),
        ));
    }
    Ok(())
}

fn check_backend<G: CompactGroup>(group: &G, m: &Manifest) -> Result<()> {
    if group.id() != m.backend.id() {
        return Err(Error::InvalidArgument(format!("file backend {} does not match {}", m.backend.id(), group.id())));
    }
    Ok(())
}

// ---- symbols ----

pub fn symbol_manifest<G: CompactGroup>(sigma: &Symbol<G>) -> Result<Manifest> {
    let ws = &sigma.ws;
    Ok(Manifest {
        kind: Kind::Symbol,
        backend: Backend::parse(&ws.group.id())?,
        band: ws.band,
        x_capacity: ws.x_capacity,
        max_order: ws.max_order,
        margin: sigma.margin,
        x_band: sigma.x_band,
        degree: 0,
        x_grid: ws.xgrid.descriptor(),
        grid_degree: ws.xgrid.degree,
        grid_points: ws.nx(),
        classes: ws.dual.len(),
        payload_bytes: 0,
        payload_sha256: String::new(),
        extra: BTreeMap::new(),
    })
}

/// Payload order: class, then grid point, then row-major entries.
fn symbol_payload<G: CompactGroup>(sigma: &Symbol<G>) -> Vec<C64> {
    let ws = &sigma.ws;
    let mut out = Vec::with_capacity(expected_len(&ws.dual, ws.nx()));
    for (k, xi) in ws.dual.iter().enumerate() {
        let off = ws.dual.offset(k);
        let d = xi.dim;
        for ix in 0..ws.nx() {
            let s = sigma.slice(ix);
            for r in 0..d {
                for c in 0..d {
                    out.push(s[off + c * d + r]);
                }
            }
        }
    }
    out
}

pub fn encode_symbol<G: CompactGroup>(sigma: &Symbol<G>) -> Result<Vec<u8>> {
    Ok(encode(&symbol_manifest(sigma)?, &symbol_payload(sigma)))
}

pub fn write_symbol<G: CompactGroup>(sigma: &Symbol<G>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_symbol(sigma)?)?;
    Ok(())
}

/// Workspace matching a file's manifest.
pub fn workspace_for<G: CompactGroup>(group: G, m: &Manifest) -> Result<Arc<Workspace<G>>> {
    check_backend(&group, m)?;
    Workspace::new(group, m.band, m.x_capacity, m.max_order)
}

/// Rebuilds a symbol on `ws`, which must agree with the manifest.
pub fn symbol_from_container<G: CompactGroup>(ws: Arc<Workspace<G>>, c: &Container) -> Result<Symbol<G>> {
    let m = &c.manifest;
    if m.kind != Kind::Symbol {
        return Err(format_err(0, format!("expected a symbol file, found {}", m.kind.name())));
    }
    check_backend(&ws.group, m)?;
    if m.classes != ws.dual.len() || m.grid_points != ws.nx() || m.x_grid != ws.xgrid.descriptor() {
        return Err(Error::BandMismatch(format!(
            "file has {} classes on {} ({} points); workspace has {} classes on {} ({} points)",
            m.classes,
            m.x_grid,
            m.grid_points,
            ws.dual.len(),
            ws.xgrid.descriptor(),
            ws.nx()
        )));
    }
    check_len(c, 0, expected_len(&ws.dual, ws.nx()))?;
    let nx = ws.nx();
    let total = ws.dual.total_len();
    let mut data = vec![C64::new(0.0, 0.0); nx * total];
    let mut it = c.values.iter();
    for (k, xi) in ws.dual.iter().enumerate() {
        let off = ws.dual.offset(k);
        let d = xi.dim;
        for ix in 0..nx {
            for r in 0..d {
                for col in 0..d {
                    data[ix * total + off + col * d + r] = *it.next().expect("length checked");
                }
            }
        }
    }
    if m.x_band.is_invariant() {
        let first = &data[..total];
        if (1..nx).any(|ix| data[ix * total..(ix + 1) * total] != *first) {
            return Err(format_err(0, "x-invariant symbol has differing grid slices"));
        }
        data.truncate(total);
    }
    Symbol::from_raw(ws, data, m.margin, m.x_band)
}

pub fn read_symbol<G: CompactGroup>(group: G, path: &Path) -> Result<Symbol<G>> {
    let c = read_container(path)?;
    let ws = workspace_for(group, &c.manifest)?;
    symbol_from_container(ws, &c)
}

// ---- sequences ----

pub fn sequence_manifest(backend: Backend, band: f64, s: &MatrixSequence) -> Manifest {
    Manifest {
        kind: Kind::Sequence,
        backend,
        band,
        x_capacity: 0,
        max_order: 0,
        margin: 0,
        x_band: XBand::Exact(0),
        degree: s.dual.max_degree(),
        x_grid: "none".into(),
        grid_degree: 0,
        grid_points: 1,
        classes: s.dual.len(),
        payload_bytes: 0,
        payload_sha256: String::new(),
        extra: BTreeMap::new(),
    }
}

fn sequence_payload(s: &MatrixSequence) -> Vec<C64> {
    let mut out = Vec::with_capacity(s.data.len());
    for (k, xi) in s.dual.iter().enumerate() {
        let off = s.dual.offset(k);
        let d = xi.dim;
        for r in 0..d {
            for c in 0..d {
                out.push(s.data[off + c * d + r]);
            }
        }
    }
    out
}

/// Sequences are stored on the dual `<xi> <= band` of the backend.
pub fn encode_sequence<G: CompactGroup>(group: &G, band: f64, s: &MatrixSequence) -> Result<Vec<u8>> {
    let backend = Backend::parse(&group.id())?;
    if !s.dual.same_as(&group.dual_enumerate(band)) {
        return Err(Error::BandMismatch(format!("sequence dual is not the band-{band} dual of {}", group.id())));
    }
    Ok(encode(&sequence_manifest(backend, band, s), &sequence_payload(s)))
}

pub fn write_sequence<G: CompactGroup>(group: &G, band: f64, s: &MatrixSequence, path: &Path) -> Result<()> {
    std::fs::write(path, encode_sequence(group, band, s)?)?;
    Ok(())
}

pub fn sequence_from_container<G: CompactGroup>(group: &G, c: &Container) -> Result<MatrixSequence> {
    let m = &c.manifest;
    if m.kind != Kind::Sequence {
        return Err(format_err(0, format!("expected a sequence file, found {}", m.kind.name())));
    }
    check_backend(group, m)?;
    let dual = Arc::new(group.dual_enumerate(m.band));
    if dual.len() != m.classes {
        return Err(Error::BandMismatch(format!("file has {} classes, band {} gives {}", m.classes, m.band, dual.len())));
    }
    check_len(c, 0, dual.total_len())?;
    let mut data = vec![C64::new(0.0, 0.0); dual.total_len()];
    let mut it = c.values.iter();
    for (k, xi) in dual.iter().enumerate() {
        let off = dual.offset(k);
        let d = xi.dim;
        for r in 0..d {
            for col in 0..d {
                data[off + col * d + r] = *it.next().expect("length checked");
            }
        }
    }
    Ok(MatrixSequence { dual, data })
}

// ---- functions ----

pub fn function_manifest<G: CompactGroup>(f: &GroupFunction<G>) -> Result<Manifest> {
    Ok(Manifest {
        kind: Kind::Function,
        backend: Backend::parse(&f.group.id())?,
        band: 0.0,
        x_capacity: 0,
        max_order: 0,
        margin: 0,
        x_band: XBand::Smooth,
        degree: f.degree,
        x_grid: f.grid.descriptor(),
        grid_degree: f.grid.degree,
        grid_points: f.grid.len(),
        classes: 0,
        payload_bytes: 0,
        payload_sha256: String::new(),
        extra: BTreeMap::new(),
    })
}

pub fn encode_function<G: CompactGroup>(f: &GroupFunction<G>) -> Result<Vec<u8>> {
    Ok(encode(&function_manifest(f)?, &f.values))
}

pub fn write_function<G: CompactGroup>(f: &GroupFunction<G>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_function(f)?)?;
    Ok(())
}

pub fn function_from_container<G: CompactGroup>(group: G, c: &Container) -> Result<GroupFunction<G>> {
    let m = &c.manifest;
    if m.kind != Kind::Function {
        return Err(format_err(0, format!("expected a function file, found {}", m.kind.name())));
    }
    check_backend(&group, m)?;
    let grid = Arc::new(group.grid_for_degree(m.grid_degree)?);
    if grid.descriptor() != m.x_grid || grid.len() != m.grid_points {
        return Err(Error::BandMismatch(format!("grid {} does not rebuild as {}", m.x_grid, grid.descriptor())));
    }
    check_len(c, 0, grid.len())?;
    GroupFunction::new(group, grid, c.values.clone(), m.degree)
}

/// Backend-erased symbol, for callers that learn the group from the file.
#[derive(Clone, Debug)]
pub enum AnySymbol {
    Su2(Symbol<Su2>),
    Torus(Symbol<Torus>),
}

pub fn read_any_symbol(path: &Path) -> Result<AnySymbol> {
    let c = read_container(path)?;
    match c.manifest.backend {
        Backend::Su2 => {
            let ws = workspace_for(Su2, &c.manifest)?;
            Ok(AnySymbol::Su2(symbol_from_container(ws, &c)?))
        }
        Backend::Torus(n) => {
            let ws = workspace_for(Torus::new(n), &c.manifest)?;
            Ok(AnySymbol::Torus(symbol_from_container(ws, &c)?))
        }
    }
}
