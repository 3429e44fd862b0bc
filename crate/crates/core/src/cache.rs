//! On-disk containers for quadrature rules, basis-norm tables and assembled
//! operators.
//!
//! Layout of every file: 4-byte magic, u32 format version, a kind-specific
//! header and payload (little-endian, IEEE-754 doubles), then the SHA-256 of
//! all preceding bytes. Operators get a JSON sidecar with their metadata.

use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{BasisTable, MultiIndex};
use crate::error::{Error, Result};
use crate::geometry::{Point, SpaceParams};
use crate::quadrature::{QuadratureRule, RadialNode};
use crate::toeplitz::{OperatorMeta, TruncatedOperator};

pub const FORMAT_VERSION: u32 = 1;

const RULE_MAGIC: &[u8; 4] = b"BGQR";
const NORM_MAGIC: &[u8; 4] = b"BGNT";
const OP_MAGIC: &[u8; 4] = b"BGOP";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheKind {
    Rule,
    NormTable,
    Operator,
}

impl CacheKind {
    pub fn extension(self) -> &'static str {
        match self {
            CacheKind::Rule => "bgq",
            CacheKind::NormTable => "bgn",
            CacheKind::Operator => "bgo",
        }
    }

    fn magic(self) -> &'static [u8; 4] {
        match self {
            CacheKind::Rule => RULE_MAGIC,
            CacheKind::NormTable => NORM_MAGIC,
            CacheKind::Operator => OP_MAGIC,
        }
    }

    fn from_magic(m: &[u8]) -> Option<Self> {
        [CacheKind::Rule, CacheKind::NormTable, CacheKind::Operator]
            .into_iter()
            .find(|k| k.magic() == m)
    }

    fn from_extension(ext: &str) -> Option<Self> {
        [CacheKind::Rule, CacheKind::NormTable, CacheKind::Operator]
            .into_iter()
            .find(|k| k.extension() == ext)
    }
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCache(msg.into())
}

fn seal(mut body: Vec<u8>) -> Vec<u8> {
    let digest = Sha256::digest(&body);
    body.extend_from_slice(&digest);
    body
}

/// Checks magic, version and trailer; returns the kind and the payload after
/// the version word.
fn unseal(bytes: &[u8]) -> Result<(CacheKind, &[u8])> {
    if bytes.len() < 8 + 32 {
        return Err(corrupt("file too short"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(corrupt("checksum mismatch"));
    }
    let kind = CacheKind::from_magic(&body[..4]).ok_or_else(|| corrupt("unknown magic"))?;
    let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    Ok((kind, &body[8..]))
}

fn header(kind: CacheKind) -> Vec<u8> {
    let mut out = kind.magic().to_vec();
    out.write_u32::<LE>(FORMAT_VERSION).unwrap();
    out
}

fn write_params(out: &mut Vec<u8>, p: &SpaceParams) {
    out.write_u32::<LE>(p.n as u32).unwrap();
    out.write_f64::<LE>(p.alpha).unwrap();
}

fn read_params(c: &mut Cursor<&[u8]>) -> Result<SpaceParams> {
    let n = c.read_u32::<LE>()? as usize;
    let alpha = c.read_f64::<LE>()?;
    SpaceParams::new(n, alpha)
}

fn finish(c: &Cursor<&[u8]>) -> Result<()> {
    if c.position() as usize != c.get_ref().len() {
        return Err(corrupt("trailing bytes after payload"));
    }
    Ok(())
}

fn short_hash(data: &[u8]) -> String {
    Sha256::digest(data)[..4].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn rule_file_name(params: &SpaceParams, radial: usize, angular: usize, breaks: &[f64]) -> String {
    let mut key = Vec::new();
    for b in breaks {
        key.extend_from_slice(&b.to_le_bytes());
    }
    let tag = if breaks.is_empty() {
        String::new()
    } else {
        format!("_b{}", short_hash(&key))
    };
    format!("rule_n{}_a{}_R{radial}_N{angular}{tag}.bgq", params.n, params.alpha)
}

pub fn norm_file_name(params: &SpaceParams, max_degree: u32) -> String {
    format!("norms_n{}_a{}_D{max_degree}.bgn", params.n, params.alpha)
}

pub fn encode_rule(rule: &QuadratureRule) -> Vec<u8> {
    let mut out = header(CacheKind::Rule);
    write_params(&mut out, &rule.params);
    out.write_u32::<LE>(rule.radial_points as u32).unwrap();
    out.write_u32::<LE>(rule.angular_points as u32).unwrap();
    out.write_u32::<LE>(rule.declared_exactness as u32).unwrap();
    out.write_u32::<LE>(rule.breaks.len() as u32).unwrap();
    for b in &rule.breaks {
        out.write_f64::<LE>(*b).unwrap();
    }
    out.write_u64::<LE>(rule.radial.len() as u64).unwrap();
    for r in &rule.radial {
        out.write_f64::<LE>(r.rho).unwrap();
        out.write_f64::<LE>(r.split).unwrap();
        out.write_f64::<LE>(r.weight).unwrap();
    }
    out.write_u64::<LE>(rule.nodes.len() as u64).unwrap();
    for (p, w) in rule.nodes.iter().zip(&rule.weights) {
        for c in p.coords() {
            out.write_f64::<LE>(c.re).unwrap();
            out.write_f64::<LE>(c.im).unwrap();
        }
        out.write_f64::<LE>(*w).unwrap();
    }
    seal(out)
}

pub fn decode_rule(bytes: &[u8]) -> Result<QuadratureRule> {
    let (kind, payload) = unseal(bytes)?;
    if kind != CacheKind::Rule {
        return Err(corrupt("not a quadrature rule file"));
    }
    let mut c = Cursor::new(payload);
    let params = read_params(&mut c)?;
    let radial_points = c.read_u32::<LE>()? as usize;
    let angular_points = c.read_u32::<LE>()? as usize;
    let declared_exactness = c.read_u32::<LE>()? as usize;
    let nb = c.read_u32::<LE>()? as usize;
    let breaks = (0..nb).map(|_| c.read_f64::<LE>()).collect::<std::io::Result<Vec<_>>>()?;
    let nr = c.read_u64::<LE>()? as usize;
    let mut radial = Vec::with_capacity(nr.min(1 << 20));
    for _ in 0..nr {
        radial.push(RadialNode {
            rho: c.read_f64::<LE>()?,
            split: c.read_f64::<LE>()?,
            weight: c.read_f64::<LE>()?,
        });
    }
    let len = c.read_u64::<LE>()? as usize;
    let mut nodes = Vec::with_capacity(len.min(1 << 24));
    let mut weights = Vec::with_capacity(len.min(1 << 24));
    for _ in 0..len {
        let mut coords = Vec::with_capacity(params.n);
        for _ in 0..params.n {
            coords.push(Complex64::new(c.read_f64::<LE>()?, c.read_f64::<LE>()?));
        }
        nodes.push(Point::new(coords).map_err(|_| corrupt("node outside the ball"))?);
        weights.push(c.read_f64::<LE>()?);
    }
    finish(&c)?;
    Ok(QuadratureRule {
        params,
        radial_points,
        angular_points,
        breaks,
        declared_exactness,
        radial,
        nodes,
        weights,
    })
}

pub fn encode_norm_table(table: &BasisTable) -> Vec<u8> {
    let mut out = header(CacheKind::NormTable);
    write_params(&mut out, &table.params);
    out.write_u32::<LE>(table.max_degree).unwrap();
    out.write_u64::<LE>(table.indices.len() as u64).unwrap();
    for (m, norm) in table.indices.iter().zip(&table.norms) {
        for &e in &m.exponents {
            out.write_u32::<LE>(e).unwrap();
        }
        out.write_f64::<LE>(*norm).unwrap();
    }
    seal(out)
}

/// Decodes a norm table as a single-channel [`BasisTable`].
pub fn decode_norm_table(bytes: &[u8]) -> Result<BasisTable> {
    let (kind, payload) = unseal(bytes)?;
    if kind != CacheKind::NormTable {
        return Err(corrupt("not a norm table file"));
    }
    let mut c = Cursor::new(payload);
    let params = read_params(&mut c)?;
    let max_degree = c.read_u32::<LE>()?;
    let count = c.read_u64::<LE>()? as usize;
    let mut indices = Vec::with_capacity(count.min(1 << 20));
    let mut norms = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let exps = (0..params.n).map(|_| c.read_u32::<LE>()).collect::<std::io::Result<Vec<u32>>>()?;
        indices.push(MultiIndex::new(&exps));
        norms.push(c.read_f64::<LE>()?);
    }
    finish(&c)?;
    if indices != crate::basis::multi_indices(params.n, max_degree) {
        return Err(corrupt("multi-index list does not match the stored degree"));
    }
    Ok(BasisTable {
        params,
        max_degree,
        channels: 1,
        indices,
        norms,
    })
}

pub fn encode_operator_matrix(m: &DMatrix<Complex64>) -> Vec<u8> {
    let mut out = header(CacheKind::Operator);
    out.write_u64::<LE>(m.nrows() as u64).unwrap();
    out.write_u64::<LE>(m.ncols() as u64).unwrap();
    for v in m.iter() {
        out.write_f64::<LE>(v.re).unwrap();
        out.write_f64::<LE>(v.im).unwrap();
    }
    seal(out)
}

pub fn decode_operator_matrix(bytes: &[u8]) -> Result<DMatrix<Complex64>> {
    let (kind, payload) = unseal(bytes)?;
    if kind != CacheKind::Operator {
        return Err(corrupt("not an operator file"));
    }
    let mut c = Cursor::new(payload);
    let rows = c.read_u64::<LE>()? as usize;
    let cols = c.read_u64::<LE>()? as usize;
    if rows.checked_mul(cols).and_then(|k| k.checked_mul(16)) != Some(payload.len() - 16) {
        return Err(corrupt("matrix size does not match payload"));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(Complex64::new(c.read_f64::<LE>()?, c.read_f64::<LE>()?));
    }
    finish(&c)?;
    Ok(DMatrix::from_vec(rows, cols, data))
}

/// Sidecar written next to an operator file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSidecar {
    pub format_version: u32,
    #[serde(flatten)]
    pub meta: OperatorMeta,
    pub tolerances: Vec<(String, f64)>,
}

/// Writes `path` (binary) and `path` with a `.json` extension (sidecar).
pub fn write_operator(path: &Path, op: &TruncatedOperator, tolerances: &[(String, f64)]) -> Result<()> {
    fs::write(path, encode_operator_matrix(&op.matrix))?;
    let sidecar = OperatorSidecar {
        format_version: FORMAT_VERSION,
        meta: op.meta(),
        tolerances: tolerances.to_vec(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    fs::write(path.with_extension("json"), json)?;
    Ok(())
}

pub fn read_operator(path: &Path) -> Result<(DMatrix<Complex64>, OperatorSidecar)> {
    let m = decode_operator_matrix(&fs::read(path)?)?;
    let sidecar: OperatorSidecar = serde_json::from_slice(&fs::read(path.with_extension("json"))?)?;
    if sidecar.meta.size != m.nrows() || m.nrows() != m.ncols() {
        return Err(corrupt("sidecar size does not match the matrix"));
    }
    Ok((m, sidecar))
}

pub fn write_rule(dir: &Path, rule: &QuadratureRule) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(rule_file_name(&rule.params, rule.radial_points, rule.angular_points, &rule.breaks));
    fs::write(&path, encode_rule(rule))?;
    Ok(path)
}

pub fn write_norm_table(dir: &Path, table: &BasisTable) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(norm_file_name(&table.params, table.max_degree));
    fs::write(&path, encode_norm_table(table))?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub path: PathBuf,
    pub kind: CacheKind,
    pub bytes: u64,
}

/// Cache files in `dir`, sorted by name.
pub fn list(dir: &Path) -> Result<Vec<CacheEntry>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        let kind = path
            .extension()
            .and_then(|e| e.to_str())
            .and_then(CacheKind::from_extension);
        if let Some(kind) = kind {
            out.push(CacheEntry {
                bytes: entry.metadata()?.len(),
                path,
                kind,
            });
        }
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

/// Full decode of one file, including its checksum.
pub fn verify(path: &Path) -> Result<CacheKind> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let (kind, _) = unseal(&bytes)?;
    match kind {
        CacheKind::Rule => decode_rule(&bytes).map(|_| kind),
        CacheKind::NormTable => decode_norm_table(&bytes).map(|_| kind),
        CacheKind::Operator => decode_operator_matrix(&bytes).map(|_| kind),
    }
}

/// Removes cache files (and operator sidecars); returns how many files went.
pub fn purge(dir: &Path) -> Result<usize> {
    let mut removed = 0;
    for e in list(dir)? {
        if e.kind == CacheKind::Operator {
            let side = e.path.with_extension("json");
            if side.exists() {
                fs::remove_file(side)?;
                removed += 1;
            }
        }
        fs::remove_file(&e.path)?;
        removed += 1;
    }
    Ok(removed)
}
