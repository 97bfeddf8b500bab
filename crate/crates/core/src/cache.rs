//! Binary caches for pipeline artifacts.
//!
//! Layout: 4-byte magic `SDPC`, a version byte, a kind byte, then the payload.
//! Counts are `u64` little-endian, reals are `f64` little-endian regardless of
//! the in-memory scalar type, strings are a `u64` length followed by UTF-8.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dictionary::DpsDictionary;
use crate::discriminant::DiscriminantModel;
use crate::error::{DpsError, Result};
use crate::kernel::KernelGram;
use crate::projection::{ProjectionModel, Variant};
use crate::scalar::Real;
use crate::spd::SpdMatrix;

pub const MAGIC: [u8; 4] = *b"SDPC";
pub const VERSION: u8 = 1;

/// Artifact stored in a cache file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CacheKind {
    Gram = 1,
    Projection = 2,
    Dictionary = 3,
    Descriptors = 4,
    Discriminant = 5,
}

impl CacheKind {
    fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            1 => CacheKind::Gram,
            2 => CacheKind::Projection,
            3 => CacheKind::Dictionary,
            4 => CacheKind::Descriptors,
            5 => CacheKind::Discriminant,
            _ => return None,
        })
    }
}

/// A labelled SPD descriptor together with its source name.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorRecord<T: Real> {
    pub name: String,
    pub label: usize,
    pub descriptor: SpdMatrix<T>,
}

/// A descriptor set with its class names.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet<T: Real> {
    pub class_names: Vec<String>,
    pub records: Vec<DescriptorRecord<T>>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(kind: CacheKind) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(&MAGIC);
        buf.push(VERSION);
        buf.push(kind as u8);
        Writer(buf)
    }

    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn count(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }

    fn real<T: Real>(&mut self, v: T) {
        self.0.extend_from_slice(&v.as_f64().to_le_bytes());
    }

    fn string(&mut self, s: &str) {
        self.count(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }

    fn matrix<T: Real>(&mut self, m: &DMatrix<T>) {
        self.count(m.nrows());
        self.count(m.ncols());
        for &v in m.iter() {
            self.real(v);
        }
    }

    fn vector<T: Real>(&mut self, v: &[T]) {
        self.count(v.len());
        for &x in v {
            self.real(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(buf: &'a [u8], kind: CacheKind) -> Result<Self> {
        if buf.len() < 6 || buf[..4] != MAGIC {
            return Err(DpsError::Cache("bad magic".into()));
        }
        if buf[4] != VERSION {
            return Err(DpsError::Cache(format!("unsupported version {}", buf[4])));
        }
        match CacheKind::from_byte(buf[5]) {
            Some(k) if k == kind => {}
            Some(k) => {
                return Err(DpsError::Cache(format!(
                    "expected {kind:?} cache, found {k:?}"
                )))
            }
            None => return Err(DpsError::Cache(format!("unknown kind byte {}", buf[5]))),
        }
        Ok(Reader { buf, pos: 6 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| DpsError::Cache(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn count(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| DpsError::Cache(format!("count {v} overflows")))
    }

    /// A count that must be backed by at least `unit` remaining bytes per item.
    fn bounded_count(&mut self, unit: usize) -> Result<usize> {
        let n = self.count()?;
        if n.saturating_mul(unit) > self.buf.len() - self.pos {
            return Err(DpsError::Cache(format!("count {n} exceeds remaining data")));
        }
        Ok(n)
    }

    fn real<T: Real>(&mut self) -> Result<T> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        T::from_f64(v).ok_or_else(|| DpsError::Cache("unrepresentable value".into()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.bounded_count(1)?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| DpsError::Cache("invalid UTF-8".into()))
    }

    fn matrix<T: Real>(&mut self) -> Result<DMatrix<T>> {
        let r = self.count()?;
        let c = self.count()?;
        let len = r
            .checked_mul(c)
            .filter(|&l| l.saturating_mul(8) <= self.buf.len() - self.pos)
            .ok_or_else(|| DpsError::Cache(format!("matrix {r}x{c} exceeds remaining data")))?;
        let data = (0..len).map(|_| self.real()).collect::<Result<Vec<T>>>()?;
        Ok(DMatrix::from_vec(r, c, data))
    }

    fn vector<T: Real>(&mut self) -> Result<Vec<T>> {
        let n = self.bounded_count(8)?;
        (0..n).map(|_| self.real()).collect()
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(DpsError::Cache(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn write_gram_body<T: Real>(w: &mut Writer, g: &KernelGram<T>) {
    w.real(g.sigma());
    w.matrix(g.k());
    w.matrix(g.k_half());
    w.count(g.training().len());
    for p in g.training() {
        w.matrix(p.matrix());
    }
}

fn read_gram_body<T: Real>(r: &mut Reader) -> Result<KernelGram<T>> {
    let sigma = r.real()?;
    let k = r.matrix()?;
    let k_half = r.matrix()?;
    let n = r.bounded_count(16)?;
    let training = (0..n)
        .map(|i| SpdMatrix::new(r.matrix()?).map_err(|e| DpsError::at(i, e)))
        .collect::<Result<Vec<_>>>()?;
    if k.shape() != (n, n) || k_half.shape() != (n, n) {
        return Err(DpsError::Cache(
            "Gram shape disagrees with training count".into(),
        ));
    }
    Ok(KernelGram::from_cached(sigma, k, k_half, training))
}

pub fn encode_gram<T: Real>(g: &KernelGram<T>) -> Vec<u8> {
    let mut w = Writer::new(CacheKind::Gram);
    write_gram_body(&mut w, g);
    w.0
}

pub fn decode_gram<T: Real>(bytes: &[u8]) -> Result<KernelGram<T>> {
    let mut r = Reader::open(bytes, CacheKind::Gram)?;
    let g = read_gram_body(&mut r)?;
    r.finish()?;
    Ok(g)
}

/// Projection caches embed their Gram so they are self-contained.
pub fn encode_projection<T: Real>(p: &ProjectionModel<T>) -> Vec<u8> {
    let mut w = Writer::new(CacheKind::Projection);
    write_gram_body(&mut w, p.gram());
    w.u8(p.variant().tag());
    w.real(p.alpha());
    w.real(p.beta());
    w.matrix(p.right_factor());
    match p.selector() {
        Some(s) => {
            w.u8(1);
            w.matrix(s);
        }
        None => w.u8(0),
    }
    w.count(p.kept_columns().len());
    for &c in p.kept_columns() {
        w.count(c);
    }
    w.0
}

pub fn decode_projection<T: Real>(bytes: &[u8]) -> Result<ProjectionModel<T>> {
    let mut r = Reader::open(bytes, CacheKind::Projection)?;
    let gram = Arc::new(read_gram_body(&mut r)?);
    let tag = r.u8()?;
    let variant = Variant::from_tag(tag)
        .ok_or_else(|| DpsError::Cache(format!("unknown variant tag {tag}")))?;
    let alpha = r.real()?;
    let beta = r.real()?;
    let right = r.matrix()?;
    let selector = match r.u8()? {
        0 => None,
        1 => Some(r.matrix()?),
        b => return Err(DpsError::Cache(format!("bad selector flag {b}"))),
    };
    let n = r.bounded_count(8)?;
    let kept = (0..n).map(|_| r.count()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    ProjectionModel::from_parts(gram, variant, alpha, beta, right, selector, kept)
}

pub fn encode_dictionary<T: Real>(d: &DpsDictionary<T>) -> Vec<u8> {
    let mut w = Writer::new(CacheKind::Dictionary);
    w.matrix(&d.atoms);
    w.count(d.sparsity);
    w.real(d.lambda);
    w.vector(&d.training_history);
    w.0
}

pub fn decode_dictionary<T: Real>(bytes: &[u8]) -> Result<DpsDictionary<T>> {
    let mut r = Reader::open(bytes, CacheKind::Dictionary)?;
    let atoms = r.matrix()?;
    let sparsity = r.count()?;
    let lambda = r.real()?;
    let history = r.vector()?;
    r.finish()?;
    let mut d = DpsDictionary::from_atoms(atoms, sparsity, lambda)?;
    d.training_history = history;
    Ok(d)
}

/// Several per-class dictionaries in one file.
pub fn encode_dictionaries<T: Real>(dicts: &[DpsDictionary<T>]) -> Vec<u8> {
    let mut w = Writer::new(CacheKind::Dictionary);
    w.count(dicts.len());
    for d in dicts {
        let body = encode_dictionary(d);
        w.count(body.len());
        w.0.extend_from_slice(&body);
    }
    w.0
}

pub fn decode_dictionaries<T: Real>(bytes: &[u8]) -> Result<Vec<DpsDictionary<T>>> {
    let mut r = Reader::open(bytes, CacheKind::Dictionary)?;
    let n = r.bounded_count(8)?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let len = r.bounded_count(1)?;
        out.push(decode_dictionary(r.take(len)?).map_err(|e| DpsError::at(i, e))?);
    }
    r.finish()?;
    Ok(out)
}

pub fn encode_descriptors<T: Real>(set: &DescriptorSet<T>) -> Vec<u8> {
    let mut w = Writer::new(CacheKind::Descriptors);
    w.count(set.class_names.len());
    for c in &set.class_names {
        w.string(c);
    }
    w.count(set.records.len());
    for rec in &set.records {
        w.string(&rec.name);
        w.count(rec.label);
        w.matrix(rec.descriptor.matrix());
    }
    w.0
}

pub fn decode_descriptors<T: Real>(bytes: &[u8]) -> Result<DescriptorSet<T>> {
    let mut r = Reader::open(bytes, CacheKind::Descriptors)?;
    let nc = r.bounded_count(8)?;
    let class_names = (0..nc).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    let n = r.bounded_count(32)?;
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let name = r.string()?;
        let label = r.count()?;
        let descriptor = SpdMatrix::new(r.matrix()?).map_err(|e| DpsError::at(i, e))?;
        records.push(DescriptorRecord {
            name,
            label,
            descriptor,
        });
    }
    r.finish()?;
    Ok(DescriptorSet {
        class_names,
        records,
    })
}

pub fn encode_discriminant<T: Real>(m: &DiscriminantModel<T>) -> Vec<u8> {
    let mut w = Writer::new(CacheKind::Discriminant);
    w.matrix(&m.coefficients);
    w.vector(m.eigenvalues.as_slice());
    w.real(m.beta);
    w.real(m.ridge);
    w.u8(m.ridge_escalated as u8);
    w.0
}

pub fn decode_discriminant<T: Real>(bytes: &[u8]) -> Result<DiscriminantModel<T>> {
    let mut r = Reader::open(bytes, CacheKind::Discriminant)?;
    let coefficients = r.matrix()?;
    let eigenvalues = DVector::from_vec(r.vector()?);
    let beta = r.real()?;
    let ridge = r.real()?;
    let ridge_escalated = r.u8()? != 0;
    r.finish()?;
    if eigenvalues.len() != coefficients.ncols() {
        return Err(DpsError::Cache(
            "eigenvalue count disagrees with coefficients".into(),
        ));
    }
    Ok(DiscriminantModel {
        coefficients,
        eigenvalues,
        beta,
        ridge,
        ridge_escalated,
    })
}

/// Writes an encoded artifact, attaching the path to any I/O error.
pub fn save(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| DpsError::Io(format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| DpsError::Io(format!("{}: {e}", path.display())))
}
