//! Binary caching of computed artifacts.
//!
//! Expansion sets, cylinder sets, and point clouds serialize to a compact
//! little-endian format: magic `SAFF`, a format version, a kind tag, then the
//! payload. Writers emit fully deterministic bytes; readers validate magic,
//! version, kind, counts, and exact trailing length, and report any mismatch
//! as a cache error rather than returning partially-read data. Exact integer
//! data is stored as raw 16-byte values, rationals as length-prefixed
//! signed-magnitude numerator/denominator pairs, floats as IEEE bit patterns.

use std::fs;
use std::path::Path;

use num::bigint::BigInt;
use num::rational::BigRational;

use crate::attractor::{AttractorCloud, CylinderSet};
use crate::digits::{ExpansionSet, PointData};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SAFF";
const VERSION: u16 = 1;

const KIND_EXPANSION_INT: u8 = 1;
const KIND_EXPANSION_RAT: u8 = 2;
const KIND_EXPANSION_FLOAT: u8 = 3;
const KIND_CYLINDERS: u8 = 4;
const KIND_CLOUD: u8 = 5;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(kind: u8) -> Self {
        let mut buf = Vec::with_capacity(64);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.push(kind);
        Writer { buf }
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn i128(&mut self, v: i128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn bigint(&mut self, v: &BigInt) {
        let bytes = v.to_signed_bytes_le();
        self.u64(bytes.len() as u64);
        self.buf.extend_from_slice(&bytes);
    }
    fn rational(&mut self, v: &BigRational) {
        self.bigint(v.numer());
        self.bigint(v.denom());
    }
    fn f64_slice(&mut self, v: &[f64]) {
        self.usize(v.len());
        for &x in v {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], expect_kind: u8) -> Result<Self> {
        if data.len() < 7 {
            return Err(Error::Cache("file shorter than header".into()));
        }
        if &data[0..4] != MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let version = u16::from_le_bytes([data[4], data[5]]);
        if version != VERSION {
            return Err(Error::Cache(format!("unsupported format version {version}")));
        }
        if data[6] != expect_kind {
            return Err(Error::Cache(format!(
                "kind mismatch: file holds {}, expected {expect_kind}",
                data[6]
            )));
        }
        Ok(Reader { data, pos: 7 })
    }
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.data.len() {
            return Err(Error::Cache("truncated file".into()));
        }
        let s = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        let s = self.take(8)?;
        Ok(u64::from_le_bytes(s.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Cache("count overflows usize".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        let s = self.take(8)?;
        Ok(f64::from_bits(u64::from_le_bytes(s.try_into().unwrap())))
    }
    fn i128(&mut self) -> Result<i128> {
        let s = self.take(16)?;
        Ok(i128::from_le_bytes(s.try_into().unwrap()))
    }
    fn bigint(&mut self) -> Result<BigInt> {
        let len = self.usize()?;
        if len > 1 << 20 {
            return Err(Error::Cache("implausible bigint length".into()));
        }
        Ok(BigInt::from_signed_bytes_le(self.take(len)?))
    }
    fn rational(&mut self) -> Result<BigRational> {
        let numer = self.bigint()?;
        let denom = self.bigint()?;
        if denom == BigInt::from(0) {
            return Err(Error::Cache("zero denominator".into()));
        }
        Ok(BigRational::new(numer, denom))
    }
    fn f64_vec(&mut self) -> Result<Vec<f64>> {
        let len = self.usize()?;
        if len > 1 << 30 {
            return Err(Error::Cache("implausible vector length".into()));
        }
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.f64()?);
        }
        Ok(out)
    }
    fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::Cache(format!(
                "{} trailing bytes after payload",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Save an expansion set (`n` is the coordinate stride).
pub fn save_expansion(path: &Path, set: &ExpansionSet, n: usize) -> Result<()> {
    let kind = match &set.data {
        PointData::Int(_) => KIND_EXPANSION_INT,
        PointData::Rat(_) => KIND_EXPANSION_RAT,
        PointData::Float(_) => KIND_EXPANSION_FLOAT,
    };
    let mut w = Writer::new(kind);
    w.usize(n);
    w.usize(set.depth);
    w.usize(set.count);
    match &set.data {
        PointData::Int(v) => {
            w.usize(v.len());
            for &x in v {
                w.i128(x);
            }
        }
        PointData::Rat(v) => {
            w.usize(v.len());
            for x in v {
                w.rational(x);
            }
        }
        PointData::Float(v) => {
            w.f64_slice(v);
        }
    }
    fs::write(path, w.buf)?;
    Ok(())
}

/// Load an expansion set, returning it with its coordinate stride.
pub fn load_expansion(path: &Path) -> Result<(ExpansionSet, usize)> {
    let data = fs::read(path)?;
    if data.len() < 7 {
        return Err(Error::Cache("file shorter than header".into()));
    }
    let kind = data[6];
    let mut r = Reader::new(&data, kind)?;
    if ![KIND_EXPANSION_INT, KIND_EXPANSION_RAT, KIND_EXPANSION_FLOAT].contains(&kind) {
        return Err(Error::Cache(format!("kind {kind} is not an expansion set")));
    }
    let n = r.usize()?;
    let depth = r.usize()?;
    let count = r.usize()?;
    let len = r.usize()?;
    if n == 0 || len != count * n {
        return Err(Error::Cache("inconsistent counts".into()));
    }
    let point_data = match kind {
        KIND_EXPANSION_INT => {
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                v.push(r.i128()?);
            }
            PointData::Int(v)
        }
        KIND_EXPANSION_RAT => {
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                v.push(r.rational()?);
            }
            PointData::Rat(v)
        }
        _ => {
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                v.push(r.f64()?);
            }
            PointData::Float(v)
        }
    };
    r.finish()?;
    Ok((ExpansionSet { depth, count, data: point_data }, n))
}

/// Save a cylinder set.
pub fn save_cylinders(path: &Path, cyl: &CylinderSet) -> Result<()> {
    let mut w = Writer::new(KIND_CYLINDERS);
    w.usize(cyl.n);
    w.usize(cyl.depth);
    w.usize(cyl.count);
    w.f64_slice(&cyl.centers);
    w.usize(cyl.multiplicities.len());
    for &m in &cyl.multiplicities {
        w.u64(m);
    }
    w.f64_slice(&cyl.masses);
    w.f64(cyl.cell_radius);
    w.f64_slice(&cyl.half_widths);
    w.u64(cyl.max_multiplicity);
    fs::write(path, w.buf)?;
    Ok(())
}

/// Load a cylinder set.
pub fn load_cylinders(path: &Path) -> Result<CylinderSet> {
    let data = fs::read(path)?;
    let mut r = Reader::new(&data, KIND_CYLINDERS)?;
    let n = r.usize()?;
    let depth = r.usize()?;
    let count = r.usize()?;
    let centers = r.f64_vec()?;
    let mult_len = r.usize()?;
    let mut multiplicities = Vec::with_capacity(mult_len);
    for _ in 0..mult_len {
        multiplicities.push(r.u64()?);
    }
    let masses = r.f64_vec()?;
    let cell_radius = r.f64()?;
    let half_widths = r.f64_vec()?;
    let max_multiplicity = r.u64()?;
    r.finish()?;
    if n == 0
        || centers.len() != count * n
        || multiplicities.len() != count
        || masses.len() != count
        || half_widths.len() != n
    {
        return Err(Error::Cache("inconsistent cylinder counts".into()));
    }
    Ok(CylinderSet {
        n,
        depth,
        count,
        centers,
        multiplicities,
        masses,
        cell_radius,
        half_widths,
        max_multiplicity,
    })
}

/// Save a point cloud.
pub fn save_cloud(path: &Path, cloud: &AttractorCloud) -> Result<()> {
    let mut w = Writer::new(KIND_CLOUD);
    w.usize(cloud.n);
    w.usize(cloud.depth);
    w.usize(cloud.count);
    w.f64_slice(&cloud.points);
    w.f64(cloud.covering_radius);
    w.buf.push(cloud.on_attractor as u8);
    fs::write(path, w.buf)?;
    Ok(())
}

/// Load a point cloud.
pub fn load_cloud(path: &Path) -> Result<AttractorCloud> {
    let data = fs::read(path)?;
    let mut r = Reader::new(&data, KIND_CLOUD)?;
    let n = r.usize()?;
    let depth = r.usize()?;
    let count = r.usize()?;
    let points = r.f64_vec()?;
    let covering_radius = r.f64()?;
    let flag = r.take(1)?[0];
    r.finish()?;
    if n == 0 || points.len() != count * n || flag > 1 {
        return Err(Error::Cache("inconsistent cloud payload".into()));
    }
    Ok(AttractorCloud {
        n,
        depth,
        count,
        points,
        covering_radius,
        on_attractor: flag == 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attractor::{build_cylinders, enumerate_cloud};
    use crate::digits::expansion_enumerate;
    use crate::linalg::{build_renorm, default_theta, parse_rational, ExpandingSystem};

    #[test]
    fn expansion_roundtrips_all_modes() {
        let dir = tempfile::tempdir().unwrap();
        let sys = ExpandingSystem::new_integer(1, &[3], &[0, 2]).unwrap();
        let set = expansion_enumerate(&sys, 4, 1000).unwrap();
        let p = dir.path().join("int.bin");
        save_expansion(&p, &set, 1).unwrap();
        let (back, n) = load_expansion(&p).unwrap();
        assert_eq!(n, 1);
        assert_eq!(back.count, set.count);
        match (&back.data, &set.data) {
            (PointData::Int(a), PointData::Int(b)) => assert_eq!(a, b),
            _ => panic!("mode changed through cache"),
        }

        let fsys = ExpandingSystem::new_float(1, &[2.5], &[0.0, 1.0], 1e-9).unwrap();
        let fset = expansion_enumerate(&fsys, 5, 1000).unwrap();
        let p = dir.path().join("float.bin");
        save_expansion(&p, &fset, 1).unwrap();
        let (back, _) = load_expansion(&p).unwrap();
        match (&back.data, &fset.data) {
            (PointData::Float(a), PointData::Float(b)) => {
                assert_eq!(a.len(), b.len());
                assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
            _ => panic!("mode changed through cache"),
        }

        let rsys = ExpandingSystem::new_rational(
            1,
            vec![parse_rational("5/2").unwrap()],
            vec![parse_rational("0").unwrap(), parse_rational("1/3").unwrap()],
        )
        .unwrap();
        let rset = expansion_enumerate(&rsys, 3, 1000).unwrap();
        let p = dir.path().join("rat.bin");
        save_expansion(&p, &rset, 1).unwrap();
        let (back, _) = load_expansion(&p).unwrap();
        match (&back.data, &rset.data) {
            (PointData::Rat(a), PointData::Rat(b)) => assert_eq!(a, b),
            _ => panic!("mode changed through cache"),
        }
    }

    #[test]
    fn cylinders_and_cloud_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let sys = ExpandingSystem::new_integer(1, &[3], &[0, 1, 3]).unwrap();
        let rn = build_renorm(&sys.matrix, default_theta(&sys.matrix)).unwrap();
        let cyl = build_cylinders(&sys, &rn, 5, 1 << 20).unwrap();
        let p = dir.path().join("cyl.bin");
        save_cylinders(&p, &cyl).unwrap();
        let back = load_cylinders(&p).unwrap();
        assert_eq!(back.count, cyl.count);
        assert_eq!(back.multiplicities, cyl.multiplicities);
        assert!(back.centers.iter().zip(&cyl.centers).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.max_multiplicity, cyl.max_multiplicity);

        let cloud = enumerate_cloud(&sys, &rn, 4, 1 << 20).unwrap();
        let p = dir.path().join("cloud.bin");
        save_cloud(&p, &cloud).unwrap();
        let back = load_cloud(&p).unwrap();
        assert_eq!(back.count, cloud.count);
        assert!(back.on_attractor);
        assert_eq!(back.covering_radius.to_bits(), cloud.covering_radius.to_bits());
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let sys = ExpandingSystem::new_integer(1, &[3], &[0, 2]).unwrap();
        let rn = build_renorm(&sys.matrix, default_theta(&sys.matrix)).unwrap();
        let cyl = build_cylinders(&sys, &rn, 3, 1 << 20).unwrap();
        let p = dir.path().join("cyl.bin");
        save_cylinders(&p, &cyl).unwrap();

        // Wrong kind.
        assert!(load_cloud(&p).is_err());
        // Bad magic.
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[0] = b'X';
        let bad = dir.path().join("bad.bin");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(load_cylinders(&bad).is_err());
        // Truncated payload.
        let bytes = std::fs::read(&p).unwrap();
        let cut = dir.path().join("cut.bin");
        std::fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_cylinders(&cut).is_err());
        // Trailing garbage.
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.push(0);
        let pad = dir.path().join("pad.bin");
        std::fs::write(&pad, &bytes).unwrap();
        assert!(load_cylinders(&pad).is_err());
        // Missing file is an io error, not a panic.
        assert!(load_cylinders(&dir.path().join("absent.bin")).is_err());
    }
}
