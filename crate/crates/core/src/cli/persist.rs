//! Binary storage of a trained reduced space.
//!
//! Layout (little endian): magic, `u32` version, 64-byte problem fingerprint,
//! `u64` sizes `n_dof, N, K, |S_N|`, `f64` payload, trailing SHA-256 of
//! everything before it.

use std::path::Path;

use faer::Mat;
use sha2::{Digest, Sha256};

use crate::caputo::l1_coefficients;
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::rb_offline::RbSpace;
use crate::rb_online::RbOperators;

const MAGIC: &[u8; 8] = b"FRACRBSP";
pub const FORMAT_VERSION: u32 = 1;
const FINGERPRINT_LEN: usize = 64;
const CHECKSUM_LEN: usize = 32;

fn put_mat(buf: &mut Vec<u8>, m: &Mat<f64>) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

pub fn encode_rb_space(space: &RbSpace, ops: &RbOperators, spec: &ProblemSpec) -> Result<Vec<u8>> {
    let n = space.dim();
    if ops.dim() != n || ops.steps() != spec.steps || space.n_dof() != spec.n_dof() {
        return Err(Error::Persist("space, operators and problem sizes disagree".into()));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(spec.fingerprint().as_bytes());
    for v in [space.n_dof(), n, spec.steps, space.selected.len()] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    buf.extend_from_slice(&ops.gamma.to_le_bytes());
    for mu in &space.selected {
        buf.extend_from_slice(&mu.to_le_bytes());
    }
    for m in [
        &space.z_y, &space.z_p, &ops.m_y, &ops.a_y, &ops.b_y, &ops.m_p, &ops.a_p, &ops.b_p,
        &ops.yd_loads, &ops.yd_state,
    ] {
        put_mat(&mut buf, m);
    }
    for v in &ops.yd_sq {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::Persist("file is truncated".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Persist("size field overflows".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn mat(&mut self, rows: usize, cols: usize) -> Result<Mat<f64>> {
        let len = rows
            .checked_mul(cols)
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| Error::Persist("size field overflows".into()))?;
        let bytes = self.take(len)?;
        Ok(Mat::from_fn(rows, cols, |i, j| {
            let at = 8 * (j * rows + i);
            f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
        }))
    }
}

/// Decodes a stored space; `spec` must be the problem it was trained on.
pub fn decode_rb_space(data: &[u8], spec: &ProblemSpec) -> Result<(RbSpace, RbOperators)> {
    if data.len() < MAGIC.len() + 4 + FINGERPRINT_LEN + CHECKSUM_LEN || &data[..8] != MAGIC {
        return Err(Error::Persist("not a reduced-basis file".into()));
    }
    let (body, checksum) = data.split_at(data.len() - CHECKSUM_LEN);
    let mut r = Reader { data: body, pos: 8 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Persist(format!(
            "format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    if Sha256::digest(body).as_slice() != checksum {
        return Err(Error::Persist("checksum mismatch, file is corrupt".into()));
    }
    let stored = r.take(FINGERPRINT_LEN)?;
    if stored != spec.fingerprint().as_bytes() {
        return Err(Error::Persist(
            "problem fingerprint mismatch: the space was trained for a different configuration".into(),
        ));
    }
    let n_dof = r.u64()?;
    let n = r.u64()?;
    let k = r.u64()?;
    let n_sel = r.u64()?;
    if n_dof != spec.n_dof() || k != spec.steps || n > n_dof {
        return Err(Error::Persist("stored sizes disagree with the problem".into()));
    }
    let gamma = r.f64()?;
    let selected = (0..n_sel).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let z_y = r.mat(n_dof, n)?;
    let z_p = r.mat(n_dof, n)?;
    let m_y = r.mat(n, n)?;
    let a_y = r.mat(n, n)?;
    let b_y = r.mat(n, n)?;
    let m_p = r.mat(n, n)?;
    let a_p = r.mat(n, n)?;
    let b_p = r.mat(n, n)?;
    let yd_loads = r.mat(n, k)?;
    let yd_state = r.mat(n, k)?;
    let yd_sq = (0..k).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if r.pos != body.len() {
        return Err(Error::Persist("trailing bytes after payload".into()));
    }
    let scheme = l1_coefficients(spec.alpha, spec.t_final, spec.steps)?;
    Ok((
        RbSpace { z_y, z_p, selected },
        RbOperators {
            scheme,
            gamma,
            m_y,
            a_y,
            b_y,
            m_p,
            a_p,
            b_p,
            yd_loads,
            yd_state,
            yd_sq,
        },
    ))
}

pub fn persist_rb_space(space: &RbSpace, ops: &RbOperators, spec: &ProblemSpec, path: &Path) -> Result<()> {
    let bytes = encode_rb_space(space, ops, spec)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_rb_space(path: &Path, spec: &ProblemSpec) -> Result<(RbSpace, RbOperators)> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_rb_space(&data, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::FomOperators;
    use crate::problem::Builtin;
    use crate::rb_offline::{greedy_train, project_operators, GreedyOptions};

    fn trained() -> (ProblemSpec, RbSpace, RbOperators) {
        let spec = ProblemSpec::builtin(Builtin::Example1, 6, 12).unwrap();
        let ops = FomOperators::new(&spec).unwrap();
        let opts = GreedyOptions {
            eps: 1e-30,
            n_max: 2,
            ..GreedyOptions::default()
        };
        let (space, rb, _) = greedy_train(&ops, &spec.uniform_parameters(4), &opts).unwrap();
        (spec, space, rb)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (spec, space, rb) = trained();
        let bytes = encode_rb_space(&space, &rb, &spec).unwrap();
        let (s2, r2) = decode_rb_space(&bytes, &spec).unwrap();
        assert_eq!(s2, space);
        assert_eq!(r2, rb);
        let ops = FomOperators::new(&spec).unwrap();
        assert_eq!(
            s2.gram_deviation(ops.inner()).to_bits(),
            space.gram_deviation(ops.inner()).to_bits()
        );
        assert_eq!(encode_rb_space(&s2, &r2, &spec).unwrap(), bytes);
    }

    #[test]
    fn mismatched_problem_rejected() {
        let (spec, space, rb) = trained();
        let bytes = encode_rb_space(&space, &rb, &spec).unwrap();
        let mut other = spec.clone();
        other.mesh = crate::fem1d::build_mesh(0.0, 1.0, 16).unwrap();
        assert!(matches!(decode_rb_space(&bytes, &other), Err(Error::Persist(m)) if m.contains("fingerprint")));
    }

    #[test]
    fn corruption_and_version_detected() {
        let (spec, space, rb) = trained();
        let bytes = encode_rb_space(&space, &rb, &spec).unwrap();
        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 1;
        assert!(matches!(decode_rb_space(&flipped, &spec), Err(Error::Persist(m)) if m.contains("checksum")));
        let mut versioned = bytes.clone();
        versioned[8] = 9;
        assert!(matches!(decode_rb_space(&versioned, &spec), Err(Error::Persist(m)) if m.contains("version")));
        assert!(decode_rb_space(&bytes[..bytes.len() - 40], &spec).is_err());
        assert!(decode_rb_space(b"garbage", &spec).is_err());
    }

    #[test]
    fn empty_space_round_trip() {
        let spec = ProblemSpec::builtin(Builtin::Example2, 4, 8).unwrap();
        let ops = FomOperators::new(&spec).unwrap();
        let space = RbSpace::empty(spec.n_dof());
        let rb = project_operators(space.z_y.as_ref(), space.z_p.as_ref(), &ops).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rb.bin");
        persist_rb_space(&space, &rb, &spec, &path).unwrap();
        let (s2, r2) = load_rb_space(&path, &spec).unwrap();
        assert_eq!(s2.dim(), 0);
        assert_eq!(r2, rb);
    }
}
