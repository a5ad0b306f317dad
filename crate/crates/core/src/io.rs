//! Binary container for tensor trains and dense operators.
//!
//! Layout, all integers `u64` little-endian:
//!
//! ```text
//! magic  b"TTRN"       4 bytes
//! version              u32 (= 1)
//! rank                 u64: 3 = state train, 4 = operator train, 2 = dense matrix
//! n_sites              u64 (1 for a dense matrix)
//! d                    u64 (local dimension; matrix dimension for rank 2)
//! bond_dims            (n_sites + 1) × u64 (absent for rank 2)
//! payload              re, im as f64 little-endian, tensor after tensor,
//!                      each tensor in row-major order of its indices
//!                      (σ, left, right) or (s, s', left, right)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3, Array4};

use crate::error::{Error, Result};
use crate::exact::DenseOperator;
use crate::linalg::C64;
use crate::mpo::MpoTensorTrain;
use crate::mps::MpsTensorTrain;

const MAGIC: &[u8; 4] = b"TTRN";
const VERSION: u32 = 1;

/// Refuse headers that would allocate more than this many complex entries.
const MAX_ENTRIES: u64 = 1 << 28;

fn put_u64(w: &mut impl Write, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn put_values<'a>(w: &mut impl Write, values: impl Iterator<Item = &'a C64>) -> Result<()> {
    for z in values {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn get_values(r: &mut impl Read, len: usize) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(len);
    let mut b = [0u8; 16];
    for _ in 0..len {
        r.read_exact(&mut b)?;
        let re = f64::from_le_bytes(b[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(b[8..].try_into().expect("8 bytes"));
        out.push(C64::new(re, im));
    }
    Ok(out)
}

fn write_header(w: &mut impl Write, rank: u64, n_sites: usize, d: usize, bonds: Option<&[usize]>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    put_u64(w, rank)?;
    put_u64(w, n_sites as u64)?;
    put_u64(w, d as u64)?;
    for &b in bonds.unwrap_or(&[]) {
        put_u64(w, b as u64)?;
    }
    Ok(())
}

struct Header {
    rank: u64,
    n_sites: usize,
    d: usize,
    bonds: Vec<usize>,
}

fn read_header(r: &mut impl Read) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rank = get_u64(r)?;
    let n_sites = get_u64(r)?;
    let d = get_u64(r)?;
    if !(2..=4).contains(&rank) {
        return Err(Error::Format(format!("unknown rank {rank}")));
    }
    if n_sites == 0 || d == 0 || n_sites > 4096 || d > 1 << 16 {
        return Err(Error::Format(format!("implausible header: n_sites = {n_sites}, d = {d}")));
    }
    let mut bonds = Vec::new();
    if rank != 2 {
        for _ in 0..=n_sites {
            let b = get_u64(r)?;
            if b == 0 || b > 1 << 20 {
                return Err(Error::Format(format!("implausible bond dimension {b}")));
            }
            bonds.push(b as usize);
        }
    }
    Ok(Header { rank, n_sites: n_sites as usize, d: d as usize, bonds })
}

fn expect_rank(h: &Header, rank: u64) -> Result<()> {
    if h.rank != rank {
        return Err(Error::Format(format!("expected rank {rank}, found rank {}", h.rank)));
    }
    Ok(())
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    let len = dims.iter().try_fold(1u64, |acc, &x| acc.checked_mul(x as u64));
    match len {
        Some(l) if l <= MAX_ENTRIES => Ok(l as usize),
        _ => Err(Error::Format(format!("tensor of shape {dims:?} too large"))),
    }
}

pub fn write_mps(w: &mut impl Write, psi: &MpsTensorTrain) -> Result<()> {
    write_header(w, 3, psi.n_sites(), psi.d_loc(), Some(&psi.bond_dims()))?;
    for t in psi.tensors() {
        put_values(w, t.iter())?;
    }
    Ok(())
}

pub fn read_mps(r: &mut impl Read) -> Result<MpsTensorTrain> {
    let h = read_header(r)?;
    expect_rank(&h, 3)?;
    let mut tensors = Vec::with_capacity(h.n_sites);
    for n in 0..h.n_sites {
        let shape = (h.d, h.bonds[n], h.bonds[n + 1]);
        let values = get_values(r, checked_len(&[shape.0, shape.1, shape.2])?)?;
        tensors.push(Array3::from_shape_vec(shape, values).expect("length checked"));
    }
    MpsTensorTrain::new(tensors).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_mpo(w: &mut impl Write, op: &MpoTensorTrain) -> Result<()> {
    write_header(w, 4, op.n_sites(), op.d(), Some(&op.bond_dims()))?;
    for t in op.tensors() {
        put_values(w, t.iter())?;
    }
    Ok(())
}

pub fn read_mpo(r: &mut impl Read) -> Result<MpoTensorTrain> {
    let h = read_header(r)?;
    expect_rank(&h, 4)?;
    let mut tensors = Vec::with_capacity(h.n_sites);
    for n in 0..h.n_sites {
        let shape = (h.d, h.d, h.bonds[n], h.bonds[n + 1]);
        let values = get_values(r, checked_len(&[shape.0, shape.1, shape.2, shape.3])?)?;
        tensors.push(Array4::from_shape_vec(shape, values).expect("length checked"));
    }
    MpoTensorTrain::new(tensors).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_dense(w: &mut impl Write, op: &DenseOperator) -> Result<()> {
    write_header(w, 2, 1, op.dim(), None)?;
    put_values(w, op.matrix().iter())
}

pub fn read_dense(r: &mut impl Read) -> Result<DenseOperator> {
    let h = read_header(r)?;
    expect_rank(&h, 2)?;
    let values = get_values(r, checked_len(&[h.d, h.d])?)?;
    let m = Array2::from_shape_vec((h.d, h.d), values).expect("length checked");
    DenseOperator::new(m).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_mps(path: impl AsRef<Path>, psi: &MpsTensorTrain) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_mps(&mut w, psi)?;
    w.flush()?;
    Ok(())
}

pub fn load_mps(path: impl AsRef<Path>) -> Result<MpsTensorTrain> {
    read_mps(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_mpo(path: impl AsRef<Path>, op: &MpoTensorTrain) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_mpo(&mut w, op)?;
    w.flush()?;
    Ok(())
}

pub fn load_mpo(path: impl AsRef<Path>) -> Result<MpoTensorTrain> {
    read_mpo(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_dense(path: impl AsRef<Path>, op: &DenseOperator) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dense(&mut w, op)?;
    w.flush()?;
    Ok(())
}

pub fn load_dense(path: impl AsRef<Path>) -> Result<DenseOperator> {
    read_dense(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpo::{xxz_hamiltonian, XxzCouplings};

    #[test]
    fn mps_roundtrip() {
        let psi = MpsTensorTrain::random_gaussian(4, 3, &[1, 2, 5, 3, 1], 11).unwrap();
        let mut buf = Vec::new();
        write_mps(&mut buf, &psi).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 * 3 + 8 * 5 + 16 * 3 * (2 + 10 + 15 + 3));
        assert_eq!(read_mps(&mut buf.as_slice()).unwrap(), psi);
    }

    #[test]
    fn mpo_roundtrip() {
        let h = xxz_hamiltonian(3, XxzCouplings::new(1.0, 1.2)).unwrap();
        let mut buf = Vec::new();
        write_mpo(&mut buf, &h).unwrap();
        assert_eq!(read_mpo(&mut buf.as_slice()).unwrap(), h);
    }

    #[test]
    fn dense_roundtrip() {
        let h = xxz_hamiltonian(3, XxzCouplings::new(1.0, 1.2)).unwrap().to_dense(27).unwrap();
        let mut buf = Vec::new();
        write_dense(&mut buf, &h).unwrap();
        assert_eq!(read_dense(&mut buf.as_slice()).unwrap(), h);
    }

    #[test]
    fn rejects_wrong_rank_and_garbage() {
        let psi = MpsTensorTrain::random_gaussian(2, 2, &[1, 2, 1], 1).unwrap();
        let mut buf = Vec::new();
        write_mps(&mut buf, &psi).unwrap();
        assert!(matches!(read_mpo(&mut buf.as_slice()), Err(Error::Format(_))));
        assert!(read_mps(&mut &buf[..buf.len() - 1]).is_err());
        assert!(matches!(read_mps(&mut &b"XXXX0000"[..]), Err(Error::Format(_))));
    }
}
