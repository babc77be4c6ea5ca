//! Hierarchical measurement operators `H(x) = Σᵢ aᵢ ⊗ (Bᵢ xᵢ)` and the random
//! matrix ensembles used to build them.
//!
//! Measurements are laid out antenna-major: `y` is `M` contiguous slices of
//! length `m`, slice `j` holding `Σᵢ A[j,i] · Bᵢ xᵢ`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::block::{BlockStructure, BlockVector};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{c64, norm_sqr, CMatrix, ZERO};
use crate::rng;

/// Default cap on the number of entries `assemble_dense` may allocate.
pub const DEFAULT_DENSE_BUDGET: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOperator", into = "RawOperator")]
pub struct HierarchicalOperator {
    a: CMatrix,
    bs: Vec<CMatrix>,
    structure: BlockStructure,
    m: usize,
}

#[derive(Serialize, Deserialize)]
struct RawOperator {
    a: CMatrix,
    bs: Vec<CMatrix>,
}

impl TryFrom<RawOperator> for HierarchicalOperator {
    type Error = Error;
    fn try_from(raw: RawOperator) -> Result<Self> {
        Self::new(raw.a, raw.bs)
    }
}

impl From<HierarchicalOperator> for RawOperator {
    fn from(h: HierarchicalOperator) -> Self {
        RawOperator { a: h.a, bs: h.bs }
    }
}

impl HierarchicalOperator {
    pub fn new(a: CMatrix, bs: Vec<CMatrix>) -> Result<Self> {
        if bs.len() != a.cols() {
            return Err(dim_err(format!(
                "{} inner matrices for {} columns of A",
                bs.len(),
                a.cols()
            )));
        }
        let m = bs[0].rows();
        if let Some(i) = bs.iter().position(|b| b.rows() != m) {
            return Err(dim_err(format!("B_{i} has {} rows, B_0 has {m}", bs[i].rows())));
        }
        let structure = BlockStructure::new(bs.iter().map(CMatrix::cols).collect())?;
        Ok(Self { a, bs, structure, m })
    }

    /// `H = I_{1×1} ⊗ I_n`, the identity on a single block of length `n`.
    pub fn identity(n: usize) -> Self {
        Self::new(CMatrix::identity(1), vec![CMatrix::identity(n)]).expect("valid shapes")
    }

    #[inline]
    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    #[inline]
    pub fn bs(&self) -> &[CMatrix] {
        &self.bs
    }

    #[inline]
    pub fn b(&self, i: usize) -> &CMatrix {
        &self.bs[i]
    }

    #[inline]
    pub fn input_structure(&self) -> &BlockStructure {
        &self.structure
    }

    /// Number of antennas `M` (rows of `A`).
    #[inline]
    pub fn antennas(&self) -> usize {
        self.a.rows()
    }

    /// Measurements per antenna `m`.
    #[inline]
    pub fn per_antenna(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.a.cols()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.a.rows() * self.m
    }

    /// Forward application `H x`.
    pub fn apply(&self, x: &BlockVector) -> Result<Vec<c64>> {
        x.check_same_structure(&self.structure)?;
        let (mm, m) = (self.antennas(), self.m);
        let mut y = vec![ZERO; mm * m];
        let mut z = vec![ZERO; m];
        for (i, b) in self.bs.iter().enumerate() {
            let xi = x.block(i);
            if xi.iter().all(|v| *v == ZERO) {
                continue;
            }
            b.matvec_into(xi, &mut z);
            for j in 0..mm {
                let aji = self.a.get(j, i);
                for (yj, zk) in y[j * m..(j + 1) * m].iter_mut().zip(&z) {
                    *yj += aji * zk;
                }
            }
        }
        Ok(y)
    }

    /// Adjoint application `Hᴴ y`; block `i` is `Bᵢᴴ Σⱼ conj(A[j,i]) yⱼ`.
    pub fn adjoint_apply(&self, y: &[c64]) -> Result<BlockVector> {
        if y.len() != self.output_dim() {
            return Err(dim_err(format!(
                "measurement vector of length {}, operator outputs {}",
                y.len(),
                self.output_dim()
            )));
        }
        let (mm, m) = (self.antennas(), self.m);
        let mut out = BlockVector::zeros(self.structure.clone());
        let mut t = vec![ZERO; m];
        for (i, b) in self.bs.iter().enumerate() {
            t.iter_mut().for_each(|v| *v = ZERO);
            for j in 0..mm {
                let c = self.a.get(j, i).conj();
                for (tk, yk) in t.iter_mut().zip(&y[j * m..(j + 1) * m]) {
                    *tk += c * yk;
                }
            }
            b.adjoint_matvec_into(&t, out.block_mut(i));
        }
        Ok(out)
    }

    /// Column of the dense operator for flat input coordinate `flat`.
    pub fn column(&self, flat: usize) -> Vec<c64> {
        let (i, k) = self
            .structure
            .locate(flat)
            .expect("flat index inside the input dimension");
        let (mm, m) = (self.antennas(), self.m);
        let bcol = self.bs[i].column(k);
        let mut col = Vec::with_capacity(mm * m);
        for j in 0..mm {
            let aji = self.a.get(j, i);
            col.extend(bcol.iter().map(|v| aji * v));
        }
        col
    }

    /// Dense `(M·m) × |flat|` matrix made of the listed input columns.
    pub fn columns(&self, flat: &[usize]) -> Result<CMatrix> {
        if flat.is_empty() {
            return Err(Error::InvalidArgument("no columns requested".into()));
        }
        if let Some(&bad) = flat.iter().find(|&&f| f >= self.structure.total_dim()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.structure.total_dim(),
            });
        }
        let rows = self.output_dim();
        let mut out = CMatrix::zeros(rows, flat.len());
        for (c, &f) in flat.iter().enumerate() {
            for (r, v) in self.column(f).into_iter().enumerate() {
                out.set(r, c, v);
            }
        }
        Ok(out)
    }

    pub fn assemble_dense(&self) -> Result<CMatrix> {
        self.assemble_dense_with_budget(DEFAULT_DENSE_BUDGET)
    }

    /// Dense `(M·m) × Σnᵢ` matrix; column block `i` is `aᵢ ⊗ Bᵢ`.
    pub fn assemble_dense_with_budget(&self, budget: usize) -> Result<CMatrix> {
        let needed = self.output_dim() * self.structure.total_dim();
        if needed > budget {
            return Err(Error::MemoryBudget { needed, budget });
        }
        let all: Vec<usize> = (0..self.structure.total_dim()).collect();
        self.columns(&all)
    }

    /// Serializes into the binary container described in the README.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.bs.len() as u64).to_le_bytes())?;
        write_matrix(&mut w, &self.a)?;
        for b in &self.bs {
            write_matrix(&mut w, b)?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = read_u64(&mut r)? as usize;
        let a = read_matrix(&mut r)?;
        let bs = (0..n).map(|_| read_matrix(&mut r)).collect::<Result<Vec<_>>>()?;
        Self::new(a, bs)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }
}

const MAGIC: &[u8; 4] = b"HIOP";
const FORMAT_VERSION: u32 = 1;

fn write_matrix(w: &mut impl Write, m: &CMatrix) -> Result<()> {
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.data() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_matrix(r: &mut impl Read) -> Result<CMatrix> {
    let rows = read_u64(r)? as usize;
    let cols = read_u64(r)? as usize;
    let len = rows
        .checked_mul(cols)
        .filter(|&l| l <= DEFAULT_DENSE_BUDGET)
        .ok_or_else(|| Error::Format(format!("implausible shape {rows}x{cols}")))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        let re = read_f64(r)?;
        let im = read_f64(r)?;
        data.push(c64::new(re, im));
    }
    CMatrix::new(rows, cols, data).map_err(|e| Error::Format(e.to_string()))
}

/// `A ⊗ B` as a hierarchical operator with every inner matrix equal to `B`.
pub fn kronecker_operator(a: &CMatrix, b: &CMatrix) -> HierarchicalOperator {
    HierarchicalOperator::new(a.clone(), vec![b.clone(); a.cols()]).expect("shapes agree by construction")
}

/// I.i.d. complex Gaussian entries with every column rescaled to unit norm.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Result<CMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix shape must be positive, got {rows}x{cols}"
        )));
    }
    let mut rng = rng::stream(seed);
    let mut m = CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c64::new(re, im)
    });
    let norms = m.column_norms();
    for r in 0..rows {
        for (c, &n) in norms.iter().enumerate() {
            let v = m.get(r, c) / n;
            m.set(r, c, v);
        }
    }
    Ok(m)
}

/// `m` distinct rows of the `n × n` DFT, drawn without replacement and kept in
/// ascending order, scaled by `1/√m` so every column has unit norm.
pub fn subsampled_dft(m: usize, n: usize, seed: u64) -> Result<CMatrix> {
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= m <= n, got m = {m}, n = {n}"
        )));
    }
    let mut rng = rng::stream(seed);
    let mut rows = index::sample(&mut rng, n, m).into_vec();
    rows.sort_unstable();
    let scale = 1.0 / (m as f64).sqrt();
    Ok(CMatrix::from_fn(m, n, |r, k| {
        let phase = ((rows[r] * k) % n) as f64 / n as f64;
        c64::from_polar(scale, -2.0 * PI * phase)
    }))
}

/// Kept columns of `b`, in ascending index order.
pub fn restrict_columns(b: &CMatrix, keep: &[usize]) -> Result<CMatrix> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("no columns kept".into()));
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    if keep.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("duplicate column index".into()));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= b.cols()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: b.cols(),
        });
    }
    Ok(CMatrix::from_fn(b.rows(), keep.len(), |r, c| b.get(r, keep[c])))
}

/// Relative mismatch `|⟨Hx, y⟩ - ⟨x, Hᴴy⟩| / (‖x‖‖y‖)`.
pub fn adjoint_mismatch(h: &HierarchicalOperator, x: &BlockVector, y: &[c64]) -> Result<f64> {
    let hx = h.apply(x)?;
    let hty = h.adjoint_apply(y)?;
    let lhs = crate::linalg::dot(&hx, y);
    let rhs = crate::linalg::dot(x.coeffs(), hty.coeffs());
    let scale = (x.norm() * norm_sqr(y).sqrt()).max(f64::MIN_POSITIVE);
    Ok((lhs - rhs).norm() / scale)
}
