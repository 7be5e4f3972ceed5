//! Dense complex operators on multipartite Hilbert spaces.
//!
//! Every operator carries the ordered list of its subsystem dimensions. Basis
//! indices are row-major in that list: the leftmost subsystem is the most
//! significant digit of a row or column index. For a key/shield state with
//! dims `[A, B, A', B']` this makes the shield-sized block `(2i+j, 2k+l)` of the
//! matrix the operator attached to `|ij><kl|` on the key.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Entrywise tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on the smallest eigenvalue in positivity checks.
pub const PSD_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dims: Vec<usize>,
    data: DMatrix<C64>,
}

impl Operator {
    pub fn new(dims: Vec<usize>, data: DMatrix<C64>) -> Result<Self> {
        let side: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) || data.nrows() != side || data.ncols() != side {
            return Err(Error::ShapeMismatch { dims, side: data.nrows() });
        }
        Ok(Operator { dims, data })
    }

    /// Builds an operator from row-major real entries.
    pub fn from_real(dims: Vec<usize>, entries: &[f64]) -> Result<Self> {
        let side: usize = dims.iter().product();
        if entries.len() != side * side {
            return Err(Error::ShapeMismatch { dims, side: (entries.len() as f64).sqrt() as usize });
        }
        let data = DMatrix::from_row_iterator(side, side, entries.iter().map(|&x| C64::new(x, 0.0)));
        Operator::new(dims, data)
    }

    pub fn from_fn(dims: Vec<usize>, f: impl Fn(usize, usize) -> C64) -> Self {
        let side: usize = dims.iter().product();
        let data = DMatrix::from_fn(side, side, f);
        Operator { dims, data }
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let side = dims.iter().product();
        Operator { dims, data: DMatrix::identity(side, side) }
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let side = dims.iter().product();
        Operator { dims, data: DMatrix::zeros(side, side) }
    }

    /// `|v><v|` for a ket `v`.
    pub fn projector(dims: Vec<usize>, ket: &DVector<C64>) -> Result<Self> {
        let data = ket * ket.adjoint();
        Operator::new(dims, data)
    }

    /// Diagonal operator `|i><i|` in the computational basis.
    pub fn basis_projector(dims: Vec<usize>, index: usize) -> Self {
        let mut out = Operator::zeros(dims);
        out.data[(index, index)] = C64::new(1.0, 0.0);
        out
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<C64> {
        self.data
    }

    /// Relabels the subsystem structure without touching the entries.
    pub fn with_dims(self, dims: Vec<usize>) -> Result<Self> {
        Operator::new(dims, self.data)
    }

    pub fn scale(&self, factor: f64) -> Operator {
        Operator { dims: self.dims.clone(), data: &self.data * C64::new(factor, 0.0) }
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_same_dims(other)?;
        Ok(Operator { dims: self.dims.clone(), data: &self.data + &other.data })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.check_same_dims(other)?;
        Ok(Operator { dims: self.dims.clone(), data: &self.data - &other.data })
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.check_same_dims(other)?;
        Ok(Operator { dims: self.dims.clone(), data: matmul(&self.data, &other.data) })
    }

    /// `u * self * u^dag`.
    pub fn conjugate_by(&self, u: &Operator) -> Result<Operator> {
        self.check_same_dims(u)?;
        let data = matmul(&matmul(&u.data, &self.data), &u.data.adjoint());
        Ok(Operator { dims: self.dims.clone(), data })
    }

    pub fn adjoint(&self) -> Operator {
        Operator { dims: self.dims.clone(), data: self.data.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self.data.iter().zip(other.data.iter()).fold(0.0, |acc, (a, b)| acc.max((a - b).norm())))
    }

    /// `max |M - M^dag|` entrywise.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.data[(r, c)] - self.data[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// `max |U^dag U - I|` entrywise.
    pub fn unitarity_error(&self) -> f64 {
        let prod = matmul(&self.data.adjoint(), &self.data);
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((prod[(r, c)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Reorders subsystems: subsystem `q` of the result is subsystem `order[q]` of `self`.
    pub fn permute_subsystems(&self, order: &[usize]) -> Result<Operator> {
        let count = self.dims.len();
        let mut seen = vec![false; count];
        if order.len() != count {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {} subsystems",
                order.len(),
                count
            )));
        }
        for &q in order {
            if q >= count {
                return Err(Error::SubsystemOutOfRange { index: q, count });
            }
            if std::mem::replace(&mut seen[q], true) {
                return Err(Error::InvalidParameter(format!("subsystem {q} repeated in permutation")));
            }
        }
        let new_dims: Vec<usize> = order.iter().map(|&q| self.dims[q]).collect();
        let old_strides = strides(&self.dims);
        let new_strides = strides(&new_dims);
        let n = self.dim();
        // new index of every old basis vector
        let map: Vec<usize> = (0..n)
            .map(|old| {
                order.iter().enumerate().fold(0, |acc, (pos, &q)| {
                    let digit = (old / old_strides[q]) % self.dims[q];
                    acc + digit * new_strides[pos]
                })
            })
            .collect();
        let mut data = DMatrix::zeros(n, n);
        for c in 0..n {
            for r in 0..n {
                data[(map[r], map[c])] = self.data[(r, c)];
            }
        }
        Ok(Operator { dims: new_dims, data })
    }

    /// `P M P^dag` for the permutation matrix sending basis vector `x` to `map[x]`.
    pub fn permute_basis(&self, map: &[usize]) -> Result<Operator> {
        let n = self.dim();
        let mut hit = vec![false; n];
        if map.len() != n || map.iter().any(|&y| y >= n || std::mem::replace(&mut hit[y], true)) {
            return Err(Error::InvalidParameter("basis map is not a permutation".into()));
        }
        let mut data = DMatrix::zeros(n, n);
        for c in 0..n {
            for r in 0..n {
                data[(map[r], map[c])] = self.data[(r, c)];
            }
        }
        Ok(Operator { dims: self.dims.clone(), data })
    }

    fn check_same_dims(&self, other: &Operator) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    fn check_subsystems(&self, subsystems: &[usize]) -> Result<()> {
        for &s in subsystems {
            if s >= self.dims.len() {
                return Err(Error::SubsystemOutOfRange { index: s, count: self.dims.len() });
            }
        }
        Ok(())
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut out = vec![1; dims.len()];
    for s in (0..dims.len().saturating_sub(1)).rev() {
        out[s] = out[s + 1] * dims[s + 1];
    }
    out
}

/// Kronecker product; the subsystems of `a` come first.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    let dims = a.dims.iter().chain(&b.dims).copied().collect();
    Operator { dims, data: a.data.kronecker(&b.data) }
}

/// `m ⊗ m ⊗ ... ⊗ m` with `k` factors.
pub fn tensor_power(m: &Operator, k: usize) -> Operator {
    assert!(k >= 1, "tensor power needs at least one factor");
    let mut out = m.clone();
    for _ in 1..k {
        out = tensor(&out, m);
    }
    out
}

/// Transposes the indices of the selected subsystems.
pub fn partial_transpose(m: &Operator, subsystems: &[usize]) -> Result<Operator> {
    m.check_subsystems(subsystems)?;
    let st = strides(&m.dims);
    let n = m.dim();
    let mut data = DMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..n {
            let (mut r2, mut c2) = (r, c);
            for &s in subsystems {
                let dr = (r / st[s]) % m.dims[s];
                let dc = (c / st[s]) % m.dims[s];
                r2 = r2 - dr * st[s] + dc * st[s];
                c2 = c2 - dc * st[s] + dr * st[s];
            }
            data[(r2, c2)] = m.data[(r, c)];
        }
    }
    Ok(Operator { dims: m.dims.clone(), data })
}

/// Traces out the selected subsystems. Tracing out everything leaves a 1x1 operator.
pub fn partial_trace(m: &Operator, subsystems: &[usize]) -> Result<Operator> {
    m.check_subsystems(subsystems)?;
    let st = strides(&m.dims);
    let keep: Vec<usize> = (0..m.dims.len()).filter(|s| !subsystems.contains(s)).collect();
    let traced: Vec<usize> = (0..m.dims.len()).filter(|s| subsystems.contains(s)).collect();
    let keep_dims: Vec<usize> = keep.iter().map(|&s| m.dims[s]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&s| m.dims[s]).collect();
    let n_keep: usize = keep_dims.iter().product();
    let n_traced: usize = traced_dims.iter().product();

    let offsets = |subs: &[usize], sub_dims: &[usize], count: usize| -> Vec<usize> {
        let local = strides(sub_dims);
        (0..count)
            .map(|idx| subs.iter().enumerate().map(|(pos, &s)| ((idx / local[pos]) % sub_dims[pos]) * st[s]).sum())
            .collect()
    };
    let keep_off = offsets(&keep, &keep_dims, n_keep);
    let traced_off = offsets(&traced, &traced_dims, n_traced);

    let mut data = DMatrix::zeros(n_keep, n_keep);
    for b in 0..n_keep {
        for a in 0..n_keep {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &traced_off {
                acc += m.data[(keep_off[a] + t, keep_off[b] + t)];
            }
            data[(a, b)] = acc;
        }
    }
    let dims = if keep_dims.is_empty() { vec![1] } else { keep_dims };
    Ok(Operator { dims, data })
}

/// Eigendecomposition of a Hermitian operator, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<C64>,
}

impl Spectrum {
    /// `V f(Λ) V^dag`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = C64::new(f(lambda), 0.0);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= w;
            }
        }
        matmul(&scaled, &self.eigenvectors.adjoint())
    }
}

fn hermitian_part(m: &Operator, tol: f64) -> Result<DMatrix<C64>> {
    let deviation = m.hermiticity_error();
    if deviation > tol {
        return Err(Error::NotHermitian { deviation, tolerance: tol });
    }
    Ok((&m.data + m.data.adjoint()) * C64::new(0.5, 0.0))
}

pub fn hermitian_eig(m: &Operator) -> Result<Spectrum> {
    hermitian_eig_tol(m, HERMITIAN_TOL)
}

pub fn hermitian_eig_tol(m: &Operator, tol: f64) -> Result<Spectrum> {
    let h = hermitian_part(m, tol)?;
    let n = h.nrows();
    let real = m.is_real();
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    let mut col = 0;
    for block in decoupled_blocks(&h) {
        let sub = h.select_rows(&block).select_columns(&block);
        let (vals, vecs): (Vec<f64>, DMatrix<C64>) = if real {
            let eig = sub.map(|z| z.re).symmetric_eigen();
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|x| C64::new(x, 0.0)))
        } else {
            let eig = sub.symmetric_eigen();
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        };
        for (j, lambda) in vals.into_iter().enumerate() {
            for (i, &row) in block.iter().enumerate() {
                vectors[(row, col)] = vecs[(i, j)];
            }
            values.push(lambda);
            col += 1;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let eigenvalues = order.iter().map(|&j| values[j]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// Eigenvalues only (descending); skips eigenvector accumulation.
pub fn eigenvalues(m: &Operator) -> Result<Vec<f64>> {
    eigenvalues_tol(m, HERMITIAN_TOL)
}

pub fn eigenvalues_tol(m: &Operator, tol: f64) -> Result<Vec<f64>> {
    let h = hermitian_part(m, tol)?;
    let real = m.is_real();
    let mut values: Vec<f64> = Vec::with_capacity(h.nrows());
    for block in decoupled_blocks(&h) {
        let sub = h.select_rows(&block).select_columns(&block);
        if real {
            values.extend(sub.map(|z| z.re).symmetric_eigenvalues().iter());
        } else {
            values.extend(sub.symmetric_eigenvalues().iter());
        }
    }
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Complex product through real gemm: nalgebra's complex `*` has no blocked
/// kernel and is an order of magnitude slower at the sizes used here.
pub fn matmul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let split = |m: &DMatrix<C64>| {
        let im = m.map(|z| z.im);
        let real = im.iter().all(|&x| x == 0.0);
        (m.map(|z| z.re), (!real).then_some(im))
    };
    let ((ar, ai), (br, bi)) = (split(a), split(b));
    let mut re = &ar * &br;
    let im = match (&ai, &bi) {
        (None, None) => return re.map(|x| C64::new(x, 0.0)),
        (Some(ai), None) => ai * &br,
        (None, Some(bi)) => &ar * bi,
        (Some(ai), Some(bi)) => {
            re -= ai * bi;
            &ar * bi + ai * &br
        }
    };
    re.zip_map(&im, C64::new)
}

/// Index sets of the connected components of the nonzero pattern of `h`.
///
/// A Hermitian matrix is block diagonal after permuting its basis into these
/// sets, so its spectrum is the union of the spectra of the diagonal blocks.
fn decoupled_blocks(h: &DMatrix<C64>) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for c in 0..n {
        for r in (c + 1)..n {
            if h[(r, c)] != C64::new(0.0, 0.0) {
                let (a, b) = (root(&mut parent, r), root(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    blocks
}

/// `|m| = sqrt(m^dag m)` for Hermitian `m`: eigenvalues replaced by their moduli.
pub fn matrix_abs(m: &Operator) -> Result<Operator> {
    let spectrum = hermitian_eig(m)?;
    Operator::new(m.dims.clone(), spectrum.reconstruct_with(f64::abs))
}

/// Sum of singular values. No 1/2 factor; see [`trace_distance`].
pub fn trace_norm(m: &Operator) -> f64 {
    match eigenvalues(m) {
        Ok(values) => values.iter().map(|x| x.abs()).sum(),
        Err(_) => m.data.clone().singular_values().iter().sum(),
    }
}

/// `(1/2) ||a - b||_Tr`, so that orthogonal pure states are at distance 1.
pub fn trace_distance(a: &Operator, b: &Operator) -> Result<f64> {
    Ok(0.5 * trace_norm(&a.sub(b)?))
}

pub fn min_eigenvalue(m: &Operator) -> Result<f64> {
    Ok(eigenvalues(m)?.last().copied().unwrap_or(0.0))
}

pub fn is_psd(m: &Operator, tol: f64) -> Result<bool> {
    Ok(min_eigenvalue(m)? >= -tol)
}

/// Shannon entropy in bits of a probability vector; zero entries contribute nothing.
pub fn shannon_entropy(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs.into_iter().filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum()
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &Operator) -> Result<f64> {
    Ok(shannon_entropy(eigenvalues(rho)?))
}

/// Checks that `rho` is a Hermitian, unit-trace, positive semidefinite matrix.
pub fn check_density(rho: &Operator, tol: f64) -> Result<()> {
    let deviation = rho.hermiticity_error();
    if deviation > tol {
        return Err(Error::NotHermitian { deviation, tolerance: tol });
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > tol.max(1e-10) || tr.im.abs() > tol.max(1e-10) {
        return Err(Error::NotDensityMatrix(format!("trace {tr} differs from 1")));
    }
    let min = min_eigenvalue(rho)?;
    if min < -tol.max(1e-10) {
        return Err(Error::NotDensityMatrix(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// JSON exchange form: `{ "dims": [..], "re": [[..]], "im": [[..]] }`, rows outermost.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&Operator> for MatrixJson {
    fn from(m: &Operator) -> Self {
        let n = m.dim();
        let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            (0..n).map(|r| (0..n).map(|c| f(&m.data[(r, c)])).collect()).collect()
        };
        MatrixJson { dims: m.dims.clone(), re: rows(|z| z.re), im: rows(|z| z.im) }
    }
}

impl TryFrom<MatrixJson> for Operator {
    type Error = Error;

    fn try_from(json: MatrixJson) -> Result<Self> {
        let n: usize = json.dims.iter().product();
        let well_formed = |part: &[Vec<f64>]| part.len() == n && part.iter().all(|row| row.len() == n);
        if !well_formed(&json.re) || !well_formed(&json.im) {
            return Err(Error::Format(format!("expected {n}x{n} \"re\" and \"im\" arrays for dims {:?}", json.dims)));
        }
        let data = DMatrix::from_fn(n, n, |r, c| C64::new(json.re[r][c], json.im[r][c]));
        Operator::new(json.dims, data)
    }
}

impl Serialize for Operator {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = MatrixJson::deserialize(deserializer)?;
        Operator::try_from(json).map_err(serde::de::Error::custom)
    }
}
