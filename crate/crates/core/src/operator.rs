//! Dense complex operators on multi-site Hilbert spaces.
//!
//! A [`LocalOperator`] is a matrix on `(C^n)^{⊗|Λ|}` together with the region
//! `Λ` it acts on. Tensor factors follow the canonical (lexicographic) site
//! order of [`Region`], so [`embed`] and [`partial_trace`] agree bit for bit
//! on index layout.
//!
//! All logarithms are natural logarithms.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::region::Region;

/// Default relative cutoff below which an eigenvalue is treated as zero.
pub const DEFAULT_SUPPORT_CUTOFF: f64 = 1e-12;

/// Default cap on the dimension of a materialized dense matrix.
pub const DEFAULT_MAX_DENSE_DIM: usize = 1 << 12;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct LocalOperator {
    support: Region,
    site_dim: usize,
    matrix: Mat<c64>,
    hermitian: bool,
}

impl LocalOperator {
    /// Wraps a matrix acting on `support`. The Hermitian flag is not set.
    pub fn new(support: Region, site_dim: usize, matrix: Mat<c64>) -> Result<Self> {
        check_shape(&support, site_dim, &matrix)?;
        Ok(LocalOperator { support, site_dim, matrix, hermitian: false })
    }

    /// Wraps a matrix that must be Hermitian up to `1e-12·‖A‖`; the stored
    /// matrix is the symmetrized `(A + A*)/2`.
    pub fn hermitian(support: Region, site_dim: usize, matrix: Mat<c64>) -> Result<Self> {
        check_shape(&support, site_dim, &matrix)?;
        let asym = hermitian_defect(matrix.as_ref());
        let scale = frobenius(matrix.as_ref());
        if asym > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) && asym > 0.0 {
            return Err(Error::NotHermitian { asymmetry: asym / scale.max(f64::MIN_POSITIVE) });
        }
        Ok(Self::hermitian_unchecked(support, site_dim, matrix))
    }

    /// Symmetrizes and flags without checking; for results that are Hermitian
    /// by construction.
    pub(crate) fn hermitian_unchecked(support: Region, site_dim: usize, matrix: Mat<c64>) -> Self {
        let matrix = symmetrize(matrix.as_ref());
        LocalOperator { support, site_dim, matrix, hermitian: true }
    }

    pub fn identity(support: Region, site_dim: usize) -> Result<Self> {
        let d = dense_dim(&support, site_dim, DEFAULT_MAX_DENSE_DIM)?;
        Ok(LocalOperator {
            support,
            site_dim,
            matrix: Mat::identity(d, d),
            hermitian: true,
        })
    }

    pub fn zero(support: Region, site_dim: usize) -> Result<Self> {
        let d = dense_dim(&support, site_dim, DEFAULT_MAX_DENSE_DIM)?;
        Ok(LocalOperator {
            support,
            site_dim,
            matrix: Mat::zeros(d, d),
            hermitian: true,
        })
    }

    /// Hermitian operator from a real diagonal.
    pub fn diagonal(support: Region, site_dim: usize, diag: &[f64]) -> Result<Self> {
        let m = Mat::from_fn(diag.len(), diag.len(), |i, j| {
            if i == j {
                c64::new(diag[i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        check_shape(&support, site_dim, &m)?;
        Ok(LocalOperator { support, site_dim, matrix: m, hermitian: true })
    }

    pub fn support(&self) -> &Region {
        &self.support
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> LocalOperator {
        LocalOperator {
            support: self.support.clone(),
            site_dim: self.site_dim,
            matrix: self.matrix.adjoint().to_owned(),
            hermitian: self.hermitian,
        }
    }

    /// Multiplies by a real scalar; keeps the Hermitian flag.
    pub fn scaled(&self, factor: f64) -> LocalOperator {
        let matrix = Mat::from_fn(self.dim(), self.dim(), |i, j| self.matrix[(i, j)] * factor);
        LocalOperator { matrix, ..self.clone_meta() }
    }

    pub fn add(&self, other: &LocalOperator) -> Result<LocalOperator> {
        self.same_space(other)?;
        let matrix = &self.matrix + &other.matrix;
        Ok(LocalOperator {
            matrix,
            hermitian: self.hermitian && other.hermitian,
            ..self.clone_meta()
        })
    }

    pub fn sub(&self, other: &LocalOperator) -> Result<LocalOperator> {
        self.same_space(other)?;
        let matrix = &self.matrix - &other.matrix;
        Ok(LocalOperator {
            matrix,
            hermitian: self.hermitian && other.hermitian,
            ..self.clone_meta()
        })
    }

    /// Operator product `self · other` on a common support.
    pub fn compose(&self, other: &LocalOperator) -> Result<LocalOperator> {
        self.same_space(other)?;
        let matrix = &self.matrix * &other.matrix;
        Ok(LocalOperator { matrix, hermitian: false, ..self.clone_meta() })
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &LocalOperator) -> Result<c64> {
        self.same_space(other)?;
        let d = self.dim();
        let mut acc = c64::new(0.0, 0.0);
        for j in 0..d {
            for i in 0..d {
                acc += self.matrix[(i, j)] * other.matrix[(j, i)];
            }
        }
        Ok(acc)
    }

    /// The same matrix placed on the translated support `Λ + x`.
    pub fn translate(&self, by: &[i64]) -> LocalOperator {
        LocalOperator {
            support: self.support.translate(by),
            ..self.clone()
        }
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &LocalOperator) -> Result<f64> {
        self.same_space(other)?;
        let mut m = 0.0f64;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                m = m.max((self.matrix[(i, j)] - other.matrix[(i, j)]).norm());
            }
        }
        Ok(m)
    }

    fn clone_meta(&self) -> LocalOperator {
        LocalOperator {
            support: self.support.clone(),
            site_dim: self.site_dim,
            matrix: Mat::zeros(0, 0),
            hermitian: self.hermitian,
        }
    }

    fn same_space(&self, other: &LocalOperator) -> Result<()> {
        if self.support != other.support || self.site_dim != other.site_dim {
            return Err(Error::validation(format!(
                "operators live on different spaces: {} (n={}) vs {} (n={})",
                self.support, self.site_dim, other.support, other.site_dim
            )));
        }
        Ok(())
    }
}

fn check_shape(support: &Region, site_dim: usize, m: &Mat<c64>) -> Result<()> {
    if site_dim < 2 {
        return Err(Error::validation("site dimension must be at least 2"));
    }
    let expected = support.hilbert_dim(site_dim);
    if m.nrows() != m.ncols() || m.nrows() as u128 != expected {
        return Err(Error::validation(format!(
            "matrix is {}x{} but support {} with n={} needs {}x{}",
            m.nrows(),
            m.ncols(),
            support,
            site_dim,
            expected,
            expected
        )));
    }
    Ok(())
}

/// Dense dimension of a region, or a resource error above `cap`.
pub fn dense_dim(region: &Region, site_dim: usize, cap: usize) -> Result<usize> {
    let d = region.hilbert_dim(site_dim);
    if d > cap as u128 {
        return Err(Error::Resource {
            what: format!("dense operator on {region}"),
            dim: d,
            cap: cap as u128,
        });
    }
    Ok(d as usize)
}

/// Maps between an ambient basis index and the pair (index on `sub`, index
/// on `ambient ∖ sub`).
struct IndexSplit {
    sub_dim: usize,
    rest_dim: usize,
    /// `table[a * rest_dim + r]` is the ambient index of `(a, r)`.
    table: Vec<usize>,
}

impl IndexSplit {
    fn new(ambient: &Region, sub: &Region, n: usize) -> Self {
        let m = ambient.volume();
        let in_sub: Vec<bool> = ambient.sites().iter().map(|s| sub.contains(s)).collect();
        let sub_dim = n.pow(sub.volume() as u32);
        let rest_dim = n.pow((m - sub.volume()) as u32);
        let total = sub_dim * rest_dim;
        let mut table = vec![0usize; total];
        let mut digits = vec![0usize; m];
        for i in 0..total {
            let mut x = i;
            for k in (0..m).rev() {
                digits[k] = x % n;
                x /= n;
            }
            let (mut a, mut r) = (0usize, 0usize);
            for k in 0..m {
                if in_sub[k] {
                    a = a * n + digits[k];
                } else {
                    r = r * n + digits[k];
                }
            }
            table[a * rest_dim + r] = i;
        }
        IndexSplit { sub_dim, rest_dim, table }
    }

    #[inline]
    fn index(&self, a: usize, r: usize) -> usize {
        self.table[a * self.rest_dim + r]
    }
}

/// Embeds `op` into `ambient` as `op ⊗ I`, using the default dense cap.
pub fn embed(op: &LocalOperator, ambient: &Region) -> Result<LocalOperator> {
    embed_capped(op, ambient, DEFAULT_MAX_DENSE_DIM)
}

pub fn embed_capped(op: &LocalOperator, ambient: &Region, max_dim: usize) -> Result<LocalOperator> {
    if !op.support.is_subset_of(ambient) {
        return Err(Error::Containment {
            inner: op.support.to_string(),
            outer: ambient.to_string(),
        });
    }
    let d = dense_dim(ambient, op.site_dim, max_dim)?;
    if op.support == *ambient {
        return Ok(op.clone());
    }
    let split = IndexSplit::new(ambient, &op.support, op.site_dim);
    let mut m = Mat::<c64>::zeros(d, d);
    for r in 0..split.rest_dim {
        for b in 0..split.sub_dim {
            let jb = split.index(b, r);
            for a in 0..split.sub_dim {
                m[(split.index(a, r), jb)] = op.matrix[(a, b)];
            }
        }
    }
    Ok(LocalOperator {
        support: ambient.clone(),
        site_dim: op.site_dim,
        matrix: m,
        hermitian: op.hermitian,
    })
}

/// Traces out every site of `op.support` not in `keep`.
pub fn partial_trace(op: &LocalOperator, keep: &Region) -> Result<LocalOperator> {
    if !keep.is_subset_of(&op.support) {
        return Err(Error::Containment {
            inner: keep.to_string(),
            outer: op.support.to_string(),
        });
    }
    if *keep == op.support {
        return Ok(op.clone());
    }
    let split = IndexSplit::new(&op.support, keep, op.site_dim);
    let mut m = Mat::<c64>::zeros(split.sub_dim, split.sub_dim);
    for r in 0..split.rest_dim {
        for b in 0..split.sub_dim {
            let jb = split.index(b, r);
            for a in 0..split.sub_dim {
                m[(a, b)] += op.matrix[(split.index(a, r), jb)];
            }
        }
    }
    Ok(LocalOperator {
        support: keep.clone(),
        site_dim: op.site_dim,
        matrix: m,
        hermitian: op.hermitian,
    })
}

/// Tensor product of operators on disjoint supports, laid out on the union.
pub fn tensor(a: &LocalOperator, b: &LocalOperator) -> Result<LocalOperator> {
    if a.site_dim != b.site_dim {
        return Err(Error::validation("tensor factors must share the site dimension"));
    }
    if a.support.intersects(&b.support) {
        return Err(Error::validation(format!(
            "tensor factors overlap: {} and {}",
            a.support, b.support
        )));
    }
    let union = a.support.union(&b.support);
    let d = dense_dim(&union, a.site_dim, DEFAULT_MAX_DENSE_DIM)?;
    let split = IndexSplit::new(&union, &a.support, a.site_dim);
    let mut m = Mat::<c64>::zeros(d, d);
    for r in 0..split.rest_dim {
        for s in 0..split.rest_dim {
            let bv = b.matrix[(r, s)];
            if bv == c64::new(0.0, 0.0) {
                continue;
            }
            for q in 0..split.sub_dim {
                let j = split.index(q, s);
                for p in 0..split.sub_dim {
                    m[(split.index(p, r), j)] = a.matrix[(p, q)] * bv;
                }
            }
        }
    }
    Ok(LocalOperator {
        support: union,
        site_dim: a.site_dim,
        matrix: m,
        hermitian: a.hermitian && b.hermitian,
    })
}

/// Adds `scale · (op ⊗ I)` into a dense accumulator laid out on `ambient`.
pub(crate) fn add_embedded(acc: &mut Mat<c64>, ambient: &Region, op: &LocalOperator, scale: f64) -> Result<()> {
    if !op.support.is_subset_of(ambient) {
        return Err(Error::Containment {
            inner: op.support.to_string(),
            outer: ambient.to_string(),
        });
    }
    let split = IndexSplit::new(ambient, &op.support, op.site_dim);
    if acc.nrows() != split.sub_dim * split.rest_dim {
        return Err(Error::validation("accumulator does not match the ambient region"));
    }
    for r in 0..split.rest_dim {
        for b in 0..split.sub_dim {
            let jb = split.index(b, r);
            for a in 0..split.sub_dim {
                acc[(split.index(a, r), jb)] += op.matrix[(a, b)] * scale;
            }
        }
    }
    Ok(())
}

/// Moves the tensor factor of `op.support()[k]` onto `targets[k]` and
/// returns the operator on the sorted target sites.
pub fn relabel(op: &LocalOperator, targets: &[crate::region::Site]) -> Result<LocalOperator> {
    let k = op.support.volume();
    if targets.len() != k {
        return Err(Error::validation("relabel needs one target per support site"));
    }
    let new_support = Region::from_sites(op.support.dim(), targets.iter().cloned())?;
    if new_support.volume() != k {
        return Err(Error::validation("relabel targets must be distinct"));
    }
    let n = op.site_dim;
    // perm[i] = position in the new order of old factor i
    let perm: Vec<usize> = targets
        .iter()
        .map(|t| new_support.position(t).expect("target in new support"))
        .collect();
    let d = op.dim();
    let mut map = vec![0usize; d];
    let mut digits = vec![0usize; k];
    let mut moved = vec![0usize; k];
    for (i, slot) in map.iter_mut().enumerate() {
        let mut x = i;
        for q in (0..k).rev() {
            digits[q] = x % n;
            x /= n;
        }
        for q in 0..k {
            moved[perm[q]] = digits[q];
        }
        *slot = moved.iter().fold(0usize, |acc, &dgt| acc * n + dgt);
    }
    let mut m = Mat::<c64>::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            m[(map[i], map[j])] = op.matrix[(i, j)];
        }
    }
    Ok(LocalOperator {
        support: new_support,
        site_dim: n,
        matrix: m,
        hermitian: op.hermitian,
    })
}

/// Eigendecomposition of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors.
    pub eigenvectors: Mat<c64>,
    /// Number of eigenvalues above `cutoff · max(1, ‖A‖)`.
    pub support_rank: usize,
    /// The absolute threshold used for `support_rank`.
    pub threshold: f64,
}

impl SpectralDecomposition {
    /// `V f(Λ) V*`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Mat<c64> {
        let fv: Vec<f64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        weighted_outer(self.eigenvectors.as_ref(), &fv)
    }

    pub fn reconstruct(&self) -> Mat<c64> {
        self.apply(|x| x)
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Orthonormal basis of the support subspace (eigenvalues above threshold).
    pub fn support_basis(&self) -> MatRef<'_, c64> {
        let n = self.eigenvalues.len();
        let k = self.support_rank;
        self.eigenvectors.as_ref().subcols(n - k, k)
    }

    /// Orthonormal basis of the kernel (eigenvalues at or below threshold).
    pub fn kernel_basis(&self) -> MatRef<'_, c64> {
        let n = self.eigenvalues.len();
        self.eigenvectors.as_ref().subcols(0, n - self.support_rank)
    }
}

/// `V diag(w) V*`.
pub(crate) fn weighted_outer(v: MatRef<'_, c64>, w: &[f64]) -> Mat<c64> {
    let n = v.nrows();
    let k = v.ncols();
    if let Some(rows) = monomial_rows(v) {
        let mut out = Mat::<c64>::zeros(n, n);
        for (j, &i) in rows.iter().enumerate() {
            out[(i, i)] += c64::new(v[(i, j)].norm_sqr() * w[j], 0.0);
        }
        return out;
    }
    if is_real(v) {
        let vw = Mat::<f64>::from_fn(n, k, |i, j| v[(i, j)].re * w[j]);
        let vr = Mat::<f64>::from_fn(n, k, |i, j| v[(i, j)].re);
        let out = vw * vr.transpose();
        return Mat::from_fn(n, n, |i, j| c64::new(out[(i, j)], 0.0));
    }
    let vw = Mat::from_fn(n, k, |i, j| v[(i, j)] * w[j]);
    vw * v.adjoint()
}

/// Row index of the single nonzero entry of each column, when every column
/// has exactly one and the rows are distinct.
fn monomial_rows(v: MatRef<'_, c64>) -> Option<Vec<usize>> {
    let zero = c64::new(0.0, 0.0);
    let mut seen = vec![false; v.nrows()];
    let mut rows = Vec::with_capacity(v.ncols());
    for j in 0..v.ncols() {
        let mut found = None;
        for i in 0..v.nrows() {
            if v[(i, j)] != zero {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        let i = found?;
        if seen[i] {
            return None;
        }
        seen[i] = true;
        rows.push(i);
    }
    Some(rows)
}

/// Spectral decomposition of a Hermitian-flagged operator.
pub fn herm_eig(op: &LocalOperator, support_cutoff: f64) -> Result<SpectralDecomposition> {
    if !op.hermitian {
        return Err(Error::NotHermitian { asymmetry: hermitian_defect(op.matrix()) });
    }
    if !(support_cutoff >= 0.0) {
        return Err(Error::validation("support cutoff must be non-negative"));
    }
    let (eigenvalues, eigenvectors) = eigh(op.matrix())?;
    Ok(with_support(eigenvalues, eigenvectors, support_cutoff))
}

pub(crate) fn with_support(
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<c64>,
    support_cutoff: f64,
) -> SpectralDecomposition {
    let norm = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let threshold = support_cutoff * norm.max(1.0);
    let support_rank = eigenvalues.iter().filter(|&&x| x > threshold).count();
    SpectralDecomposition { eigenvalues, eigenvectors, support_rank, threshold }
}

/// Scalar functions that can be lifted to Hermitian operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFn {
    Exp,
    /// `log` on the support subspace and 0 on its orthogonal complement.
    LogOnSupport,
}

/// Result of [`matrix_function`]: the operator and the rank of the input's
/// support projector.
#[derive(Clone, Debug)]
pub struct FunctionValue {
    pub op: LocalOperator,
    pub support_rank: usize,
}

pub fn matrix_function(op: &LocalOperator, f: MatrixFn, support_cutoff: f64) -> Result<FunctionValue> {
    let spec = herm_eig(op, support_cutoff)?;
    function_of_spectrum(op, &spec, f)
}

pub(crate) fn function_of_spectrum(
    op: &LocalOperator,
    spec: &SpectralDecomposition,
    f: MatrixFn,
) -> Result<FunctionValue> {
    let matrix = match f {
        MatrixFn::Exp => spec.apply(f64::exp),
        MatrixFn::LogOnSupport => {
            if let Some(&lo) = spec.eigenvalues.first() {
                if lo < -spec.threshold {
                    return Err(Error::domain(format!(
                        "logarithm of an operator with eigenvalue {lo:.3e}"
                    )));
                }
            }
            let t = spec.threshold;
            spec.apply(|x| if x > t { x.ln() } else { 0.0 })
        }
    };
    Ok(FunctionValue {
        op: LocalOperator::hermitian_unchecked(op.support.clone(), op.site_dim, matrix),
        support_rank: spec.support_rank,
    })
}

/// Largest singular value.
pub fn operator_norm(op: &LocalOperator) -> f64 {
    if op.dim() == 0 {
        return 0.0;
    }
    if op.hermitian {
        if let Ok(vals) = eigvalsh(op.matrix()) {
            return vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        }
    }
    op.matrix
        .singular_values()
        .ok()
        .and_then(|s| s.first().copied())
        .unwrap_or(f64::NAN)
}

/// `½‖A − B‖₁` for Hermitian operators on the same space.
pub fn trace_distance(a: &LocalOperator, b: &LocalOperator) -> Result<f64> {
    let diff = a.sub(b)?;
    if !diff.hermitian {
        return Err(Error::NotHermitian { asymmetry: hermitian_defect(diff.matrix()) });
    }
    let vals = eigvalsh(diff.matrix())?;
    Ok(0.5 * vals.iter().map(|x| x.abs()).sum::<f64>())
}

// ---- dense kernels ------------------------------------------------------

pub(crate) fn frobenius(m: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub(crate) fn hermitian_defect(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            s += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    s.sqrt()
}

pub(crate) fn symmetrize(m: MatRef<'_, c64>) -> Mat<c64> {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            c64::new(m[(i, i)].re, 0.0)
        } else {
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        }
    })
}

fn is_real(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0))
}

fn is_diagonal(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| i == j || m[(i, j)] == c64::new(0.0, 0.0)))
}

/// Ascending eigenpairs of a Hermitian matrix (symmetrized first).
pub fn eigh(m: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let n = m.nrows();
    if is_diagonal(m) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re));
        let vals = order.iter().map(|&k| m[(k, k)].re).collect();
        let mut v = Mat::<c64>::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            v[(k, col)] = c64::new(1.0, 0.0);
        }
        return Ok((vals, v));
    }
    let sym = symmetrize(m);
    if is_real(sym.as_ref()) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| sym[(i, j)].re);
        let evd = re
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let vals = (0..n).map(|k| evd.S()[k]).collect();
        let u = evd.U();
        let v = Mat::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0));
        return Ok((vals, v));
    }
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let vals = (0..n).map(|k| evd.S()[k].re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn eigvalsh(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if is_diagonal(m) {
        let mut vals: Vec<f64> = (0..n).map(|k| m[(k, k)].re).collect();
        vals.sort_by(f64::total_cmp);
        return Ok(vals);
    }
    let sym = symmetrize(m);
    if is_real(sym.as_ref()) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| sym[(i, j)].re);
        return re
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Linalg(format!("{e:?}")));
    }
    sym.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli;
    use crate::random::{random_density, random_hermitian, rng};

    fn site(x: i64) -> Region {
        Region::interval(x, x)
    }

    #[test]
    fn embed_identity_case() {
        let id = LocalOperator::identity(site(0), 2).unwrap();
        let e = embed(&id, &Region::interval(0, 1)).unwrap();
        let i4 = LocalOperator::identity(Region::interval(0, 1), 2).unwrap();
        assert_eq!(e.max_abs_diff(&i4).unwrap(), 0.0);
    }

    #[test]
    fn embed_pauli_z() {
        let z = pauli::z(site(0));
        let e = embed(&z, &Region::interval(0, 1)).unwrap();
        assert_eq!(e.trace().norm(), 0.0);
        assert!((operator_norm(&e) - 1.0).abs() < 1e-14);
        // σ^z ⊗ I = diag(1, 1, -1, -1) with site 0 most significant.
        let expect = LocalOperator::diagonal(Region::interval(0, 1), 2, &[1.0, 1.0, -1.0, -1.0]).unwrap();
        assert_eq!(e.max_abs_diff(&expect).unwrap(), 0.0);
    }

    #[test]
    fn embed_into_second_slot_matches_kronecker() {
        // I ⊗ σ^z on {0,1} when σ^z sits on site 1.
        let z = pauli::z(site(1));
        let e = embed(&z, &Region::interval(0, 1)).unwrap();
        let expect = LocalOperator::diagonal(Region::interval(0, 1), 2, &[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(e.max_abs_diff(&expect).unwrap(), 0.0);
    }

    #[test]
    fn embed_trace_scales() {
        // Oracle: explicit A ⊗ I₂ ⊗ I₂ Kronecker product on 8×8 matrices.
        let mut r = rng(11);
        let a = random_hermitian(&mut r, site(0), 2);
        let e = embed(&a, &Region::interval(0, 2)).unwrap();
        let mut kron = Mat::<c64>::zeros(8, 8);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..4 {
                    kron[(i * 4 + k, j * 4 + k)] = a.matrix()[(i, j)];
                }
            }
        }
        let oracle = LocalOperator::new(Region::interval(0, 2), 2, kron).unwrap();
        assert!(e.max_abs_diff(&oracle).unwrap() < 1e-15);
        assert!((e.trace() - a.trace() * 4.0).norm() < 1e-13);
    }

    #[test]
    fn embed_rejects_foreign_support() {
        let z = pauli::z(site(5));
        assert!(matches!(embed(&z, &Region::interval(0, 1)), Err(Error::Containment { .. })));
    }

    #[test]
    fn embed_respects_cap() {
        let z = pauli::z(site(0));
        let err = embed_capped(&z, &Region::interval(0, 4), 16).unwrap_err();
        assert!(matches!(err, Error::Resource { .. }));
    }

    #[test]
    fn partial_trace_of_product() {
        let mut r = rng(3);
        let rho = random_density(&mut r, site(0), 2);
        let sigma = random_density(&mut r, Region::interval(1, 2), 2).scaled(2.5);
        let prod = tensor(&rho, &sigma).unwrap();
        let red = partial_trace(&prod, &site(0)).unwrap();
        let expect = rho.scaled(sigma.trace().re);
        assert!(red.max_abs_diff(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        // |Φ⁺⟩ = (|00⟩ + |11⟩)/√2; reduced state is I/2 by hand.
        let mut m = Mat::<c64>::zeros(4, 4);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            m[(i, j)] = c64::new(0.5, 0.0);
        }
        let bell = LocalOperator::hermitian(Region::interval(0, 1), 2, m).unwrap();
        for keep in [site(0), site(1)] {
            let red = partial_trace(&bell, &keep).unwrap();
            let half = LocalOperator::identity(keep.clone(), 2).unwrap().scaled(0.5);
            assert!(red.max_abs_diff(&half).unwrap() < 1e-15);
        }
    }

    #[test]
    fn partial_trace_full_support_is_identity_map() {
        let mut r = rng(5);
        let d = random_density(&mut r, Region::interval(0, 1), 2);
        let same = partial_trace(&d, &Region::interval(0, 1)).unwrap();
        assert_eq!(same.max_abs_diff(&d).unwrap(), 0.0);
        assert!(partial_trace(&d, &Region::interval(0, 2)).is_err());
    }

    #[test]
    fn tensor_matches_embed_product() {
        let mut r = rng(8);
        let a = random_hermitian(&mut r, Region::from_sites(1, [crate::Site::new(vec![0]), crate::Site::new(vec![2])]).unwrap(), 2);
        let b = random_hermitian(&mut r, site(1), 2);
        let t = tensor(&a, &b).unwrap();
        let amb = Region::interval(0, 2);
        let p = embed(&a, &amb).unwrap().compose(&embed(&b, &amb).unwrap()).unwrap();
        assert!(t.max_abs_diff(&p).unwrap() < 1e-14);
    }

    #[test]
    fn relabel_swaps_factors() {
        // σ^z on site 0 and σ^x on site 1, relabelled 0→1 and 1→0.
        let zx = pauli::pair(pauli::sigma_z(), site(0), pauli::sigma_x(), site(1));
        let swapped = relabel(&zx, &[crate::Site::new(vec![1]), crate::Site::new(vec![0])]).unwrap();
        let xz = pauli::pair(pauli::sigma_x(), site(0), pauli::sigma_z(), site(1));
        assert_eq!(swapped.max_abs_diff(&xz).unwrap(), 0.0);
        let shifted = relabel(&zx, &[crate::Site::new(vec![3]), crate::Site::new(vec![4])]).unwrap();
        assert_eq!(shifted.matrix(), zx.matrix());
    }

    #[test]
    fn pauli_x_spectrum() {
        let s = herm_eig(&pauli::x(site(0)), DEFAULT_SUPPORT_CUTOFF).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert_eq!(s.support_rank, 1);
    }

    #[test]
    fn diagonal_support_rank() {
        let op = LocalOperator::diagonal(site(0), 3, &[0.0, 0.3, 0.7]).unwrap();
        let s = herm_eig(&op, 1e-12).unwrap();
        assert_eq!(s.support_rank, 2);
        assert_eq!(s.eigenvalues, vec![0.0, 0.3, 0.7]);
    }

    #[test]
    fn herm_eig_rejects_unflagged() {
        let m = Mat::from_fn(2, 2, |i, j| c64::new((i + 2 * j) as f64, 0.0));
        let op = LocalOperator::new(site(0), 2, m).unwrap();
        assert!(matches!(herm_eig(&op, 1e-12), Err(Error::NotHermitian { .. })));
        let m = Mat::from_fn(2, 2, |i, j| c64::new((i + 2 * j) as f64, 0.0));
        assert!(LocalOperator::hermitian(site(0), 2, m).is_err());
    }

    #[test]
    fn reconstruction_residual_on_random_hermitian() {
        let mut r = rng(101);
        for _ in 0..100 {
            let a = random_hermitian(&mut r, Region::interval(0, 3), 2);
            let s = herm_eig(&a, DEFAULT_SUPPORT_CUTOFF).unwrap();
            let back = LocalOperator::new(a.support().clone(), 2, s.reconstruct()).unwrap();
            let scale = operator_norm(&a).max(1.0);
            assert!(back.max_abs_diff(&a).unwrap() <= 1e-10 * scale);
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let vtv = s.eigenvectors.adjoint() * &s.eigenvectors;
            let id = Mat::<c64>::identity(16, 16);
            let dev = frobenius((&vtv - &id).as_ref());
            assert!(dev < 1e-10);
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = LocalOperator::zero(Region::interval(0, 1), 2).unwrap();
        let e = matrix_function(&z, MatrixFn::Exp, DEFAULT_SUPPORT_CUTOFF).unwrap();
        let id = LocalOperator::identity(Region::interval(0, 1), 2).unwrap();
        assert!(e.op.max_abs_diff(&id).unwrap() < 1e-15);
    }

    #[test]
    fn log_of_maximally_mixed_qubit() {
        let half = LocalOperator::diagonal(site(0), 2, &[0.5, 0.5]).unwrap();
        let l = matrix_function(&half, MatrixFn::LogOnSupport, DEFAULT_SUPPORT_CUTOFF).unwrap();
        let expect = LocalOperator::diagonal(site(0), 2, &[-(2f64.ln()); 2]).unwrap();
        assert!(l.op.max_abs_diff(&expect).unwrap() < 1e-15);
        assert_eq!(l.support_rank, 2);
    }

    #[test]
    fn log_on_support_zeroes_the_kernel() {
        let p = LocalOperator::diagonal(site(0), 3, &[0.25, 0.0, 0.75]).unwrap();
        let l = matrix_function(&p, MatrixFn::LogOnSupport, 1e-12).unwrap();
        let expect = LocalOperator::diagonal(site(0), 3, &[0.25f64.ln(), 0.0, 0.75f64.ln()]).unwrap();
        assert!(l.op.max_abs_diff(&expect).unwrap() < 1e-15);
        assert_eq!(l.support_rank, 2);
    }

    #[test]
    fn log_of_negative_operator_is_domain_error() {
        let p = LocalOperator::diagonal(site(0), 2, &[-0.1, 1.1]).unwrap();
        assert!(matches!(
            matrix_function(&p, MatrixFn::LogOnSupport, 1e-12),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn exp_log_round_trip() {
        let mut r = rng(77);
        for k in 0..100 {
            let sites = 2 + (k % 3) as i64; // dims 4, 8, 16
            let d = random_density(&mut r, Region::interval(0, sites - 1), 2);
            let l = matrix_function(&d, MatrixFn::LogOnSupport, DEFAULT_SUPPORT_CUTOFF).unwrap();
            assert_eq!(l.support_rank, d.dim());
            let back = matrix_function(&l.op, MatrixFn::Exp, DEFAULT_SUPPORT_CUTOFF).unwrap();
            assert!(back.op.max_abs_diff(&d).unwrap() < 1e-10);
        }
    }

    #[test]
    fn operator_norms() {
        assert!((operator_norm(&pauli::z(site(0))) - 1.0).abs() < 1e-15);
        assert_eq!(operator_norm(&LocalOperator::zero(site(0), 2).unwrap()), 0.0);
        // Oracle: full SVD of a non-Hermitian matrix.
        let mut r = rng(4);
        let a = crate::random::random_matrix(&mut r, 8);
        let op = LocalOperator::new(Region::interval(0, 2), 2, a.clone()).unwrap();
        let svd = a.svd().unwrap();
        let smax = (0..8).map(|k| svd.S()[k].re).fold(0.0f64, f64::max);
        assert!((operator_norm(&op) - smax).abs() < 1e-10);
    }

    #[test]
    fn trace_distance_basics() {
        let a = LocalOperator::diagonal(site(0), 2, &[1.0, 0.0]).unwrap();
        let b = LocalOperator::diagonal(site(0), 2, &[0.0, 1.0]).unwrap();
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
    }
}
