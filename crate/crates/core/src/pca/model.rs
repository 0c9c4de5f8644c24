//! PCA fitting and reconstruction.
//!
//! Eigenpairs come from the sample covariance (divisor `n - 1`) of the
//! mean-centered data. With fewer samples than pixels the `n x n` Gram matrix
//! `Xc Xcᵀ` is decomposed instead of the `d x d` covariance: if `Xc Xcᵀ u = μ u`
//! then `w = Xcᵀ u / ‖Xcᵀ u‖` is a covariance eigenvector with eigenvalue
//! `μ / (n - 1)`.
//!
//! Only `k_max = min(n - 1, d)` pairs are kept; centered data has rank at most
//! `n - 1`, so nothing with positive variance is dropped.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::ingest::matrix::ByteCursor;
use crate::ingest::DataMatrix;

const UPM_MAGIC: &[u8; 4] = b"UPM1";
const UPM_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `k_max x d`, row-major; row `i` is component `w_i`.
    components: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// `n x k_max`, row-major.
    scores: Vec<f64>,
    n_samples: usize,
    dim: usize,
}

/// Eigenvalues above this fraction of the largest are treated as signal when
/// mapping Gram eigenvectors back to pixel space.
const NULL_RELATIVE: f64 = 1e-10;

pub fn fit_pca(x: &DataMatrix) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("PCA needs at least 1 feature".into()));
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in PCA input".into()));
    }

    let mut mean = vec![0.0; d];
    for row in x.rows_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    // Row-major n x d is column-major d x n, i.e. Xcᵀ.
    let centered_t = DMatrix::from_fn(d, n, |j, i| x.row(i)[j] - mean[j]);
    let scale = x.data().iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
    let abs_floor = (n * d) as f64 * (100.0 * f64::EPSILON * scale).powi(2);
    let k_max = (n - 1).min(d);

    let (raw_values, vectors) = if n < d {
        let gram = centered_t.tr_mul(&centered_t);
        let (values, u) = sorted_eigen(gram);
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        let tol = (top * NULL_RELATIVE).max(abs_floor);
        let mut kept = Vec::with_capacity(k_max);
        let mut cols = Vec::with_capacity(k_max);
        for (i, &mu) in values.iter().take(k_max).enumerate() {
            if mu > tol {
                let w = &centered_t * u.column(i);
                cols.push(w.as_slice().to_vec());
                kept.push(mu);
            } else {
                kept.push(0.0);
            }
        }
        (kept, cols)
    } else {
        let cov = centered_t.clone() * centered_t.transpose();
        let (values, v) = sorted_eigen(cov);
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        let tol = (top * NULL_RELATIVE).max(abs_floor);
        let mut kept = Vec::with_capacity(k_max);
        let mut cols = Vec::with_capacity(k_max);
        for (i, &mu) in values.iter().take(k_max).enumerate() {
            if mu > tol {
                cols.push(v.column(i).as_slice().to_vec());
                kept.push(mu);
            } else {
                kept.push(0.0);
            }
        }
        (kept, cols)
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k_max);
    for mut w in vectors {
        orthonormalize_against(&mut w, &basis);
        if normalize(&mut w) {
            basis.push(w);
        }
    }
    complete_basis(&mut basis, d, k_max);
    for w in basis.iter_mut() {
        fix_sign(w);
    }

    let eigenvalues: Vec<f64> = raw_values
        .iter()
        .map(|mu| (mu / (n - 1) as f64).max(0.0))
        .collect();
    let components: Vec<f64> = basis.concat();
    let w = DMatrix::from_column_slice(d, k_max, &components);
    let scores_cm = centered_t.tr_mul(&w);
    let scores = row_major(&scores_cm);

    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        scores,
        n_samples: n,
        dim: d,
    })
}

/// Eigen-decomposition with eigenvalues sorted descending and ties kept in
/// solver order.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(order.iter());
    (values, vectors)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthonormalize_against(w: &mut [f64], basis: &[Vec<f64>]) {
    // Two passes of modified Gram-Schmidt.
    for _ in 0..2 {
        for b in basis {
            let c = dot(w, b);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn normalize(w: &mut [f64]) -> bool {
    let norm = dot(w, w).sqrt();
    if !(norm > 1e-150) {
        return false;
    }
    w.iter_mut().for_each(|x| *x /= norm);
    true
}

/// Extends `basis` to `k` orthonormal vectors using standard basis candidates.
fn complete_basis(basis: &mut Vec<Vec<f64>>, d: usize, k: usize) {
    let mut j = 0;
    while basis.len() < k && j < d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        orthonormalize_against(&mut e, basis);
        if dot(&e, &e) > 0.25 && normalize(&mut e) {
            basis.push(e);
        }
        j += 1;
    }
}

/// Makes the largest-magnitude entry positive (first one on ties).
fn fix_sign(w: &mut [f64]) {
    let mut best = 0;
    for (i, v) in w.iter().enumerate() {
        if v.abs() > w[best].abs() {
            best = i;
        }
    }
    if w[best] < 0.0 {
        w.iter_mut().for_each(|x| *x = -*x);
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

impl PcaModel {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn k_max(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.dim..(i + 1) * self.dim]
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// Score of sample `j` on component `i`.
    pub fn score(&self, j: usize, i: usize) -> f64 {
        self.scores[j * self.k_max() + i]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k_max() {
            return Err(Error::InvalidArgument(format!(
                "component count {k} outside 1..={}",
                self.k_max()
            )));
        }
        Ok(())
    }

    fn expand(&self, scores_t: nalgebra::DMatrixView<'_, f64>, k: usize, ids: Vec<String>) -> Result<DataMatrix> {
        let n = scores_t.ncols();
        let w = DMatrix::from_column_slice(self.dim, k, &self.components[..k * self.dim]);
        let mut out = w * scores_t;
        for mut col in out.column_iter_mut() {
            col.iter_mut().zip(&self.mean).for_each(|(v, m)| *v += m);
        }
        // column-major d x n is row-major n x d
        DataMatrix::new(n, self.dim, out.as_slice().to_vec(), ids)
    }

    /// Reconstructs the training samples from the first `k` components:
    /// row `j` is `mean + Σ_{i<k} z_{j,i} w_i`. Values are not clamped.
    pub fn reconstruct(&self, k: usize) -> Result<DataMatrix> {
        self.check_k(k)?;
        let ids = (0..self.n_samples).map(|i| format!("r{i}")).collect();
        let zt = DMatrix::from_column_slice(self.k_max(), self.n_samples, &self.scores);
        self.expand(zt.rows(0, k), k, ids)
    }

    /// Projects arbitrary samples onto the first `k` components and maps them
    /// back. Used when the model was fitted on a subset of a dataset.
    pub fn reconstruct_samples(&self, x: &DataMatrix, k: usize) -> Result<DataMatrix> {
        self.check_k(k)?;
        if x.cols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "model has {} features, input has {}",
                self.dim,
                x.cols()
            )));
        }
        let centered_t = DMatrix::from_fn(self.dim, x.rows(), |j, i| x.row(i)[j] - self.mean[j]);
        let w = DMatrix::from_column_slice(self.dim, k, &self.components[..k * self.dim]);
        let zt = w.tr_mul(&centered_t);
        self.expand(zt.columns(0, x.rows()), k, x.row_ids().to_vec())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(UPM_MAGIC).map_err(io)?;
        w.write_all(&UPM_VERSION.to_le_bytes()).map_err(io)?;
        for v in [self.n_samples, self.dim, self.k_max()] {
            w.write_all(&(v as u64).to_le_bytes()).map_err(io)?;
        }
        for block in [&self.mean, &self.eigenvalues, &self.components, &self.scores] {
            for v in block.iter() {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<PcaModel> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let mut cur = ByteCursor::new(&bytes, "UPM1");
        if cur.take(4)? != UPM_MAGIC {
            return Err(Error::format("UPM1", "bad magic"));
        }
        let version = cur.u32()?;
        if version != UPM_VERSION {
            return Err(Error::format("UPM1", format!("unsupported version {version}")));
        }
        let n = cur.u64()? as usize;
        let d = cur.u64()? as usize;
        let k = cur.u64()? as usize;
        if n < 2 || k > (n - 1).min(d) {
            return Err(Error::format("UPM1", format!("inconsistent sizes n={n} d={d} k={k}")));
        }
        let mut block = |len: usize| -> Result<Vec<f64>> { (0..len).map(|_| cur.f64()).collect() };
        let mean = block(d)?;
        let eigenvalues = block(k)?;
        let components = block(k * d)?;
        let scores = block(n * k)?;
        if !cur.is_empty() {
            return Err(Error::format("UPM1", "trailing bytes"));
        }
        Ok(PcaModel {
            mean,
            components,
            eigenvalues,
            scores,
            n_samples: n,
            dim: d,
        })
    }
}
