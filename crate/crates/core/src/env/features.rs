use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// A state-action feature map `phi(s, a)` with `||phi||_2 <= 1`.
pub trait FeatureMap: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, state: usize, action: usize) -> Vec<f64>;

    /// Cache key: pairs with equal keys must have equal embeddings.
    fn key(&self, state: usize, action: usize) -> u64;
}

impl<F: FeatureMap + ?Sized> FeatureMap for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, state: usize, action: usize) -> Vec<f64> {
        (**self).embed(state, action)
    }

    fn key(&self, state: usize, action: usize) -> u64 {
        (**self).key(state, action)
    }
}

/// One-hot encoding of a tabular `(s, a)` pair.
#[derive(Debug, Clone, Copy)]
pub struct TabularOneHot {
    pub num_states: usize,
    pub num_actions: usize,
}

impl FeatureMap for TabularOneHot {
    fn dim(&self) -> usize {
        self.num_states * self.num_actions
    }

    fn embed(&self, state: usize, action: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        v[state * self.num_actions + action] = 1.0;
        v
    }

    fn key(&self, state: usize, action: usize) -> u64 {
        (state * self.num_actions + action) as u64
    }
}

/// Orthogonal projector onto the span of an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    basis: DMatrix<f64>,
}

impl Projector {
    /// Wraps a `d x k` basis, checking orthonormality within `1e-8`.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
        if err > 1e-8 {
            return Err(Error::InvalidParams(format!("basis columns are not orthonormal (error {err:.2e})")));
        }
        Ok(Self { basis })
    }

    /// Projector onto the coordinate axes `range` of `R^dim`.
    pub fn coordinate(dim: usize, range: std::ops::Range<usize>) -> Self {
        let mut basis = DMatrix::zeros(dim, range.len());
        for (j, i) in range.enumerate() {
            basis[(i, j)] = 1.0;
        }
        Self { basis }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Coordinates `B^T v` in the subspace basis.
    pub fn coords(&self, v: &[f64]) -> DVector<f64> {
        self.basis.tr_mul(&DVector::from_column_slice(v))
    }

    /// `P v = B B^T v` in the ambient space.
    pub fn project(&self, v: &[f64]) -> DVector<f64> {
        &self.basis * self.coords(v)
    }

    /// Splits into the projectors onto the first `k` basis vectors and the
    /// remaining ones.
    pub fn split(&self, k: usize) -> Result<(Projector, Projector)> {
        if k > self.rank() {
            return Err(Error::RankDeficient {
                requested: k,
                achievable: self.rank(),
            });
        }
        let head = self.basis.columns(0, k).into_owned();
        let tail = self.basis.columns(k, self.rank() - k).into_owned();
        Ok((Projector { basis: head }, Projector { basis: tail }))
    }
}

/// Top-`k` principal directions of the rows of `features` (`n x d`).
///
/// These are the top left singular vectors of the `d x n` data matrix,
/// obtained from the symmetric eigendecomposition of `Phi^T Phi`. Ties
/// between equal singular values keep the eigensolver's order, and each
/// vector's sign is fixed so that its largest-magnitude entry is positive.
pub fn svd_projector(features: &DMatrix<f64>, k: usize) -> Result<Projector> {
    gram_projector(features.tr_mul(features), features.nrows(), k)
}

/// Same as [`svd_projector`] from an already accumulated `Phi^T Phi` over
/// `num_rows` samples.
pub fn gram_projector(gram: DMatrix<f64>, num_rows: usize, k: usize) -> Result<Projector> {
    let d = gram.ncols();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let top = order.first().map_or(0.0, |&i| eig.eigenvalues[i]).max(0.0);
    let tol = top * 1e-10 * num_rows.max(d) as f64;
    let achievable = order.iter().filter(|&&i| eig.eigenvalues[i] > tol).count();
    if top == 0.0 || achievable < k {
        return Err(Error::RankDeficient {
            requested: k,
            achievable: if top == 0.0 { 0 } else { achievable },
        });
    }
    let mut basis = DMatrix::zeros(d, k);
    for (j, &i) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        basis.set_column(j, &v);
    }
    Projector::new(basis)
}

/// Features of an inner map expressed in the coordinates of a projector.
#[derive(Debug, Clone)]
pub struct Projected<F> {
    pub inner: F,
    pub projector: Projector,
}

impl<F: FeatureMap> FeatureMap for Projected<F> {
    fn dim(&self) -> usize {
        self.projector.rank()
    }

    fn embed(&self, state: usize, action: usize) -> Vec<f64> {
        self.projector.coords(&self.inner.embed(state, action)).as_slice().to_vec()
    }

    fn key(&self, state: usize, action: usize) -> u64 {
        self.inner.key(state, action)
    }
}
