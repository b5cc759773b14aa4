//! Per-type feature summaries, centroid costs and the built-in reducers.
//!
//! Costs are squared distances between per-type centroids pooled over all
//! time points. Projections are linear, so the centroid of projected cells
//! is the projection of the raw centroid. A [`FeatureSummary`] therefore only
//! keeps per-type sums and the pooled Gram matrix, never the cells.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uot::CostMatrix;

const POWER_ITERS: usize = 1000;
const POWER_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Reducer {
    /// Use the raw features.
    Identity,
    /// Project onto the leading principal axes of the pooled covariance.
    PrincipalAxes { components: usize },
}

impl Default for Reducer {
    fn default() -> Self {
        Reducer::PrincipalAxes { components: 2 }
    }
}

/// Streaming per-type sums and pooled second moments.
#[derive(Debug, Clone)]
pub struct FeatureSummary {
    counts: Vec<usize>,
    /// `d × p` per-type feature sums.
    sums: DMatrix<f64>,
    /// `p × p` sum of `x xᵀ` over all cells.
    gram: DMatrix<f64>,
}

impl FeatureSummary {
    pub fn new(d: usize, width: usize) -> Self {
        Self {
            counts: vec![0; d],
            sums: DMatrix::zeros(d, width),
            gram: DMatrix::zeros(width, width),
        }
    }

    pub fn width(&self) -> usize {
        self.gram.nrows()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn add(&mut self, label: usize, features: &[f64]) {
        let x = DVector::from_column_slice(features);
        self.counts[label] += 1;
        let mut row = self.sums.row_mut(label);
        row += x.transpose();
        self.gram.ger(1.0, &x, &x, 1.0);
    }

    /// Adds a block of cells, one row of `features` per label.
    pub fn add_block(&mut self, labels: &[usize], features: &DMatrix<f64>) {
        for (i, &l) in labels.iter().enumerate() {
            self.counts[l] += 1;
            let mut row = self.sums.row_mut(l);
            row += features.row(i);
        }
        self.gram.gemm_tr(1.0, features, features, 1.0);
    }

    /// Types never observed, zero-based.
    pub fn missing(&self) -> Vec<usize> {
        (0..self.counts.len())
            .filter(|&j| self.counts[j] == 0)
            .collect()
    }

    /// Raw per-type centroids; fails with a coverage error naming absent types.
    pub fn centroids(&self, names: &dyn Fn(usize) -> String) -> Result<Vec<Vec<f64>>> {
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(Error::Coverage(missing.into_iter().map(names).collect()));
        }
        Ok((0..self.counts.len())
            .map(|j| {
                self.sums
                    .row(j)
                    .iter()
                    .map(|s| s / self.counts[j] as f64)
                    .collect()
            })
            .collect())
    }

    /// Pooled covariance of all cells.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n: usize = self.counts.iter().sum();
        let n = n.max(1) as f64;
        let mean = self.sums.row_sum().transpose() / n;
        &self.gram / n - &mean * mean.transpose()
    }

    /// Centroids after applying `reducer`.
    pub fn reduced_centroids(
        &self,
        reducer: Reducer,
        names: &dyn Fn(usize) -> String,
    ) -> Result<Vec<Vec<f64>>> {
        let raw = self.centroids(names)?;
        match reducer {
            Reducer::Identity => Ok(raw),
            Reducer::PrincipalAxes { components } => {
                if components == 0 {
                    return Err(Error::Config("reducer needs at least one component".into()));
                }
                let axes = principal_axes(&self.covariance(), components.min(self.width()));
                Ok(raw
                    .iter()
                    .map(|c| {
                        let c = DVector::from_column_slice(c);
                        axes.iter().map(|a| a.dot(&c)).collect()
                    })
                    .collect())
            }
        }
    }

    pub fn cost(&self, reducer: Reducer, names: &dyn Fn(usize) -> String) -> Result<CostMatrix> {
        cost_from_centroids(&self.reduced_centroids(reducer, names)?)
    }
}

/// `m_jk = ‖ζ_j − ζ_k‖²`, filled symmetrically.
pub fn cost_from_centroids(centroids: &[Vec<f64>]) -> Result<CostMatrix> {
    let d = centroids.len();
    if d < 2 {
        return Err(Error::Input(format!("need at least 2 centroids, got {d}")));
    }
    let width = centroids[0].len();
    if centroids.iter().any(|c| c.len() != width) {
        return Err(Error::Input(
            "centroids have inconsistent dimensions".into(),
        ));
    }
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        for k in j + 1..d {
            let v: f64 = centroids[j]
                .iter()
                .zip(&centroids[k])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    CostMatrix::new(m)
}

/// Leading eigenvectors of a symmetric PSD matrix by power iteration with
/// deflation. Deterministic: fixed start vector and iteration count bound.
pub fn principal_axes(cov: &DMatrix<f64>, k: usize) -> Vec<DVector<f64>> {
    let p = cov.nrows();
    let mut a = cov.clone();
    let mut axes = Vec::with_capacity(k);
    for c in 0..k {
        let mut v = DVector::from_fn(p, |i, _| 1.0 + ((i + c) % p) as f64 / p as f64);
        for prev in &axes {
            let prev: &DVector<f64> = prev;
            v -= prev * prev.dot(&v);
        }
        v.normalize_mut();
        let mut value = 0.0;
        for _ in 0..POWER_ITERS {
            let mut w = &a * &v;
            let norm = w.norm();
            if norm == 0.0 {
                break;
            }
            w /= norm;
            // Fix the sign so the iteration cannot flip between ±v.
            if w.dot(&v) < 0.0 {
                w = -w;
            }
            let change = (&w - &v).amax();
            v = w;
            value = norm;
            if change < POWER_TOL {
                break;
            }
        }
        // Canonical sign: largest-magnitude entry positive.
        if v[v.iamax()] < 0.0 {
            v = -v;
        }
        a -= &v * v.transpose() * value;
        axes.push(v);
    }
    axes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(j: usize) -> String {
        format!("t{j}")
    }

    #[test]
    fn centroid_cost_examples() {
        let m = cost_from_centroids(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.get(0, 1), 25.0);
        let m = cost_from_centroids(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(m.max_entry(), 0.0);
    }

    #[test]
    fn coverage_error_lists_missing_types() {
        let mut s = FeatureSummary::new(3, 1);
        s.add(1, &[2.0]);
        match s.centroids(&name) {
            Err(Error::Coverage(v)) => assert_eq!(v, vec!["t0", "t2"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn block_and_single_updates_agree() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 2.0, 2.0, 1.0, -1.0]);
        let labels = [0, 0, 1];
        let mut a = FeatureSummary::new(2, 2);
        a.add_block(&labels, &x);
        let mut b = FeatureSummary::new(2, 2);
        for (i, &l) in labels.iter().enumerate() {
            b.add(l, &[x[(i, 0)], x[(i, 1)]]);
        }
        assert_eq!(
            a.centroids(&name).unwrap(),
            vec![vec![1.0, 1.0], vec![1.0, -1.0]]
        );
        assert_eq!(a.covariance(), b.covariance());
    }

    #[test]
    fn power_iteration_recovers_known_axes() {
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, 3.0]));
        let axes = principal_axes(&cov, 2);
        assert!((axes[0][1].abs() - 1.0).abs() < 1e-9);
        assert!((axes[1][2].abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projection_preserves_collinear_distances() {
        // Type means on the diagonal of the plane: the first axis captures all
        // between-type spread.
        let mut s = FeatureSummary::new(2, 2);
        for _ in 0..10 {
            s.add(0, &[0.0, 0.0]);
            s.add(1, &[3.0, 3.0]);
        }
        let m = s
            .cost(Reducer::PrincipalAxes { components: 1 }, &name)
            .unwrap();
        assert!((m.get(0, 1) - 18.0).abs() < 1e-9);
        let m = s.cost(Reducer::Identity, &name).unwrap();
        assert!((m.get(0, 1) - 18.0).abs() < 1e-12);
    }
}
