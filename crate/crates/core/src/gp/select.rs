//! Inducing-set maintenance: merging, block-inverse growth, greedy selection.

use nalgebra::{DMatrix, DVector};

use super::{dedup_by_location, kernel, GpError, Hyperparams, Sample, SINGULAR_THRESHOLD};
use crate::geometry::Point;

/// Union of own inducing points, buffered samples, and neighbor sets.
///
/// Order is own, buffer, then neighbors as given (callers pass them in
/// ascending agent index). The first occurrence of a location wins.
pub fn merge_inducing(own: &[Sample], buffer: &[Sample], neighbor_sets: &[&[Sample]]) -> Vec<Sample> {
    let chained = own.iter().chain(buffer).chain(neighbor_sets.iter().flat_map(|set| set.iter())).copied();
    dedup_by_location(chained)
}

struct Extension {
    inverse: DMatrix<f64>,
    /// `inv · k(Z, x)`.
    projected: DVector<f64>,
    schur: f64,
}

fn extend_parts(inv_gram: &DMatrix<f64>, cross: &DVector<f64>, diag: f64) -> Result<Extension, GpError> {
    let m = inv_gram.nrows();
    let projected = inv_gram * cross;
    let schur = diag - cross.dot(&projected);
    if schur.is_nan() || schur < SINGULAR_THRESHOLD {
        return Err(GpError::Singular(schur));
    }
    let mut inverse = DMatrix::zeros(m + 1, m + 1);
    for j in 0..m {
        for i in 0..m {
            inverse[(i, j)] = inv_gram[(i, j)] + projected[i] * projected[j] / schur;
        }
        inverse[(m, j)] = -projected[j] / schur;
        inverse[(j, m)] = -projected[j] / schur;
    }
    inverse[(m, m)] = 1.0 / schur;
    Ok(Extension { inverse, projected, schur })
}

/// Inverse of the regularized gram after appending `new_point`, by block
/// inversion in `O(m²)`.
///
/// Fails when the new Schur complement drops below [`SINGULAR_THRESHOLD`],
/// e.g. for a repeated location with zero noise.
pub fn smw_extend(
    inv_gram: &DMatrix<f64>,
    points: &[Point],
    new_point: &Point,
    hyper: &Hyperparams,
) -> Result<DMatrix<f64>, GpError> {
    if inv_gram.nrows() != points.len() || inv_gram.ncols() != points.len() {
        return Err(GpError::DimensionMismatch { expected: points.len(), got: inv_gram.nrows() });
    }
    let cross = DVector::from_iterator(points.len(), points.iter().map(|z| kernel(z, new_point, hyper)));
    let diag = hyper.signal_variance + hyper.noise_variance;
    extend_parts(inv_gram, &cross, diag).map(|e| e.inverse)
}

/// Indices of the greedily selected candidates, in selection order.
pub fn greedy_select_indices(candidates: &[Point], capacity: usize, hyper: &Hyperparams) -> Vec<usize> {
    greedy_with_inverse(candidates, capacity, hyper).0
}

/// Picks up to `capacity` candidates, each time the one with the largest
/// posterior variance given those already picked.
///
/// Under capacity the input is returned unchanged. Ties go to the lowest
/// candidate index; candidates whose addition would make the gram singular
/// are dropped.
pub fn greedy_select(candidates: &[Sample], capacity: usize, hyper: &Hyperparams) -> Vec<Sample> {
    let points: Vec<Point> = candidates.iter().map(|s| s.point).collect();
    greedy_select_indices(&points, capacity, hyper).into_iter().map(|i| candidates[i]).collect()
}

pub(crate) fn greedy_with_inverse(
    candidates: &[Point],
    capacity: usize,
    hyper: &Hyperparams,
) -> (Vec<usize>, Option<DMatrix<f64>>) {
    let n = candidates.len();
    if n <= capacity {
        return ((0..n).collect(), None);
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Status {
        Open,
        Taken,
        Dropped,
    }

    let mut status = vec![Status::Open; n];
    let mut selected = Vec::with_capacity(capacity);
    let mut inv = DMatrix::<f64>::zeros(0, 0);
    // Column u holds k(Z, u) for the current selection Z.
    let mut cross: Vec<Vec<f64>> = vec![Vec::with_capacity(capacity); n];
    let mut variance = vec![hyper.signal_variance; n];

    while selected.len() < capacity {
        let mut best: Option<usize> = None;
        for u in 0..n {
            if status[u] == Status::Open && best.is_none_or(|b| variance[u] > variance[b]) {
                best = Some(u);
            }
        }
        let Some(x) = best else { break };

        let b = DVector::from_column_slice(&cross[x]);
        let diag = hyper.signal_variance + hyper.noise_variance;
        let ext = match extend_parts(&inv, &b, diag) {
            Ok(ext) => ext,
            Err(_) => {
                status[x] = Status::Dropped;
                continue;
            }
        };

        status[x] = Status::Taken;
        selected.push(x);
        let xp = candidates[x];
        for u in 0..n {
            let kxu = kernel(&xp, &candidates[u], hyper);
            if status[u] == Status::Open {
                let proj: f64 = cross[u].iter().zip(ext.projected.iter()).map(|(a, b)| a * b).sum();
                let r = proj - kxu;
                variance[u] -= r * r / ext.schur;
            }
            cross[u].push(kxu);
        }
        inv = ext.inverse;
    }
    (selected, Some(inv))
}
