//! Normalized direct linear transform for homographies.

use crate::error::{Error, Result};
use crate::model::{apply_matrix, Homography};
use crate::scalar::{dist2, Real};

pub type PointPair<T> = ([T; 2], [T; 2]);

/// Similarity moving the centroid of `pts` to the origin with mean distance
/// `sqrt(2)`, as `(scale, cx, cy)`.
fn hartley<T: Real>(pts: impl Iterator<Item = [T; 2]> + Clone) -> Option<(T, T, T)> {
    let n = T::from_usize_lossy(pts.clone().count());
    let (sx, sy) = pts
        .clone()
        .fold((T::zero(), T::zero()), |(a, b), p| (a + p[0], b + p[1]));
    let (cx, cy) = (sx / n, sy / n);
    let mean = pts.map(|p| dist2(p, [cx, cy])).sum::<T>() / n;
    if !(mean > T::zero()) {
        return None;
    }
    Some((T::lit(2.0).sqrt() / mean, cx, cy))
}

/// Right singular vectors of the `rows x 9` matrix `a` (row-major) by
/// one-sided Jacobi rotations, returned with singular values ascending.
fn right_singular<T: Real>(a: &[[T; 9]]) -> (Vec<T>, [[T; 9]; 9]) {
    let m = a.len();
    // columns of A, rotated in place into A V
    let mut u: Vec<[T; 9]> = (0..m).map(|r| a[r]).collect();
    let mut v = [[T::zero(); 9]; 9];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let eps = T::epsilon();
    let frob2: T = a.iter().flatten().map(|&x| x * x).sum();
    // columns below this squared norm are numerically zero
    let negligible = eps * eps * frob2;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..8 {
            for q in p + 1..9 {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for row in &u {
                    alpha += row[p] * row[p];
                    beta += row[q] * row[q];
                    gamma += row[p] * row[q];
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for row in u.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
                for row in v.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<T> = (0..9)
        .map(|j| u.iter().map(|r| r[j] * r[j]).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| sigma[i].partial_cmp(&sigma[j]).unwrap_or(std::cmp::Ordering::Equal));
    let mut vs = [[T::zero(); 9]; 9];
    for (k, &j) in order.iter().enumerate() {
        for r in 0..9 {
            vs[k][r] = v[r][j];
        }
    }
    (order.iter().map(|&j| sigma[j]).collect(), vs)
}

/// Least-squares homography from at least four point pairs, with Hartley
/// normalization on both sides. Fails on rank-deficient configurations such
/// as collinear points.
pub fn dlt<T: Real>(pairs: &[PointPair<T>]) -> Result<Homography<T>> {
    if pairs.len() < 4 {
        return Err(Error::Degenerate("homography needs at least 4 correspondences"));
    }
    let (s1, cx1, cy1) = hartley(pairs.iter().map(|p| p.0)).ok_or(Error::Degenerate("coincident left points"))?;
    let (s2, cx2, cy2) = hartley(pairs.iter().map(|p| p.1)).ok_or(Error::Degenerate("coincident right points"))?;
    let (z, o) = (T::zero(), T::one());
    let rows: Vec<[T; 9]> = pairs
        .iter()
        .flat_map(|&(a, b)| {
            let (x, y) = ((a[0] - cx1) * s1, (a[1] - cy1) * s1);
            let (u, v) = ((b[0] - cx2) * s2, (b[1] - cy2) * s2);
            [
                [-x, -y, -o, z, z, z, u * x, u * y, u],
                [z, z, z, -x, -y, -o, v * x, v * y, v],
            ]
        })
        .collect();
    let (sigma, vs) = right_singular(&rows);
    let tol = T::epsilon().sqrt() * sigma[8];
    if !(sigma[1] > tol) {
        return Err(Error::Degenerate("point configuration does not fix a homography"));
    }
    let hn = &vs[0];
    let hn = [[hn[0], hn[1], hn[2]], [hn[3], hn[4], hn[5]], [hn[6], hn[7], hn[8]]];
    // H = T2^-1 * Hn * T1
    let t1 = [[s1, z, -s1 * cx1], [z, s1, -s1 * cy1], [z, z, o]];
    let t2_inv = [[o / s2, z, cx2], [z, o / s2, cy2], [z, z, o]];
    let h = matmul(&t2_inv, &matmul(&hn, &t1));
    let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    if det == T::zero() || !det.is_finite() {
        return Err(Error::Degenerate("singular homography"));
    }
    Homography::new(h)
}

pub(crate) fn matmul<T: Real>(a: &[[T; 3]; 3], b: &[[T; 3]; 3]) -> [[T; 3]; 3] {
    let mut out = [[T::zero(); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// One-directional left-to-right reprojection error; infinite when the
/// projection degenerates.
pub fn transfer_error<T: Real>(h: &Homography<T>, pair: &PointPair<T>) -> T {
    apply_matrix(h.matrix(), pair.0)
        .map(|p| dist2(p, pair.1))
        .unwrap_or_else(T::infinity)
}

/// Root mean square of forward and backward transfer errors.
pub fn symmetric_transfer_error<T: Real>(h: &Homography<T>, inv: &Homography<T>, pair: &PointPair<T>) -> T {
    let fwd = transfer_error(h, pair);
    let bwd = transfer_error(inv, &(pair.1, pair.0));
    ((fwd * fwd + bwd * bwd) / T::lit(2.0)).sqrt()
}

/// Twice the signed area of the triangle `abc`, relative to the squared
/// longest side.
pub(crate) fn collinearity<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2]) -> T {
    let area = ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs();
    let side = dist2(a, b).max(dist2(b, c)).max(dist2(a, c));
    if side == T::zero() {
        return T::zero();
    }
    area / (side * side)
}
