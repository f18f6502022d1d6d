use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::homography::{collinearity, dlt, symmetric_transfer_error, PointPair};
use crate::error::{Error, Result};
use crate::model::Homography;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RansacParams {
    pub iterations: usize,
    /// Symmetric transfer tolerance, pixels.
    pub tolerance: f64,
    pub seed: u64,
    pub stream: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RansacFit<T> {
    pub homography: Homography<T>,
    /// Positions into the input slice, ascending.
    pub inliers: Vec<usize>,
}

struct Hypothesis<T> {
    h: Homography<T>,
    support: usize,
    cost: T,
}

fn score<T: Real>(h: Homography<T>, pairs: &[PointPair<T>], tol: T) -> Option<Hypothesis<T>> {
    let inv = h.inverse()?;
    let (mut support, mut cost) = (0, T::zero());
    for p in pairs {
        let e = symmetric_transfer_error(&h, &inv, p);
        if e <= tol {
            support += 1;
            cost += e;
        }
    }
    Some(Hypothesis { h, support, cost })
}

fn consensus<T: Real>(h: &Homography<T>, pairs: &[PointPair<T>], tol: T) -> Vec<usize> {
    let Some(inv) = h.inverse() else {
        return Vec::new();
    };
    (0..pairs.len())
        .filter(|&i| symmetric_transfer_error(h, &inv, &pairs[i]) <= tol)
        .collect()
}

fn well_spread<T: Real>(pts: [[T; 2]; 4]) -> bool {
    let min_area = T::lit(1e-6);
    [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
        .iter()
        .all(|&(a, b, c)| collinearity(pts[a], pts[b], pts[c]) > min_area)
}

/// Fixed-count RANSAC over 4-point samples. Samples are drawn up front from
/// a seeded stream and scored in parallel; the winner (largest support,
/// then lowest summed error, then earliest sample) is refit on its
/// consensus set.
pub fn ransac_homography<T: Real>(pairs: &[PointPair<T>], params: &RansacParams) -> Result<RansacFit<T>> {
    let n = pairs.len();
    if n < 4 {
        return Err(Error::Degenerate("homography needs at least 4 correspondences"));
    }
    let tol = T::lit(params.tolerance);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(params.stream);
    let draws = if n == 4 { 1 } else { params.iterations.max(1) };
    let samples: Vec<[usize; 4]> = (0..draws)
        .map(|_| {
            let s = sample(&mut rng, n, 4);
            [s.index(0), s.index(1), s.index(2), s.index(3)]
        })
        .collect();

    let scored: Vec<Option<Hypothesis<T>>> = samples
        .par_iter()
        .map(|s| {
            let sub = s.map(|i| pairs[i]);
            if !well_spread(sub.map(|p| p.0)) || !well_spread(sub.map(|p| p.1)) {
                return None;
            }
            score(dlt(&sub).ok()?, pairs, tol)
        })
        .collect();

    let mut best: Option<Hypothesis<T>> = None;
    for hyp in scored.into_iter().flatten() {
        let better = match &best {
            None => true,
            Some(b) => hyp.support > b.support || (hyp.support == b.support && hyp.cost < b.cost),
        };
        if better {
            best = Some(hyp);
        }
    }
    let best = best.ok_or(Error::Degenerate("every RANSAC sample was degenerate"))?;
    if best.support < 4 {
        return Err(Error::Degenerate("RANSAC consensus smaller than 4"));
    }

    let mut homography = best.h;
    let mut inliers = consensus(&homography, pairs, tol);
    for _ in 0..3 {
        let subset: Vec<PointPair<T>> = inliers.iter().map(|&i| pairs[i]).collect();
        let Ok(refit) = dlt(&subset) else { break };
        let next = consensus(&refit, pairs, tol);
        if next.len() < inliers.len() {
            break;
        }
        let stable = next == inliers;
        homography = refit;
        inliers = next;
        if stable {
            break;
        }
    }
    Ok(RansacFit { homography, inliers })
}
