//! Local non-cooperative matching games: replicator dynamics over a payoff
//! matrix followed by an adaptive Otsu cut on the resulting popularity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::BlockPair;
use crate::error::{Error, Result};
use crate::model::CorrespondenceSet;
use crate::payoff::{build_payoff_matrix, PayoffMatrix, PayoffParams};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub max_iters: usize,
    /// Stop once the infinity-norm step falls below this.
    pub tol: f64,
    pub otsu_bins: usize,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-6,
            otsu_bins: 256,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.otsu_bins < 2 {
            return Err(Error::Config("otsu_bins must be at least 2".into()));
        }
        Ok(())
    }
}

/// Point on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct PopularityVector<T> {
    pub q: Vec<T>,
    pub iterations: usize,
}

/// Population-average payoff `q^T M q`.
pub fn average_payoff<T: Real>(m: &PayoffMatrix<T>, q: &[T]) -> T {
    (0..m.len())
        .map(|i| q[i] * m.row(i).iter().zip(q).map(|(&a, &b)| a * b).sum::<T>())
        .sum()
}

pub fn ess_evolve<T: Real>(m: &PayoffMatrix<T>, cfg: &GameConfig) -> PopularityVector<T> {
    ess_evolve_observed(m, cfg, |_| {})
}

/// Replicator dynamics from the uniform start; `observe` sees the initial
/// vector and every iterate.
pub fn ess_evolve_observed<T: Real>(
    m: &PayoffMatrix<T>,
    cfg: &GameConfig,
    mut observe: impl FnMut(&[T]),
) -> PopularityVector<T> {
    let n = m.len();
    if n == 0 {
        return PopularityVector {
            q: Vec::new(),
            iterations: 0,
        };
    }
    let tol = T::lit(cfg.tol);
    let mut q = vec![T::one() / T::from_usize_lossy(n); n];
    let mut mq = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    observe(&q);
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        for (i, out) in mq.iter_mut().enumerate() {
            *out = m.row(i).iter().zip(&q).map(|(&a, &b)| a * b).sum();
        }
        let avg: T = q.iter().zip(&mq).map(|(&a, &b)| a * b).sum();
        if !(avg > T::zero()) {
            break;
        }
        for ((out, &qi), &fi) in next.iter_mut().zip(&q).zip(&mq) {
            *out = qi * fi / avg;
        }
        let total: T = next.iter().copied().sum();
        let mut step = T::zero();
        for (qi, &ni) in q.iter_mut().zip(&next) {
            let v = ni / total;
            step = step.max((v - *qi).abs());
            *qi = v;
        }
        iterations += 1;
        observe(&q);
        if step < tol {
            break;
        }
    }
    PopularityVector { q, iterations }
}

/// Equal-width histogram over `[min, max]`; returns per-bin counts, `min`
/// and the bin width. Values at `max` fall in the last bin.
pub fn histogram<T: Real>(values: &[T], bins: usize) -> (Vec<u64>, T, T) {
    let (lo, hi) = values.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let width = (hi - lo) / T::from_usize_lossy(bins);
    let mut counts = vec![0u64; bins];
    for &v in values {
        let b = if width > T::zero() {
            ((v - lo) / width).floor().to_usize().unwrap_or(0).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    (counts, lo, width)
}

// 128x64 -> 256 bit product as (high, low).
fn widening_mul(a: u128, b: u64) -> (u128, u128) {
    let (a_hi, a_lo) = (a >> 64, a & u64::MAX as u128);
    let p0 = a_lo * b as u128;
    let p1 = a_hi * b as u128;
    let (low, carry) = p0.overflowing_add(p1 << 64);
    ((p1 >> 64) + carry as u128, low)
}

/// Exact between-class variance score: `num / den` with
/// `num = (n1 s0 - n0 s1)^2`, `den = n0 n1`, proportional to
/// `w0 w1 (mu0 - mu1)^2` on bin-index levels.
#[derive(Clone, Copy, Debug)]
struct Separation {
    num: u128,
    den: u64,
}

impl Separation {
    fn new(n0: u64, s0: u128, n1: u64, s1: u128) -> Self {
        let diff = (n1 as i128 * s0 as i128 - n0 as i128 * s1 as i128).unsigned_abs();
        Self {
            num: diff * diff,
            den: n0 * n1,
        }
    }

    fn exceeds(&self, other: &Self) -> bool {
        widening_mul(self.num, other.den) > widening_mul(other.num, self.den)
    }
}

/// Otsu threshold over a `bins`-bin histogram of `values`: the upper boundary
/// of the last bin of the lower class maximizing between-class variance.
/// The first maximizer wins ties. All-equal input returns that value.
pub fn otsu_threshold<T: Real>(values: &[T], bins: usize) -> Result<T> {
    if values.is_empty() {
        return Err(Error::Degenerate("otsu threshold of empty input"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("otsu threshold of non-finite input"));
    }
    if bins < 2 {
        return Err(Error::Config("otsu_bins must be at least 2".into()));
    }
    let (counts, lo, width) = histogram(values, bins);
    if width == T::zero() {
        return Ok(lo);
    }
    let total_n: u64 = counts.iter().sum();
    let total_s: u128 = counts.iter().enumerate().map(|(b, &c)| b as u128 * c as u128).sum();
    let (mut n0, mut s0) = (0u64, 0u128);
    let mut best: Option<(usize, Separation)> = None;
    for (k, &c) in counts[..bins - 1].iter().enumerate() {
        n0 += c;
        s0 += k as u128 * c as u128;
        let n1 = total_n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let sep = Separation::new(n0, s0, n1, total_s - s0);
        if best.as_ref().is_none_or(|(_, b)| sep.exceeds(b)) {
            best = Some((k, sep));
        }
    }
    // min and max occupy different bins, so some split is always valid
    let (k, _) = best.expect("two occupied bins");
    Ok(lo + T::from_usize_lossy(k + 1) * width)
}

/// Plays one block pair's game and returns the surviving positions.
pub fn play_local_game<T: Real>(
    pair: &BlockPair,
    set: &CorrespondenceSet<T>,
    params: &PayoffParams<T>,
    cfg: &GameConfig,
) -> Result<Vec<usize>> {
    if pair.members.len() <= 1 {
        return Ok(pair.members.clone());
    }
    let m = build_payoff_matrix(set.items(), &pair.members, params)?;
    let pop = ess_evolve(&m, cfg);
    let first = pop.q[0];
    if pop.q.iter().all(|&v| v == first) {
        return Ok(pair.members.clone());
    }
    let threshold = otsu_threshold(&pop.q, cfg.otsu_bins)?;
    Ok(pair
        .members
        .iter()
        .zip(&pop.q)
        .filter(|(_, &q)| q > threshold)
        .map(|(&p, _)| p)
        .collect())
}

/// Plays every pair independently; survivors are concatenated in pair order.
pub fn play_all_games<T: Real>(
    pairs: &[BlockPair],
    set: &CorrespondenceSet<T>,
    params: &PayoffParams<T>,
    cfg: &GameConfig,
) -> Result<Vec<usize>> {
    let per_pair: Vec<Vec<usize>> = pairs
        .par_iter()
        .map(|p| play_local_game(p, set, params, cfg))
        .collect::<Result<_>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}
