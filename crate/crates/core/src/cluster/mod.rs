//! Anchor clustering over the candidate payoff matrix, per-cluster
//! homography estimation and reprojection-based inlier recovery.

pub mod homography;
pub mod ransac;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assignment, Correspondence, CorrespondenceSet, Diagnostics, Homography, Label, MatchResult};
use crate::payoff::{build_payoff_matrix, PayoffMatrix, PayoffParams};
use crate::scalar::Real;

pub use homography::{dlt, symmetric_transfer_error, transfer_error, PointPair};
pub use ransac::{ransac_homography, RansacFit, RansacParams};

/// Which anchor endpoints a correspondence must agree with to join a cluster.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    #[default]
    BothEndpoints,
    EitherEndpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub min_cluster_size: usize,
    /// Reprojection threshold `t` used for recovery, pixels.
    pub reproj_threshold: f64,
    pub ransac_iters: usize,
    /// Symmetric transfer tolerance inside RANSAC, pixels.
    pub ransac_tol: f64,
    pub max_outer_rounds: usize,
    pub membership: Membership,
    /// Fold a new cluster into an earlier one whose homography already
    /// explains most of its members.
    pub merge_redundant: bool,
    /// Rounds of refitting every homography on its recovered members and
    /// relabeling; 0 keeps the single recovery pass.
    pub refine_rounds: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            min_cluster_size: 4,
            reproj_threshold: 5.0,
            ransac_iters: 1000,
            ransac_tol: 3.0,
            max_outer_rounds: 20,
            membership: Membership::BothEndpoints,
            merge_redundant: true,
            refine_rounds: 5,
            seed: 0,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 4 {
            return Err(Error::Config("min_cluster_size must be at least 4".into()));
        }
        if !(self.reproj_threshold > 0.0) || !(self.ransac_tol > 0.0) {
            return Err(Error::Config("thresholds must be positive".into()));
        }
        if self.ransac_iters == 0 || self.max_outer_rounds == 0 {
            return Err(Error::Config(
                "ransac_iters and max_outer_rounds must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn ransac(&self, stream: u64) -> RansacParams {
        RansacParams {
            iterations: self.ransac_iters,
            tolerance: self.ransac_tol,
            seed: self.seed,
            stream,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyCluster<T> {
    /// Positions into the correspondence set, ascending.
    pub members: Vec<usize>,
    pub homography: Homography<T>,
}

impl<T> ConsistencyCluster<T> {
    pub fn inlier_count(&self) -> usize {
        self.members.len()
    }
}

/// Payoff matrix over every candidate at once, across block boundaries.
pub fn recompute_payoff_matrix<T: Real>(
    set: &CorrespondenceSet<T>,
    candidates: &[usize],
    params: &PayoffParams<T>,
) -> Result<PayoffMatrix<T>> {
    build_payoff_matrix(set.items(), candidates, params)
}

fn active_pairs<'a, T: Real>(
    m: &'a PayoffMatrix<T>,
    removed: &'a [bool],
) -> impl Iterator<Item = (usize, usize, T)> + 'a {
    (0..m.len()).filter(move |&i| !removed[i]).flat_map(move |i| {
        (i + 1..m.len())
            .filter(move |&j| !removed[j])
            .map(move |j| (i, j, m.get(i, j)))
    })
}

/// Midpoint of the largest and smallest active off-diagonal entries; `None`
/// when no entry is active.
pub fn cluster_threshold<T: Real>(m: &PayoffMatrix<T>, removed: &[bool]) -> Option<T> {
    let (lo, hi) = active_pairs(m, removed).fold(None, |acc: Option<(T, T)>, (_, _, v)| {
        Some(acc.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))))
    })?;
    Some((hi + lo) / T::lit(2.0))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Extraction {
    Cluster {
        anchor: (usize, usize),
        /// Matrix rows, ascending.
        members: Vec<usize>,
    },
    Terminate,
}

/// Seeds a cluster at the largest active entry (smallest `(i, j)` on ties)
/// and gathers every active row above the threshold against the anchor.
pub fn extract_cluster<T: Real>(
    m: &PayoffMatrix<T>,
    removed: &[bool],
    membership: Membership,
    min_size: usize,
) -> Extraction {
    let Some(tau) = cluster_threshold(m, removed) else {
        return Extraction::Terminate;
    };
    let mut anchor: Option<(usize, usize, T)> = None;
    for (i, j, v) in active_pairs(m, removed) {
        if anchor.is_none_or(|(_, _, best)| v > best) {
            anchor = Some((i, j, v));
        }
    }
    let Some((a, b, top)) = anchor else {
        return Extraction::Terminate;
    };
    if !(top > T::zero()) {
        return Extraction::Terminate;
    }
    let members: Vec<usize> = (0..m.len())
        .filter(|&k| {
            if k == a || k == b {
                return true;
            }
            if removed[k] {
                return false;
            }
            let (ra, rb) = (m.get(a, k) > tau, m.get(b, k) > tau);
            match membership {
                Membership::BothEndpoints => ra && rb,
                Membership::EitherEndpoint => ra || rb,
            }
        })
        .collect();
    if members.len() < min_size {
        return Extraction::Terminate;
    }
    Extraction::Cluster {
        anchor: (a, b),
        members,
    }
}

pub fn point_pair<T: Real>(c: &Correspondence<T>) -> PointPair<T> {
    (c.left.position, c.right.position)
}

/// RANSAC homography over `members` (positions into `set`).
pub fn estimate_homography<T: Real>(
    set: &CorrespondenceSet<T>,
    members: &[usize],
    cfg: &ClusterConfig,
    stream: u64,
) -> Result<RansacFit<T>> {
    let pairs: Vec<PointPair<T>> = members.iter().map(|&p| point_pair(&set.items()[p])).collect();
    let fit = ransac_homography(&pairs, &cfg.ransac(stream))?;
    Ok(RansacFit {
        homography: fit.homography,
        inliers: fit.inliers.iter().map(|&i| members[i]).collect(),
    })
}

pub fn reprojection_error<T: Real>(h: &Homography<T>, c: &Correspondence<T>) -> T {
    transfer_error(h, &point_pair(c))
}

/// Repeated anchor extraction over the candidate matrix until it runs dry,
/// a cluster comes out too small, or `max_outer_rounds` is reached.
/// Clusters whose homography cannot be estimated are dropped.
pub fn iterative_clustering<T: Real>(
    set: &CorrespondenceSet<T>,
    m: &PayoffMatrix<T>,
    cfg: &ClusterConfig,
) -> Vec<ConsistencyCluster<T>> {
    let threshold = T::lit(cfg.reproj_threshold);
    let mut removed = vec![false; m.len()];
    let mut clusters: Vec<ConsistencyCluster<T>> = Vec::new();
    for round in 0..cfg.max_outer_rounds {
        let rows = match extract_cluster(m, &removed, cfg.membership, cfg.min_cluster_size) {
            Extraction::Terminate => break,
            Extraction::Cluster { members, .. } => members,
        };
        for &r in &rows {
            removed[r] = true;
        }
        let members: Vec<usize> = rows.iter().map(|&r| m.members()[r]).collect();
        if cfg.merge_redundant {
            if let Some(existing) = clusters
                .iter_mut()
                .find(|c| explains(&c.homography, set, &members, threshold))
            {
                existing.members.extend_from_slice(&members);
                existing.members.sort_unstable();
                continue;
            }
        }
        let Ok(fit) = estimate_homography(set, &members, cfg, round as u64) else {
            continue;
        };
        clusters.push(ConsistencyCluster {
            members,
            homography: fit.homography,
        });
    }
    clusters
}

fn explains<T: Real>(h: &Homography<T>, set: &CorrespondenceSet<T>, members: &[usize], threshold: T) -> bool {
    let fit = members
        .iter()
        .filter(|&&p| reprojection_error(h, &set.items()[p]) < threshold)
        .count();
    2 * fit > members.len()
}

/// Labels every correspondence of `set` with the cluster of smallest
/// reprojection error below the threshold (lowest id on ties), else
/// outlier. Cluster member lists are replaced by the recovered assignment.
pub fn recover_inliers<T: Real>(
    set: &CorrespondenceSet<T>,
    clusters: &mut [ConsistencyCluster<T>],
    cfg: &ClusterConfig,
) -> MatchResult<T> {
    let threshold = T::lit(cfg.reproj_threshold);
    let labels: Vec<Label> = set
        .items()
        .par_iter()
        .map(|c| {
            let mut best: Option<(usize, T)> = None;
            for (id, cl) in clusters.iter().enumerate() {
                let e = reprojection_error(&cl.homography, c);
                if e < threshold && best.is_none_or(|(_, b)| e < b) {
                    best = Some((id, e));
                }
            }
            best.map_or(Label::Outlier, |(id, _)| Label::Cluster(id as u32))
        })
        .collect();
    for cl in clusters.iter_mut() {
        cl.members.clear();
    }
    for (pos, label) in labels.iter().enumerate() {
        if let Label::Cluster(id) = label {
            clusters[*id as usize].members.push(pos);
        }
    }
    let assignments: Vec<Assignment> = set
        .items()
        .iter()
        .zip(&labels)
        .map(|(c, &label)| Assignment { index: c.index, label })
        .collect();
    let recovered = labels.iter().filter(|l| l.is_inlier()).count();
    MatchResult {
        assignments,
        homographies: clusters.iter().map(|c| c.homography).collect(),
        diagnostics: Diagnostics {
            clusters_found: clusters.len(),
            recovered_inliers: recovered,
            ..Diagnostics::default()
        },
    }
}

/// Recovery followed by up to `refine_rounds` rounds of: refit each
/// homography on its recovered members by DLT, drop clusters whose members are
/// mostly explained by a larger cluster, drop clusters left with fewer than
/// `min_cluster_size` members, relabel. Stops early once nothing changes.
pub fn refine_clusters<T: Real>(
    set: &CorrespondenceSet<T>,
    clusters: &mut Vec<ConsistencyCluster<T>>,
    cfg: &ClusterConfig,
) -> MatchResult<T> {
    let threshold = T::lit(cfg.reproj_threshold);
    let mut result = recover_inliers(set, clusters, cfg);
    for _ in 0..cfg.refine_rounds {
        let mut changed = false;
        // recovered members already sit within the threshold, so a plain
        // least-squares fit is enough
        for c in clusters.iter_mut() {
            if c.members.len() < cfg.min_cluster_size {
                continue;
            }
            let pairs: Vec<PointPair<T>> = c.members.iter().map(|&p| point_pair(&set.items()[p])).collect();
            if let Ok(h) = dlt(&pairs) {
                if h != c.homography {
                    c.homography = h;
                    changed = true;
                }
            }
        }
        let before = clusters.len();
        if cfg.merge_redundant {
            let mut order: Vec<usize> = (0..clusters.len()).collect();
            order.sort_by_key(|&i| std::cmp::Reverse(clusters[i].members.len()));
            let mut keep: Vec<usize> = Vec::with_capacity(order.len());
            for i in order {
                let redundant = keep
                    .iter()
                    .any(|&k| explains(&clusters[k].homography, set, &clusters[i].members, threshold));
                if !redundant {
                    keep.push(i);
                }
            }
            keep.sort_unstable();
            let mut pos = 0;
            clusters.retain(|_| {
                let kept = keep.binary_search(&pos).is_ok();
                pos += 1;
                kept
            });
        }
        clusters.retain(|c| c.members.len() >= cfg.min_cluster_size);
        changed |= clusters.len() != before;
        result = recover_inliers(set, clusters, cfg);
        if !changed {
            break;
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ImageSize;

    fn sym(n: usize, f: impl Fn(usize, usize) -> f64) -> PayoffMatrix<f64> {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    v[i * n + j] = f(i.min(j), i.max(j));
                }
            }
        }
        PayoffMatrix::from_values(v, (0..n).collect()).unwrap()
    }

    #[test]
    fn threshold_midpoint() {
        let m = sym(2, |_, _| 0.2);
        assert_eq!(cluster_threshold(&m, &[false, false]), Some(0.2));
        let m = sym(3, |i, j| if (i, j) == (0, 1) { 1.0 } else { 0.2 });
        assert!((cluster_threshold(&m, &[false; 3]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(cluster_threshold(&m, &[true, true, false]), None);
    }

    #[test]
    fn dominant_clique_extracted() {
        let clique = [1usize, 3, 4, 6];
        let m = sym(8, |i, j| {
            if clique.contains(&i) && clique.contains(&j) {
                1.9
            } else {
                0.05 * ((i + j) % 3) as f64
            }
        });
        match extract_cluster(&m, &[false; 8], Membership::BothEndpoints, 4) {
            Extraction::Cluster { anchor, members } => {
                assert_eq!(anchor, (1, 3));
                assert_eq!(members, clique.to_vec());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_matrix_terminates() {
        let m = sym(5, |_, _| 0.0);
        assert_eq!(
            extract_cluster(&m, &[false; 5], Membership::BothEndpoints, 4),
            Extraction::Terminate
        );
    }

    #[test]
    fn tie_picks_lexicographic_anchor() {
        let m = sym(6, |i, j| if (i, j) == (2, 5) || (i, j) == (1, 4) { 1.5 } else { 1.0 });
        match extract_cluster(&m, &[false; 6], Membership::BothEndpoints, 2) {
            Extraction::Cluster { anchor, .. } => assert_eq!(anchor, (1, 4)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_cluster_terminates() {
        let m = sym(6, |i, j| if (i, j) == (0, 1) { 1.5 } else { 0.1 });
        assert_eq!(
            extract_cluster(&m, &[false; 6], Membership::BothEndpoints, 4),
            Extraction::Terminate
        );
    }

    fn shifted(index: u64, p: [f64; 2], d: [f64; 2]) -> Correspondence<f64> {
        Correspondence::from_points(index, p, [p[0] + d[0], p[1] + d[1]])
    }

    fn translation(dx: f64, dy: f64) -> Homography<f64> {
        Homography::new([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]]).unwrap()
    }

    #[test]
    fn recovery_labels_and_boundary() {
        let cfg = ClusterConfig::default();
        let t = cfg.reproj_threshold;
        let items = vec![
            shifted(10, [10.0, 10.0], [20.0, 0.0]),
            shifted(11, [30.0, 10.0], [0.0, 50.0]),
            shifted(12, [40.0, 40.0], [20.0 + t + 1e-9, 0.0]),
            shifted(13, [50.0, 40.0], [20.0 + t - 1e-9, 0.0]),
        ];
        let set = CorrespondenceSet::new(items, ImageSize::new(200, 200), ImageSize::new(200, 200), None).unwrap();
        let mut clusters = vec![
            ConsistencyCluster {
                members: vec![],
                homography: translation(20.0, 0.0),
            },
            ConsistencyCluster {
                members: vec![],
                homography: translation(0.0, 50.0),
            },
        ];
        let r = recover_inliers(&set, &mut clusters, &cfg);
        let labels: Vec<Label> = r.labels().collect();
        assert_eq!(
            labels,
            vec![Label::Cluster(0), Label::Cluster(1), Label::Outlier, Label::Cluster(0)]
        );
        assert_eq!(clusters[0].members, vec![0, 3]);
        assert_eq!(r.assignments[2].index, 12);

        // idempotent
        let again = recover_inliers(&set, &mut clusters, &cfg);
        assert_eq!(again, r);
    }

    #[test]
    fn recovery_without_clusters() {
        let set = CorrespondenceSet::new(
            vec![shifted(0, [1.0, 1.0], [1.0, 1.0])],
            ImageSize::new(10, 10),
            ImageSize::new(10, 10),
            None,
        )
        .unwrap();
        let r = recover_inliers(&set, &mut [], &ClusterConfig::default());
        assert!(r.homographies.is_empty());
        assert_eq!(r.assignments[0].label, Label::Outlier);
    }

    #[test]
    fn reprojection_examples() {
        let c = shifted(0, [0.0, 0.0], [3.0, 4.0]);
        assert_eq!(reprojection_error(&Homography::identity(), &c), 5.0);
        let c = shifted(0, [7.0, 2.0], [0.0, 0.0]);
        assert_eq!(reprojection_error(&Homography::identity(), &c), 0.0);
    }
}
