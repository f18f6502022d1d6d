//! Domain types for putative correspondences and selection results.
//!
//! Everything here is validated on construction and immutable afterwards.
//! Files are read and written through [`load_correspondences`],
//! [`save_correspondences`], [`load_result`] and [`save_result`]; paths ending
//! in `.json` use the structured document form, anything else the line
//! oriented `MCORR` / `MRES` records.

mod document;
mod text;

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{euclidean, Real};

pub use text::{read_correspondences, read_result, write_correspondences, write_result};

/// Keypoint with its local affine frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint<T> {
    pub position: [T; 2],
    /// Row-major 2x2 frame describing the local deformation around `position`.
    pub affine: [[T; 2]; 2],
}

impl<T: Real> Keypoint<T> {
    pub fn new(position: [T; 2], affine: [[T; 2]; 2]) -> Self {
        Self { position, affine }
    }

    /// Keypoint with an identity frame.
    pub fn at(x: T, y: T) -> Self {
        Self::new([x, y], [[T::one(), T::zero()], [T::zero(), T::one()]])
    }

    pub fn affine_det(&self) -> T {
        let a = &self.affine;
        a[0][0] * a[1][1] - a[0][1] * a[1][0]
    }

    fn check(&self, index: u64, size: ImageSize, side: &str) -> Result<()> {
        let [x, y] = self.position;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid(Some(index), format!("{side} position not finite")));
        }
        if !size.contains(x, y) {
            return Err(Error::invalid(
                Some(index),
                format!(
                    "{side} position out of bounds ({x}, {y}) for {}x{}",
                    size.width, size.height
                ),
            ));
        }
        if self.affine.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid(Some(index), format!("{side} affine not finite")));
        }
        if self.affine_det() == T::zero() {
            return Err(Error::invalid(Some(index), format!("{side} affine is singular")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Descriptor<T>(pub Vec<T>);

impl<T: Real> Descriptor<T> {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn distance(&self, other: &Self) -> T {
        euclidean(&self.0, &other.0)
    }
}

/// One putative match between the left and right images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence<T> {
    pub index: u64,
    pub left: Keypoint<T>,
    pub right: Keypoint<T>,
    pub left_desc: Descriptor<T>,
    pub right_desc: Descriptor<T>,
    /// Nearest to second-nearest descriptor distance ratio, `None` until computed.
    pub ratio: Option<T>,
}

impl<T: Real> Correspondence<T> {
    /// Correspondence with identity frames, empty descriptors and ratio zero.
    pub fn from_points(index: u64, left: [T; 2], right: [T; 2]) -> Self {
        Self {
            index,
            left: Keypoint::at(left[0], left[1]),
            right: Keypoint::at(right[0], right[1]),
            left_desc: Descriptor::default(),
            right_desc: Descriptor::default(),
            ratio: Some(T::zero()),
        }
    }

    /// Distance between the two matched descriptors.
    pub fn descriptor_distance(&self) -> T {
        self.left_desc.distance(&self.right_desc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    /// Closed bounds: `0 <= x <= width`, `0 <= y <= height`.
    pub fn contains<T: Real>(&self, x: T, y: T) -> bool {
        let w = T::from_u32(self.width).unwrap_or_else(T::infinity);
        let h = T::from_u32(self.height).unwrap_or_else(T::infinity);
        x >= T::zero() && y >= T::zero() && x <= w && y <= h
    }
}

/// Ground-truth label attached to one correspondence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TruthLabel {
    Outlier,
    Unknown,
    Consistency(u32),
}

impl TruthLabel {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            -1 => Some(TruthLabel::Outlier),
            -2 => Some(TruthLabel::Unknown),
            c if c >= 0 && c <= u32::MAX as i64 => Some(TruthLabel::Consistency(c as u32)),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        match self {
            TruthLabel::Outlier => -1,
            TruthLabel::Unknown => -2,
            TruthLabel::Consistency(c) => c as i64,
        }
    }
}

/// Validated, immutable set of putative correspondences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrespondenceSet<T> {
    items: Vec<Correspondence<T>>,
    left_size: ImageSize,
    right_size: ImageSize,
    truth: Vec<TruthLabel>,
}

impl<T: Real> CorrespondenceSet<T> {
    /// Builds and validates a set. `truth` is aligned with `items`; pass
    /// `None` when no labels are known.
    pub fn new(
        items: Vec<Correspondence<T>>,
        left_size: ImageSize,
        right_size: ImageSize,
        truth: Option<Vec<TruthLabel>>,
    ) -> Result<Self> {
        let truth = truth.unwrap_or_else(|| vec![TruthLabel::Unknown; items.len()]);
        if truth.len() != items.len() {
            return Err(Error::invalid(
                None,
                format!(
                    "{} ground-truth labels for {} correspondences",
                    truth.len(),
                    items.len()
                ),
            ));
        }
        let dim = items.first().map(|c| c.left_desc.dim()).unwrap_or(0);
        let mut seen = HashSet::with_capacity(items.len());
        for c in &items {
            if !seen.insert(c.index) {
                return Err(Error::invalid(Some(c.index), "duplicate index"));
            }
            c.left.check(c.index, left_size, "left")?;
            c.right.check(c.index, right_size, "right")?;
            for d in [&c.left_desc, &c.right_desc] {
                if d.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        index: c.index,
                        expected: dim,
                        found: d.dim(),
                    });
                }
                if d.0.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(Some(c.index), "descriptor not finite"));
                }
            }
            if let Some(r) = c.ratio {
                if !(r >= T::zero() && r <= T::one()) {
                    return Err(Error::invalid(Some(c.index), format!("ratio {r} outside [0, 1]")));
                }
            }
        }
        check_contiguous(truth.iter().copied())?;
        Ok(Self {
            items,
            left_size,
            right_size,
            truth,
        })
    }

    pub fn items(&self) -> &[Correspondence<T>] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn left_size(&self) -> ImageSize {
        self.left_size
    }

    pub fn right_size(&self) -> ImageSize {
        self.right_size
    }

    pub fn descriptor_dim(&self) -> usize {
        self.items.first().map(|c| c.left_desc.dim()).unwrap_or(0)
    }

    /// Per-item labels, `None` when every label is unknown.
    pub fn ground_truth(&self) -> Option<&[TruthLabel]> {
        if self.truth.iter().all(|l| *l == TruthLabel::Unknown) {
            None
        } else {
            Some(&self.truth)
        }
    }

    /// Labels including unknowns, always aligned with [`items`](Self::items).
    pub fn truth_labels(&self) -> &[TruthLabel] {
        &self.truth
    }

    pub fn ratios_populated(&self) -> bool {
        self.items.iter().all(|c| c.ratio.is_some())
    }

    /// Fills every missing ratio from the global descriptor sets.
    pub fn with_ratios(mut self) -> Result<Self> {
        if self.ratios_populated() {
            return Ok(self);
        }
        let rights: Vec<&[T]> = self.items.iter().map(|c| c.right_desc.as_slice()).collect();
        let computed: Vec<Option<T>> = self
            .items
            .par_iter()
            .map(|c| match c.ratio {
                Some(_) => Ok(None),
                None => crate::payoff::ratio_score(c.left_desc.as_slice(), &rights).map(Some),
            })
            .collect::<Result<_>>()?;
        for (c, r) in self.items.iter_mut().zip(computed) {
            if let Some(r) = r {
                c.ratio = Some(r);
            }
        }
        Ok(self)
    }

    /// Position of the item with correspondence id `index`.
    pub fn position_of(&self, index: u64) -> Option<usize> {
        self.items.iter().position(|c| c.index == index)
    }
}

fn check_contiguous(labels: impl Iterator<Item = TruthLabel>) -> Result<()> {
    let mut ids: Vec<u32> = labels
        .filter_map(|l| match l {
            TruthLabel::Consistency(c) => Some(c),
            _ => None,
        })
        .collect();
    ids.sort_unstable();
    ids.dedup();
    if let Some((pos, &id)) = ids.iter().enumerate().find(|(pos, &id)| id as usize != *pos) {
        return Err(Error::invalid(
            None,
            format!("ground-truth consistency ids not contiguous from 0 (missing {pos}, found {id})"),
        ));
    }
    Ok(())
}

/// 3x3 projective transform from left to right image coordinates.
///
/// Always stored at canonical scale: the largest-magnitude entry is exactly 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Homography<T> {
    h: [[T; 3]; 3],
}

impl<T: Real> Homography<T> {
    /// Normalizes `h` to canonical scale.
    pub fn new(h: [[T; 3]; 3]) -> Result<Self> {
        if h.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid(None, "homography has non-finite entries"));
        }
        let mut pivot = T::zero();
        for &v in h.iter().flatten() {
            if v.abs() > pivot.abs() {
                pivot = v;
            }
        }
        if pivot == T::zero() {
            return Err(Error::invalid(None, "homography is zero"));
        }
        let mut out = h;
        for v in out.iter_mut().flatten() {
            *v /= pivot;
        }
        Ok(Self { h: out })
    }

    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            h: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    pub fn matrix(&self) -> &[[T; 3]; 3] {
        &self.h
    }

    /// Maps `p` through the transform; `None` when the homogeneous scale
    /// vanishes or the result is not finite.
    pub fn apply(&self, p: [T; 2]) -> Option<[T; 2]> {
        apply_matrix(&self.h, p)
    }

    pub fn inverse(&self) -> Option<Self> {
        let m = &self.h;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        // adjugate, transposed cofactors
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        Self::new(adj).ok()
    }

    /// Largest absolute entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.h
            .iter()
            .flatten()
            .zip(other.h.iter().flatten())
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

pub(crate) fn apply_matrix<T: Real>(h: &[[T; 3]; 3], p: [T; 2]) -> Option<[T; 2]> {
    let x = h[0][0] * p[0] + h[0][1] * p[1] + h[0][2];
    let y = h[1][0] * p[0] + h[1][1] * p[1] + h[1][2];
    let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
    if w == T::zero() {
        return None;
    }
    let out = [x / w, y / w];
    (out[0].is_finite() && out[1].is_finite()).then_some(out)
}

/// Predicted label of one correspondence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Outlier,
    /// Accepted without a consistency id (clustering skipped).
    Inlier,
    Cluster(u32),
}

impl Label {
    pub fn is_inlier(self) -> bool {
        !matches!(self, Label::Outlier)
    }

    pub fn code(self) -> i64 {
        match self {
            Label::Outlier => -1,
            Label::Inlier => -2,
            Label::Cluster(c) => c as i64,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            -1 => Some(Label::Outlier),
            -2 => Some(Label::Inlier),
            c if c >= 0 && c <= u32::MAX as i64 => Some(Label::Cluster(c as u32)),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub index: u64,
    pub label: Label,
}

/// Per-stage counts recorded by the pipeline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub blocks_kept: usize,
    pub game_survivors: usize,
    pub clusters_found: usize,
    pub recovered_inliers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult<T> {
    pub assignments: Vec<Assignment>,
    pub homographies: Vec<Homography<T>>,
    pub diagnostics: Diagnostics,
}

impl<T: Real> MatchResult<T> {
    pub fn empty() -> Self {
        Self {
            assignments: Vec::new(),
            homographies: Vec::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    /// Every correspondence of `set` labeled outlier.
    pub fn all_outliers(set: &CorrespondenceSet<T>) -> Self {
        Self {
            assignments: set
                .items()
                .iter()
                .map(|c| Assignment {
                    index: c.index,
                    label: Label::Outlier,
                })
                .collect(),
            homographies: Vec::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.homographies.len();
        for a in &self.assignments {
            if let Label::Cluster(c) = a.label {
                if c as usize >= k {
                    return Err(Error::invalid(
                        Some(a.index),
                        format!("cluster id {c} but only {k} homographies"),
                    ));
                }
            }
        }
        let mut seen = HashSet::with_capacity(self.assignments.len());
        if let Some(a) = self.assignments.iter().find(|a| !seen.insert(a.index)) {
            return Err(Error::invalid(Some(a.index), "duplicate index"));
        }
        Ok(())
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.assignments.iter().map(|a| a.label)
    }

    pub fn inlier_count(&self) -> usize {
        self.labels().filter(|l| l.is_inlier()).count()
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn load_correspondences<T>(path: impl AsRef<Path>) -> Result<CorrespondenceSet<T>>
where
    T: Real + for<'de> Deserialize<'de>,
{
    let path = path.as_ref();
    let src = read_file(path)?;
    if is_json(path) {
        document::parse_set(&src)
    } else {
        read_correspondences(&src)
    }
}

pub fn save_correspondences<T: Real + Serialize>(set: &CorrespondenceSet<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let out = if is_json(path) {
        document::render_set(set)?
    } else {
        write_correspondences(set)
    };
    write_file(path, &out)
}

pub fn load_result<T>(path: impl AsRef<Path>) -> Result<MatchResult<T>>
where
    T: Real + for<'de> Deserialize<'de>,
{
    let path = path.as_ref();
    let src = read_file(path)?;
    let result = if is_json(path) {
        serde_json::from_str::<MatchResult<T>>(&src)?
    } else {
        read_result(&src)?
    };
    result.validate()?;
    Ok(result)
}

/// Writes `result`, refusing results whose labels reference missing
/// homographies.
pub fn save_result<T: Real + Serialize>(result: &MatchResult<T>, path: impl AsRef<Path>) -> Result<()> {
    result.validate()?;
    let path = path.as_ref();
    let out = if is_json(path) {
        serde_json::to_string_pretty(result)?
    } else {
        write_result(result)
    };
    write_file(path, &out)
}
