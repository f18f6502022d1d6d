//! Pairwise compatibility between correspondences and the dense payoff
//! matrices built from it.
//!
//! A correspondence's left affine frame is read as the local linear map from
//! the left image to the right image around its keypoint; the right frame is
//! the map in the opposite direction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Correspondence, CorrespondenceSet};
use crate::scalar::{dist2, euclidean, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PayoffMode {
    /// Geometric term only.
    Geo,
    /// Ratio-test term only.
    Rt,
    /// Matched-descriptor distance term only.
    Des,
    /// Geometric plus ratio-test terms.
    RtPlusGeo,
}

impl PayoffMode {
    pub fn needs_ratios(self) -> bool {
        matches!(self, PayoffMode::Rt | PayoffMode::RtPlusGeo)
    }

    /// Largest value one matrix entry can take.
    pub fn max_payoff<T: Real>(self) -> T {
        match self {
            PayoffMode::RtPlusGeo => T::lit(2.0),
            _ => T::one(),
        }
    }
}

impl std::str::FromStr for PayoffMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_', '+'], "").as_str() {
            "geo" | "dis" => Ok(PayoffMode::Geo),
            "rt" => Ok(PayoffMode::Rt),
            "des" => Ok(PayoffMode::Des),
            "rtgeo" | "rtplusgeo" | "rtdis" | "geort" => Ok(PayoffMode::RtPlusGeo),
            _ => Err(format!("unknown payoff mode {s:?} (geo, rt, des, rt+geo)")),
        }
    }
}

/// How a correspondence's affine frame projects another keypoint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectionForm {
    /// `A_j (k_i - k_j) + k_j'`: the frame acts on the offset from the
    /// source keypoint, so every correspondence maps its own keypoint onto
    /// its match.
    #[default]
    Offset,
    /// `A_j k_i + k_j`, the homogeneous product applied to the raw position.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffParams<T> {
    /// Geometric distance scale, pixels.
    pub sigma: T,
    /// Ratio-test scale.
    pub alpha: T,
    /// Matched-descriptor distance scale.
    pub beta: T,
    pub mode: PayoffMode,
    pub projection: ProjectionForm,
}

impl<T: Real> Default for PayoffParams<T> {
    fn default() -> Self {
        Self {
            sigma: T::lit(10.0),
            alpha: T::lit(0.5),
            beta: T::one(),
            mode: PayoffMode::RtPlusGeo,
            projection: ProjectionForm::Offset,
        }
    }
}

impl<T: Real> PayoffParams<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Half the median matched-descriptor distance over `set`, the default
    /// `beta`.
    pub fn auto_beta(set: &CorrespondenceSet<T>) -> T {
        let mut d: Vec<T> = set.items().iter().map(|c| c.descriptor_distance()).collect();
        if d.is_empty() {
            return T::one();
        }
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let mid = d.len() / 2;
        let median = if d.len() % 2 == 1 {
            d[mid]
        } else {
            (d[mid - 1] + d[mid]) / T::lit(2.0)
        };
        (median * T::lit(0.5)).max(T::epsilon())
    }
}

/// Dehomogenizes `[a1, a2, a3]`.
pub fn dehomogenize<T: Real>(v: [T; 3]) -> Option<[T; 2]> {
    if v[2] == T::zero() {
        return None;
    }
    let out = [v[0] / v[2], v[1] / v[2]];
    (out[0].is_finite() && out[1].is_finite()).then_some(out)
}

/// Projects `point` through the local transform of `source`. `None` when the
/// projection degenerates.
pub fn affine_project<T: Real>(source: &Correspondence<T>, point: [T; 2], form: ProjectionForm) -> Option<[T; 2]> {
    let a = &source.left.affine;
    let (offset, anchor) = match form {
        ProjectionForm::Offset => (
            [point[0] - source.left.position[0], point[1] - source.left.position[1]],
            source.right.position,
        ),
        ProjectionForm::Literal => (point, source.left.position),
    };
    dehomogenize([
        a[0][0] * offset[0] + a[0][1] * offset[1] + anchor[0],
        a[1][0] * offset[0] + a[1][1] * offset[1] + anchor[1],
        T::one(),
    ])
}

pub fn geometric_payoff<T: Real>(ci: &Correspondence<T>, cj: &Correspondence<T>, params: &PayoffParams<T>) -> T {
    let form = params.projection;
    let (ki, kj) = (ci.left.position, cj.left.position);
    let dist = |p: [T; 2]| -> Option<T> { Some(dist2(affine_project(ci, p, form)?, affine_project(cj, p, form)?)) };
    match (dist(ki), dist(kj)) {
        (Some(a), Some(b)) => (-(a + b) / params.sigma).exp(),
        _ => T::zero(),
    }
}

pub fn descriptive_payoff<T: Real>(ri: T, rj: T, params: &PayoffParams<T>) -> T {
    (-ri.max(rj) / params.alpha).exp()
}

pub fn des_payoff<T: Real>(ci: &Correspondence<T>, cj: &Correspondence<T>, params: &PayoffParams<T>) -> Result<T> {
    for c in [ci, cj] {
        if c.left_desc.dim() != c.right_desc.dim() {
            return Err(Error::DimensionMismatch {
                index: c.index,
                expected: c.left_desc.dim(),
                found: c.right_desc.dim(),
            });
        }
    }
    let d = ci.descriptor_distance().max(cj.descriptor_distance());
    Ok((-d / params.beta).exp())
}

/// Nearest over second-nearest distance from `query` to `rights`. Returns 1
/// when the second-nearest distance is zero.
pub fn ratio_score<T: Real>(query: &[T], rights: &[&[T]]) -> Result<T> {
    if rights.len() < 2 {
        return Err(Error::Degenerate("ratio test needs at least two right descriptors"));
    }
    let (mut d1, mut d2) = (T::infinity(), T::infinity());
    for r in rights {
        let d = euclidean(query, r);
        if d < d1 {
            d2 = d1;
            d1 = d;
        } else if d < d2 {
            d2 = d;
        }
    }
    if d2 == T::zero() {
        return Ok(T::one());
    }
    Ok((d1 / d2).min(T::one()))
}

fn ratio_of<T: Real>(c: &Correspondence<T>) -> Result<T> {
    c.ratio
        .ok_or_else(|| Error::invalid(Some(c.index), "ratio not populated"))
}

/// One off-diagonal matrix entry under `params.mode`.
pub fn pair_payoff<T: Real>(ci: &Correspondence<T>, cj: &Correspondence<T>, params: &PayoffParams<T>) -> Result<T> {
    Ok(match params.mode {
        PayoffMode::Geo => geometric_payoff(ci, cj, params),
        PayoffMode::Rt => descriptive_payoff(ratio_of(ci)?, ratio_of(cj)?, params),
        PayoffMode::Des => des_payoff(ci, cj, params)?,
        PayoffMode::RtPlusGeo => {
            geometric_payoff(ci, cj, params) + descriptive_payoff(ratio_of(ci)?, ratio_of(cj)?, params)
        }
    })
}

/// Dense symmetric payoff matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffMatrix<T> {
    n: usize,
    values: Vec<T>,
    members: Vec<usize>,
}

impl<T: Real> PayoffMatrix<T> {
    /// Wraps raw row-major values. The matrix must be square, symmetric,
    /// nonnegative and zero on the diagonal.
    pub fn from_values(values: Vec<T>, members: Vec<usize>) -> Result<Self> {
        let n = members.len();
        if values.len() != n * n {
            return Err(Error::invalid(
                None,
                format!("{} values for a {n}x{n} matrix", values.len()),
            ));
        }
        for i in 0..n {
            if values[i * n + i] != T::zero() {
                return Err(Error::invalid(None, "payoff diagonal must be zero"));
            }
            for j in 0..i {
                let v = values[i * n + j];
                if !(v >= T::zero() && v.is_finite()) || v != values[j * n + i] {
                    return Err(Error::invalid(
                        None,
                        "payoff entries must be finite, nonnegative, symmetric",
                    ));
                }
            }
        }
        Ok(Self { n, values, members })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Positions (into the originating correspondence set) of rows.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Builds the payoff matrix over `members`, positions into `items`.
pub fn build_payoff_matrix<T: Real>(
    items: &[Correspondence<T>],
    members: &[usize],
    params: &PayoffParams<T>,
) -> Result<PayoffMatrix<T>> {
    let n = members.len();
    let upper: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ci = &items[members[i]];
            (i + 1..n)
                .map(|j| pair_payoff(ci, &items[members[j]], params))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = vec![T::zero(); n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(PayoffMatrix {
        n,
        values,
        members: members.to_vec(),
    })
}
