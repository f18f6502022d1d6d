//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use mcmatch::payoff::{PayoffMode, PayoffParams, ProjectionForm};
use mcmatch::{Correspondence, CorrespondenceSet, Descriptor, ImageSize, Keypoint};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_affine(rng: &mut ChaCha8Rng) -> [[f64; 2]; 2] {
    let theta = rng.random_range(-0.5..0.5f64);
    let s = rng.random_range(0.7..1.4f64);
    let shear = rng.random_range(-0.2..0.2f64);
    let (c, sn) = (theta.cos(), theta.sin());
    [[s * c, s * (shear * c - sn)], [s * sn, s * (shear * sn + c)]]
}

fn inverse2(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

/// `n` correspondences with random positions in 200x200 images, random
/// invertible frames and `dim`-dimensional descriptors; ratios populated.
pub fn random_set(seed: u64, n: usize, dim: usize) -> CorrespondenceSet<f64> {
    let mut rng = rng(seed);
    let size = ImageSize::new(200, 200);
    let items = (0..n)
        .map(|i| {
            let a = random_affine(&mut rng);
            let left = Keypoint::new([rng.random_range(0.0..200.0), rng.random_range(0.0..200.0)], a);
            let right = Keypoint::new(
                [rng.random_range(0.0..200.0), rng.random_range(0.0..200.0)],
                inverse2(a),
            );
            let ld: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rd: Vec<f64> = ld.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
            Correspondence {
                index: i as u64 * 3 + 1,
                left,
                right,
                left_desc: Descriptor(ld),
                right_desc: Descriptor(rd),
                ratio: None,
            }
        })
        .collect();
    CorrespondenceSet::new(items, size, size, None)
        .unwrap()
        .with_ratios()
        .unwrap()
}

/// Homogeneous local transform of `c` as a 3x3 matrix.
fn local_transform(c: &Correspondence<f64>, form: ProjectionForm) -> [[f64; 3]; 3] {
    let a = c.left.affine;
    match form {
        // [A, k' - A k; 0 0 1]
        ProjectionForm::Offset => {
            let (k, kp) = (c.left.position, c.right.position);
            [
                [a[0][0], a[0][1], kp[0] - (a[0][0] * k[0] + a[0][1] * k[1])],
                [a[1][0], a[1][1], kp[1] - (a[1][0] * k[0] + a[1][1] * k[1])],
                [0.0, 0.0, 1.0],
            ]
        }
        ProjectionForm::Literal => {
            let k = c.left.position;
            [[a[0][0], a[0][1], k[0]], [a[1][0], a[1][1], k[1]], [0.0, 0.0, 1.0]]
        }
    }
}

fn project(t: &[[f64; 3]; 3], p: [f64; 2]) -> [f64; 2] {
    let v: Vec<f64> = (0..3).map(|r| t[r][0] * p[0] + t[r][1] * p[1] + t[r][2]).collect();
    [v[0] / v[2], v[1] / v[2]]
}

pub fn geo_oracle(ci: &Correspondence<f64>, cj: &Correspondence<f64>, p: &PayoffParams<f64>) -> f64 {
    let ti = local_transform(ci, p.projection);
    let tj = local_transform(cj, p.projection);
    let gap = |k: [f64; 2]| {
        let (a, b) = (project(&ti, k), project(&tj, k));
        (a[0] - b[0]).hypot(a[1] - b[1])
    };
    (-(gap(ci.left.position) + gap(cj.left.position)) / p.sigma).exp()
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn payoff_oracle(ci: &Correspondence<f64>, cj: &Correspondence<f64>, p: &PayoffParams<f64>) -> f64 {
    let rt = || (-(ci.ratio.unwrap().max(cj.ratio.unwrap())) / p.alpha).exp();
    match p.mode {
        PayoffMode::Geo => geo_oracle(ci, cj, p),
        PayoffMode::Rt => rt(),
        PayoffMode::Des => {
            let di = norm_diff(&ci.left_desc.0, &ci.right_desc.0);
            let dj = norm_diff(&cj.left_desc.0, &cj.right_desc.0);
            (-di.max(dj) / p.beta).exp()
        }
        PayoffMode::RtPlusGeo => geo_oracle(ci, cj, p) + rt(),
    }
}

/// Nearest over second-nearest distance by sorting every distance.
pub fn ratio_oracle(query: &[f64], rights: &[&[f64]]) -> f64 {
    let mut d: Vec<f64> = rights.iter().map(|r| norm_diff(query, r)).collect();
    d.sort_by(|a, b| a.total_cmp(b));
    if d[1] == 0.0 {
        1.0
    } else {
        (d[0] / d[1]).min(1.0)
    }
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Scans every bin boundary and keeps the first maximizer of
/// `w0 w1 (mu0 - mu1)^2` over bin centers, in exact rational arithmetic.
pub fn otsu_oracle(values: &[f64], bins: usize) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    if width == 0.0 {
        return lo;
    }
    let bin_of = |v: f64| (((v - lo) / width).floor() as usize).min(bins - 1);
    let mut counts = vec![0i64; bins];
    for &v in values {
        counts[bin_of(v)] += 1;
    }
    let zero = || BigRational::from_integer(BigInt::from(0));
    let total = BigRational::from_integer(BigInt::from(values.len()));
    let center = |b: usize| exact(lo) + (exact(b as f64) + exact(0.5)) * exact(width);
    let weighted: Vec<BigRational> = counts
        .iter()
        .enumerate()
        .map(|(b, &c)| BigRational::from_integer(c.into()) * center(b))
        .collect();
    let sum_all = weighted.iter().fold(zero(), |a, w| a + w);
    let (mut n0, mut s0) = (zero(), zero());
    let mut best: Option<(usize, BigRational)> = None;
    for k in 0..bins - 1 {
        n0 += BigRational::from_integer(counts[k].into());
        s0 += &weighted[k];
        let n1 = &total - &n0;
        if n0 == zero() || n1 == zero() {
            continue;
        }
        let mu = &s0 / &n0 - (&sum_all - &s0) / &n1;
        let var = (&n0 / &total) * (&n1 / &total) * &mu * mu;
        if best.as_ref().is_none_or(|(_, b)| var > *b) {
            best = Some((k, var));
        }
    }
    lo + (best.unwrap().0 + 1) as f64 * width
}

/// Block id by brute force: scan the cell bounds.
pub fn block_oracle(p: [f64; 2], size: ImageSize, rows: usize, cols: usize) -> usize {
    let cell = |extent: u32, n: usize, v: f64| {
        let w = (extent as usize / n).max(1);
        (0..n).rev().find(|&c| v >= (c * w) as f64).unwrap_or(0)
    };
    cell(size.height, rows, p[1]) * cols + cell(size.width, cols, p[0])
}

/// Well-conditioned random homography with a mild projective part.
pub fn random_homography(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let a = random_affine(rng);
    [
        [a[0][0], a[0][1], rng.random_range(-50.0..50.0)],
        [a[1][0], a[1][1], rng.random_range(-50.0..50.0)],
        [rng.random_range(-5e-4..5e-4), rng.random_range(-5e-4..5e-4), 1.0],
    ]
}

pub fn apply(h: &[[f64; 3]; 3], p: [f64; 2]) -> [f64; 2] {
    project(h, p)
}
