//! Synthetic multi-consistency scenes with exact ground truth.
//!
//! Each consistency is a compact rectangle in the left image mapped to the
//! right image by its own homography. Inliers carry the homography's local
//! Jacobian as affine frame; outliers are uniform in both images.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cluster::homography::matmul;
use crate::error::{Error, Result};
use crate::model::{
    Assignment, Correspondence, CorrespondenceSet, Descriptor, Homography, ImageSize, Keypoint, Label, MatchResult,
    TruthLabel,
};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Number of consistencies.
    pub k: usize,
    pub inliers_per: usize,
    /// Fraction of the whole set that is outliers.
    pub outlier_ratio: f64,
    /// Gaussian noise on right inlier keypoints, pixels.
    pub noise_sigma: f64,
    pub image_size: ImageSize,
    pub descriptor_dim: usize,
    /// Side of each consistency's left region as a fraction of the image.
    pub region_frac: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            k: 3,
            inliers_per: 100,
            outlier_ratio: 0.4,
            noise_sigma: 1.0,
            image_size: ImageSize::new(640, 480),
            descriptor_dim: 32,
            region_frac: 0.25,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.inliers_per < 4 {
            return Err(Error::Config("inliers_per must be at least 4".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_ratio) {
            return Err(Error::Config("outlier_ratio must lie in [0, 1)".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Config("noise_sigma must be finite and nonnegative".into()));
        }
        if self.image_size.width < 16 || self.image_size.height < 16 {
            return Err(Error::Config("image must be at least 16x16".into()));
        }
        if !(self.region_frac > 0.0 && self.region_frac < 1.0) {
            return Err(Error::Config("region_frac must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn outlier_count(&self) -> usize {
        let inliers = (self.k * self.inliers_per) as f64;
        (self.outlier_ratio / (1.0 - self.outlier_ratio) * inliers).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene<T> {
    pub set: CorrespondenceSet<T>,
    /// Planted homography per consistency id.
    pub planted: Vec<Homography<T>>,
}

impl<T: Real> Scene<T> {
    /// Ground truth as a result: consistency ids as cluster labels, planted
    /// homographies as the model set.
    pub fn planted_result(&self) -> MatchResult<T> {
        MatchResult {
            assignments: self
                .set
                .items()
                .iter()
                .zip(self.set.truth_labels())
                .map(|(c, t)| Assignment {
                    index: c.index,
                    label: match t {
                        TruthLabel::Consistency(id) => Label::Cluster(*id),
                        _ => Label::Outlier,
                    },
                })
                .collect(),
            homographies: self.planted.clone(),
            diagnostics: Default::default(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

impl Rect {
    fn overlaps(&self, o: &Rect, gap: f64) -> bool {
        self.x0 < o.x0 + o.w + gap
            && o.x0 < self.x0 + self.w + gap
            && self.y0 < o.y0 + o.h + gap
            && o.y0 < self.y0 + self.h + gap
    }

    fn corners(&self) -> [[f64; 2]; 4] {
        let (x1, y1) = (self.x0 + self.w, self.y0 + self.h);
        [[self.x0, self.y0], [x1, self.y0], [self.x0, y1], [x1, y1]]
    }

    fn center(&self) -> [f64; 2] {
        [self.x0 + self.w / 2.0, self.y0 + self.h / 2.0]
    }
}

fn project(h: &[[f64; 3]; 3], p: [f64; 2]) -> [f64; 2] {
    let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
    [
        (h[0][0] * p[0] + h[0][1] * p[1] + h[0][2]) / w,
        (h[1][0] * p[0] + h[1][1] * p[1] + h[1][2]) / w,
    ]
}

/// Analytic Jacobian of `h` at `p`.
pub fn homography_jacobian(h: &[[f64; 3]; 3], p: [f64; 2]) -> [[f64; 2]; 2] {
    let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
    let [u, v] = project(h, p);
    [
        [(h[0][0] - u * h[2][0]) / w, (h[0][1] - u * h[2][1]) / w],
        [(h[1][0] - v * h[2][0]) / w, (h[1][1] - v * h[2][1]) / w],
    ]
}

fn invert2(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

fn translate(dx: f64, dy: f64) -> [[f64; 3]; 3] {
    [[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]]
}

const PLACEMENT_ATTEMPTS: usize = 2000;
const MARGIN: f64 = 8.0;
const DESC_SPREAD: f64 = 0.35;
const DESC_MATCH_NOISE: f64 = 0.08;

fn random_homography(rng: &mut ChaCha8Rng, region: &Rect, w: f64, h: f64) -> Result<[[f64; 3]; 3]> {
    let theta = rng.random_range(-30f64..=30.0).to_radians();
    let scale = rng.random_range(0.7..=1.4);
    let (px, py) = (rng.random_range(-1e-4..=1e-4), rng.random_range(-1e-4..=1e-4));
    let (s, c) = theta.sin_cos();
    let rs = [
        [scale * c, -scale * s, 0.0],
        [scale * s, scale * c, 0.0],
        [0.0, 0.0, 1.0],
    ];
    let persp = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [px, py, 1.0]];
    let [cx, cy] = region.center();
    let core = matmul(&persp, &matmul(&rs, &translate(-cx, -cy)));
    let mapped = region.corners().map(|p| project(&core, p));
    let (lo_x, hi_x) = mapped
        .iter()
        .fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p[0]), a.1.max(p[0])));
    let (lo_y, hi_y) = mapped
        .iter()
        .fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p[1]), a.1.max(p[1])));
    let (min_tx, max_tx) = (MARGIN - lo_x, w - MARGIN - hi_x);
    let (min_ty, max_ty) = (MARGIN - lo_y, h - MARGIN - hi_y);
    if min_tx > max_tx || min_ty > max_ty {
        return Err(Error::Config(
            "transformed region does not fit the right image; use a smaller region_frac".into(),
        ));
    }
    let tx = rng.random_range(min_tx..=max_tx);
    let ty = rng.random_range(min_ty..=max_ty);
    Ok(matmul(&translate(tx, ty), &core))
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect()
}

/// Left keypoint, right keypoint, left and right descriptors, label.
type Record = (Keypoint<f64>, Keypoint<f64>, Vec<f64>, Vec<f64>, TruthLabel);

pub fn generate_scene<T: Real>(cfg: &SynthConfig) -> Result<Scene<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = (cfg.image_size.width as f64, cfg.image_size.height as f64);
    let (rw, rh) = (w * cfg.region_frac, h * cfg.region_frac);

    let mut regions: Vec<Rect> = Vec::with_capacity(cfg.k);
    for _ in 0..cfg.k {
        let placed = (0..PLACEMENT_ATTEMPTS).find_map(|_| {
            let r = Rect {
                x0: rng.random_range(MARGIN..=w - rw - MARGIN),
                y0: rng.random_range(MARGIN..=h - rh - MARGIN),
                w: rw,
                h: rh,
            };
            (!regions.iter().any(|o| o.overlaps(&r, MARGIN))).then_some(r)
        });
        match placed {
            Some(r) => regions.push(r),
            None => {
                return Err(Error::Config(format!(
                    "could not pack {} regions; use a smaller k, a smaller region_frac or a larger image",
                    cfg.k
                )))
            }
        }
    }

    let noise = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let in_bounds = |p: [f64; 2]| p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= w && p[1] <= h;
    let mut records: Vec<Record> = Vec::new();
    let mut planted = Vec::with_capacity(cfg.k);
    for (id, region) in regions.iter().enumerate() {
        let hm = random_homography(&mut rng, region, w, h)?;
        planted.push(hm);
        let anchor = gaussian_vec(&mut rng, cfg.descriptor_dim, 1.0);
        for _ in 0..cfg.inliers_per {
            let p = [
                rng.random_range(region.x0..=region.x0 + region.w),
                rng.random_range(region.y0..=region.y0 + region.h),
            ];
            let exact = project(&hm, p);
            let q = loop {
                let q = if cfg.noise_sigma > 0.0 {
                    [exact[0] + noise.sample(&mut rng), exact[1] + noise.sample(&mut rng)]
                } else {
                    exact
                };
                if in_bounds(q) {
                    break q;
                }
            };
            let jac = homography_jacobian(&hm, p);
            let left_desc: Vec<f64> = anchor
                .iter()
                .zip(gaussian_vec(&mut rng, cfg.descriptor_dim, DESC_SPREAD))
                .map(|(a, n)| a + n)
                .collect();
            let right_desc: Vec<f64> = left_desc
                .iter()
                .zip(gaussian_vec(&mut rng, cfg.descriptor_dim, DESC_MATCH_NOISE))
                .map(|(a, n)| a + n)
                .collect();
            records.push((
                Keypoint::new(p, jac),
                Keypoint::new(q, invert2(jac)),
                left_desc,
                right_desc,
                TruthLabel::Consistency(id as u32),
            ));
        }
    }
    for _ in 0..cfg.outlier_count() {
        let p = [rng.random_range(0.0..w), rng.random_range(0.0..h)];
        let q = [rng.random_range(0.0..w), rng.random_range(0.0..h)];
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let (sx, sy) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
        let (s, c) = theta.sin_cos();
        let a = [[sx * c, -sy * s], [sx * s, sy * c]];
        records.push((
            Keypoint::new(p, a),
            Keypoint::new(q, invert2(a)),
            gaussian_vec(&mut rng, cfg.descriptor_dim, 1.0),
            gaussian_vec(&mut rng, cfg.descriptor_dim, 1.0),
            TruthLabel::Outlier,
        ));
    }
    records.shuffle(&mut rng);

    let cast_kp = |k: &Keypoint<f64>| Keypoint::new(k.position.map(T::lit), k.affine.map(|r| r.map(T::lit)));
    let cast_vec = |v: &[f64]| Descriptor(v.iter().map(|&x| T::lit(x)).collect());
    let (items, truth): (Vec<_>, Vec<_>) = records
        .iter()
        .enumerate()
        .map(|(i, (l, r, ld, rd, t))| {
            (
                Correspondence {
                    index: i as u64,
                    left: cast_kp(l),
                    right: cast_kp(r),
                    left_desc: cast_vec(ld),
                    right_desc: cast_vec(rd),
                    ratio: None,
                },
                *t,
            )
        })
        .unzip();
    let mut set = CorrespondenceSet::new(items, cfg.image_size, cfg.image_size, Some(truth))?;
    if set.len() >= 2 {
        set = set.with_ratios()?;
    }
    let planted = planted
        .iter()
        .map(|m| Homography::new(m.map(|r| r.map(T::lit))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Scene { set, planted })
}
