//! Line-oriented `MCORR` / `MRES` records.
//!
//! ```text
//! MCORR 1 <count> <desc_dim> <wL> <hL> <wR> <hR>
//! idx xL yL a11 a12 a21 a22 xR yR b11 b12 b21 b22 ratio gt_label
//! <desc_dim left descriptor values>
//! <desc_dim right descriptor values>
//! ...
//!
//! MRES 1 <count> <K>
//! <9 homography entries, row-major>   (K lines)
//! idx label                           (count lines)
//! DIAG <blocks> <survivors> <clusters> <recovered>   (optional)
//! ```
//!
//! A negative `ratio` means not yet computed. `gt_label` is `-1` outlier,
//! `-2` unknown, else a consistency id. Result labels are `-1` outlier,
//! `-2` inlier without consistency id, else a cluster id. Text after `#`
//! is ignored.

use std::fmt::Write;
use std::str::FromStr;

use super::{
    Assignment, Correspondence, CorrespondenceSet, Descriptor, Diagnostics, Homography, ImageSize, Keypoint, Label,
    MatchResult, TruthLabel,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

struct Tokens<'a> {
    toks: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(src: &'a str) -> Self {
        let toks = src
            .lines()
            .enumerate()
            .flat_map(|(n, line)| {
                let line = line.split('#').next().unwrap_or("");
                line.split_whitespace().map(move |t| (n + 1, t))
            })
            .collect();
        Self { toks, pos: 0 }
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| t.0)
            .unwrap_or(1)
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(|t| t.1)
    }

    fn next_raw(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let tok = self
            .toks
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::parse(self.line(), format!("unexpected end of input, expected {what}")))?;
        self.pos += 1;
        Ok(tok)
    }

    fn next<V: FromStr>(&mut self, what: &str) -> Result<V> {
        let (line, tok) = self.next_raw(what)?;
        tok.parse()
            .map_err(|_| Error::parse(line, format!("cannot parse {what} from {tok:?}")))
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let (line, tok) = self.next_raw(word)?;
        if tok != word {
            return Err(Error::parse(line, format!("expected {word:?}, found {tok:?}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        match self.toks.get(self.pos) {
            None => Ok(()),
            Some(&(line, tok)) => Err(Error::parse(line, format!("trailing data starting at {tok:?}"))),
        }
    }
}

fn header_version(toks: &mut Tokens<'_>, magic: &str) -> Result<()> {
    toks.expect(magic)?;
    let line = toks.line();
    let version: u32 = toks.next("version")?;
    if version != 1 {
        return Err(Error::parse(line, format!("unsupported {magic} version {version}")));
    }
    Ok(())
}

fn size(toks: &mut Tokens<'_>) -> Result<ImageSize> {
    Ok(ImageSize::new(toks.next("image width")?, toks.next("image height")?))
}

fn keypoint<T: Real>(toks: &mut Tokens<'_>) -> Result<Keypoint<T>> {
    let x = toks.next("x")?;
    let y = toks.next("y")?;
    let a11 = toks.next("affine entry")?;
    let a12 = toks.next("affine entry")?;
    let a21 = toks.next("affine entry")?;
    let a22 = toks.next("affine entry")?;
    Ok(Keypoint::new([x, y], [[a11, a12], [a21, a22]]))
}

pub fn read_correspondences<T: Real>(src: &str) -> Result<CorrespondenceSet<T>> {
    let mut toks = Tokens::new(src);
    header_version(&mut toks, "MCORR")?;
    let count: usize = toks.next("count")?;
    let dim: usize = toks.next("descriptor dimension")?;
    let left_size = size(&mut toks)?;
    let right_size = size(&mut toks)?;

    let mut items = Vec::with_capacity(count.min(1 << 20));
    let mut truth = Vec::with_capacity(items.capacity());
    for _ in 0..count {
        let index: u64 = toks.next("index")?;
        let left = keypoint(&mut toks)?;
        let right = keypoint(&mut toks)?;
        let ratio: T = toks.next("ratio")?;
        let line = toks.line();
        let code: i64 = toks.next("ground-truth label")?;
        let label = TruthLabel::from_code(code)
            .ok_or_else(|| Error::parse(line, format!("index {index}: invalid ground-truth label {code}")))?;
        let mut desc = || -> Result<Descriptor<T>> {
            (0..dim)
                .map(|_| toks.next("descriptor value"))
                .collect::<Result<Vec<T>>>()
                .map(Descriptor)
        };
        let left_desc = desc()?;
        let right_desc = desc()?;
        items.push(Correspondence {
            index,
            left,
            right,
            left_desc,
            right_desc,
            ratio: (ratio >= T::zero()).then_some(ratio),
        });
        truth.push(label);
    }
    if toks.peek().is_some() {
        return Err(Error::parse(
            toks.line(),
            format!("more records than the declared count {count}"),
        ));
    }
    CorrespondenceSet::new(items, left_size, right_size, Some(truth))
}

fn join<T: Real>(out: &mut String, vals: impl IntoIterator<Item = T>) {
    let mut first = true;
    for v in vals {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{v}");
    }
}

pub fn write_correspondences<T: Real>(set: &CorrespondenceSet<T>) -> String {
    let (l, r) = (set.left_size(), set.right_size());
    let mut out = format!(
        "MCORR 1 {} {} {} {} {} {}\n",
        set.len(),
        set.descriptor_dim(),
        l.width,
        l.height,
        r.width,
        r.height
    );
    for (c, label) in set.items().iter().zip(set.truth_labels()) {
        let _ = write!(out, "{} ", c.index);
        let kp = |k: &Keypoint<T>| {
            [
                k.position[0],
                k.position[1],
                k.affine[0][0],
                k.affine[0][1],
                k.affine[1][0],
                k.affine[1][1],
            ]
        };
        join(&mut out, kp(&c.left).into_iter().chain(kp(&c.right)));
        let ratio = c.ratio.unwrap_or(-T::one());
        let _ = writeln!(out, " {} {}", ratio, label.code());
        join(&mut out, c.left_desc.0.iter().copied());
        out.push('\n');
        join(&mut out, c.right_desc.0.iter().copied());
        out.push('\n');
    }
    out
}

pub fn read_result<T: Real>(src: &str) -> Result<MatchResult<T>> {
    let mut toks = Tokens::new(src);
    header_version(&mut toks, "MRES")?;
    let count: usize = toks.next("count")?;
    let k: usize = toks.next("homography count")?;
    let mut homographies = Vec::with_capacity(k.min(1 << 16));
    for _ in 0..k {
        let line = toks.line();
        let mut h = [[T::zero(); 3]; 3];
        for v in h.iter_mut().flatten() {
            *v = toks.next("homography entry")?;
        }
        homographies.push(Homography::new(h).map_err(|e| Error::parse(line, e.to_string()))?);
    }
    let mut assignments = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let index: u64 = toks.next("index")?;
        let line = toks.line();
        let code: i64 = toks.next("label")?;
        let label =
            Label::from_code(code).ok_or_else(|| Error::parse(line, format!("index {index}: invalid label {code}")))?;
        assignments.push(Assignment { index, label });
    }
    let mut diagnostics = Diagnostics::default();
    if toks.peek() == Some("DIAG") {
        toks.expect("DIAG")?;
        diagnostics = Diagnostics {
            blocks_kept: toks.next("blocks kept")?,
            game_survivors: toks.next("game survivors")?,
            clusters_found: toks.next("clusters found")?,
            recovered_inliers: toks.next("recovered inliers")?,
        };
    }
    toks.finish()?;
    Ok(MatchResult {
        assignments,
        homographies,
        diagnostics,
    })
}

pub fn write_result<T: Real>(result: &MatchResult<T>) -> String {
    let mut out = format!("MRES 1 {} {}\n", result.assignments.len(), result.homographies.len());
    for h in &result.homographies {
        join(&mut out, h.matrix().iter().flatten().copied());
        out.push('\n');
    }
    for a in &result.assignments {
        let _ = writeln!(out, "{} {}", a.index, a.label.code());
    }
    let d = &result.diagnostics;
    let _ = writeln!(
        out,
        "DIAG {} {} {} {}",
        d.blocks_kept, d.game_survivors, d.clusters_found, d.recovered_inliers
    );
    out
}
