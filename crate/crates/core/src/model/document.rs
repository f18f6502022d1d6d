//! Structured JSON form of the exchange files.

use serde::{Deserialize, Serialize};

use super::{Correspondence, CorrespondenceSet, ImageSize, TruthLabel};
use crate::error::Result;
use crate::scalar::Real;

#[derive(Serialize)]
struct SetRef<'a, T> {
    left_size: ImageSize,
    right_size: ImageSize,
    items: &'a [Correspondence<T>],
    truth: &'a [TruthLabel],
}

#[derive(Deserialize)]
struct SetDoc<T> {
    left_size: ImageSize,
    right_size: ImageSize,
    items: Vec<Correspondence<T>>,
    #[serde(default)]
    truth: Option<Vec<TruthLabel>>,
}

pub(super) fn parse_set<T>(src: &str) -> Result<CorrespondenceSet<T>>
where
    T: Real + for<'de> Deserialize<'de>,
{
    let doc: SetDoc<T> = serde_json::from_str(src)?;
    CorrespondenceSet::new(doc.items, doc.left_size, doc.right_size, doc.truth)
}

pub(super) fn render_set<T: Real + Serialize>(set: &CorrespondenceSet<T>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SetRef {
        left_size: set.left_size(),
        right_size: set.right_size(),
        items: set.items(),
        truth: set.truth_labels(),
    })?)
}
