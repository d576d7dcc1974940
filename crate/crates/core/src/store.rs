//! JSON container for a fitted codebook, its reordering permutations and the
//! optional patch basis.
//!
//! ```json
//! {
//!   "version": 1, "D": 4, "P": 4, "N": 8, "n_q": 16,
//!   "levels": [ { "heads": [ { "entries": [[0.1, ...], ...] }, ... ] }, ... ],
//!   "cr_permutations": [[...], ...],
//!   "basis": { "patch_side": 8, "n_q": 16, "mean": [...], "rows": [[...], ...] }
//! }
//! ```
//!
//! `cr_permutations` holds one permutation per `(level, head)`, level-major,
//! mapping an index of the fitted codebook to its slot in the stored one.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{PatchBasis, PATCH_SIDE};
use crate::quantizer::{
    validate_permutation, Codebook, MultiHeadCodebook, MultiLevelCodebook, OCTONARY,
};
use crate::reorder::compose_permutations;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContainerFile {
    version: u32,
    #[serde(rename = "D")]
    depth: usize,
    #[serde(rename = "P")]
    heads: usize,
    #[serde(rename = "N")]
    entries: usize,
    n_q: usize,
    levels: Vec<LevelFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cr_permutations: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    basis: Option<BasisFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelFile {
    heads: Vec<HeadFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeadFile {
    entries: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisFile {
    patch_side: usize,
    n_q: usize,
    mean: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookContainer {
    pub codebook: MultiLevelCodebook,
    pub cr_permutations: Option<Vec<Vec<usize>>>,
    pub basis: Option<PatchBasis>,
}

impl CodebookContainer {
    pub fn new(codebook: MultiLevelCodebook) -> Self {
        Self {
            codebook,
            cr_permutations: None,
            basis: None,
        }
    }

    /// Replaces the codebook with a reordered one, composing `perms` with
    /// any permutations already recorded.
    pub fn apply_reordering(
        &mut self,
        reordered: MultiLevelCodebook,
        perms: Vec<Vec<usize>>,
    ) -> Result<()> {
        let total = match &self.cr_permutations {
            Some(existing) => compose_permutations(existing, &perms)?,
            None => perms,
        };
        self.codebook = reordered;
        self.cr_permutations = Some(total);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mlc = &self.codebook;
        let file = ContainerFile {
            version: FORMAT_VERSION,
            depth: mlc.depth(),
            heads: mlc.head_count(),
            entries: mlc.entries_per_head(),
            n_q: mlc.feature_dim(),
            levels: mlc
                .levels()
                .iter()
                .map(|level| LevelFile {
                    heads: level
                        .heads()
                        .iter()
                        .map(|cb| HeadFile {
                            entries: cb.entries().map(<[f64]>::to_vec).collect(),
                        })
                        .collect(),
                })
                .collect(),
            cr_permutations: self.cr_permutations.clone(),
            basis: self.basis.as_ref().map(|b| BasisFile {
                patch_side: PATCH_SIDE,
                n_q: b.n_q(),
                mean: b.mean().to_vec(),
                rows: b.rows().map(<[f64]>::to_vec).collect(),
            }),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ContainerFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidFile(e.to_string()))?;
        Self::from_file(file).map_err(|e| match e {
            Error::InvalidFile(_) => e,
            other => Error::InvalidFile(other.to_string()),
        })
    }

    fn from_file(file: ContainerFile) -> Result<Self> {
        let bad = |msg: String| Error::InvalidFile(msg);
        if file.version != FORMAT_VERSION {
            return Err(bad(format!("unsupported version {}", file.version)));
        }
        if file.entries != OCTONARY {
            return Err(bad(format!("N must be {OCTONARY}, found {}", file.entries)));
        }
        if file.levels.len() != file.depth {
            return Err(bad(format!(
                "D = {} but {} levels stored",
                file.depth,
                file.levels.len()
            )));
        }
        if file.heads == 0 || !file.n_q.is_multiple_of(file.heads) {
            return Err(bad(format!(
                "n_q = {} is not divisible by P = {}",
                file.n_q, file.heads
            )));
        }
        let head_dim = file.n_q / file.heads;
        let mut levels = Vec::with_capacity(file.depth);
        for (d, level) in file.levels.into_iter().enumerate() {
            if level.heads.len() != file.heads {
                return Err(bad(format!(
                    "level {d} has {} heads, P = {}",
                    level.heads.len(),
                    file.heads
                )));
            }
            let mut heads = Vec::with_capacity(file.heads);
            for (h, head) in level.heads.into_iter().enumerate() {
                if head.entries.len() != file.entries {
                    return Err(bad(format!(
                        "level {d} head {h} has {} entries",
                        head.entries.len()
                    )));
                }
                if head.entries.iter().any(|e| e.len() != head_dim) {
                    return Err(bad(format!(
                        "level {d} head {h} entries are not {head_dim}-dimensional"
                    )));
                }
                heads.push(Codebook::new(head.entries)?);
            }
            levels.push(MultiHeadCodebook::new(heads)?);
        }
        let codebook = MultiLevelCodebook::new(levels)?;

        if let Some(perms) = &file.cr_permutations {
            if perms.len() != file.depth * file.heads {
                return Err(bad(format!(
                    "{} permutations for {} codebooks",
                    perms.len(),
                    file.depth * file.heads
                )));
            }
            for perm in perms {
                validate_permutation(perm, file.entries)?;
            }
        }

        let basis = match file.basis {
            Some(b) => {
                if b.patch_side != PATCH_SIDE {
                    return Err(bad(format!(
                        "patch side {} is not {PATCH_SIDE}",
                        b.patch_side
                    )));
                }
                if b.n_q != file.n_q || b.rows.len() != b.n_q {
                    return Err(bad(format!(
                        "basis has {} rows (n_q {}), codebook n_q is {}",
                        b.rows.len(),
                        b.n_q,
                        file.n_q
                    )));
                }
                Some(PatchBasis::new(b.rows, b.mean)?)
            }
            None => None,
        };

        Ok(Self {
            codebook,
            cr_permutations: file.cr_permutations,
            basis,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_codebook(depth: usize, heads: usize, dim: usize) -> MultiLevelCodebook {
        let levels = (0..depth)
            .map(|d| {
                let heads = (0..heads)
                    .map(|h| {
                        let data = (0..OCTONARY * dim)
                            .map(|i| {
                                ((i * 7 + d * 3 + h) % 11) as f64 / 3.0 - 1.7 + 1e-17 * i as f64
                            })
                            .collect();
                        Codebook::from_flat(dim, data).unwrap()
                    })
                    .collect();
                MultiHeadCodebook::new(heads).unwrap()
            })
            .collect();
        MultiLevelCodebook::new(levels).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut c = CodebookContainer::new(small_codebook(2, 3, 2));
        c.cr_permutations = Some(vec![(0..8).rev().collect(); 6]);
        let text = c.to_json().unwrap();
        let back = CodebookContainer::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn header_fields() {
        let c = CodebookContainer::new(small_codebook(4, 4, 4));
        let v: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["D"], 4);
        assert_eq!(v["P"], 4);
        assert_eq!(v["N"], 8);
        assert_eq!(v["n_q"], 16);
    }

    fn mutate(f: impl FnOnce(&mut serde_json::Value)) -> Result<CodebookContainer> {
        let c = CodebookContainer::new(small_codebook(2, 2, 2));
        let mut v: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        f(&mut v);
        CodebookContainer::from_json(&v.to_string())
    }

    #[test]
    fn loader_rejects_violations() {
        assert!(mutate(|_| {}).is_ok());
        let cases: Vec<Box<dyn FnOnce(&mut serde_json::Value)>> = vec![
            Box::new(|v| v["version"] = 2.into()),
            Box::new(|v| v["D"] = 3.into()),
            Box::new(|v| v["N"] = 4.into()),
            Box::new(|v| v["n_q"] = 5.into()),
            Box::new(|v| v["levels"][0]["heads"][0]["entries"][0] = serde_json::json!([1.0])),
            Box::new(|v| {
                v["levels"][1]["heads"].as_array_mut().unwrap().pop();
            }),
            Box::new(|v| {
                v["levels"][0]["heads"][1]["entries"]
                    .as_array_mut()
                    .unwrap()
                    .pop();
            }),
            Box::new(|v| {
                v["cr_permutations"] = serde_json::json!(vec![vec![0, 1, 2, 3, 4, 5, 6, 6]; 4])
            }),
            Box::new(|v| v["cr_permutations"] = serde_json::json!([[0, 1, 2, 3, 4, 5, 6, 7]])),
            Box::new(|v| v["extra"] = 1.into()),
        ];
        for (i, case) in cases.into_iter().enumerate() {
            assert!(
                matches!(mutate(case), Err(Error::InvalidFile(_))),
                "case {i} accepted"
            );
        }
    }

    #[test]
    fn reordering_composes() {
        let mut c = CodebookContainer::new(small_codebook(1, 1, 2));
        let swap: Vec<usize> = vec![1, 0, 2, 3, 4, 5, 6, 7];
        let once = c.codebook.permuted(std::slice::from_ref(&swap)).unwrap();
        c.apply_reordering(once.clone(), vec![swap.clone()])
            .unwrap();
        let twice = once.permuted(std::slice::from_ref(&swap)).unwrap();
        c.apply_reordering(twice, vec![swap]).unwrap();
        assert_eq!(c.cr_permutations.unwrap()[0], (0..8).collect::<Vec<_>>());
    }
}
