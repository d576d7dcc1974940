//! Codebook reordering: relabel entries so that indices which are neighbours
//! under Gray labeling carry nearby codewords.
//!
//! The chain starts from the codebook mean and repeatedly takes the remaining
//! entry closest to the previous pick. With Gray mapping enabled, chain
//! element `i` is stored at slot `g[i]` of the reflected Gray sequence, so
//! consecutive chain elements end up on adjacent constellation levels.

use crate::quantizer::{Codebook, MultiLevelCodebook};
use crate::{Error, Result};

/// Reflected binary Gray code of length `n` as decimals: `i ^ (i >> 1)`.
pub fn gray_sequence(n: usize) -> Result<Vec<usize>> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::invalid(format!(
            "gray sequence length {n} is not a power of two >= 2"
        )));
    }
    Ok((0..n).map(|i| i ^ (i >> 1)).collect())
}

/// Reordered codebook plus `perm`, where entry `k` of the input now lives at
/// slot `perm[k]`.
pub fn reorder_codebook(cb: &Codebook, use_gray: bool) -> Result<(Codebook, Vec<usize>)> {
    let n = cb.len();
    let slots: Vec<usize> = if use_gray {
        gray_sequence(n)?
    } else {
        (0..n).collect()
    };

    let dim = cb.dim();
    let mut previous = vec![0.0; dim];
    for e in cb.entries() {
        for (p, v) in previous.iter_mut().zip(e) {
            *p += v;
        }
    }
    previous.iter_mut().for_each(|p| *p /= n as f64);

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut perm = vec![0; n];
    for slot in slots {
        let (pos, &k) = remaining
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                distance2(cb.entry(a), &previous)
                    .total_cmp(&distance2(cb.entry(b), &previous))
                    .then(a.cmp(&b))
            })
            .expect("chain visits each entry once");
        remaining.remove(pos);
        perm[k] = slot;
        previous.copy_from_slice(cb.entry(k));
    }
    Ok((cb.permuted(&perm)?, perm))
}

/// Applies [`reorder_codebook`] to every `(level, head)` codebook. The
/// permutations are returned level-major.
pub fn reorder_multilevel(
    mlc: &MultiLevelCodebook,
    use_gray: bool,
) -> Result<(MultiLevelCodebook, Vec<Vec<usize>>)> {
    let mut perms = Vec::with_capacity(mlc.depth() * mlc.head_count());
    for level in mlc.levels() {
        for cb in level.heads() {
            perms.push(reorder_codebook(cb, use_gray)?.1);
        }
    }
    Ok((mlc.permuted(&perms)?, perms))
}

/// Mean Euclidean distance between the codewords at `g[i]` and `g[i + 1]`,
/// wrapping from the last Gray position back to the first.
pub fn gray_adjacent_distance(cb: &Codebook) -> Result<f64> {
    let g = gray_sequence(cb.len())?;
    let n = g.len();
    let total: f64 = (0..n)
        .map(|i| distance2(cb.entry(g[i]), cb.entry(g[(i + 1) % n])).sqrt())
        .sum();
    Ok(total / n as f64)
}

/// [`gray_adjacent_distance`] averaged over every head codebook.
pub fn mean_gray_adjacent_distance(mlc: &MultiLevelCodebook) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0;
    for level in mlc.levels() {
        for cb in level.heads() {
            total += gray_adjacent_distance(cb)?;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// `second` after `first`: the result maps original slot `k` to
/// `second[first[k]]`.
pub fn compose_permutations(
    first: &[Vec<usize>],
    second: &[Vec<usize>],
) -> Result<Vec<Vec<usize>>> {
    if first.len() != second.len() {
        return Err(Error::dims("permutation count", first.len(), second.len()));
    }
    first
        .iter()
        .zip(second)
        .map(|(a, b)| {
            a.iter()
                .map(|&k| {
                    b.get(k)
                        .copied()
                        .ok_or_else(|| Error::invalid("permutations have different sizes"))
                })
                .collect()
        })
        .collect()
}

fn distance2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
