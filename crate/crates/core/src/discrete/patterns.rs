//! Pattern languages: a parameterized hypothesis family over wildcard
//! strings.
//!
//! Hypothesis `j` (of `n = 2^k`) is identified with the `k`-bit binary
//! expansion of `j`, written most-significant bit first. Its language
//! consists of every string over `{0, 1, ?}` of length `k` with exactly `m`
//! question marks whose fixed characters agree with the hypothesis' bits;
//! each of those `C(k, m)` sentences has likelihood `1 / C(k, m)`, and
//! everything else has likelihood zero. The prior is uniform.
//!
//! Two hypotheses at Hamming distance `b` share `C(k - b, m - b)` sentences
//! (every differing position must be wildcarded), so their Bhattacharyya
//! coefficient is `C(k - b, m - b) / C(k, m)` and the distance table has a
//! closed form — used here instead of the quadratic-in-`n` generic scan.

use std::collections::BTreeSet;

use super::{DiscreteError, DiscreteModel};
use crate::metrics::ProbVector;

/// Ceiling on `n * s` likelihood cells a pattern model may occupy.
pub(crate) const MAX_TABLE_CELLS: u64 = 1 << 22;

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 1..=k {
        c = c * (n - k + i) / i;
    }
    c
}

/// A [`DiscreteModel`] over pattern languages, with the sentence strings
/// kept alongside for inspection.
#[derive(Debug, Clone)]
pub struct PatternLanguageModel {
    pub model: DiscreteModel,
    /// `sentences[idx]` renders sentence `idx`, e.g. `"0?1?"`.
    pub sentences: Vec<String>,
    pub k: u32,
    pub m: u32,
}

impl PatternLanguageModel {
    /// The language of hypothesis `hyp` as a set of rendered sentences.
    pub fn language(&self, hyp: usize) -> BTreeSet<String> {
        self.sentences
            .iter()
            .enumerate()
            .filter(|(idx, _)| self.model.column(hyp).get(*idx) > 0.0)
            .map(|(_, s)| s.clone())
            .collect()
    }
}

/// Builds the pattern-language model for word length `k` and wildcard count
/// `m`. Requires `m < k <= 20` and a likelihood table of at most
/// `MAX_TABLE_CELLS` cells.
pub fn pattern_language_model(k: u32, m: u32) -> Result<PatternLanguageModel, DiscreteError> {
    if m >= k || k > 20 {
        return Err(DiscreteError::PatternSize { k, m });
    }
    let n: u64 = 1 << k;
    let per_language = binomial(k as u64, m as u64);
    let s = per_language << (k - m);
    if n.saturating_mul(s) > MAX_TABLE_CELLS {
        return Err(DiscreteError::PatternSize { k, m });
    }
    let n = n as usize;
    let s = s as usize;

    // Enumerate sentences as (wildcard mask, fixed bits); bit (k - 1 - p)
    // corresponds to string position p.
    let mut masks = Vec::with_capacity(s);
    let mut strings = Vec::with_capacity(s);
    for qmask in 0u32..(1 << k) {
        if qmask.count_ones() != m {
            continue;
        }
        let fixed_positions: Vec<u32> = (0..k)
            .rev()
            .filter(|&b| qmask & (1 << b) == 0)
            .collect(); // left-to-right string order
        for v in 0u32..(1 << (k - m)) {
            let mut fixed_bits = 0u32;
            for (rank, &b) in fixed_positions.iter().enumerate() {
                let bit = (v >> (fixed_positions.len() - 1 - rank)) & 1;
                fixed_bits |= bit << b;
            }
            let rendered: String = (0..k)
                .map(|p| {
                    let b = k - 1 - p;
                    if qmask & (1 << b) != 0 {
                        '?'
                    } else if fixed_bits & (1 << b) != 0 {
                        '1'
                    } else {
                        '0'
                    }
                })
                .collect();
            masks.push((!qmask & ((1u32 << k) - 1), fixed_bits));
            strings.push(rendered);
        }
    }
    debug_assert_eq!(strings.len(), s);

    let weight = 1.0 / per_language as f64;
    let columns: Vec<ProbVector> = (0..n)
        .map(|j| {
            let bits = j as u32;
            let col: Vec<f64> = masks
                .iter()
                .map(|&(fixed_mask, fixed_bits)| {
                    if bits & fixed_mask == fixed_bits {
                        weight
                    } else {
                        0.0
                    }
                })
                .collect();
            ProbVector::new(col).expect("pattern language column is a distribution")
        })
        .collect();

    // Closed-form distances from the Hamming distance of the bit patterns.
    let mut overlap_by_hamming = vec![0.0f64; k as usize + 1];
    for (b, o) in overlap_by_hamming.iter_mut().enumerate() {
        *o = if b as u64 <= m as u64 {
            binomial((k - b as u32) as u64, (m - b as u32) as u64) as f64 / per_language as f64
        } else {
            0.0
        };
    }
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let b = ((i ^ j) as u32).count_ones() as usize;
            let c = overlap_by_hamming[b];
            let d = (1.0 - c * c).clamp(0.0, 1.0).sqrt();
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    let model = DiscreteModel::with_precomputed_distances(
        columns,
        ProbVector::uniform(n),
        dist,
        Some((0..n).map(|j| format!("{j:0k$b}", k = k as usize)).collect()),
    );
    Ok(PatternLanguageModel {
        model,
        sentences: strings,
        k,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;
    use approx::assert_abs_diff_eq;

    #[test]
    fn size_guard() {
        assert!(matches!(
            pattern_language_model(4, 4),
            Err(DiscreteError::PatternSize { .. })
        ));
        assert!(matches!(
            pattern_language_model(21, 2),
            Err(DiscreteError::PatternSize { .. })
        ));
        assert!(matches!(
            pattern_language_model(14, 7),
            Err(DiscreteError::PatternSize { .. })
        ));
    }

    #[test]
    fn k4_m2_shape_and_language() {
        let plm = pattern_language_model(4, 2).unwrap();
        assert_eq!(plm.model.hypothesis_count(), 16);
        assert_eq!(plm.model.sentence_count(), 24); // C(4,2) * 2^2
        // Each language has C(4,2) = 6 sentences of likelihood 1/6.
        for j in 0..16 {
            let col = plm.model.column(j);
            let support: Vec<f64> = col.iter().cloned().filter(|&w| w > 0.0).collect();
            assert_eq!(support.len(), 6);
            for w in support {
                assert_abs_diff_eq!(w, 1.0 / 6.0, epsilon = 1e-15);
            }
        }
        // Hypothesis index 2 (bit pattern 0010).
        let expected: BTreeSet<String> = ["00??", "0?1?", "?01?", "0??0", "?0?0", "??10"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(plm.language(2), expected);
    }

    #[test]
    fn closed_form_distances_match_root_sine() {
        for (k, m) in [(4u32, 2u32), (5, 1), (3, 1)] {
            let plm = pattern_language_model(k, m).unwrap();
            let n = plm.model.hypothesis_count();
            for i in 0..n {
                for j in (i + 1)..n {
                    let direct =
                        metrics::root_sine(plm.model.column(i), plm.model.column(j)).unwrap();
                    assert_abs_diff_eq!(
                        plm.model.distance(i, j),
                        direct,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn min_distance_squared_exceeds_one_minus_m_over_k_squared() {
        let plm = pattern_language_model(4, 2).unwrap();
        let d1 = plm.model.min_distance(0);
        let floor = 1.0 - (2.0f64 / 4.0).powi(2);
        assert!(d1 * d1 >= floor - 1e-12);
        assert_abs_diff_eq!(d1 * d1, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_when_no_wildcards_shared() {
        // m = 0: languages are single full strings, pairwise disjoint.
        let plm = pattern_language_model(3, 0).unwrap();
        assert_eq!(plm.model.sentence_count(), 8);
        for i in 0..8 {
            for j in (i + 1)..8 {
                assert_eq!(plm.model.distance(i, j), 1.0);
            }
        }
    }
}
