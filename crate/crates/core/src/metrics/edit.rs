#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EditCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl EditCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

/// Unit-cost Levenshtein alignment of `hyp` against `reference`.
///
/// Among minimum-cost alignments the one with the fewest substitutions is
/// chosen, then the fewest insertions, so the breakdown is deterministic.
pub fn edit_distance<T: PartialEq>(reference: &[T], hyp: &[T]) -> EditCounts {
    // cells hold (total, substitutions, insertions), compared lexicographically
    type Cell = (usize, usize, usize);
    let m = hyp.len();
    let mut prev: Vec<Cell> = (0..=m).map(|j| (j, 0, j)).collect();
    let mut cur: Vec<Cell> = vec![(0, 0, 0); m + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = (i + 1, 0, 0);
        for j in 1..=m {
            let diag = prev[j - 1];
            let diag = if *r == hyp[j - 1] {
                diag
            } else {
                (diag.0 + 1, diag.1 + 1, diag.2)
            };
            let del = (prev[j].0 + 1, prev[j].1, prev[j].2);
            let ins = (cur[j - 1].0 + 1, cur[j - 1].1, cur[j - 1].2 + 1);
            cur[j] = diag.min(del).min(ins);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (total, substitutions, insertions) = prev[m];
    EditCounts {
        substitutions,
        insertions,
        deletions: total - substitutions - insertions,
    }
}
