//! Order-sensitive bookkeeping on measurement outcome strings: greedy
//! minimal partitions, cancellation-aware reordering, odd-even swap
//! schedules, and the remainder ledger of the long-range driver.
//!
//! Everything in this module is pure data manipulation on class labels;
//! the quantum state never enters. Class labels are indices into the
//! abelian class-group table of the measured level.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::ProtocolError;
use crate::group::GroupTable;

// ---------------------------------------------------------------------------
// Outcome strings and partitions

/// Class labels measured in one round, together with the number of
/// original sites inside each measured block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeString {
    /// 1-based round number.
    pub round: usize,
    /// Class label per measured block, in chain order.
    pub entries: Vec<usize>,
    /// Original-site count per measured block.
    pub block_sites: Vec<usize>,
}

impl OutcomeString {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Split of an outcome string into minimal contiguous runs that each
/// multiply to the identity class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// (first entry index, entry count) per part, in chain order.
    pub parts: Vec<(usize, usize)>,
    /// Length of the longest part.
    pub max_len: usize,
}

/// Result of a partition attempt: either a full split (plus, when the
/// caller permits one, a trailing run that never returned to the
/// identity) or the location of the first over-long part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionResult {
    Split {
        partition: Partition,
        /// Index of the first trailing entry, if any survive the scan.
        tail_start: Option<usize>,
    },
    TooLong {
        part_start: usize,
        part_len: usize,
    },
}

/// Greedy left-to-right scan that cuts a part each time the running
/// class product returns to the identity. Cuts are provably minimal: no
/// proper prefix of a part multiplies to the identity, because an
/// earlier return would have been cut first.
///
/// With `allow_tail` false the scan must consume every entry and a
/// leftover run is a [`ProtocolError::ParityViolation`]; with it true
/// the leftover is reported as the tail. A part longer than `l_max`
/// aborts the scan with [`PartitionResult::TooLong`].
pub fn partition_minimal(
    entries: &[usize],
    table: &GroupTable,
    l_max: usize,
    allow_tail: bool,
) -> Result<PartitionResult, ProtocolError> {
    let e = table.identity();
    let mut parts = Vec::new();
    let mut start = 0usize;
    let mut run = e;
    for (i, &x) in entries.iter().enumerate() {
        run = table.mul(run, x);
        if run == e {
            let len = i + 1 - start;
            if len > l_max {
                return Ok(PartitionResult::TooLong {
                    part_start: start,
                    part_len: len,
                });
            }
            parts.push((start, len));
            start = i + 1;
        }
    }
    if start < entries.len() && !allow_tail {
        return Err(ProtocolError::ParityViolation(format!(
            "outcome product over {} trailing entries is class {}, not the identity",
            entries.len() - start,
            run
        )));
    }
    let max_len = parts.iter().map(|&(_, l)| l).max().unwrap_or(0);
    Ok(PartitionResult::Split {
        partition: Partition { parts, max_len },
        tail_start: (start < entries.len()).then_some(start),
    })
}

// ---------------------------------------------------------------------------
// Compaction

/// Reorders one identity-product part so that the greedy split of the
/// result has runs of length at most the class-group order. Returns the
/// permutation in one-line notation: slot `j` of the new order holds the
/// part-local entry `perm[j]`.
///
/// The window extraction rests on a pigeonhole argument: among the first
/// `r + 1` running prefix products over `r` possible values, two must
/// coincide, and the entries between them multiply to the identity and
/// number at most `r`. Extracting that window leaves a shorter
/// identity-product sequence, so the loop always terminates.
pub fn plan_compaction(entries: &[usize], table: &GroupTable) -> Result<Vec<usize>, ProtocolError> {
    let r = table.order();
    let e = table.identity();
    if entries.len() <= r {
        return Ok((0..entries.len()).collect());
    }
    let mut remaining: Vec<usize> = (0..entries.len()).collect();
    let mut windows: Vec<Vec<usize>> = Vec::new();
    while !remaining.is_empty() {
        if remaining.len() <= r {
            windows.push(std::mem::take(&mut remaining));
            break;
        }
        let mut seen: Vec<(usize, usize)> = vec![(e, 0)];
        let mut cut = None;
        let mut run = e;
        for (j, &idx) in remaining.iter().enumerate() {
            run = table.mul(run, entries[idx]);
            if let Some(&(_, a)) = seen.iter().find(|&&(p, _)| p == run) {
                cut = Some((a, j + 1));
                break;
            }
            seen.push((run, j + 1));
        }
        let Some((a, b)) = cut else {
            return Err(ProtocolError::Internal(
                "no cancelling window found in an identity-product part".into(),
            ));
        };
        debug_assert!(b - a <= r);
        windows.push(remaining.drain(a..b).collect());
    }
    // Emitting windows in the order of their first original entry keeps
    // movement short without affecting validity.
    windows.sort_by_key(|w| w[0]);
    let perm: Vec<usize> = windows.into_iter().flatten().collect();
    debug_assert_eq!(perm.len(), entries.len());
    Ok(perm)
}

// ---------------------------------------------------------------------------
// Odd-even swap schedules

/// Parallel adjacent-swap schedule realizing `perm` (one-line notation:
/// slot `j` of the target order holds element `perm[j]`). Each returned
/// round lists pairwise-disjoint swap positions `p`, meaning "swap slots
/// `p` and `p+1`"; rounds with no swaps are omitted. The schedule is the
/// odd-even transposition sort toward the target ranks, so its depth is
/// at most the number of elements.
pub fn odd_even_schedule(perm: &[usize]) -> Result<Vec<Vec<usize>>, ProtocolError> {
    let n = perm.len();
    let mut rank = vec![usize::MAX; n];
    for (j, &old) in perm.iter().enumerate() {
        if old >= n || rank[old] != usize::MAX {
            return Err(ProtocolError::Internal(format!(
                "not a permutation: {:?}",
                perm
            )));
        }
        rank[old] = j;
    }
    let mut cur: Vec<usize> = (0..n).collect();
    let mut rounds = Vec::new();
    let mut parity = 0usize;
    let mut guard = 0usize;
    while cur.iter().enumerate().any(|(p, &i)| rank[i] != p) {
        guard += 1;
        if guard > 2 * n + 2 {
            return Err(ProtocolError::Internal(
                "odd-even schedule failed to converge".into(),
            ));
        }
        let mut swaps = Vec::new();
        let mut p = parity;
        while p + 1 < n {
            if rank[cur[p]] > rank[cur[p + 1]] {
                cur.swap(p, p + 1);
                swaps.push(p);
            }
            p += 2;
        }
        parity ^= 1;
        if !swaps.is_empty() {
            rounds.push(swaps);
        }
    }
    Ok(rounds)
}

/// Largest displacement any element makes under `perm`.
pub fn permutation_span(perm: &[usize]) -> usize {
    perm.iter()
        .enumerate()
        .map(|(j, &old)| j.abs_diff(old))
        .max()
        .unwrap_or(0)
}

// ---------------------------------------------------------------------------
// Remainder ledger

/// A measurement outcome located in the level hierarchy: the level it
/// landed on and the class-group label there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelClass {
    pub level: usize,
    pub class: usize,
}

/// Per-level record of outcomes that have not yet cancelled to the
/// identity class. Entry `levels[j]` holds the sequence for level `j+2`;
/// level-1 outcomes never appear because reaching them means the block
/// is ready for the closing round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemainderTuple {
    pub levels: Vec<Vec<usize>>,
}

impl RemainderTuple {
    /// All-empty remainder for a hierarchy of `depth` levels.
    pub fn empty(depth: usize) -> Self {
        Self {
            levels: vec![Vec::new(); depth.saturating_sub(1)],
        }
    }

    pub fn all_empty(&self) -> bool {
        self.levels.iter().all(|l| l.is_empty())
    }

    pub fn level(&self, k: usize) -> &[usize] {
        &self.levels[k - 2]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut Vec<usize> {
        &mut self.levels[k - 2]
    }

    /// Total number of stored entries.
    pub fn len(&self) -> usize {
        self.levels.iter().map(|l| l.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.all_empty()
    }

    /// Removes `len` entries starting at `start` from level `k`.
    pub fn remove_run(&mut self, k: usize, start: usize, len: usize) {
        self.level_mut(k).drain(start..start + len);
    }

    /// True when no nonempty contiguous run within any level multiplies
    /// to the identity class; `tables[k-2]` is the level-k class table.
    pub fn well_formed(&self, tables: &[GroupTable]) -> bool {
        self.levels.iter().enumerate().all(|(j, seq)| {
            let table = &tables[j];
            find_run_in(seq, table).is_none()
        })
    }
}

/// Shortest contiguous run with identity product, leftmost among ties.
fn find_run_in(seq: &[usize], table: &GroupTable) -> Option<(usize, usize)> {
    let e = table.identity();
    for len in 1..=seq.len() {
        for start in 0..=seq.len() - len {
            let run = seq[start..start + len]
                .iter()
                .fold(e, |acc, &x| table.mul(acc, x));
            if run == e {
                return Some((start, len));
            }
        }
    }
    None
}

/// Searches the remainder for a cancelling run, highest level first.
/// Returns `(level, start, len)` of the leftmost-shortest run found.
pub fn find_cancelling_run(
    y: &RemainderTuple,
    tables: &[GroupTable],
) -> Option<(usize, usize, usize)> {
    for k in (2..=y.levels.len() + 1).rev() {
        if let Some((start, len)) = find_run_in(y.level(k), &tables[k - 2]) {
            return Some((k, start, len));
        }
    }
    None
}

/// Follow-up action chosen by [`remainder_update`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RemainderAction {
    /// Merge the removed level-k entries (pre-update indices into the
    /// level's sequence, ascending; `took_z` marks whether the arriving
    /// outcome is part of the merge) and measure the merged block with
    /// the family one level down.
    Remeasure {
        level: usize,
        taken: Vec<usize>,
        took_z: bool,
    },
    /// Nothing cancels; append another auxiliary pair.
    Append,
    /// The remainder is all-empty.
    Done,
}

/// Folds one arriving outcome into the remainder. An identity outcome
/// at level 2 leaves the remainder untouched (the measured block is
/// already supported on the abelian level). Otherwise the outcome joins
/// its level's sequence; the shortest cancelling run (leftmost among
/// ties) is removed and scheduled for re-measurement one level down.
pub fn remainder_update(
    y: &mut RemainderTuple,
    z: LevelClass,
    tables: &[GroupTable],
) -> RemainderAction {
    let table = &tables[z.level - 2];
    let e = table.identity();
    if z.level == 2 && z.class == e {
        return if y.all_empty() {
            RemainderAction::Done
        } else {
            RemainderAction::Append
        };
    }
    debug_assert_ne!(z.class, e, "non-identity outcome expected above level 2");
    let k = z.level;
    let mut seq = y.level(k).to_vec();
    seq.push(z.class);
    if let Some((start, len)) = find_run_in(&seq, table) {
        let took_z = start + len == seq.len();
        let taken: Vec<usize> = (start..start + len).filter(|&i| i < seq.len() - 1).collect();
        seq.drain(start..start + len);
        *y.level_mut(k) = seq;
        return RemainderAction::Remeasure {
            level: k - 1,
            taken,
            took_z,
        };
    }
    *y.level_mut(k) = seq;
    RemainderAction::Append
}

// ---------------------------------------------------------------------------
// Closed-form outcome sampling

/// Which closed-form round distribution to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundKind {
    /// Uniform entries subject to the identity-product constraint.
    SptRound,
    /// Uniform entries with no constraint.
    GhzRound,
}

/// Draws one outcome string of `count` blocks from the closed-form
/// round distribution over the given class group.
pub fn sample_closed_form(
    kind: RoundKind,
    table: &GroupTable,
    count: usize,
    round: usize,
    seed: u64,
) -> OutcomeString {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    sample_closed_form_with(kind, table, count, round, &mut rng)
}

/// As [`sample_closed_form`] but drawing from a caller-owned generator.
pub fn sample_closed_form_with(
    kind: RoundKind,
    table: &GroupTable,
    count: usize,
    round: usize,
    rng: &mut impl Rng,
) -> OutcomeString {
    let r = table.order();
    let mut entries: Vec<usize> = Vec::with_capacity(count);
    match kind {
        RoundKind::SptRound => {
            let mut run = table.identity();
            for _ in 0..count.saturating_sub(1) {
                let x = rng.gen_range(0..r);
                run = table.mul(run, x);
                entries.push(x);
            }
            if count > 0 {
                entries.push(table.inv(run));
            }
        }
        RoundKind::GhzRound => {
            for _ in 0..count {
                entries.push(rng.gen_range(0..r));
            }
        }
    }
    OutcomeString {
        round,
        entries,
        block_sites: vec![1; count],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn z2() -> GroupTable {
        GroupTable::cyclic(2)
    }

    fn product(entries: &[usize], table: &GroupTable) -> usize {
        entries
            .iter()
            .fold(table.identity(), |acc, &x| table.mul(acc, x))
    }

    #[test]
    fn greedy_partition_cuts_at_running_identity() {
        let t = z2();
        let res = partition_minimal(&[1, 1, 0, 1, 1], &t, 10, false).unwrap();
        let PartitionResult::Split {
            partition,
            tail_start,
        } = res
        else {
            panic!("unexpected TooLong");
        };
        assert_eq!(partition.parts, vec![(0, 2), (2, 1), (3, 2)]);
        assert_eq!(partition.max_len, 2);
        assert_eq!(tail_start, None);
    }

    #[test]
    fn all_identity_string_gives_singletons() {
        let t = z2();
        let res = partition_minimal(&[0, 0, 0], &t, 1, false).unwrap();
        let PartitionResult::Split { partition, .. } = res else {
            panic!("unexpected TooLong");
        };
        assert_eq!(partition.parts.len(), 3);
        assert!(partition.parts.iter().all(|&(_, l)| l == 1));
    }

    #[test]
    fn parity_violation_is_an_error_without_tail() {
        let t = z2();
        let err = partition_minimal(&[1, 0], &t, 10, false).unwrap_err();
        assert!(matches!(err, ProtocolError::ParityViolation(_)));
    }

    #[test]
    fn tail_is_returned_in_long_range_mode() {
        let t = z2();
        let res = partition_minimal(&[1, 1, 1, 0], &t, 10, true).unwrap();
        let PartitionResult::Split {
            partition,
            tail_start,
        } = res
        else {
            panic!("unexpected TooLong");
        };
        assert_eq!(partition.parts, vec![(0, 2)]);
        assert_eq!(tail_start, Some(2));
    }

    #[test]
    fn over_long_part_reports_too_long() {
        let t = z2();
        let res = partition_minimal(&[1, 0, 0, 1], &t, 3, false).unwrap();
        assert_eq!(
            res,
            PartitionResult::TooLong {
                part_start: 0,
                part_len: 4
            }
        );
    }

    #[test]
    fn parts_are_minimal_on_random_strings() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for &order in &[2usize, 3, 4, 6] {
            let t = GroupTable::cyclic(order);
            for _ in 0..200 {
                let len = rng.gen_range(1..=20);
                let mut entries: Vec<usize> =
                    (0..len - 1).map(|_| rng.gen_range(0..order)).collect();
                entries.push(t.inv(product(&entries, &t)));
                let PartitionResult::Split { partition, .. } =
                    partition_minimal(&entries, &t, len, false).unwrap()
                else {
                    panic!("l_max = len cannot trigger TooLong");
                };
                let covered: usize = partition.parts.iter().map(|&(_, l)| l).sum();
                assert_eq!(covered, len);
                for &(s, l) in &partition.parts {
                    assert_eq!(product(&entries[s..s + l], &t), t.identity());
                    for p in 1..l {
                        assert_ne!(product(&entries[s..s + p], &t), t.identity());
                    }
                }
            }
        }
    }

    #[test]
    fn compaction_reproduces_the_pairing_example() {
        let t = z2();
        let perm = plan_compaction(&[1, 0, 0, 1], &t).unwrap();
        assert_eq!(perm, vec![0, 3, 1, 2]);
    }

    #[test]
    fn compaction_is_identity_on_short_parts() {
        let t = GroupTable::cyclic(4);
        let perm = plan_compaction(&[1, 2, 1], &t).unwrap();
        assert_eq!(perm, vec![0, 1, 2]);
    }

    #[test]
    fn compaction_bounds_run_lengths_on_random_parts() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let tables = vec![
            GroupTable::cyclic(2),
            GroupTable::cyclic(3),
            GroupTable::cyclic(4),
            GroupTable::direct_product(&GroupTable::cyclic(2), &GroupTable::cyclic(2)).unwrap(),
        ];
        for t in &tables {
            let r = t.order();
            for _ in 0..300 {
                let len = rng.gen_range(1..=18);
                let mut entries: Vec<usize> = (0..len - 1).map(|_| rng.gen_range(0..r)).collect();
                entries.push(t.inv(product(&entries, t)));
                if product(&entries, t) != t.identity() {
                    continue;
                }
                let perm = plan_compaction(&entries, t).unwrap();
                let mut sorted = perm.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..len).collect::<Vec<_>>());
                let reordered: Vec<usize> = perm.iter().map(|&i| entries[i]).collect();
                let PartitionResult::Split { partition, .. } =
                    partition_minimal(&reordered, t, len, false).unwrap()
                else {
                    panic!("reordered part lost its identity product");
                };
                assert!(partition.max_len <= r, "run of {} > {}", partition.max_len, r);
            }
        }
    }

    #[test]
    fn odd_even_schedule_realizes_permutations_within_depth_bound() {
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        for trial in 0..1000 {
            let n = rng.gen_range(1..=12);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let rounds = odd_even_schedule(&perm).unwrap();
            let mut cur: Vec<usize> = (0..n).collect();
            for round in &rounds {
                let mut last = None;
                for &p in round {
                    if let Some(q) = last {
                        assert!(p > q + 1, "overlapping swaps in one round");
                    }
                    last = Some(p);
                    cur.swap(p, p + 1);
                }
            }
            assert_eq!(cur, perm, "trial {}", trial);
            let span = permutation_span(&perm);
            assert!(
                rounds.len() <= 4 * span.max(1) || span == 0,
                "depth {} exceeds 4x span {}",
                rounds.len(),
                span
            );
            if span == 0 {
                assert!(rounds.is_empty());
            }
        }
    }

    #[test]
    fn reversal_schedule_stays_within_bound() {
        let n = 9;
        let perm: Vec<usize> = (0..n).rev().collect();
        let rounds = odd_even_schedule(&perm).unwrap();
        assert!(rounds.len() <= 4 * permutation_span(&perm));
    }

    #[test]
    fn remainder_update_follows_the_storyline() {
        // Three levels (2, 3, 4), every class group of order two.
        let tables = vec![z2(), z2(), z2()];
        let mut y = RemainderTuple {
            levels: vec![vec![1], vec![], vec![1]],
        };
        // A level-3 outcome joins the middle entry and nothing cancels.
        let act = remainder_update(&mut y, LevelClass { level: 3, class: 1 }, &tables);
        assert_eq!(act, RemainderAction::Append);
        assert_eq!(y.levels, vec![vec![1], vec![1], vec![1]]);
        // A level-4 outcome makes the top level cancel in full.
        let act = remainder_update(&mut y, LevelClass { level: 4, class: 1 }, &tables);
        assert_eq!(
            act,
            RemainderAction::Remeasure {
                level: 3,
                taken: vec![0],
                took_z: true
            }
        );
        assert_eq!(y.levels, vec![vec![1], vec![1], vec![]]);
        // The re-measurement lands on level 3 and cancels there too.
        let act = remainder_update(&mut y, LevelClass { level: 3, class: 1 }, &tables);
        assert_eq!(
            act,
            RemainderAction::Remeasure {
                level: 2,
                taken: vec![0],
                took_z: true
            }
        );
        assert_eq!(y.levels, vec![vec![1], vec![], vec![]]);
        // Down to level 2, one more cancel empties the remainder.
        let act = remainder_update(&mut y, LevelClass { level: 2, class: 1 }, &tables);
        assert_eq!(
            act,
            RemainderAction::Remeasure {
                level: 1,
                taken: vec![0],
                took_z: true
            }
        );
        assert!(y.all_empty());
    }

    #[test]
    fn identity_outcome_at_level_two_asks_for_append_or_done() {
        let tables = vec![z2(), z2()];
        let mut y = RemainderTuple::empty(3);
        let act = remainder_update(&mut y, LevelClass { level: 2, class: 0 }, &tables);
        assert_eq!(act, RemainderAction::Done);
        y.level_mut(3).push(1);
        let act = remainder_update(&mut y, LevelClass { level: 2, class: 0 }, &tables);
        assert_eq!(act, RemainderAction::Append);
    }

    #[test]
    fn subset_cancellation_removes_the_leftmost_run() {
        // Level-2 class group of order four so partial cancels exist.
        let tables = vec![GroupTable::cyclic(4)];
        let mut y = RemainderTuple {
            levels: vec![vec![2, 1, 3]],
        };
        // Arriving class 2: the run [2, 2] starting at entry 0 is not
        // contiguous, but [1, 3] starting at entry 1 is and cancels.
        let act = remainder_update(&mut y, LevelClass { level: 2, class: 2 }, &tables);
        assert_eq!(
            act,
            RemainderAction::Remeasure {
                level: 1,
                taken: vec![1, 2],
                took_z: false
            }
        );
        assert_eq!(y.levels, vec![vec![2, 2]]);
        assert!(!y.well_formed(&tables));
        let found = find_cancelling_run(&y, &tables);
        assert_eq!(found, Some((2, 0, 2)));
    }

    #[test]
    fn closed_form_sampler_respects_parity() {
        let t = z2();
        for seed in 0..50 {
            let s = sample_closed_form(RoundKind::SptRound, &t, 4, 1, seed);
            assert_eq!(s.entries.len(), 4);
            assert_eq!(product(&s.entries, &t), t.identity());
        }
        let s = sample_closed_form(RoundKind::SptRound, &t, 1, 1, 9);
        assert_eq!(s.entries, vec![0]);
    }

    #[test]
    fn closed_form_sampler_is_uniform_without_parity() {
        let t = z2();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 100_000usize;
        let mut ones = 0usize;
        for _ in 0..n {
            let s = sample_closed_form_with(RoundKind::GhzRound, &t, 1, 1, &mut rng);
            ones += s.entries[0];
        }
        let f = ones as f64 / n as f64;
        let sigma = 0.5 / (n as f64).sqrt();
        assert!((f - 0.5).abs() < 3.0 * sigma, "frequency {}", f);
    }

    #[test]
    fn spt_sampler_covers_even_parity_strings_uniformly() {
        let t = z2();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut counts = [0usize; 8];
        let n = 80_000usize;
        for _ in 0..n {
            let s = sample_closed_form_with(RoundKind::SptRound, &t, 4, 1, &mut rng);
            let code = s.entries[0] * 4 + s.entries[1] * 2 + s.entries[2];
            counts[code] += 1;
        }
        let expect = n as f64 / 8.0;
        let sigma = (expect * (1.0 - 1.0 / 8.0)).sqrt();
        for &c in &counts {
            assert!((c as f64 - expect).abs() < 5.0 * sigma, "{:?}", counts);
        }
    }
}
