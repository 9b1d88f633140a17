//! Leveled-compaction data-movement simulator.
//!
//! Keys `0..n` arrive in random order, are flushed as sorted L0 files of
//! `t_keys` keys, and are pushed down by compactions. Level `i >= 1` holds
//! at most `C * F^(i-1)` files' worth of keys; L0 holds at most `C` files.

use std::thread;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::keyed_rng;
use crate::stats::{mean, variance, LinearFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_keys: u64,
    pub t_keys: u64,
    pub c: u32,
    pub f_grid: Vec<u32>,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.t_keys == 0 {
            return bad("t_keys must be positive".into());
        }
        if self.n_keys < 100 * self.t_keys {
            return bad(format!(
                "n_keys={} must be at least 100 files of {} keys",
                self.n_keys, self.t_keys
            ));
        }
        if self.n_keys > u64::from(u32::MAX) {
            return bad("n_keys must fit in 32 bits".into());
        }
        if self.c == 0 {
            return bad("C=0 leaves L0 and L1 without capacity for a finite fanout".into());
        }
        if self.f_grid.is_empty() || self.f_grid.iter().any(|&f| f < 2) {
            return bad("every fanout must be at least 2".into());
        }
        Ok(())
    }
}

/// Files-touched statistics for compactions out of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionStats {
    pub from_level: usize,
    pub compactions: usize,
    pub trivial_moves: usize,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactionStats {
    pub fanout: u32,
    pub transitions: Vec<TransitionStats>,
    pub compaction_count: usize,
    /// Pooled over every transition out of levels `i >= 1`.
    pub deep_mean: f64,
    pub deep_variance: f64,
    pub level_files: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMovementReport {
    pub config: SimConfig,
    pub per_fanout: Vec<CompactionStats>,
    /// Deep mean against `F`.
    pub fit: Option<LinearFit>,
}

#[derive(Debug, Clone)]
struct SstFile {
    keys: Vec<u32>,
}

impl SstFile {
    fn min(&self) -> u32 {
        self.keys[0]
    }

    fn max(&self) -> u32 {
        *self.keys.last().expect("files are never empty")
    }

    fn overlaps(&self, lo: u32, hi: u32) -> bool {
        self.min() <= hi && lo <= self.max()
    }
}

/// The level structure. Level 0 is in flush order; deeper levels are
/// sorted by key and pairwise disjoint.
#[derive(Debug, Default)]
pub(crate) struct Tree {
    levels: Vec<Vec<SstFile>>,
    t_keys: usize,
    c: u64,
    fanout: u64,
    verify: bool,
    live_keys: u64,
    /// `(from_level, files_touched)` per compaction.
    log: Vec<(usize, usize)>,
}

impl Tree {
    fn new(t_keys: usize, c: u32, fanout: u32, verify: bool) -> Self {
        Tree {
            levels: vec![Vec::new()],
            t_keys,
            c: u64::from(c),
            fanout: u64::from(fanout),
            verify,
            ..Tree::default()
        }
    }

    /// Capacity of level `i` in keys.
    fn capacity(&self, level: usize) -> u64 {
        if level == 0 {
            return self.c * self.t_keys as u64;
        }
        let exp = u32::try_from(level - 1).unwrap_or(u32::MAX);
        self.c
            .saturating_mul(self.t_keys as u64)
            .saturating_mul(self.fanout.saturating_pow(exp))
    }

    fn level_keys(&self, level: usize) -> u64 {
        self.levels[level].iter().map(|f| f.keys.len() as u64).sum()
    }

    fn over_capacity(&self, level: usize) -> bool {
        if level == 0 {
            self.levels[0].len() as u64 > self.c
        } else {
            self.level_keys(level) > self.capacity(level)
        }
    }

    fn flush(&mut self, mut batch: Vec<u32>) -> Result<()> {
        batch.sort_unstable();
        self.live_keys += batch.len() as u64;
        self.levels[0].push(SstFile { keys: batch });
        self.settle()
    }

    /// Compacts until no level is over capacity, shallowest level first.
    fn settle(&mut self) -> Result<()> {
        let mut level = 0;
        while level < self.levels.len() {
            if self.over_capacity(level) {
                self.compact(level)?;
                level = level.saturating_sub(1);
            } else {
                level += 1;
            }
        }
        Ok(())
    }

    /// Files in `level + 1` whose ranges intersect `[lo, hi]`, as an index
    /// range into the sorted level.
    fn next_overlaps(&self, level: usize, lo: u32, hi: u32) -> std::ops::Range<usize> {
        let Some(next) = self.levels.get(level + 1) else {
            return 0..0;
        };
        let start = next.partition_point(|f| f.max() < lo);
        let end = next.partition_point(|f| f.min() <= hi);
        start..end.max(start)
    }

    /// Candidate with the fewest next-level overlaps, ties to the smallest
    /// minimum key.
    fn pick_victim(&self, level: usize) -> usize {
        let files = &self.levels[level];
        (0..files.len())
            .min_by_key(|&i| {
                let f = &files[i];
                (self.next_overlaps(level, f.min(), f.max()).len(), f.min())
            })
            .expect("a level over capacity has files")
    }

    fn compact(&mut self, level: usize) -> Result<()> {
        if level + 1 == self.levels.len() {
            self.levels.push(Vec::new());
        }
        let victim = self.pick_victim(level);
        if self.verify {
            self.check_victim(level, victim)?;
        }
        let before = self.live_keys;

        // L0 files overlap freely, so pull in every L0 file that touches the
        // growing key range.
        let mut chosen = vec![victim];
        let (mut lo, mut hi) = (self.levels[level][victim].min(), self.levels[level][victim].max());
        if level == 0 {
            loop {
                let extra: Vec<usize> = (0..self.levels[0].len())
                    .filter(|i| !chosen.contains(i) && self.levels[0][*i].overlaps(lo, hi))
                    .collect();
                if extra.is_empty() {
                    break;
                }
                for i in extra {
                    lo = lo.min(self.levels[0][i].min());
                    hi = hi.max(self.levels[0][i].max());
                    chosen.push(i);
                }
            }
        }
        let targets = self.next_overlaps(level, lo, hi);
        let touched = chosen.len() + targets.len();

        chosen.sort_unstable();
        let mut inputs: Vec<SstFile> = chosen
            .iter()
            .rev()
            .map(|&i| self.levels[level].remove(i))
            .collect();

        let next = &mut self.levels[level + 1];
        if targets.is_empty() && inputs.len() == 1 {
            let file = inputs.pop().expect("one input");
            let at = next.partition_point(|f| f.max() < file.min());
            next.insert(at, file);
        } else {
            let at = targets.start;
            inputs.extend(next.drain(targets));
            let input_keys: usize = inputs.iter().map(|f| f.keys.len()).sum();
            let mut merged: Vec<u32> = Vec::with_capacity(input_keys);
            for f in inputs {
                merged.extend(f.keys);
            }
            merged.sort_unstable();
            let outputs: Vec<SstFile> = merged
                .chunks(self.t_keys)
                .map(|c| SstFile { keys: c.to_vec() })
                .collect();
            let output_keys: usize = outputs.iter().map(|f| f.keys.len()).sum();
            if output_keys != input_keys {
                return Err(Error::Invariant(format!(
                    "merge out of level {level} produced {output_keys} keys from {input_keys}"
                )));
            }
            next.splice(at..at, outputs);
        }
        self.log.push((level, touched));

        if self.verify {
            self.check_structure(level + 1, before)?;
        }
        Ok(())
    }

    /// Recomputes every candidate's overlap count by brute force.
    fn check_victim(&self, level: usize, victim: usize) -> Result<()> {
        let next: &[SstFile] = self.levels.get(level + 1).map_or(&[], Vec::as_slice);
        let count = |f: &SstFile| next.iter().filter(|g| g.overlaps(f.min(), f.max())).count();
        let files = &self.levels[level];
        let best = count(&files[victim]);
        if let Some((i, other)) = files.iter().enumerate().find(|(_, f)| count(f) < best) {
            return Err(Error::Invariant(format!(
                "victim {victim} in level {level} overlaps {best} files but file {i} overlaps {}",
                count(other)
            )));
        }
        Ok(())
    }

    /// Key conservation over the whole tree, plus sortedness and
    /// disjointness of the two levels a compaction touched.
    fn check_structure(&self, changed: usize, expected_keys: u64) -> Result<()> {
        let total: u64 = (0..self.levels.len()).map(|l| self.level_keys(l)).sum();
        if total != expected_keys {
            return Err(Error::Invariant(format!(
                "tree holds {total} keys, expected {expected_keys}"
            )));
        }
        for l in [changed - 1, changed] {
            let files = &self.levels[l];
            if l == changed
                && files.iter().any(|f| f.keys.is_empty() || f.keys.windows(2).any(|w| w[0] >= w[1]))
            {
                return Err(Error::Invariant(format!("level {l} has an empty or unsorted file")));
            }
            if l >= 1 && files.windows(2).any(|w| w[0].max() >= w[1].min()) {
                return Err(Error::Invariant(format!(
                    "level {l} has overlapping files after compacting into level {changed}"
                )));
            }
        }
        Ok(())
    }

    /// Every key in `0..n` sits in exactly one file.
    fn check_membership(&self, n: u64) -> Result<()> {
        let mut seen = vec![false; usize::try_from(n).expect("n fits in memory")];
        for file in self.levels.iter().flatten() {
            for &k in &file.keys {
                let slot = seen.get_mut(k as usize).ok_or_else(|| {
                    Error::Invariant(format!("key {k} outside 0..{n}"))
                })?;
                if *slot {
                    return Err(Error::Invariant(format!("key {k} stored twice")));
                }
                *slot = true;
            }
        }
        match seen.iter().position(|s| !s) {
            Some(k) => Err(Error::Invariant(format!("key {k} lost"))),
            None => Ok(()),
        }
    }

    fn stats(&self, fanout: u32) -> CompactionStats {
        let depth = self.log.iter().map(|&(l, _)| l + 1).max().unwrap_or(0);
        let mut transitions = Vec::with_capacity(depth);
        for level in 0..depth {
            let touched: Vec<f64> = self
                .log
                .iter()
                .filter(|&&(l, _)| l == level)
                .map(|&(_, t)| t as f64)
                .collect();
            transitions.push(TransitionStats {
                from_level: level,
                compactions: touched.len(),
                trivial_moves: touched.iter().filter(|&&t| t == 1.0).count(),
                mean: mean(&touched),
                variance: variance(&touched),
            });
        }
        let deep: Vec<f64> = self
            .log
            .iter()
            .filter(|&&(l, _)| l >= 1)
            .map(|&(_, t)| t as f64)
            .collect();
        CompactionStats {
            fanout,
            transitions,
            compaction_count: self.log.len(),
            deep_mean: mean(&deep),
            deep_variance: variance(&deep),
            level_files: self.levels.iter().map(Vec::len).collect(),
        }
    }
}

/// Runs the workload for one fanout. With `verify`, every compaction is
/// checked for key conservation, level ordering and victim optimality, and
/// the final tree is checked for exact key membership.
pub fn simulate_fanout(config: &SimConfig, fanout: u32, verify: bool) -> Result<CompactionStats> {
    config.validate()?;
    if fanout < 2 {
        return Err(Error::InvalidParameter(format!("fanout must be at least 2, got {fanout}")));
    }
    let n = u32::try_from(config.n_keys).expect("validated");
    let t = usize::try_from(config.t_keys).expect("t_keys fits in memory");
    let mut keys: Vec<u32> = (0..n).collect();
    // The insertion order depends only on the seed so every fanout sees the
    // same workload.
    keys.shuffle(&mut keyed_rng(&[config.seed, 0x6c_736d]));

    let mut tree = Tree::new(t, config.c, fanout, verify);
    for batch in keys.chunks(t) {
        tree.flush(batch.to_vec())?;
    }
    if verify {
        tree.check_membership(config.n_keys)?;
    }
    if tree.log.is_empty() {
        return Err(Error::Invariant("workload finished without a compaction".into()));
    }
    Ok(tree.stats(fanout))
}

/// Simulates every fanout of the grid (concurrently) and fits the deep
/// files-touched mean linearly in `F`.
pub fn simulate_data_movement(config: &SimConfig, verify: bool) -> Result<DataMovementReport> {
    config.validate()?;
    let per_fanout: Vec<CompactionStats> = thread::scope(|scope| {
        let handles: Vec<_> = config
            .f_grid
            .iter()
            .map(|&f| scope.spawn(move || simulate_fanout(config, f, verify)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    let xs: Vec<f64> = per_fanout.iter().map(|s| f64::from(s.fanout)).collect();
    let ys: Vec<f64> = per_fanout.iter().map(|s| s.deep_mean).collect();
    Ok(DataMovementReport {
        config: config.clone(),
        fit: LinearFit::ols(&xs, &ys),
        per_fanout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(keys: std::ops::RangeInclusive<u32>) -> SstFile {
        SstFile { keys: keys.collect() }
    }

    fn tree_with(l1: Vec<SstFile>, l2: Vec<SstFile>) -> Tree {
        let mut tree = Tree::new(4, 1, 2, true);
        tree.live_keys = l1.iter().chain(&l2).map(|f| f.keys.len() as u64).sum();
        tree.levels = vec![Vec::new(), l1, l2];
        tree
    }

    #[test]
    fn single_overlap_touches_two_files() {
        let l1 = vec![SstFile { keys: vec![10, 12, 14, 16] }];
        let l2 = vec![file(0..=3), SstFile { keys: vec![11, 13, 15, 17] }, file(20..=23)];
        let mut tree = tree_with(l1, l2);
        tree.compact(1).unwrap();
        assert_eq!(tree.log, vec![(1, 2)]);
        assert_eq!(tree.levels[1].len(), 0);
        let mins: Vec<u32> = tree.levels[2].iter().map(SstFile::min).collect();
        assert_eq!(mins, vec![0, 10, 14, 20]);
    }

    #[test]
    fn zero_overlap_is_a_trivial_move() {
        let mut tree = tree_with(vec![file(5..=8)], vec![file(0..=3), file(20..=23)]);
        tree.compact(1).unwrap();
        assert_eq!(tree.log, vec![(1, 1)]);
        let mins: Vec<u32> = tree.levels[2].iter().map(SstFile::min).collect();
        assert_eq!(mins, vec![0, 5, 20]);
    }

    #[test]
    fn victim_prefers_fewest_overlaps_then_smallest_key() {
        let tree = tree_with(
            vec![file(0..=9), file(20..=22), file(30..=32)],
            vec![file(0..=3), file(4..=7), file(21..=21), file(31..=31)],
        );
        assert_eq!(tree.pick_victim(1), 1);
    }

    #[test]
    fn small_workload_holds_invariants() {
        let config = SimConfig {
            n_keys: 100 * 64,
            t_keys: 64,
            c: 2,
            f_grid: vec![2, 3, 4],
            seed: 7,
        };
        let report = simulate_data_movement(&config, true).unwrap();
        for stats in &report.per_fanout {
            assert!(stats.compaction_count > 0);
            assert_eq!(stats.level_files[0] as u32 <= config.c, true);
            // Every L0 compaction merges all C+1 files.
            assert!(stats.transitions[0].mean >= f64::from(config.c) + 1.0);
        }
        let again = simulate_data_movement(&config, false).unwrap();
        assert_eq!(again.per_fanout, report.per_fanout);
    }

    #[test]
    fn rejects_bad_configs() {
        let ok = SimConfig { n_keys: 6400, t_keys: 64, c: 2, f_grid: vec![2], seed: 0 };
        assert!(ok.validate().is_ok());
        assert!(SimConfig { c: 0, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { n_keys: 6399, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { f_grid: vec![1], ..ok }.validate().is_err());
    }
}
