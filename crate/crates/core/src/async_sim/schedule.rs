//! Event schedules for asynchronous executions and the orderings derived
//! from them.
//!
//! Each update has a start instant (when its core picks a coordinate and
//! begins reading) and a commit instant (when it writes). Instants are
//! real-valued; the discrete times used by the analysis are derived:
//!
//! * the *start time* of an update is its rank among all starts;
//! * the *commit time* is the number of starts that precede its commit,
//!   bumped when needed so that commit times are strictly increasing.
//!
//! Events at equal instants are ordered by core id, then commits before
//! starts, then start instant. With these definitions an update with start
//! time `s` and commit time `c` is interfered with by exactly the updates
//! whose commit time lies strictly between `s` and `c`, and the overlap
//! bound is `q = max(c − s − 1)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, AUX_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpanModel {
    Constant { d: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Span `d1` with probability `p`, otherwise `d2`.
    Bimodal { d1: f64, d2: f64, p: f64 },
}

impl SpanModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SpanModel::Constant { d } => d > 0.0 && d.is_finite(),
            SpanModel::Uniform { lo, hi } => lo > 0.0 && hi >= lo && hi.is_finite(),
            SpanModel::Bimodal { d1, d2, p } => {
                d1 > 0.0 && d2 > 0.0 && d1.is_finite() && d2.is_finite() && (0.0..=1.0).contains(&p)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid span model {self:?}")))
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            SpanModel::Constant { d } => d,
            SpanModel::Uniform { lo, hi } if lo == hi => lo,
            SpanModel::Uniform { lo, hi } => rng.gen_range(lo..hi),
            SpanModel::Bimodal { d1, d2, p } => {
                if rng.gen_bool(p) {
                    d1
                } else {
                    d2
                }
            }
        }
    }

    /// Ratio of the longest to the shortest possible span.
    pub fn span_ratio(&self) -> f64 {
        match *self {
            SpanModel::Constant { .. } => 1.0,
            SpanModel::Uniform { lo, hi } => hi / lo,
            SpanModel::Bimodal { d1, d2, .. } => d1.max(d2) / d1.min(d2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledUpdate {
    pub core: usize,
    pub start: f64,
    pub commit: f64,
    pub coord: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    n: usize,
    updates: Vec<ScheduledUpdate>,
    start_time: Vec<usize>,
    commit_time: Vec<usize>,
    scc_time: Vec<usize>,
    q: usize,
}

impl Schedule {
    pub fn from_updates(n: usize, updates: Vec<ScheduledUpdate>) -> Result<Self> {
        for (u, up) in updates.iter().enumerate() {
            if !(up.start.is_finite() && up.commit.is_finite() && up.start < up.commit) {
                return Err(Error::InvalidInput(format!("update {u} needs finite start < commit")));
            }
            if up.coord >= n {
                return Err(Error::IndexOutOfRange { index: up.coord, n });
            }
        }
        let (start_time, commit_time) = discrete_times(&updates);
        let q = start_time
            .iter()
            .zip(&commit_time)
            .map(|(&s, &c)| c.saturating_sub(s + 1))
            .max()
            .unwrap_or(0);
        let scc_time = scc_positions(n, &updates, &start_time, &commit_time);
        Ok(Self { n, updates, start_time, commit_time, scc_time, q })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.updates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    pub fn updates(&self) -> &[ScheduledUpdate] {
        &self.updates
    }

    /// Rank of each update among starts.
    pub fn start_times(&self) -> &[usize] {
        &self.start_time
    }

    /// Discrete commit time of each update (strictly increasing in commit order).
    pub fn commit_times(&self) -> &[usize] {
        &self.commit_time
    }

    /// Position of each update in the single-coordinate-consistent ordering.
    pub fn scc_times(&self) -> &[usize] {
        &self.scc_time
    }

    /// Overlap bound: the most other updates that commit inside one update's span.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Update ids listed by start time.
    pub fn start_order(&self) -> Vec<usize> {
        invert(&self.start_time)
    }

    /// Update ids listed by commit time.
    pub fn commit_order(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.len()).collect();
        ids.sort_by_key(|&u| self.commit_time[u]);
        ids
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.updates)?)
    }

    pub fn from_json(n: usize, s: &str) -> Result<Self> {
        Self::from_updates(n, serde_json::from_str(s)?)
    }
}

fn invert(pos: &[usize]) -> Vec<usize> {
    let mut out = vec![0; pos.len()];
    for (u, &p) in pos.iter().enumerate() {
        out[p] = u;
    }
    out
}

fn discrete_times(updates: &[ScheduledUpdate]) -> (Vec<usize>, Vec<usize>) {
    // (instant, core, kind, start instant, id); commits (kind 0) sort first.
    let mut events: Vec<(f64, usize, u8, f64, usize)> = Vec::with_capacity(2 * updates.len());
    for (u, up) in updates.iter().enumerate() {
        events.push((up.start, up.core, 1, up.start, u));
        events.push((up.commit, up.core, 0, up.start, u));
    }
    events.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.total_cmp(&b.3))
            .then(a.4.cmp(&b.4))
    });
    let mut start_time = vec![0; updates.len()];
    let mut commit_time = vec![0; updates.len()];
    let mut starts = 0usize;
    let mut last: Option<usize> = None;
    for &(_, _, kind, _, u) in &events {
        if kind == 1 {
            start_time[u] = starts;
            starts += 1;
        } else {
            let c = last.map_or(starts, |l| starts.max(l + 1));
            commit_time[u] = c;
            last = Some(c);
        }
    }
    (start_time, commit_time)
}

fn scc_positions(n: usize, updates: &[ScheduledUpdate], start_time: &[usize], commit_time: &[usize]) -> Vec<usize> {
    let mut by_coord: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, up) in updates.iter().enumerate() {
        by_coord[up.coord].push(u);
    }
    let mut scc = vec![0; updates.len()];
    for ids in &mut by_coord {
        let mut positions: Vec<usize> = ids.iter().map(|&u| start_time[u]).collect();
        positions.sort_unstable();
        ids.sort_by_key(|&u| commit_time[u]);
        for (&u, &pos) in ids.iter().zip(&positions) {
            scc[u] = pos;
        }
    }
    scc
}

/// Update ids listed by SCC position: within each coordinate, updates are
/// rearranged into commit order while keeping that coordinate's set of
/// start-order positions.
pub fn scc_order(schedule: &Schedule) -> Vec<usize> {
    invert(&schedule.scc_time)
}

#[derive(Clone, Copy, PartialEq)]
struct CoreClock {
    at: f64,
    core: usize,
}

impl Eq for CoreClock {}

impl Ord for CoreClock {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap.
        other.at.total_cmp(&self.at).then(other.core.cmp(&self.core))
    }
}

impl PartialOrd for CoreClock {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Simulates `cores` cores running back-to-back updates (each commit is the
/// next start on that core) and keeps the first `updates` starts.
/// Coordinates are uniform on `0..n`.
pub fn generate_schedule(
    n: usize,
    updates: usize,
    cores: usize,
    span: SpanModel,
    seed: u64,
) -> Result<Schedule> {
    if cores == 0 || n == 0 {
        return Err(Error::InvalidInput("need at least one core and one coordinate".into()));
    }
    span.validate()?;
    let mut rng = stream_rng(seed, AUX_STREAM + 1);
    let mut clocks: BinaryHeap<CoreClock> = (0..cores).map(|core| CoreClock { at: 0.0, core }).collect();
    let mut out = Vec::with_capacity(updates);
    for _ in 0..updates {
        let CoreClock { at, core } = clocks.pop().expect("cores >= 1");
        let commit = at + span.sample(&mut rng);
        out.push(ScheduledUpdate { core, start: at, commit, coord: rng.gen_range(0..n) });
        clocks.push(CoreClock { at: commit, core });
    }
    Schedule::from_updates(n, out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceReport {
    /// For each update, the SCC times of the updates that interfere with it.
    pub interferers_scc: Vec<Vec<usize>>,
    /// For each update, the start times of the same interferers.
    pub interferers_start: Vec<Vec<usize>>,
    pub q_emp: usize,
    /// Every interferer of the update at SCC time `t` sits in `[t − 2q + 1, t + q − 1]`.
    pub scc_range_ok: bool,
    /// Every interferer of the update with start time `t` started in `[t − q, t + q − 1]`.
    pub start_range_ok: bool,
}

/// Update `a` interferes with update `b` when `a` commits strictly inside
/// `b`'s span.
pub fn interference_report(schedule: &Schedule) -> InterferenceReport {
    let q = schedule.q as i64;
    let max_ct = schedule.commit_time.iter().copied().max().unwrap_or(0);
    let mut by_commit: Vec<Option<usize>> = vec![None; max_ct + 1];
    for (u, &c) in schedule.commit_time.iter().enumerate() {
        by_commit[c] = Some(u);
    }
    let mut interferers_scc = Vec::with_capacity(schedule.len());
    let mut interferers_start = Vec::with_capacity(schedule.len());
    let (mut scc_ok, mut start_ok) = (true, true);
    for b in 0..schedule.len() {
        let (sb, cb) = (schedule.start_time[b], schedule.commit_time[b]);
        let scc_b = schedule.scc_time[b] as i64;
        let mut sccs = Vec::new();
        let mut starts = Vec::new();
        for a in (sb + 1..cb).filter_map(|c| by_commit[c]) {
            let (scc_a, st_a) = (schedule.scc_time[a], schedule.start_time[a]);
            let d = scc_a as i64 - scc_b;
            scc_ok &= -2 * q < d && d < q;
            let ds = st_a as i64 - sb as i64;
            start_ok &= -q <= ds && ds < q;
            sccs.push(scc_a);
            starts.push(st_a);
        }
        interferers_scc.push(sccs);
        interferers_start.push(starts);
    }
    InterferenceReport {
        interferers_scc,
        interferers_start,
        q_emp: schedule.q,
        scc_range_ok: scc_ok,
        start_range_ok: start_ok,
    }
}

/// How often each coordinate appears in the first `prefix` commits. Under
/// unequal spans the commit-order distribution can drift from uniform even
/// though every start is uniform; this exposes that drift.
pub fn commit_order_coord_counts(schedule: &Schedule, prefix: usize) -> Vec<usize> {
    let mut counts = vec![0; schedule.n];
    for u in schedule.commit_order().into_iter().take(prefix) {
        counts[schedule.updates[u].coord] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn up(core: usize, start: f64, commit: f64, coord: usize) -> ScheduledUpdate {
        ScheduledUpdate { core, start, commit, coord }
    }

    #[test]
    fn single_core_has_no_overlap() {
        let s = generate_schedule(10, 200, 1, SpanModel::Uniform { lo: 1.0, hi: 3.0 }, 4).unwrap();
        assert_eq!(s.q(), 0);
        assert_eq!(s.start_order(), s.commit_order());
        assert_eq!(s.start_order(), scc_order(&s));
        let rep = interference_report(&s);
        assert!(rep.interferers_scc.iter().all(Vec::is_empty));
        assert!(rep.scc_range_ok);
    }

    #[test]
    fn two_updates_overlapping() {
        let s = Schedule::from_updates(2, vec![up(0, 0.0, 3.0, 0), up(1, 1.0, 2.0, 1)]).unwrap();
        // Update 1 commits at time 2, which pushes update 0's commit to time 3.
        assert_eq!(s.commit_times(), &[3, 2]);
        assert_eq!(s.q(), 2);
        let rep = interference_report(&s);
        assert_eq!(rep.interferers_scc[0], vec![1]);
        assert!(rep.interferers_scc[1].is_empty());
        assert!(rep.scc_range_ok && rep.start_range_ok);
    }

    #[test]
    fn disjoint_coordinates_keep_start_order() {
        let s = generate_schedule(1_000_000, 50, 4, SpanModel::Constant { d: 1.0 }, 2).unwrap();
        let coords: std::collections::HashSet<usize> = s.updates().iter().map(|u| u.coord).collect();
        assert_eq!(coords.len(), 50);
        assert_eq!(scc_order(&s), s.start_order());
    }

    #[test]
    fn one_coordinate_in_commit_order_is_identity() {
        let ups = (0..6).map(|i| up(i % 2, i as f64, i as f64 + 1.5, 0)).collect();
        let s = Schedule::from_updates(1, ups).unwrap();
        assert_eq!(scc_order(&s), s.start_order());
    }

    #[test]
    fn invalid_inputs() {
        assert!(Schedule::from_updates(1, vec![up(0, 1.0, 1.0, 0)]).is_err());
        assert!(Schedule::from_updates(1, vec![up(0, 0.0, 1.0, 3)]).is_err());
        assert!(generate_schedule(3, 5, 0, SpanModel::Constant { d: 1.0 }, 0).is_err());
        assert!(generate_schedule(3, 5, 1, SpanModel::Bimodal { d1: 1.0, d2: 2.0, p: 1.5 }, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = generate_schedule(5, 30, 3, SpanModel::Bimodal { d1: 1.0, d2: 10.0, p: 0.5 }, 8).unwrap();
        assert_eq!(Schedule::from_json(5, &s.to_json().unwrap()).unwrap(), s);
    }
}
