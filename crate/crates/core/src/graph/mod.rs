//! Signed time-varying digraphs.
//!
//! A [`GraphSnapshot`] stores the weights `a_ij` of one configuration, where
//! `a_ij` is the influence of agent `j` on agent `i` (positive = cooperative,
//! negative = antagonistic). A [`SwitchingSchedule`] activates snapshots on
//! consecutive time segments.
//!
//! Arcs are expressed in the direction information travels: the arc
//! `from -> to` exists when `a_{to,from} != 0`. Reachability, condensation and
//! root sets all use that orientation.

mod balance;
mod connectivity;
mod paths;
mod scc;
mod union;

pub use balance::{check_persistent_balance, BalanceVerdict, Bipartition};
pub use connectivity::{
    check_uniform_qs_connectivity, ConnectivityOptions, ConnectivityReport, WindowRoot,
};
pub use paths::{longest_path_from_roots, DEFAULT_PATH_NODE_LIMIT};
pub use scc::{condensation, root_set, Condensation};
pub use union::{delta_arc_integral, union_graph, UnionGraph};

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// A set of 0-based agent indices.
pub type NodeSet = BTreeSet<usize>;

/// Sign function with range {-1, 0, 1}.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A directed arc in information-flow orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
}

impl Arc {
    pub fn new(from: usize, to: usize) -> Self {
        Self { from, to }
    }
}

/// One signed weighted adjacency configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSnapshot {
    n: usize,
    // row-major, weights[i * n + j] = a_ij
    weights: Vec<f64>,
}

impl GraphSnapshot {
    /// An empty graph on `n` agents.
    pub fn new(n: usize) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        Ok(Self {
            n,
            weights: vec![0.0; n * n],
        })
    }

    /// Builds a snapshot from `(from, to, weight)` triples, each setting
    /// `a_{to,from} = weight`.
    pub fn from_arcs(
        n: usize,
        arcs: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        let mut g = Self::new(n)?;
        for (from, to, w) in arcs {
            g.set_weight(to, from, w)?;
        }
        Ok(g)
    }

    /// Sets `a_ij`, the influence of `j` on `i`.
    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) -> Result<(), GraphError> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(GraphError::SelfLoop(i));
        }
        if !w.is_finite() {
            return Err(GraphError::NonFiniteWeight { i, j });
        }
        self.weights[i * self.n + j] = w;
        Ok(())
    }

    fn check_index(&self, index: usize) -> Result<(), GraphError> {
        if index >= self.n {
            Err(GraphError::AgentOutOfRange { index, n: self.n })
        } else {
            Ok(())
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    /// `a_ij`; zero when absent.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Row `i` of the weight matrix: the weights agent `i` receives.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    /// Nonzero entries as `(arc, weight)` pairs.
    pub fn arcs(&self) -> impl Iterator<Item = (Arc, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (0..self.n).filter_map(move |j| {
                let w = self.weight(i, j);
                (w != 0.0).then_some((Arc::new(j, i), w))
            })
        })
    }

    /// Largest absolute weight.
    pub fn max_abs_weight(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// Signed Laplacian: `[L]_ii = sum_k |a_ik|`, `[L]_ij = -a_ij`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.row(i).iter().map(|w| w.abs()).sum()
            } else {
                -self.weight(i, j)
            }
        })
    }
}

/// How the snapshot sequence repeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rotation {
    /// G1 -> ... -> Gm, then again from G1.
    Cyclic,
    /// After each full pass the starting snapshot advances by one:
    /// G1..Gm, then G2..Gm G1, then G3..G2, and so on.
    RotatingCyclic,
}

/// A maximal stretch of time on which one snapshot is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub snapshot: usize,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Piecewise-constant map from time to snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSchedule {
    snapshots: Vec<GraphSnapshot>,
    dwell: Vec<f64>,
    rotation: Rotation,
    t_start: f64,
    // one period of segments as (start offset, end offset, snapshot)
    layout: Vec<(f64, f64, usize)>,
    period: f64,
}

impl SwitchingSchedule {
    pub fn new(
        snapshots: Vec<GraphSnapshot>,
        dwell: Vec<f64>,
        rotation: Rotation,
        t_start: f64,
    ) -> Result<Self, GraphError> {
        let first = snapshots.first().ok_or(GraphError::EmptySchedule)?;
        let n = first.n_agents();
        if let Some(bad) = snapshots.iter().find(|g| g.n_agents() != n) {
            return Err(GraphError::AgentCountMismatch {
                expected: n,
                got: bad.n_agents(),
            });
        }
        if dwell.len() != snapshots.len() {
            return Err(GraphError::DwellCountMismatch {
                snapshots: snapshots.len(),
                dwells: dwell.len(),
            });
        }
        if let Some(&d) = dwell.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(GraphError::BadDwell(d));
        }
        if !t_start.is_finite() {
            return Err(GraphError::UnsupportedSchedule);
        }

        let m = snapshots.len();
        let passes = match rotation {
            Rotation::Cyclic => 1,
            Rotation::RotatingCyclic => m,
        };
        let mut layout = Vec::with_capacity(passes * m);
        let mut offset = 0.0;
        for pass in 0..passes {
            for k in 0..m {
                let idx = (pass + k) % m;
                let end = offset + dwell[idx];
                layout.push((offset, end, idx));
                offset = end;
            }
        }
        if !offset.is_finite() {
            return Err(GraphError::UnsupportedSchedule);
        }

        Ok(Self {
            snapshots,
            dwell,
            rotation,
            t_start,
            layout,
            period: offset,
        })
    }

    /// A schedule holding one snapshot forever.
    pub fn constant(snapshot: GraphSnapshot) -> Self {
        Self::new(vec![snapshot], vec![1.0], Rotation::Cyclic, 0.0)
            .expect("single snapshot schedule is valid")
    }

    pub fn n_agents(&self) -> usize {
        self.snapshots[0].n_agents()
    }

    pub fn snapshots(&self) -> &[GraphSnapshot] {
        &self.snapshots
    }

    pub fn dwell_times(&self) -> &[f64] {
        &self.dwell
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    /// Length after which the activation pattern repeats.
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn min_dwell(&self) -> f64 {
        self.dwell.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `M0`: the largest `|a_ij|` over every snapshot.
    pub fn max_abs_weight(&self) -> f64 {
        self.snapshots
            .iter()
            .map(GraphSnapshot::max_abs_weight)
            .fold(0.0, f64::max)
    }

    /// Index of the period containing `t`, corrected for rounding so that
    /// `period_base(q) <= t`.
    fn period_index(&self, t: f64) -> i64 {
        let mut q = ((t - self.t_start) / self.period).floor() as i64;
        while q > 0 && self.period_base(q) > t {
            q -= 1;
        }
        while self.period_base(q + 1) <= t {
            q += 1;
        }
        q
    }

    fn period_base(&self, q: i64) -> f64 {
        self.t_start + q as f64 * self.period
    }

    /// The segment active at `t` (right-continuous at switch instants).
    pub fn segment_at(&self, t: f64) -> Result<Segment, GraphError> {
        if !(t >= self.t_start) {
            return Err(GraphError::BeforeStart {
                t,
                t_start: self.t_start,
            });
        }
        let q = self.period_index(t);
        let base = self.period_base(q);
        let (s, e, snapshot) = self
            .layout
            .iter()
            .copied()
            .find(|&(_, e, _)| base + e > t)
            .unwrap_or(*self.layout.last().expect("layout is nonempty"));
        Ok(Segment {
            start: base + s,
            end: base + e,
            snapshot,
        })
    }

    /// Segments overlapping `[t1, t2)`, clipped to it.
    pub fn segments(&self, t1: f64, t2: f64) -> Result<Vec<Segment>, GraphError> {
        if !(t1 < t2) || !t2.is_finite() {
            return Err(GraphError::BadInterval { t1, t2 });
        }
        if !(t1 >= self.t_start) {
            return Err(GraphError::BeforeStart {
                t: t1,
                t_start: self.t_start,
            });
        }
        let mut out = Vec::new();
        let mut q = self.period_index(t1);
        loop {
            let base = self.period_base(q);
            for &(s, e, snapshot) in &self.layout {
                let (start, end) = (base + s, base + e);
                if end <= t1 {
                    continue;
                }
                if start >= t2 {
                    return Ok(out);
                }
                out.push(Segment {
                    start: start.max(t1),
                    end: end.min(t2),
                    snapshot,
                });
            }
            q += 1;
        }
    }

    /// Every segment start in `[t1, t2]`.
    pub fn switch_instants(&self, t1: f64, t2: f64) -> Result<Vec<f64>, GraphError> {
        if t2 < t1 {
            return Err(GraphError::BadInterval { t1, t2 });
        }
        let mut out = Vec::new();
        let mut q = self.period_index(t1.max(self.t_start));
        'outer: loop {
            let base = self.period_base(q);
            for &(s, _, _) in &self.layout {
                let start = base + s;
                if start > t2 {
                    break 'outer;
                }
                if start >= t1 {
                    out.push(start);
                }
            }
            q += 1;
        }
        Ok(out)
    }
}

/// The snapshot active at `t`.
pub fn adjacency_at(schedule: &SwitchingSchedule, t: f64) -> Result<&GraphSnapshot, GraphError> {
    let seg = schedule.segment_at(t)?;
    Ok(&schedule.snapshots[seg.snapshot])
}

/// The signed Laplacian of the snapshot active at `t`.
pub fn laplacian_at(schedule: &SwitchingSchedule, t: f64) -> Result<DMatrix<f64>, GraphError> {
    adjacency_at(schedule, t).map(GraphSnapshot::laplacian)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Five snapshots with dwell (2, 2, 3, 1, 2); snapshot k carries the
    /// single arc 0 -> 1 with weight k + 1 so tests can tell them apart.
    pub fn tagged_rotating() -> SwitchingSchedule {
        let snaps = (0..5)
            .map(|k| GraphSnapshot::from_arcs(3, [(0, 1, (k + 1) as f64)]).unwrap())
            .collect();
        SwitchingSchedule::new(
            snaps,
            vec![2.0, 2.0, 3.0, 1.0, 2.0],
            Rotation::RotatingCyclic,
            0.0,
        )
        .unwrap()
    }
}
