use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{sgn, Arc, SwitchingSchedule};
use crate::error::GraphError;

/// All δ-arcs of a schedule over `[t1, t2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnionGraph {
    pub t1: f64,
    pub t2: f64,
    pub arcs: BTreeSet<Arc>,
    /// Signs (+1 / -1) each arc takes on the active segments of the interval.
    pub arc_signs: BTreeMap<Arc, BTreeSet<i8>>,
}

/// `∫_{t1}^{t2} |a_ij(t)| dt`, summed exactly over the piecewise-constant
/// segments.
pub fn delta_arc_integral(
    schedule: &SwitchingSchedule,
    i: usize,
    j: usize,
    t1: f64,
    t2: f64,
) -> Result<f64, GraphError> {
    let n = schedule.n_agents();
    for index in [i, j] {
        if index >= n {
            return Err(GraphError::AgentOutOfRange { index, n });
        }
    }
    Ok(schedule
        .segments(t1, t2)?
        .iter()
        .map(|seg| schedule.snapshots()[seg.snapshot].weight(i, j).abs() * seg.duration())
        .sum())
}

/// Union of the δ-arcs over `[t1, t2)`: an arc is kept when its absolute
/// weight integrates to at least `delta * (t2 - t1)`.
pub fn union_graph(
    schedule: &SwitchingSchedule,
    delta: f64,
    t1: f64,
    t2: f64,
) -> Result<UnionGraph, GraphError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(GraphError::NonPositive {
            name: "delta",
            value: delta,
        });
    }
    let n = schedule.n_agents();
    let segments = schedule.segments(t1, t2)?;
    let threshold = delta * (t2 - t1);

    let mut integral = vec![0.0; n * n];
    let mut signs: BTreeMap<Arc, BTreeSet<i8>> = BTreeMap::new();
    for seg in &segments {
        let g = &schedule.snapshots()[seg.snapshot];
        for (arc, w) in g.arcs() {
            integral[arc.to * n + arc.from] += w.abs() * seg.duration();
            signs.entry(arc).or_default().insert(sgn(w) as i8);
        }
    }

    let arcs: BTreeSet<Arc> = signs
        .keys()
        .copied()
        .filter(|a| integral[a.to * n + a.from] >= threshold)
        .collect();
    signs.retain(|a, _| arcs.contains(a));
    Ok(UnionGraph {
        t1,
        t2,
        arcs,
        arc_signs: signs,
    })
}
