use serde::Serialize;

use super::{condensation, root_set, union_graph, NodeSet, SwitchingSchedule};
use crate::error::GraphError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectivityOptions {
    /// Uniform window starts per shortest dwell time, on top of the switch
    /// instants.
    pub starts_per_min_dwell: usize,
}

impl Default for ConnectivityOptions {
    fn default() -> Self {
        Self {
            starts_per_min_dwell: 10,
        }
    }
}

/// Root set of the union graph on `[start, start + T)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRoot {
    pub start: f64,
    pub root: Option<NodeSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectivityReport {
    pub window: f64,
    pub delta: f64,
    pub windows: Vec<WindowRoot>,
    /// Start of the first window without a root, if any.
    pub failed_at: Option<f64>,
    /// The root set, when it is the same in every checked window.
    pub fixed_root_set: Option<NodeSet>,
}

impl ConnectivityReport {
    pub fn holds(&self) -> bool {
        self.failed_at.is_none()
    }
}

/// Window starts checked over one schedule period: every switch instant plus
/// a uniform grid.
fn window_starts(schedule: &SwitchingSchedule, opts: &ConnectivityOptions) -> Vec<f64> {
    let t0 = schedule.t_start();
    let period = schedule.period();
    let end = t0 + period;
    let mut starts: Vec<f64> = schedule
        .switch_instants(t0, end)
        .unwrap_or_default()
        .into_iter()
        .filter(|&t| t < end)
        .collect();
    let step = schedule.min_dwell() / opts.starts_per_min_dwell.max(1) as f64;
    let count = (period / step).ceil() as usize;
    starts.extend((0..count).map(|k| t0 + k as f64 * step).filter(|&t| t < end));
    starts.sort_by(f64::total_cmp);
    starts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * period.max(1.0));
    starts
}

/// Checks that every window `[t, t + T)` has a union graph with a root
/// node, and whether that root set is the same fixed set everywhere.
pub fn check_uniform_qs_connectivity(
    schedule: &SwitchingSchedule,
    delta: f64,
    window: f64,
    opts: &ConnectivityOptions,
) -> Result<ConnectivityReport, GraphError> {
    if !(window.is_finite() && window > 0.0) {
        return Err(GraphError::NonPositive {
            name: "window T",
            value: window,
        });
    }
    if !schedule.period().is_finite() {
        return Err(GraphError::UnsupportedSchedule);
    }
    let n = schedule.n_agents();
    let mut windows = Vec::new();
    let mut failed_at = None;
    for start in window_starts(schedule, opts) {
        let union = union_graph(schedule, delta, start, start + window)?;
        let root = root_set(&condensation(&union.arcs, n)?);
        if root.is_none() && failed_at.is_none() {
            failed_at = Some(start);
        }
        windows.push(WindowRoot { start, root });
    }

    let fixed_root_set = match windows.first() {
        Some(WindowRoot { root: Some(r), .. })
            if windows.iter().all(|w| w.root.as_ref() == Some(r)) =>
        {
            Some(r.clone())
        }
        _ => None,
    };
    Ok(ConnectivityReport {
        window,
        delta,
        windows,
        failed_at,
        fixed_root_set,
    })
}
