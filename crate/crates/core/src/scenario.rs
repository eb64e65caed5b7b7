//! Scenario files.
//!
//! A scenario is a JSON document with 1-based agent indices:
//!
//! ```json
//! {
//!   "agents": 3, "delta": 0.05, "window_T": 4.0, "horizon": 20.0, "dt": 0.001,
//!   "x0": [1, -2, 3], "x_target": [0, 5, -5],
//!   "gains": { "kappa_lower": 0.5, "set": "S", "value": 0.5 },
//!   "root_set": [1],
//!   "schedule": {
//!     "rotation": "cyclic",
//!     "graphs": [ { "dwell": 1.0, "edges": [ { "from": 1, "to": 2, "weight": -0.5 } ] } ]
//!   }
//! }
//! ```
//!
//! An edge `{from: j, to: i, weight: w}` sets `a_ij = w`: agent `j` influences
//! agent `i`. `gains` is either `{kappa_lower, per_agent: [...]}` or
//! `{kappa_lower, set: "S", value}`. Without `root_set` the root set is
//! detected from the schedule.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{GainSchedule, Scenario};
use crate::error::GraphError;
use crate::graph::{
    check_uniform_qs_connectivity, ConnectivityOptions, GraphSnapshot, NodeSet,
    Rotation, SwitchingSchedule,
};

/// A rejected scenario document.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub key: String,
    pub line: Option<usize>,
    pub constraint: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{} (line {line}): {}", self.key, self.constraint),
            None => write!(f, "{}: {}", self.key, self.constraint),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeFile {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub dwell: f64,
    pub edges: Vec<EdgeFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub rotation: Rotation,
    #[serde(default)]
    pub t_start: f64,
    pub graphs: Vec<GraphFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    pub kappa_lower: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_agent: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// The document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub agents: usize,
    pub delta: f64,
    #[serde(rename = "window_T")]
    pub window_t: f64,
    pub horizon: f64,
    pub dt: f64,
    pub x0: Vec<f64>,
    pub x_target: Vec<f64>,
    pub gains: GainsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_set: Option<Vec<usize>>,
    pub schedule: ScheduleFile,
}

/// Maps validation failures back to lines of the source text.
struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    /// Line of the `nth` occurrence of `"key"`.
    fn line(&self, key: &str, nth: usize) -> Option<usize> {
        let needle = format!("\"{key}\"");
        let offset = self.text.match_indices(&needle).nth(nth)?.0;
        Some(self.text[..offset].matches('\n').count() + 1)
    }

    fn err(&self, key: impl Into<String>, anchor: (&str, usize), constraint: impl Into<String>) -> ScenarioError {
        ScenarioError {
            key: key.into(),
            line: self.line(anchor.0, anchor.1),
            constraint: constraint.into(),
        }
    }
}

fn require_positive(loc: &Locator, key: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(loc.err(key, (key, 0), format!("must be finite and strictly positive, got {v}")))
    }
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError {
        key: path.display().to_string(),
        line: None,
        constraint: format!("cannot read file: {e}"),
    })?;
    parse_scenario_str(&text)
}

/// Parses and validates scenario text.
pub fn parse_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError {
        key: "document".into(),
        line: Some(e.line()),
        constraint: e.to_string(),
    })?;
    build_scenario(&file, &Locator { text })
}

fn build_scenario(file: &ScenarioFile, loc: &Locator) -> Result<Scenario, ScenarioError> {
    let n = file.agents;
    if n < 2 {
        return Err(loc.err("agents", ("agents", 0), format!("need at least 2 agents, got {n}")));
    }
    require_positive(loc, "delta", file.delta)?;
    require_positive(loc, "window_T", file.window_t)?;
    require_positive(loc, "horizon", file.horizon)?;
    require_positive(loc, "dt", file.dt)?;
    for (key, v) in [("x0", &file.x0), ("x_target", &file.x_target)] {
        if v.len() != n {
            return Err(loc.err(key, (key, 0), format!("has {} entries, expected {n}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(loc.err(key, (key, 0), "entries must be finite"));
        }
    }

    let schedule = build_schedule(&file.schedule, n, loc)?;
    let min_dwell = schedule.min_dwell();
    if file.dt > min_dwell / 2.0 {
        return Err(loc.err(
            "dt",
            ("dt", 0),
            format!("must not exceed half the shortest dwell time ({})", min_dwell / 2.0),
        ));
    }

    let declared = match &file.root_set {
        None => None,
        Some(list) => {
            let mut set = NodeSet::new();
            for &v in list {
                if v == 0 || v > n {
                    return Err(loc.err(
                        "root_set",
                        ("root_set", 0),
                        format!("agent index {v} outside 1..={n}"),
                    ));
                }
                set.insert(v - 1);
            }
            if set.is_empty() {
                return Err(loc.err("root_set", ("root_set", 0), "must not be empty"));
            }
            Some(set)
        }
    };
    // the set the gain conditions are judged against
    let root = match &declared {
        Some(s) => Some(s.clone()),
        None => check_uniform_qs_connectivity(
            &schedule,
            file.delta,
            file.window_t,
            &ConnectivityOptions::default(),
        )
        .ok()
        .and_then(|r| r.fixed_root_set),
    };

    let gains = build_gains(&file.gains, n, root.as_ref(), loc)?;
    if let Some(root) = &root {
        gains
            .check_conditions(root)
            .map_err(|e| loc.err("gains", ("gains", 0), e.to_string()))?;
    }

    let scenario = Scenario {
        schedule,
        delta: file.delta,
        window: file.window_t,
        x0: file.x0.clone(),
        x_target: file.x_target.clone(),
        gains,
        root_set: declared,
        horizon: file.horizon,
        dt: file.dt,
    };
    scenario
        .validate()
        .map_err(|e| loc.err("document", ("agents", 0), e.to_string()))?;
    Ok(scenario)
}

fn build_schedule(file: &ScheduleFile, n: usize, loc: &Locator) -> Result<SwitchingSchedule, ScenarioError> {
    if file.graphs.is_empty() {
        return Err(loc.err("schedule.graphs", ("graphs", 0), "needs at least one graph"));
    }
    if !file.t_start.is_finite() {
        return Err(loc.err("schedule.t_start", ("t_start", 0), "must be finite"));
    }
    let mut snapshots = Vec::with_capacity(file.graphs.len());
    let mut dwell = Vec::with_capacity(file.graphs.len());
    let mut edge_no = 0;
    for (g, graph) in file.graphs.iter().enumerate() {
        let gkey = format!("schedule.graphs[{g}]");
        if !(graph.dwell.is_finite() && graph.dwell > 0.0) {
            return Err(loc.err(
                format!("{gkey}.dwell"),
                ("dwell", g),
                format!("must be finite and strictly positive, got {}", graph.dwell),
            ));
        }
        let mut snap = GraphSnapshot::new(n).expect("n >= 2 checked above");
        for (e, edge) in graph.edges.iter().enumerate() {
            let ekey = format!("{gkey}.edges[{e}]");
            let anchor = ("from", edge_no);
            edge_no += 1;
            for (name, v) in [("from", edge.from), ("to", edge.to)] {
                if v == 0 || v > n {
                    return Err(loc.err(
                        format!("{ekey}.{name}"),
                        anchor,
                        format!("agent index {v} outside 1..={n}"),
                    ));
                }
            }
            if snap.weight(edge.to - 1, edge.from - 1) != 0.0 {
                return Err(loc.err(ekey, anchor, "duplicate edge within one graph"));
            }
            snap.set_weight(edge.to - 1, edge.from - 1, edge.weight)
                .map_err(|err| {
                    let constraint = match err {
                        GraphError::SelfLoop(_) => "A2: self-loops are not allowed (a_ii = 0)".to_string(),
                        other => other.to_string(),
                    };
                    loc.err(ekey.clone(), anchor, constraint)
                })?;
        }
        snapshots.push(snap);
        dwell.push(graph.dwell);
    }
    SwitchingSchedule::new(snapshots, dwell, file.rotation, file.t_start)
        .map_err(|e| loc.err("schedule", ("schedule", 0), e.to_string()))
}

fn build_gains(
    file: &GainsFile,
    n: usize,
    root: Option<&NodeSet>,
    loc: &Locator,
) -> Result<GainSchedule, ScenarioError> {
    let gains = match (&file.per_agent, &file.set, file.value) {
        (Some(list), None, None) => {
            if list.len() != n {
                return Err(loc.err(
                    "gains.per_agent",
                    ("per_agent", 0),
                    format!("has {} entries, expected {n}", list.len()),
                ));
            }
            list.clone()
        }
        (None, Some(set), Some(value)) => {
            if set != "S" {
                return Err(loc.err("gains.set", ("set", 0), format!("only \"S\" is supported, got {set:?}")));
            }
            let root = root.ok_or_else(|| {
                loc.err(
                    "gains.set",
                    ("set", 0),
                    "P2: gains on S need a root set, but none is declared or detectable",
                )
            })?;
            (0..n).map(|i| if root.contains(&i) { value } else { 0.0 }).collect()
        }
        _ => {
            return Err(loc.err(
                "gains",
                ("gains", 0),
                "give either per_agent or both set and value",
            ))
        }
    };
    GainSchedule::new(gains, file.kappa_lower).map_err(|e| loc.err("gains", ("gains", 0), e.to_string()))
}

/// The file form of a scenario. Gains are written per agent.
pub fn to_file(scenario: &Scenario) -> ScenarioFile {
    let schedule = &scenario.schedule;
    ScenarioFile {
        agents: scenario.n_agents(),
        delta: scenario.delta,
        window_t: scenario.window,
        horizon: scenario.horizon,
        dt: scenario.dt,
        x0: scenario.x0.clone(),
        x_target: scenario.x_target.clone(),
        gains: GainsFile {
            kappa_lower: scenario.gains.kappa_lower(),
            per_agent: Some(scenario.gains.gains().to_vec()),
            set: None,
            value: None,
        },
        root_set: scenario
            .root_set
            .as_ref()
            .map(|s| s.iter().map(|v| v + 1).collect()),
        schedule: ScheduleFile {
            rotation: schedule.rotation(),
            t_start: schedule.t_start(),
            graphs: schedule
                .snapshots()
                .iter()
                .zip(schedule.dwell_times())
                .map(|(g, &dwell)| GraphFile {
                    dwell,
                    edges: g
                        .arcs()
                        .map(|(arc, weight)| EdgeFile {
                            from: arc.from + 1,
                            to: arc.to + 1,
                            weight,
                        })
                        .collect(),
                })
                .collect(),
        },
    }
}

/// Pretty-printed scenario document.
pub fn serialize_scenario(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(&to_file(scenario)).expect("scenario serializes")
}
