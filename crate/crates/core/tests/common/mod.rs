//! Brute-force oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use signed_opinion::dynamics::Scenario;
use signed_opinion::graph::{
    check_persistent_balance, condensation, root_set, Arc, BalanceVerdict, GraphSnapshot,
    NodeSet, Rotation, SwitchingSchedule,
};
use signed_opinion::scenario::parse_scenario;

pub fn fixture_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/eight_agent_rotating.json")
}

pub fn fixture() -> Scenario {
    parse_scenario(fixture_path()).expect("bundled scenario parses")
}

/// Reflexive transitive closure by Floyd-Warshall.
pub fn reachability(n: usize, arcs: &BTreeSet<Arc>) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (v, row) in r.iter_mut().enumerate() {
        row[v] = true;
    }
    for a in arcs {
        r[a.from][a.to] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// Mutual-reachability classes.
pub fn oracle_components(n: usize, arcs: &BTreeSet<Arc>) -> BTreeSet<NodeSet> {
    let r = reachability(n, arcs);
    (0..n)
        .map(|i| (0..n).filter(|&j| r[i][j] && r[j][i]).collect())
        .collect()
}

/// Nodes from which every node is reachable.
pub fn oracle_root_set(n: usize, arcs: &BTreeSet<Arc>) -> Option<NodeSet> {
    let r = reachability(n, arcs);
    let roots: NodeSet = (0..n).filter(|&i| r[i].iter().all(|&x| x)).collect();
    (!roots.is_empty()).then_some(roots)
}

/// Every valid `part1` of `s` containing its smallest member, by
/// enumerating all `2^|s|` signatures. More than one means the split is
/// underdetermined.
pub fn oracle_signatures(schedule: &SwitchingSchedule, s: &NodeSet) -> Vec<NodeSet> {
    let nodes: Vec<usize> = s.iter().copied().collect();
    let mut constraints = Vec::new();
    for g in schedule.snapshots() {
        for (a, w) in g.arcs() {
            if s.contains(&a.from) && s.contains(&a.to) {
                constraints.push((a.from, a.to, w > 0.0));
            }
        }
    }
    // bit 0 (the smallest member) stays clear
    (0u32..(1 << nodes.len()))
        .step_by(2)
        .filter_map(|mask| {
            let side = |v: usize| mask >> nodes.iter().position(|&u| u == v).unwrap() & 1;
            constraints
                .iter()
                .all(|&(i, j, pos)| (side(i) == side(j)) == pos)
                .then(|| nodes.iter().copied().filter(|&v| side(v) == 0).collect())
        })
        .collect()
}

pub fn check_condensation_against_oracle(n: usize, arcs: &BTreeSet<Arc>) -> Result<(), String> {
    let c = condensation(arcs, n).map_err(|e| e.to_string())?;
    let got: BTreeSet<NodeSet> = c.components.iter().cloned().collect();
    let want = oracle_components(n, arcs);
    if got != want || got.len() != c.components.len() {
        return Err(format!("components {got:?} != {want:?}"));
    }
    for (k, comp) in c.components.iter().enumerate() {
        if comp.iter().any(|&v| c.component_of[v] != k) {
            return Err(format!("component_of disagrees for component {k}"));
        }
    }
    let want_edges: BTreeSet<(usize, usize)> = arcs
        .iter()
        .map(|a| (c.component_of[a.from], c.component_of[a.to]))
        .filter(|(a, b)| a != b)
        .collect();
    if c.dag_edges != want_edges {
        return Err(format!("dag edges {:?} != {want_edges:?}", c.dag_edges));
    }
    if let Some(e) = c.dag_edges.iter().find(|(a, b)| a >= b) {
        return Err(format!("edge {e:?} breaks topological order"));
    }
    let got_root = root_set(&c);
    let want_root = oracle_root_set(n, arcs);
    if got_root != want_root {
        return Err(format!("root set {got_root:?} != {want_root:?}"));
    }
    Ok(())
}

pub fn check_balance_against_oracle(
    schedule: &SwitchingSchedule,
    s: &NodeSet,
) -> Result<(), String> {
    let verdict = check_persistent_balance(schedule, s).map_err(|e| e.to_string())?;
    let valid = oracle_signatures(schedule, s);
    match verdict {
        BalanceVerdict::Balanced {
            bipartition,
            unique,
        } => {
            if !valid.contains(&bipartition.part1) {
                return Err(format!("{bipartition:?} is not a valid signature"));
            }
            let rest: NodeSet = s.difference(&bipartition.part1).copied().collect();
            if bipartition.part2 != rest {
                return Err("part2 is not the complement of part1".into());
            }
            if unique != (valid.len() == 1) {
                return Err(format!("unique = {unique}, oracle found {} signatures", valid.len()));
            }
            Ok(())
        }
        BalanceVerdict::Unbalanced { .. } if valid.is_empty() => Ok(()),
        BalanceVerdict::Unbalanced { .. } => {
            Err(format!("reported unbalanced, oracle found {:?}", valid))
        }
    }
}

pub fn random_arcs(rng: &mut impl Rng, n: usize, p: f64) -> BTreeSet<Arc> {
    let mut arcs = BTreeSet::new();
    for from in 0..n {
        for to in 0..n {
            if from != to && rng.gen_bool(p) {
                arcs.insert(Arc::new(from, to));
            }
        }
    }
    arcs
}

/// One to three signed snapshots on `n` agents. Signs follow a hidden
/// signature unless `noisy`, so both verdicts occur.
pub fn random_signed_schedule(rng: &mut impl Rng, n: usize, p: f64, noisy: bool) -> SwitchingSchedule {
    let hidden: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let count = rng.gen_range(1..=3);
    let snaps: Vec<GraphSnapshot> = (0..count)
        .map(|_| {
            let arcs = random_arcs(rng, n, p).into_iter().map(|a| {
                let mag = rng.gen_range(0.1..2.0);
                let agree = hidden[a.from] == hidden[a.to];
                let sign = if noisy && rng.gen_bool(0.15) { !agree } else { agree };
                (a.from, a.to, if sign { mag } else { -mag })
            });
            GraphSnapshot::from_arcs(n, arcs.collect::<Vec<_>>()).unwrap()
        })
        .collect();
    let dwell = vec![1.0; snaps.len()];
    SwitchingSchedule::new(snaps, dwell, Rotation::Cyclic, 0.0).unwrap()
}

pub fn random_subset(rng: &mut impl Rng, n: usize) -> NodeSet {
    loop {
        let s: NodeSet = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

/// Entries uniform in `[-20, 20]`; entries with magnitude below 0.1 are
/// redrawn so every agent starts with a definite sign.
pub fn random_initial_state(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let v: f64 = rng.gen_range(-20.0..=20.0);
            if v.abs() >= 0.1 {
                break v;
            }
        })
        .collect()
}
