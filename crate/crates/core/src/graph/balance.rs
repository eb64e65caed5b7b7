use serde::Serialize;

use super::{Arc, NodeSet, SwitchingSchedule};
use crate::error::GraphError;

/// Two disjoint parts covering a node set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bipartition {
    pub part1: NodeSet,
    pub part2: NodeSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum BalanceVerdict {
    Balanced {
        bipartition: Bipartition,
        /// False when the sign constraints leave the split underdetermined
        /// (the constraint graph on the node set is disconnected).
        unique: bool,
    },
    Unbalanced {
        /// The arc whose sign closed an inconsistent cycle.
        conflict: Arc,
        sign: i8,
    },
}

impl BalanceVerdict {
    pub fn is_balanced(&self) -> bool {
        matches!(self, Self::Balanced { .. })
    }

    pub fn bipartition(&self) -> Option<&Bipartition> {
        match self {
            Self::Balanced { bipartition, .. } => Some(bipartition),
            Self::Unbalanced { .. } => None,
        }
    }
}

/// Disjoint-set union where each node also stores the parity of its path to
/// the parent: 0 = same part, 1 = opposite parts.
struct ParityDsu {
    parent: Vec<usize>,
    parity: Vec<u8>,
    rank: Vec<u8>,
}

impl ParityDsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            parity: vec![0; n],
            rank: vec![0; n],
        }
    }

    /// Root of `v` and the parity of `v` relative to it.
    fn find(&mut self, v: usize) -> (usize, u8) {
        let mut path = Vec::new();
        let mut cur = v;
        while self.parent[cur] != cur {
            path.push(cur);
            cur = self.parent[cur];
        }
        let root = cur;
        // compress from the top down so each parity is relative to root
        for &node in path.iter().rev() {
            let p = self.parent[node];
            if p != root {
                self.parity[node] ^= self.parity[p];
            }
            self.parent[node] = root;
        }
        (root, self.parity[v])
    }

    /// Records `part(a) xor part(b) == rel`; false on contradiction.
    fn union(&mut self, a: usize, b: usize, rel: u8) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return pa ^ pb == rel;
        }
        let (hi, lo) = if self.rank[ra] >= self.rank[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lo] = hi;
        self.parity[lo] = pa ^ pb ^ rel;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        true
    }
}

/// Checks that one bipartition of `s` fits the sign of every nonzero arc
/// between members of `s` in every snapshot: positive arcs stay inside a
/// part, negative arcs cross.
///
/// The part containing the smallest node of `s` is reported as `part1`.
pub fn check_persistent_balance(
    schedule: &SwitchingSchedule,
    s: &NodeSet,
) -> Result<BalanceVerdict, GraphError> {
    let n = schedule.n_agents();
    if s.is_empty() {
        return Err(GraphError::EmptyNodeSet);
    }
    if let Some(&index) = s.iter().find(|&&v| v >= n) {
        return Err(GraphError::AgentOutOfRange { index, n });
    }

    let mut dsu = ParityDsu::new(n);
    for g in schedule.snapshots() {
        for (arc, w) in g.arcs() {
            if !(s.contains(&arc.from) && s.contains(&arc.to)) {
                continue;
            }
            let rel = u8::from(w < 0.0);
            if !dsu.union(arc.from, arc.to, rel) {
                return Ok(BalanceVerdict::Unbalanced {
                    conflict: arc,
                    sign: if w < 0.0 { -1 } else { 1 },
                });
            }
        }
    }

    let mut bipartition = Bipartition {
        part1: NodeSet::new(),
        part2: NodeSet::new(),
    };
    // each DSU class is anchored so that its root's first-seen member lands
    // in part1
    let mut anchor: std::collections::BTreeMap<usize, u8> = Default::default();
    for &v in s {
        let (root, p) = dsu.find(v);
        let base = *anchor.entry(root).or_insert(p);
        if p == base {
            bipartition.part1.insert(v);
        } else {
            bipartition.part2.insert(v);
        }
    }
    Ok(BalanceVerdict::Balanced {
        bipartition,
        unique: anchor.len() == 1,
    })
}
