use std::collections::BTreeSet;

use super::{Arc, NodeSet};
use crate::error::GraphError;

/// Default cap on the node count for exhaustive longest-path search.
pub const DEFAULT_PATH_NODE_LIMIT: usize = 20;

/// `d0`: the longest simple path, in arcs, starting at any node of `roots`.
///
/// Longest simple path is NP-hard, so this enumerates every simple path by
/// depth-first search and refuses graphs above `node_limit` nodes.
pub fn longest_path_from_roots(
    arcs: &BTreeSet<Arc>,
    roots: &NodeSet,
    n: usize,
    node_limit: usize,
) -> Result<usize, GraphError> {
    if roots.is_empty() {
        return Err(GraphError::EmptyNodeSet);
    }
    if n > node_limit {
        return Err(GraphError::Capacity {
            n,
            limit: node_limit,
        });
    }
    let mut adj = vec![Vec::new(); n];
    for a in arcs {
        for index in [a.from, a.to] {
            if index >= n {
                return Err(GraphError::AgentOutOfRange { index, n });
            }
        }
        adj[a.from].push(a.to);
    }
    if let Some(&index) = roots.iter().find(|&&r| r >= n) {
        return Err(GraphError::AgentOutOfRange { index, n });
    }

    let mut seen = vec![false; n];
    let mut queue: Vec<usize> = roots.iter().copied().collect();
    for &r in roots {
        seen[r] = true;
    }
    while let Some(v) = queue.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push(w);
            }
        }
    }
    if let Some(node) = seen.iter().position(|s| !s) {
        return Err(GraphError::Unreachable { node });
    }

    fn dfs(v: usize, len: usize, adj: &[Vec<usize>], on_path: &mut [bool], best: &mut usize) {
        *best = (*best).max(len);
        for &w in &adj[v] {
            if !on_path[w] {
                on_path[w] = true;
                dfs(w, len + 1, adj, on_path, best);
                on_path[w] = false;
            }
        }
    }

    let mut best = 0;
    let mut on_path = vec![false; n];
    for &r in roots {
        on_path[r] = true;
        dfs(r, 0, &adj, &mut on_path, &mut best);
        on_path[r] = false;
    }
    Ok(best)
}
