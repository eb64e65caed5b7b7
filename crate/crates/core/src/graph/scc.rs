use std::collections::BTreeSet;

use serde::Serialize;

use super::{Arc, NodeSet};
use crate::error::GraphError;

/// Strongly connected components contracted into a DAG.
///
/// Components are numbered in topological order: every DAG edge goes from a
/// lower to a higher index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Condensation {
    pub components: Vec<NodeSet>,
    pub component_of: Vec<usize>,
    pub dag_edges: BTreeSet<(usize, usize)>,
}

impl Condensation {
    pub fn n_nodes(&self) -> usize {
        self.component_of.len()
    }

    /// Components without incoming DAG edges.
    pub fn sources(&self) -> Vec<usize> {
        let mut has_in = vec![false; self.components.len()];
        for &(_, to) in &self.dag_edges {
            has_in[to] = true;
        }
        (0..self.components.len()).filter(|&c| !has_in[c]).collect()
    }
}

/// Tarjan's algorithm, iterative so deep graphs cannot overflow the stack.
pub fn condensation(arcs: &BTreeSet<Arc>, n: usize) -> Result<Condensation, GraphError> {
    let mut adj = vec![Vec::new(); n];
    for a in arcs {
        for index in [a.from, a.to] {
            if index >= n {
                return Err(GraphError::AgentOutOfRange { index, n });
            }
        }
        adj[a.from].push(a.to);
    }

    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    // emitted in reverse topological order
    let mut found: Vec<Vec<usize>> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if *edge < adj[v].len() {
                let w = adj[v][*edge];
                *edge += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                found.push(comp);
            }
        }
    }

    found.reverse();
    let mut component_of = vec![0; n];
    let components: Vec<NodeSet> = found
        .into_iter()
        .enumerate()
        .map(|(c, nodes)| {
            for &v in &nodes {
                component_of[v] = c;
            }
            nodes.into_iter().collect()
        })
        .collect();
    let dag_edges = arcs
        .iter()
        .map(|a| (component_of[a.from], component_of[a.to]))
        .filter(|(a, b)| a != b)
        .collect();

    Ok(Condensation {
        components,
        component_of,
        dag_edges,
    })
}

/// The node set of the unique source component, or `None` when the
/// condensation has several sources (no node reaches every other one).
pub fn root_set(cond: &Condensation) -> Option<NodeSet> {
    match cond.sources().as_slice() {
        [only] => Some(cond.components[*only].clone()),
        _ => None,
    }
}
