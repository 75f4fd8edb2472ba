use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::state_space::SparseGenerator;

/// The unique closed communicating class of a truncated chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedClass {
    /// Sorted state indices of the class.
    pub members: Vec<usize>,
    /// Sorted indices of every other state.
    pub transient: Vec<usize>,
}

impl ClosedClass {
    pub fn mask(&self, dim: usize) -> Vec<bool> {
        let mut mask = vec![false; dim];
        for &k in &self.members {
            mask[k] = true;
        }
        mask
    }
}

/// Strongly connected components of the positive-rate graph; errors when more
/// than one of them is closed.
pub fn closed_class(gen: &SparseGenerator) -> Result<ClosedClass> {
    let dim = gen.dim();
    let mut graph = DiGraph::<(), ()>::with_capacity(dim, gen.nnz_off_diagonal());
    let nodes: Vec<_> = (0..dim).map(|_| graph.add_node(())).collect();
    for k in 0..dim {
        for (j, _) in gen.row(k) {
            graph.add_edge(nodes[k], nodes[j], ());
        }
    }
    let components = tarjan_scc(&graph);
    let mut component_of = vec![0usize; dim];
    for (c, comp) in components.iter().enumerate() {
        for node in comp {
            component_of[node.index()] = c;
        }
    }
    let mut closed: Vec<Vec<usize>> = components
        .iter()
        .enumerate()
        .filter(|(c, comp)| {
            comp.iter()
                .all(|node| gen.row(node.index()).all(|(j, _)| component_of[j] == *c))
        })
        .map(|(_, comp)| {
            let mut members: Vec<usize> = comp.iter().map(|n| n.index()).collect();
            members.sort_unstable();
            members
        })
        .collect();
    closed.sort_by_key(|m| m[0]);
    match closed.len() {
        1 => {
            let members = closed.pop().unwrap_or_default();
            let mut is_member = vec![false; dim];
            for &k in &members {
                is_member[k] = true;
            }
            let transient = (0..dim).filter(|&k| !is_member[k]).collect();
            Ok(ClosedClass { members, transient })
        }
        0 => Err(Error::DegenerateSupport("empty state space".into())),
        _ => Err(Error::MultipleClosedClasses {
            first: closed[0][0],
            second: closed[1][0],
        }),
    }
}
