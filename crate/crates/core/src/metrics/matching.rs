//! Node matching between two plan graphs.
//!
//! Nodes match only within an equality class (same op, same normalized
//! params). Among the maximum node matchings, the one preserving the most
//! directed edges is chosen.

use std::collections::BTreeMap;

use super::PlanGraph;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Matching {
    pub nodes: usize,
    pub edges: usize,
}

/// Branches explored before settling for the best matching found so far.
const SEARCH_BUDGET: usize = 200_000;

struct Search<'g> {
    a: &'g PlanGraph,
    b: &'g PlanGraph,
    /// Candidate partners in `b` for each node of `a`.
    candidates: Vec<Vec<usize>>,
    /// How many nodes of each class of `a` must stay unmatched.
    spare: BTreeMap<String, usize>,
    class_of: Vec<String>,
    /// Edges of `a` keyed by their later endpoint, so each is scored once.
    closing: Vec<Vec<(usize, usize)>>,
    assigned: Vec<Option<usize>>,
    used: Vec<bool>,
    best: usize,
    budget: usize,
}

impl Search<'_> {
    fn run(&mut self, i: usize, edges: usize, remaining_edges: usize) {
        if self.budget == 0 {
            return;
        }
        self.budget -= 1;
        if edges + remaining_edges <= self.best && i > 0 {
            return;
        }
        if i == self.a.nodes.len() {
            self.best = self.best.max(edges);
            return;
        }
        let closing = self.closing[i].len();
        for ci in 0..self.candidates[i].len() {
            let j = self.candidates[i][ci];
            if self.used[j] {
                continue;
            }
            self.used[j] = true;
            self.assigned[i] = Some(j);
            let gained = self.closing[i]
                .iter()
                .filter(|&&(from, to)| {
                    let (Some(f), Some(t)) = (self.assigned[from], self.assigned[to]) else {
                        return false;
                    };
                    self.b.edges.contains(&(f, t))
                })
                .count();
            self.run(i + 1, edges + gained, remaining_edges - closing);
            self.assigned[i] = None;
            self.used[j] = false;
        }
        let class = &self.class_of[i];
        if self.spare[class] > 0 {
            *self.spare.get_mut(class).expect("present") -= 1;
            self.run(i + 1, edges, remaining_edges - closing);
            *self.spare.get_mut(&self.class_of[i]).expect("present") += 1;
        }
    }
}

/// Maximum node matching, then maximum preserved edges among those.
pub fn match_graphs(a: &PlanGraph, b: &PlanGraph) -> Matching {
    let class_of: Vec<String> = a.nodes.iter().map(|n| n.class_key()).collect();
    let b_class: Vec<String> = b.nodes.iter().map(|n| n.class_key()).collect();
    let mut count_a: BTreeMap<String, usize> = BTreeMap::new();
    for c in &class_of {
        *count_a.entry(c.clone()).or_default() += 1;
    }
    let mut count_b: BTreeMap<String, usize> = BTreeMap::new();
    for c in &b_class {
        *count_b.entry(c.clone()).or_default() += 1;
    }
    let nodes = count_a
        .iter()
        .map(|(c, n)| (*n).min(count_b.get(c).copied().unwrap_or(0)))
        .sum();
    let spare = count_a
        .iter()
        .map(|(c, n)| (c.clone(), n - (*n).min(count_b.get(c).copied().unwrap_or(0))))
        .collect();
    let candidates = class_of
        .iter()
        .map(|c| (0..b.nodes.len()).filter(|&j| &b_class[j] == c).collect())
        .collect();
    let mut closing = vec![Vec::new(); a.nodes.len()];
    for &(from, to) in &a.edges {
        closing[from.max(to)].push((from, to));
    }
    let mut search = Search {
        a,
        b,
        candidates,
        spare,
        class_of,
        closing,
        assigned: vec![None; a.nodes.len()],
        used: vec![false; b.nodes.len()],
        best: 0,
        budget: SEARCH_BUDGET,
    };
    search.run(0, 0, a.edges.len());
    Matching {
        nodes,
        edges: search.best,
    }
}

/// Exhaustive reference matcher for small graphs: tries every partial
/// injective map from `a` to `b` that only pairs equal nodes.
pub fn brute_force_match(a: &PlanGraph, b: &PlanGraph) -> Matching {
    fn go(
        a: &PlanGraph,
        b: &PlanGraph,
        i: usize,
        map: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut Matching,
    ) {
        if i == a.nodes.len() {
            let nodes = map.iter().flatten().count();
            let edges = a
                .edges
                .iter()
                .filter(|(f, t)| matches!((map[*f], map[*t]), (Some(x), Some(y)) if b.edges.contains(&(x, y))))
                .count();
            if (nodes, edges) > (best.nodes, best.edges) {
                *best = Matching { nodes, edges };
            }
            return;
        }
        map.push(None);
        go(a, b, i + 1, map, used, best);
        map.pop();
        for j in 0..b.nodes.len() {
            if !used[j] && a.nodes[i] == b.nodes[j] {
                used[j] = true;
                map.push(Some(j));
                go(a, b, i + 1, map, used, best);
                map.pop();
                used[j] = false;
            }
        }
    }
    let mut best = Matching::default();
    go(a, b, 0, &mut Vec::new(), &mut vec![false; b.nodes.len()], &mut best);
    best
}
