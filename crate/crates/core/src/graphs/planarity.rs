//! Left-right planarity test (de Fraysseix–Rosenstiehl, in Brandes' formulation).
//!
//! Only the testing phase is implemented; no embedding is produced.

use super::Graph;

#[derive(Debug, Clone, Copy, Default)]
struct Interval {
    low: Option<usize>,
    high: Option<usize>,
}

impl Interval {
    fn single(edge: usize) -> Self {
        Self {
            low: Some(edge),
            high: Some(edge),
        }
    }

    fn is_empty(&self) -> bool {
        self.low.is_none() && self.high.is_none()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ConflictPair {
    left: Interval,
    right: Interval,
}

impl ConflictPair {
    fn swap(&mut self) {
        std::mem::swap(&mut self.left, &mut self.right);
    }
}

struct LrState<'g> {
    adj: Vec<Vec<(usize, usize)>>,
    graph: &'g Graph,
    // per undirected edge id: orientation (tail, head) once visited
    oriented: Vec<Option<(usize, usize)>>,
    height: Vec<Option<usize>>,
    parent_edge: Vec<Option<usize>>,
    lowpt: Vec<usize>,
    lowpt2: Vec<usize>,
    nesting_depth: Vec<usize>,
    out_edges: Vec<Vec<usize>>,
    reference: Vec<Option<usize>>,
    lowpt_edge: Vec<Option<usize>>,
    stack_bottom: Vec<usize>,
    stack: Vec<ConflictPair>,
}

impl<'g> LrState<'g> {
    fn new(graph: &'g Graph) -> Self {
        let n = graph.n_vertices();
        let m = graph.edges().len();
        let mut adj = vec![Vec::new(); n];
        for (id, &(u, v)) in graph.edges().iter().enumerate() {
            adj[u].push((v, id));
            adj[v].push((u, id));
        }
        Self {
            adj,
            graph,
            oriented: vec![None; m],
            height: vec![None; n],
            parent_edge: vec![None; n],
            lowpt: vec![0; m],
            lowpt2: vec![0; m],
            nesting_depth: vec![0; m],
            out_edges: vec![Vec::new(); n],
            reference: vec![None; m],
            lowpt_edge: vec![None; m],
            stack_bottom: vec![0; m],
            stack: Vec::new(),
        }
    }

    fn head(&self, edge: usize) -> usize {
        self.oriented[edge].expect("edge oriented").1
    }

    fn tail(&self, edge: usize) -> usize {
        self.oriented[edge].expect("edge oriented").0
    }

    fn orient(&mut self, v: usize) {
        let parent = self.parent_edge[v];
        let hv = self.height[v].expect("visited");
        for idx in 0..self.adj[v].len() {
            let (w, id) = self.adj[v][idx];
            if self.oriented[id].is_some() {
                continue;
            }
            self.oriented[id] = Some((v, w));
            self.out_edges[v].push(id);
            self.lowpt[id] = hv;
            self.lowpt2[id] = hv;
            match self.height[w] {
                None => {
                    self.parent_edge[w] = Some(id);
                    self.height[w] = Some(hv + 1);
                    self.orient(w);
                }
                Some(hw) => self.lowpt[id] = hw,
            }
            self.nesting_depth[id] = 2 * self.lowpt[id];
            if self.lowpt2[id] < hv {
                self.nesting_depth[id] += 1;
            }
            if let Some(e) = parent {
                if self.lowpt[id] < self.lowpt[e] {
                    self.lowpt2[e] = self.lowpt[e].min(self.lowpt2[id]);
                    self.lowpt[e] = self.lowpt[id];
                } else if self.lowpt[id] > self.lowpt[e] {
                    self.lowpt2[e] = self.lowpt2[e].min(self.lowpt[id]);
                } else {
                    self.lowpt2[e] = self.lowpt2[e].min(self.lowpt2[id]);
                }
            }
        }
    }

    fn conflicting(&self, interval: &Interval, edge: usize) -> bool {
        match interval.high {
            Some(h) if !interval.is_empty() => self.lowpt[h] > self.lowpt[edge],
            _ => false,
        }
    }

    fn lowest(&self, pair: &ConflictPair) -> usize {
        if pair.left.is_empty() {
            return self.lowpt[pair.right.low.expect("nonempty pair")];
        }
        if pair.right.is_empty() {
            return self.lowpt[pair.left.low.expect("nonempty pair")];
        }
        self.lowpt[pair.left.low.unwrap()].min(self.lowpt[pair.right.low.unwrap()])
    }

    fn test(&mut self, v: usize) -> bool {
        let parent = self.parent_edge[v];
        let hv = self.height[v].expect("visited");
        let edges = self.out_edges[v].clone();
        for (pos, &ei) in edges.iter().enumerate() {
            let w = self.head(ei);
            self.stack_bottom[ei] = self.stack.len();
            if self.parent_edge[w] == Some(ei) {
                if !self.test(w) {
                    return false;
                }
            } else {
                self.lowpt_edge[ei] = Some(ei);
                self.stack.push(ConflictPair {
                    left: Interval::default(),
                    right: Interval::single(ei),
                });
            }
            if self.lowpt[ei] < hv {
                let e = parent.expect("root edges cannot return below the root");
                if pos == 0 {
                    self.lowpt_edge[e] = self.lowpt_edge[ei];
                } else if !self.add_constraints(ei, e) {
                    return false;
                }
            }
        }
        if let Some(e) = parent {
            self.remove_back_edges(e);
        }
        true
    }

    fn add_constraints(&mut self, ei: usize, e: usize) -> bool {
        let mut p = ConflictPair::default();
        loop {
            let mut q = self.stack.pop().expect("return edges on the stack");
            if !q.left.is_empty() {
                q.swap();
            }
            if !q.left.is_empty() {
                return false;
            }
            let q_low = q.right.low.expect("nonempty interval");
            if self.lowpt[q_low] > self.lowpt[e] {
                if p.right.is_empty() {
                    p.right = q.right;
                } else {
                    let pl = p.right.low.expect("nonempty interval");
                    self.reference[pl] = q.right.high;
                }
                p.right.low = q.right.low;
            } else {
                self.reference[q_low] = self.lowpt_edge[e];
            }
            if self.stack.len() == self.stack_bottom[ei] {
                break;
            }
        }
        while let Some(top) = self.stack.last().copied() {
            if !(self.conflicting(&top.left, ei) || self.conflicting(&top.right, ei)) {
                break;
            }
            let mut q = self.stack.pop().expect("checked above");
            if self.conflicting(&q.right, ei) {
                q.swap();
            }
            if self.conflicting(&q.right, ei) {
                return false;
            }
            if let Some(pl) = p.right.low {
                self.reference[pl] = q.right.high;
            }
            if q.right.low.is_some() {
                p.right.low = q.right.low;
            }
            if p.left.is_empty() {
                p.left = q.left;
            } else if let Some(pl) = p.left.low {
                self.reference[pl] = q.left.high;
            }
            p.left.low = q.left.low;
        }
        if !(p.left.is_empty() && p.right.is_empty()) {
            self.stack.push(p);
        }
        true
    }

    fn remove_back_edges(&mut self, e: usize) {
        let u = self.tail(e);
        let hu = self.height[u].expect("visited");
        while let Some(top) = self.stack.last() {
            if self.lowest(top) != hu {
                break;
            }
            self.stack.pop();
        }
        if let Some(mut p) = self.stack.pop() {
            while let Some(h) = p.left.high {
                if self.head(h) != u {
                    break;
                }
                p.left.high = self.reference[h];
            }
            if p.left.high.is_none() {
                if let Some(low) = p.left.low.take() {
                    self.reference[low] = p.right.low;
                }
            }
            while let Some(h) = p.right.high {
                if self.head(h) != u {
                    break;
                }
                p.right.high = self.reference[h];
            }
            if p.right.high.is_none() {
                if let Some(low) = p.right.low.take() {
                    self.reference[low] = p.left.low;
                }
            }
            self.stack.push(p);
        }
        if self.lowpt[e] < hu {
            let top = self
                .stack
                .last()
                .expect("return edge keeps a pair on the stack");
            let (hl, hr) = (top.left.high, top.right.high);
            self.reference[e] = match (hl, hr) {
                (Some(l), None) => Some(l),
                (Some(l), Some(r)) if self.lowpt[l] > self.lowpt[r] => Some(l),
                _ => hr,
            };
        }
    }

    fn run(mut self) -> bool {
        let n = self.graph.n_vertices();
        let m = self.graph.edges().len();
        if n > 2 && m > 3 * n - 6 {
            return false;
        }
        let mut roots = Vec::new();
        for v in 0..n {
            if self.height[v].is_none() {
                self.height[v] = Some(0);
                roots.push(v);
                self.orient(v);
            }
        }
        for v in 0..n {
            let depth = &self.nesting_depth;
            self.out_edges[v].sort_by_key(|&e| depth[e]);
        }
        roots.into_iter().all(|r| self.test(r))
    }
}

pub fn is_planar(graph: &Graph) -> bool {
    LrState::new(graph).run()
}
