//! Graph solvers: Dinic max-flow, primal-dual min-cost flow and
//! Hopcroft-Karp bipartite matching.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

#[derive(Debug, Clone)]
struct Arc {
    to: u32,
    rev: u32,
    cap: i64,
    orig: i64,
}

/// Dinic's algorithm over an adjacency-list residual graph.
#[derive(Debug, Clone)]
pub struct Dinic {
    graph: Vec<Vec<Arc>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl Dinic {
    pub fn new(nodes: usize) -> Self {
        Dinic {
            graph: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            iter: vec![0; nodes],
        }
    }

    /// Returns `(node, index)` identifying the forward arc.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64) -> (usize, usize) {
        let fwd = self.graph[from].len();
        let bwd = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Arc {
            to: to as u32,
            rev: bwd as u32,
            cap,
            orig: cap,
        });
        self.graph[to].push(Arc {
            to: from as u32,
            rev: fwd as u32,
            cap: 0,
            orig: 0,
        });
        (from, fwd)
    }

    fn bfs(&mut self, s: usize) {
        self.level.fill(-1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for a in &self.graph[u] {
                let v = a.to as usize;
                if a.cap > 0 && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }

    fn dfs(&mut self, s: usize, t: usize, limit: i64) -> i64 {
        // iterative augmenting search along the level graph
        let mut stack: Vec<usize> = vec![s];
        loop {
            let u = *stack.last().unwrap();
            if u == t {
                let mut push = limit;
                for w in stack.windows(2) {
                    let a = &self.graph[w[0]][self.iter[w[0]]];
                    push = push.min(a.cap);
                }
                for w in stack.windows(2) {
                    let (u, i) = (w[0], self.iter[w[0]]);
                    let (v, r) = (self.graph[u][i].to as usize, self.graph[u][i].rev as usize);
                    self.graph[u][i].cap -= push;
                    self.graph[v][r].cap += push;
                }
                return push;
            }
            let mut advanced = false;
            while self.iter[u] < self.graph[u].len() {
                let a = &self.graph[u][self.iter[u]];
                let v = a.to as usize;
                if a.cap > 0 && self.level[v] == self.level[u] + 1 {
                    stack.push(v);
                    advanced = true;
                    break;
                }
                self.iter[u] += 1;
            }
            if !advanced {
                stack.pop();
                match stack.last() {
                    None => return 0,
                    Some(&p) => {
                        self.level[u] = -1;
                        self.iter[p] += 1;
                    }
                }
            }
        }
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut flow = 0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return flow;
            }
            self.iter.fill(0);
            loop {
                let f = self.dfs(s, t, i64::MAX);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
    }

    /// Flow currently on the forward arc returned by `add_edge`.
    pub fn flow_on(&self, edge: (usize, usize)) -> i64 {
        let a = &self.graph[edge.0][edge.1];
        a.orig - a.cap
    }

    /// Forward arcs out of `u` carrying positive flow, as `(to, flow)`.
    pub fn flow_successors(&self, u: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.graph[u]
            .iter()
            .filter(|a| a.orig > 0 && a.orig > a.cap)
            .map(|a| (a.to as usize, a.orig - a.cap))
    }

    /// Residual reachability from `s` (source side of a minimum cut).
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.graph.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for a in &self.graph[u] {
                if a.cap > 0 && !seen[a.to as usize] {
                    seen[a.to as usize] = true;
                    queue.push_back(a.to as usize);
                }
            }
        }
        seen
    }
}

#[derive(Debug, Clone)]
struct CostArc {
    to: u32,
    rev: u32,
    cap: i64,
    cost: i64,
}

/// Min-cost flow by successive shortest paths with Johnson potentials.
///
/// Each phase runs Dijkstra on reduced costs, then pushes a blocking flow
/// through the zero-reduced-cost subgraph. Costs must be non-negative.
#[derive(Debug, Clone)]
pub struct MinCostFlow {
    graph: Vec<Vec<CostArc>>,
}

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        MinCostFlow {
            graph: vec![Vec::new(); nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> (usize, usize) {
        assert!(cost >= 0, "negative arc cost");
        assert_ne!(from, to);
        let fwd = self.graph[from].len();
        let bwd = self.graph[to].len();
        self.graph[from].push(CostArc {
            to: to as u32,
            rev: bwd as u32,
            cap,
            cost,
        });
        self.graph[to].push(CostArc {
            to: from as u32,
            rev: fwd as u32,
            cap: 0,
            cost: -cost,
        });
        (from, fwd)
    }

    pub fn flow_on(&self, edge: (usize, usize)) -> i64 {
        let a = &self.graph[edge.0][edge.1];
        self.graph[a.to as usize][a.rev as usize].cap
    }

    /// Sends as much flow as possible (up to `limit`) at minimum cost.
    /// Returns `(flow, cost)`.
    pub fn min_cost_flow(&mut self, s: usize, t: usize, limit: i64) -> (i64, i64) {
        let nodes = self.graph.len();
        let mut potential = vec![0i64; nodes];
        let mut dist = vec![i64::MAX; nodes];
        let mut iter = vec![0usize; nodes];
        let mut on_stack = vec![false; nodes];
        let (mut flow, mut cost) = (0i64, 0i64);
        while flow < limit {
            dist.fill(i64::MAX);
            dist[s] = 0;
            let mut heap = BinaryHeap::from([Reverse((0i64, s))]);
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for a in &self.graph[u] {
                    if a.cap <= 0 {
                        continue;
                    }
                    let v = a.to as usize;
                    let nd = d + a.cost + potential[u] - potential[v];
                    if nd < dist[v] {
                        dist[v] = nd;
                        heap.push(Reverse((nd, v)));
                    }
                }
            }
            if dist[t] == i64::MAX {
                break;
            }
            let cap_dist = dist[t];
            for v in 0..nodes {
                potential[v] += dist[v].min(cap_dist);
            }
            // blocking flow on arcs with zero reduced cost
            iter.fill(0);
            loop {
                let pushed =
                    self.admissible_push(s, t, limit - flow, &potential, &mut iter, &mut on_stack);
                if pushed == 0 {
                    break;
                }
                flow += pushed;
                cost += pushed * (potential[t] - potential[s]);
                if flow >= limit {
                    break;
                }
            }
        }
        (flow, cost)
    }

    fn admissible_push(
        &mut self,
        s: usize,
        t: usize,
        limit: i64,
        potential: &[i64],
        iter: &mut [usize],
        on_stack: &mut [bool],
    ) -> i64 {
        let mut stack = vec![s];
        on_stack[s] = true;
        loop {
            let u = *stack.last().unwrap();
            if u == t {
                let mut push = limit;
                for w in stack.windows(2) {
                    push = push.min(self.graph[w[0]][iter[w[0]]].cap);
                }
                for w in stack.windows(2) {
                    let (u, i) = (w[0], iter[w[0]]);
                    let (v, r) = (self.graph[u][i].to as usize, self.graph[u][i].rev as usize);
                    self.graph[u][i].cap -= push;
                    self.graph[v][r].cap += push;
                }
                for &v in &stack {
                    on_stack[v] = false;
                }
                return push;
            }
            let mut advanced = false;
            while iter[u] < self.graph[u].len() {
                let a = &self.graph[u][iter[u]];
                let v = a.to as usize;
                if a.cap > 0 && !on_stack[v] && a.cost + potential[u] - potential[v] == 0 {
                    stack.push(v);
                    on_stack[v] = true;
                    advanced = true;
                    break;
                }
                iter[u] += 1;
            }
            if !advanced {
                stack.pop();
                on_stack[u] = false;
                match stack.last() {
                    None => return 0,
                    Some(&p) => iter[p] += 1,
                }
            }
        }
    }
}

/// Maximum matching in a bipartite graph with `left` and `right` vertex
/// counts. Returns `mate_left[u] = Some(v)` for matched left vertices.
pub fn hopcroft_karp(left: usize, right: usize, adj: &[Vec<u32>]) -> Vec<Option<u32>> {
    const FREE: u32 = u32::MAX;
    let mut mate_l = vec![FREE; left];
    let mut mate_r = vec![FREE; right];
    let mut dist = vec![u32::MAX; left];
    let mut it = vec![0usize; left];
    loop {
        // layered BFS from free left vertices
        let mut queue = VecDeque::new();
        for u in 0..left {
            if mate_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = mate_r[v as usize];
                if w == FREE {
                    found = true;
                } else if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[u] + 1;
                    queue.push_back(w as usize);
                }
            }
        }
        if !found {
            break;
        }
        it.fill(0);
        for root in 0..left {
            if mate_l[root] != FREE {
                continue;
            }
            // iterative DFS; path holds left vertices
            let mut path = vec![root];
            while let Some(&u) = path.last() {
                let mut next = None;
                while it[u] < adj[u].len() {
                    let v = adj[u][it[u]];
                    let w = mate_r[v as usize];
                    if w == FREE || dist[w as usize] == dist[u] + 1 {
                        next = Some((v, w));
                        break;
                    }
                    it[u] += 1;
                }
                match next {
                    Some((v, w)) if w == FREE => {
                        // augment along the path
                        let mut v = v;
                        for &u in path.iter().rev() {
                            let prev = mate_l[u];
                            mate_l[u] = v;
                            mate_r[v as usize] = u as u32;
                            v = prev;
                        }
                        break;
                    }
                    Some((_, w)) => {
                        it[u] += 1;
                        path.push(w as usize);
                    }
                    None => {
                        dist[u] = u32::MAX;
                        path.pop();
                    }
                }
            }
        }
    }
    mate_l
        .into_iter()
        .map(|v| (v != FREE).then_some(v))
        .collect()
}
