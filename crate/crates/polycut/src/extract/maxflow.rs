//! Dinic max-flow over f64 capacities.

/// Residuals below this count as saturated; keeps float dust from opening
/// spurious augmenting paths.
const FLOW_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: f64,
    rev: usize,
}

/// An s-t flow network with parallel-arc support.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    graph: Vec<Vec<Arc>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> FlowNetwork {
        FlowNetwork {
            graph: vec![Vec::new(); nodes],
        }
    }

    /// Add an edge with capacities in both directions (cap_vu = 0 for a
    /// directed edge).
    pub fn add_edge(&mut self, u: usize, v: usize, cap_uv: f64, cap_vu: f64) {
        debug_assert!(cap_uv >= 0.0 && cap_vu >= 0.0);
        let rev_u = self.graph[v].len();
        let rev_v = self.graph[u].len();
        self.graph[u].push(Arc {
            to: v,
            cap: cap_uv,
            rev: rev_u,
        });
        self.graph[v].push(Arc {
            to: u,
            cap: cap_vu,
            rev: rev_v,
        });
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        loop {
            let Some(level) = self.levels(s, t) else {
                return total;
            };
            let mut iter = vec![0usize; self.graph.len()];
            loop {
                let pushed = self.augment(s, t, f64::INFINITY, &level, &mut iter);
                if pushed <= FLOW_EPS {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.graph.len()];
        let mut queue = std::collections::VecDeque::new();
        level[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for arc in &self.graph[u] {
                if arc.cap > FLOW_EPS && level[arc.to] == u32::MAX {
                    level[arc.to] = level[u] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        (level[t] != u32::MAX).then_some(level)
    }

    fn augment(
        &mut self,
        u: usize,
        t: usize,
        limit: f64,
        level: &[u32],
        iter: &mut [usize],
    ) -> f64 {
        if u == t {
            return limit;
        }
        while iter[u] < self.graph[u].len() {
            let i = iter[u];
            let (to, cap) = {
                let arc = &self.graph[u][i];
                (arc.to, arc.cap)
            };
            if cap > FLOW_EPS && level[to] == level[u] + 1 {
                let pushed = self.augment(to, t, limit.min(cap), level, iter);
                if pushed > FLOW_EPS {
                    let rev = self.graph[u][i].rev;
                    self.graph[u][i].cap -= pushed;
                    self.graph[to][rev].cap += pushed;
                    return pushed;
                }
            }
            iter[u] += 1;
        }
        0.0
    }

    /// After max_flow: nodes reachable from `s` in the residual graph — the
    /// minimum cut closest to the source.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.graph.len()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            for arc in &self.graph[u] {
                if arc.cap > FLOW_EPS && !seen[arc.to] {
                    seen[arc.to] = true;
                    stack.push(arc.to);
                }
            }
        }
        seen
    }
}
