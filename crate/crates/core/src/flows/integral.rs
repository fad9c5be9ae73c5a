use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite graph with oriented edges; a flow value on edge i is the flow from edges[i].0 to edges[i].1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl FlowGraph {
    pub fn out_sums(&self, vals: &[i64]) -> Result<Vec<i64>> {
        let mut out = vec![0i64; self.n];
        for (&(u, v), &w) in self.edges.iter().zip(vals) {
            out[u] = out[u].checked_add(w).ok_or(Error::Overflow)?;
            out[v] = out[v].checked_sub(w).ok_or(Error::Overflow)?;
        }
        Ok(out)
    }

    fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n];
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            inc[u].push(i);
            if v != u {
                inc[v].push(i);
            }
        }
        inc
    }
}

/// Integral f-flow within distance < 1 of φ = phi / 2^exp, by cancelling the lowest fractional bit along closed trails.
pub fn integralize(g: &FlowGraph, phi: &[i64], exp: u32, f: &[i64]) -> Result<Vec<i64>> {
    if phi.len() != g.edges.len() || f.len() != g.n {
        return Err(Error::Precondition("flow or divergence has the wrong length".into()));
    }
    let out = g.out_sums(phi)?;
    for x in 0..g.n {
        if out[x] != super::scale(f[x], exp)? {
            return Err(Error::NotAFlow(format!("out-flow at vertex {x} differs from f")));
        }
    }
    let inc = g.incidence();
    let mut w = phi.to_vec();
    for b in (1..=exp).rev() {
        let mut used = vec![true; w.len()];
        for (i, &v) in w.iter().enumerate() {
            if v % 2 != 0 {
                used[i] = false;
            }
        }
        for (i, &(u, v)) in g.edges.iter().enumerate() {
            if u == v && !used[i] {
                // a loop carries no divergence; move it to the even neighbour nearer the original value
                w[i] += 1;
                used[i] = true;
            }
        }
        let mut ptr = vec![0usize; g.n];
        for start in 0..g.n {
            loop {
                // closed trail from `start` through unused odd edges
                let mut trail: Vec<(usize, bool)> = Vec::new();
                let mut at = start;
                loop {
                    while ptr[at] < inc[at].len() && used[inc[at][ptr[at]]] {
                        ptr[at] += 1;
                    }
                    if ptr[at] == inc[at].len() {
                        break;
                    }
                    let i = inc[at][ptr[at]];
                    used[i] = true;
                    let (u, v) = g.edges[i];
                    let forward = u == at;
                    trail.push((i, forward));
                    at = if forward { v } else { u };
                }
                if trail.is_empty() {
                    break;
                }
                if at != start {
                    return Err(Error::Internal("odd-degree vertex among fractional edges".into()));
                }
                // shift direction chosen to pull the first edge back towards φ
                let (i0, fw0) = trail[0];
                let below = super::scale(w[i0], exp - b)? < phi[i0];
                let up = if fw0 { below } else { !below };
                let s = if up { 1 } else { -1 };
                for (i, fw) in trail {
                    w[i] += if fw { s } else { -s };
                }
            }
        }
        for v in w.iter_mut() {
            debug_assert!(*v % 2 == 0);
            *v /= 2;
        }
    }
    Ok(w)
}

/// Dinic max-flow on integer capacities.
pub struct MaxFlow {
    n: usize,
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    orig: Vec<i64>,
}

impl MaxFlow {
    pub fn new(n: usize) -> Self {
        MaxFlow { n, adj: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new(), orig: Vec::new() }
    }

    /// Arc u → v; returns its id.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: i64) -> usize {
        let id = self.to.len();
        self.adj[u].push(id);
        self.to.push(v);
        self.cap.push(cap);
        self.orig.push(cap);
        self.adj[v].push(id + 1);
        self.to.push(u);
        self.cap.push(0);
        self.orig.push(0);
        id
    }

    pub fn flow_on(&self, id: usize) -> i64 {
        self.orig[id] - self.cap[id]
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        loop {
            let mut level = vec![u32::MAX; self.n];
            level[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &id in &self.adj[u] {
                    let v = self.to[id];
                    if self.cap[id] > 0 && level[v] == u32::MAX {
                        level[v] = level[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            if level[t] == u32::MAX {
                return total;
            }
            let mut it = vec![0usize; self.n];
            loop {
                let pushed = self.augment(s, t, &level, &mut it);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    // iterative blocking-flow search along one level-graph path
    fn augment(&mut self, s: usize, t: usize, level: &[u32], it: &mut [usize]) -> i64 {
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let f = path.iter().map(|&id| self.cap[id]).min().unwrap_or(0);
                for &id in &path {
                    self.cap[id] -= f;
                    self.cap[id ^ 1] += f;
                }
                return f;
            }
            let mut advanced = false;
            while it[u] < self.adj[u].len() {
                let id = self.adj[u][it[u]];
                let v = self.to[id];
                if self.cap[id] > 0 && level[v] == level[u] + 1 {
                    path.push(id);
                    u = v;
                    advanced = true;
                    break;
                }
                it[u] += 1;
            }
            if !advanced {
                if u == s {
                    return 0;
                }
                let id = path.pop().expect("non-source vertex has an incoming path arc");
                u = self.to[id ^ 1];
                it[u] += 1;
            }
        }
    }
}

fn feasible_at(g: &FlowGraph, r: &[i64], bound: i64) -> Option<Vec<i64>> {
    let (s, t) = (g.n, g.n + 1);
    let mut mf = MaxFlow::new(g.n + 2);
    let mut need = 0;
    for (x, &v) in r.iter().enumerate() {
        if v > 0 {
            mf.add_edge(s, x, v);
            need += v;
        } else if v < 0 {
            mf.add_edge(x, t, -v);
        }
    }
    let arcs: Vec<(usize, usize)> =
        g.edges.iter().map(|&(u, v)| (mf.add_edge(u, v, bound), mf.add_edge(v, u, bound))).collect();
    if mf.max_flow(s, t) != need {
        return None;
    }
    Some(arcs.iter().map(|&(a, b)| mf.flow_on(a) - mf.flow_on(b)).collect())
}

/// Integral flow with out-flow r and the least possible sup norm (binary search on the bound).
pub fn min_sup_flow(g: &FlowGraph, r: &[i64]) -> Result<(Vec<i64>, i64)> {
    let total: i64 = r.iter().filter(|&&v| v > 0).sum();
    let mut deg = vec![0i64; g.n];
    for &(u, v) in &g.edges {
        if u != v {
            deg[u] += 1;
            deg[v] += 1;
        }
    }
    let mut lo = 0i64;
    for x in 0..g.n {
        if r[x] != 0 {
            if deg[x] == 0 {
                return Err(Error::Infeasible(format!("vertex {x} has residual {} and no edges", r[x])));
            }
            lo = lo.max((r[x].abs() + deg[x] - 1) / deg[x]);
        }
    }
    if r.iter().all(|&v| v == 0) {
        return Ok((vec![0; g.edges.len()], 0));
    }
    // gallop up from the degree bound, then bisect
    let cap = total.max(lo).max(1);
    let mut hi = lo.max(1);
    let mut below = lo - 1;
    let mut best = loop {
        if let Some(f) = feasible_at(g, r, hi) {
            break f;
        }
        if hi >= cap {
            return Err(Error::Infeasible("residual divergence does not balance on a component".into()));
        }
        below = hi;
        hi = (hi * 2).min(cap);
    };
    let mut lo = below + 1;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        match feasible_at(g, r, mid) {
            Some(f) => {
                best = f;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    Ok((best, hi))
}
