#![allow(dead_code)]

pub mod toast;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toastkit::flows::{integralize, FlowGraph};

pub type Graph = (usize, Vec<(usize, usize)>);

// canonical edge list: refine vertex colours, then try every order within colour classes
fn canonical(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut colour: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    loop {
        let sig: Vec<(usize, Vec<usize>)> = (0..n)
            .map(|x| {
                let mut s: Vec<usize> = adj[x].iter().map(|&y| colour[y]).collect();
                s.sort_unstable();
                (colour[x], s)
            })
            .collect();
        let ranks: BTreeSet<&(usize, Vec<usize>)> = sig.iter().collect();
        let ranks: Vec<&(usize, Vec<usize>)> = ranks.into_iter().collect();
        let next: Vec<usize> = sig.iter().map(|s| ranks.binary_search(&s).unwrap()).collect();
        let stable = next.iter().collect::<BTreeSet<_>>().len() == colour.iter().collect::<BTreeSet<_>>().len();
        colour = next;
        if stable {
            break;
        }
    }
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&x| colour[x]);
    for x in order {
        match cells.last_mut() {
            Some(c) if colour[c[0]] == colour[x] => c.push(x),
            _ => cells.push(vec![x]),
        }
    }
    let mut best: Option<Vec<(usize, usize)>> = None;
    let mut pos = vec![0usize; n];
    fn rec(
        ci: usize,
        cells: &mut Vec<Vec<usize>>,
        base: usize,
        pos: &mut Vec<usize>,
        edges: &[(usize, usize)],
        best: &mut Option<Vec<(usize, usize)>>,
    ) {
        if ci == cells.len() {
            let mut e: Vec<(usize, usize)> =
                edges.iter().map(|&(u, v)| (pos[u].min(pos[v]), pos[u].max(pos[v]))).collect();
            e.sort_unstable();
            if best.as_ref().is_none_or(|b| e < *b) {
                *best = Some(e);
            }
            return;
        }
        let len = cells[ci].len();
        permute(ci, 0, len, cells, base, pos, edges, best);
    }
    #[allow(clippy::too_many_arguments)]
    fn permute(
        ci: usize,
        k: usize,
        len: usize,
        cells: &mut Vec<Vec<usize>>,
        base: usize,
        pos: &mut Vec<usize>,
        edges: &[(usize, usize)],
        best: &mut Option<Vec<(usize, usize)>>,
    ) {
        if k == len {
            for (i, &x) in cells[ci].iter().enumerate() {
                pos[x] = base + i;
            }
            rec(ci + 1, cells, base + len, pos, edges, best);
            return;
        }
        for i in k..len {
            cells[ci].swap(k, i);
            permute(ci, k + 1, len, cells, base, pos, edges, best);
            cells[ci].swap(k, i);
        }
    }
    rec(0, &mut cells, 0, &mut pos, edges, &mut best);
    best.unwrap()
}

/// Connected simple graphs with 1..=max_edges edges, one per isomorphism class.
pub fn connected_graphs(max_edges: usize) -> Vec<Graph> {
    let mut level: BTreeSet<(usize, Vec<(usize, usize)>)> = BTreeSet::from([(2, vec![(0, 1)])]);
    let mut all: Vec<Graph> = level.iter().cloned().collect();
    for _ in 1..max_edges {
        let mut next = BTreeSet::new();
        for (n, edges) in &level {
            let have: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
            for u in 0..*n {
                // pendant edge to a new vertex
                let mut e = edges.clone();
                e.push((u, *n));
                next.insert((n + 1, canonical(n + 1, &e)));
                for v in u + 1..*n {
                    if !have.contains(&(u, v)) {
                        let mut e = edges.clone();
                        e.push((u, v));
                        next.insert((*n, canonical(*n, &e)));
                    }
                }
            }
        }
        all.extend(next.iter().cloned());
        level = next;
    }
    all
}

/// Every integral f-flow ψ with |ψ − φ| < 1 edgewise (φ = phi / 2^exp).
pub fn brute_force(g: &FlowGraph, phi: &[i64], exp: u32, f: &[i64]) -> Vec<Vec<i64>> {
    let one = 1i64 << exp;
    let choices: Vec<Vec<i64>> = phi
        .iter()
        .map(|&p| {
            let lo = p.div_euclid(one);
            if p.rem_euclid(one) == 0 {
                vec![lo]
            } else {
                vec![lo, lo + 1]
            }
        })
        .collect();
    let mut out = Vec::new();
    let mut cur = vec![0i64; phi.len()];
    fn go(i: usize, ch: &[Vec<i64>], cur: &mut Vec<i64>, g: &FlowGraph, f: &[i64], out: &mut Vec<Vec<i64>>) {
        if i == ch.len() {
            if g.out_sums(cur).unwrap() == f {
                out.push(cur.clone());
            }
            return;
        }
        for &v in &ch[i] {
            cur[i] = v;
            go(i + 1, ch, cur, g, f, out);
        }
    }
    go(0, &choices, &mut cur, g, f, &mut out);
    out
}

pub fn deviation_ok(phi: &[i64], exp: u32, psi: &[i64]) -> bool {
    phi.iter().zip(psi).all(|(&p, &q)| ((q << exp) - p).abs() < 1 << exp)
}

/// Outcome of the exhaustive oracle: (graphs, instances, failures).
pub fn exhaustive_oracle(max_edges: usize, max_exp: u32) -> (usize, usize, Vec<String>) {
    let graphs = connected_graphs(max_edges);
    let mut instances = 0;
    let mut failures = Vec::new();
    for (n, edges) in &graphs {
        let g = FlowGraph { n: *n, edges: edges.clone() };
        let m = edges.len();
        for exp in 1..=max_exp {
            let one = 1i64 << exp;
            // all fractional patterns, with alternating integer offsets
            let total = (one as usize).pow(m as u32);
            for code in 0..total {
                let mut c = code;
                let phi: Vec<i64> = (0..m)
                    .map(|i| {
                        let frac = (c % one as usize) as i64;
                        c /= one as usize;
                        frac + if (code + i) % 3 == 0 { -one } else { 0 }
                    })
                    .collect();
                let out = g.out_sums(&phi).unwrap();
                if out.iter().any(|v| v % one != 0) {
                    continue;
                }
                let f: Vec<i64> = out.iter().map(|v| v / one).collect();
                instances += 1;
                let brute = brute_force(&g, &phi, exp, &f);
                match integralize(&g, &phi, exp, &f) {
                    Ok(psi) => {
                        if brute.is_empty() {
                            failures.push(format!("no brute-force flow for {edges:?} φ={phi:?}/2^{exp}"));
                        }
                        if !brute.contains(&psi) || !deviation_ok(&phi, exp, &psi) {
                            failures.push(format!("integralize gave {psi:?} for {edges:?} φ={phi:?}/2^{exp}"));
                        }
                    }
                    Err(e) => failures.push(format!("integralize failed on {edges:?}: {e}")),
                }
            }
        }
    }
    (graphs.len(), instances, failures)
}

/// Random connected graph with a random dyadic flow of integral divergence.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (FlowGraph, Vec<i64>, u32, Vec<i64>) {
    let n = rng.random_range(2..40usize);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    let tree = edges.len();
    for _ in 0..rng.random_range(0..2 * n) {
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u != v {
            edges.push((u, v));
        }
    }
    let exp = rng.random_range(0..8u32);
    let one = 1i64 << exp;
    let mut phi: Vec<i64> = edges.iter().map(|_| rng.random_range(-8 * one..8 * one)).collect();
    // fix divergence on tree edges, leaves first (parent index < child index)
    let g = FlowGraph { n, edges: edges.clone() };
    for v in (1..n).rev() {
        let out = g.out_sums(&phi).unwrap();
        let r = out[v].rem_euclid(one);
        // tree edge (p, v): raising φ lowers out[v]
        phi[v - 1] += r;
        debug_assert!(v - 1 < tree);
    }
    let out = g.out_sums(&phi).unwrap();
    let f = out.iter().map(|v| v / one).collect();
    (g, phi, exp, f)
}

/// Outcome of the randomized check: failures among `count` instances.
pub fn randomized_oracle(count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for i in 0..count {
        let (g, phi, exp, f) = random_instance(&mut rng);
        match integralize(&g, &phi, exp, &f) {
            Ok(psi) => {
                if g.out_sums(&psi).unwrap() != f || !deviation_ok(&phi, exp, &psi) {
                    failures.push(format!("instance {i}: bad output"));
                }
            }
            Err(e) => failures.push(format!("instance {i}: {e}")),
        }
    }
    failures
}
