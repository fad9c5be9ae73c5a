use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_graph::{Edge, EdgeSet, TorusAction, FAR};
use crate::vertex_set::VertexSet;

/// Δ_F: undirected edges of F, adjacent when they lie in a common triangle of G.
#[derive(Clone, Debug)]
pub struct DeltaGraph {
    /// Edges of F in positive orientation, sorted.
    pub vertices: Vec<Edge>,
    pub adj: Vec<Vec<usize>>,
    index: HashMap<Edge, usize>,
}

impl DeltaGraph {
    pub fn index_of(&self, e: Edge) -> Option<usize> {
        self.index.get(&e).copied()
    }

    /// Connected components, each sorted, ordered by minimal edge.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.vertices.len()];
        let mut out = Vec::new();
        for s in 0..self.vertices.len() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut i = 0;
            while i < comp.len() {
                for &v in &self.adj[comp[i]] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum::<usize>() / 2
    }
}

pub fn delta_graph(action: &TorusAction, f: &EdgeSet) -> DeltaGraph {
    let vertices = f.undirected(action);
    let index: HashMap<Edge, usize> = vertices.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut adj = vec![Vec::new(); vertices.len()];
    let lookup = |a: usize, b: usize| -> Option<usize> {
        let g = action.edge_gen(a, b)?;
        index.get(&Edge { from: a, gen: g }.canonical(action)).copied()
    };
    for (i, e) in vertices.iter().enumerate() {
        let (x, y) = (e.from, e.to(action));
        for z in action.neighbors(x) {
            if z == y || action.edge_gen(y, z).is_none() {
                continue;
            }
            for j in [lookup(x, z), lookup(y, z)].into_iter().flatten() {
                if j > i && !adj[i].contains(&j) {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
    }
    DeltaGraph { vertices, adj, index }
}

/// Hierholzer circuit through every Δ-edge of a component, as a closed vertex sequence starting at its minimal edge.
pub fn eulerian_circuit(dg: &DeltaGraph, comp: &[usize]) -> Result<Vec<usize>> {
    let start = *comp.iter().min().ok_or_else(|| Error::Internal("empty Δ-component".into()))?;
    if let Some(&v) = comp.iter().find(|&&v| !dg.adj[v].len().is_multiple_of(2)) {
        return Err(Error::Internal(format!("Δ-vertex {:?} has odd degree {}", dg.vertices[v], dg.adj[v].len())));
    }
    let edge_count: usize = comp.iter().map(|&v| dg.adj[v].len()).sum::<usize>() / 2;
    let mut used: HashMap<(usize, usize), bool> = HashMap::new();
    let mut ptr: HashMap<usize, usize> = HashMap::new();
    let mut stack = vec![start];
    let mut circuit = Vec::new();
    while let Some(&u) = stack.last() {
        let p = ptr.entry(u).or_insert(0);
        let mut next = None;
        while *p < dg.adj[u].len() {
            let v = dg.adj[u][*p];
            *p += 1;
            let key = (u.min(v), u.max(v));
            if let std::collections::hash_map::Entry::Vacant(e) = used.entry(key) {
                e.insert(true);
                next = Some(v);
                break;
            }
        }
        match next {
            Some(v) => stack.push(v),
            None => circuit.push(stack.pop().expect("nonempty stack")),
        }
    }
    circuit.reverse();
    if circuit.len() != edge_count + 1 {
        return Err(Error::Internal("Δ-component is disconnected".into()));
    }
    Ok(circuit)
}

/// The region S′ with C = ∂_E S′.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub set: VertexSet,
    /// True for a hole (a bounded complement component), false for S filled with its holes.
    pub hole: bool,
}

/// Complement components of a piece inside its orbit, with the exterior singled out.
pub(crate) struct PieceRegions {
    labels: Vec<u32>,
    sizes: Vec<usize>,
    exterior: Option<u32>,
    orbit: VertexSet,
}

impl PieceRegions {
    pub(crate) fn new(action: &TorusAction, s: &VertexSet) -> Result<Self> {
        let x0 = s.first().ok_or_else(|| Error::Precondition("empty piece".into()))?;
        let orbit = VertexSet::from_fn(action.size(), |y| action.orbit_id(y) == action.orbit_id(x0));
        if !s.is_subset(&orbit) {
            return Err(Error::Precondition("piece meets several orbits".into()));
        }
        let rest = orbit.difference(s);
        let (labels, count) = action.component_labels(&rest);
        let mut sizes = vec![0usize; count];
        let mut first = vec![usize::MAX; count];
        for x in rest.iter() {
            let l = labels[x] as usize;
            sizes[l] += 1;
            first[l] = first[l].min(x);
        }
        let diam = action.diameter(&s.iter().collect::<Vec<_>>());
        let field = action.distance_field(s, diam.saturating_add(2));
        let mut far = vec![false; count];
        for x in rest.iter() {
            if field[x] == FAR || field[x] > diam + 1 {
                far[labels[x] as usize] = true;
            }
        }
        let pick = |cands: Vec<usize>| cands.into_iter().max_by_key(|&l| (sizes[l], std::cmp::Reverse(first[l])));
        let exterior = pick((0..count).filter(|&l| far[l]).collect()).or_else(|| pick((0..count).collect()));
        Ok(PieceRegions { labels, sizes, exterior: exterior.map(|l| l as u32), orbit })
    }

    /// S′ for a Δ-component given by its undirected edges.
    pub(crate) fn region(&self, action: &TorusAction, s: &VertexSet, comp: &[Edge]) -> Result<Region> {
        let e = comp.first().ok_or_else(|| Error::Internal("empty Δ-component".into()))?;
        let (a, b) = (e.from, e.to(action));
        let outside = if s.contains(a) { b } else { a };
        let h = self.labels[outside];
        let hset = VertexSet::from_fn(action.size(), |x| self.labels[x] == h && self.orbit.contains(x));
        debug_assert_eq!(hset.count(), self.sizes[h as usize]);
        let mut bd = action.edge_boundary(&hset).undirected(action);
        bd.sort_unstable();
        let mut c = comp.to_vec();
        c.sort_unstable();
        if bd != c {
            return Err(Error::Internal(format!(
                "Δ-component with {} edges is not the boundary of a complement component",
                c.len()
            )));
        }
        Ok(if Some(h) == self.exterior {
            Region { set: self.orbit.difference(&hset), hole: false }
        } else {
            Region { set: hset, hole: true }
        })
    }
}

pub fn regions_for(action: &TorusAction, s: &VertexSet, comp: &[Edge]) -> Result<Region> {
    PieceRegions::new(action, s)?.region(action, s, comp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{out_flow_set, DyadicFlow};
    use proptest::prelude::*;

    fn block(a: &TorusAction, x0: u32, y0: u32, w: u32, h: u32) -> VertexSet {
        VertexSet::from_fn(a.size(), |x| {
            let p = a.coords(x);
            (x0..x0 + w).contains(&p[0]) && (y0..y0 + h).contains(&p[1])
        })
    }

    #[test]
    fn empty_edge_set() {
        let a = TorusAction::standard(2, 8).unwrap();
        let dg = delta_graph(&a, &EdgeSet::empty(&a));
        assert!(dg.vertices.is_empty());
        assert!(dg.components().is_empty());
    }

    #[test]
    fn single_vertex_boundary_is_one_cycle() {
        let a = TorusAction::standard(2, 8).unwrap();
        let s = VertexSet::from_indices(a.size(), [a.point(&[3, 3])]);
        let dg = delta_graph(&a, &a.edge_boundary(&s));
        assert_eq!(dg.vertices.len(), 8);
        let comps = dg.components();
        assert_eq!(comps.len(), 1);
        // axis neighbours of the centre see four others in the ring, diagonal ones two
        assert_eq!(dg.num_edges(), (4 * 4 + 4 * 2) / 2);
        let circ = eulerian_circuit(&dg, &comps[0]).unwrap();
        assert_eq!(circ.len(), 13);
        assert_eq!(circ.first(), circ.last());
    }

    #[test]
    fn far_apart_boundaries_separate() {
        let a = TorusAction::standard(2, 16).unwrap();
        let s = block(&a, 1, 1, 2, 2).union(&block(&a, 9, 9, 2, 2));
        let dg = delta_graph(&a, &a.edge_boundary(&s));
        assert_eq!(dg.components().len(), 2);
    }

    #[test]
    fn block_circuit_covers_boundary() {
        let a = TorusAction::standard(2, 8).unwrap();
        let s = block(&a, 2, 2, 2, 2);
        let dg = delta_graph(&a, &a.edge_boundary(&s));
        let comps = dg.components();
        assert_eq!(comps.len(), 1);
        let circ = eulerian_circuit(&dg, &comps[0]).unwrap();
        assert_eq!(circ.len(), dg.num_edges() + 1);
        let mut visited: Vec<usize> = circ.clone();
        visited.sort_unstable();
        visited.dedup();
        assert_eq!(visited, comps[0]);
        for w in circ.windows(2) {
            assert!(dg.adj[w[0]].contains(&w[1]));
        }
    }

    #[test]
    fn annulus_hole_and_filled_region() {
        let a = TorusAction::standard(2, 16).unwrap();
        let s = block(&a, 3, 3, 7, 7).difference(&block(&a, 5, 5, 3, 3));
        let dg = delta_graph(&a, &a.edge_boundary(&s));
        let comps = dg.components();
        assert_eq!(comps.len(), 2);
        let pr = PieceRegions::new(&a, &s).unwrap();
        let mut kinds = Vec::new();
        let mut phi = DyadicFlow::zero(&a, 2);
        for x in 0..a.size() {
            phi.add(&a, Edge { from: x, gen: x % a.num_gens() }, (x as i64 * 31) % 9 - 4).unwrap();
        }
        let mut total = crate::flows::Dyadic::ZERO;
        for c in &comps {
            let edges: Vec<Edge> = c.iter().map(|&i| dg.vertices[i]).collect();
            let r = pr.region(&a, &s, &edges).unwrap();
            if r.hole {
                assert_eq!(r.set, block(&a, 5, 5, 3, 3));
                total = total.checked_sub(out_flow_set(&a, &phi, &r.set).unwrap()).unwrap();
            } else {
                assert_eq!(r.set, block(&a, 3, 3, 7, 7));
                total = total.checked_add(out_flow_set(&a, &phi, &r.set).unwrap()).unwrap();
            }
            kinds.push(r.hole);
        }
        kinds.sort();
        assert_eq!(kinds, vec![false, true]);
        // filled minus hole is the annulus
        assert_eq!(total, out_flow_set(&a, &phi, &s).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn random_piece_circuits(bits in proptest::collection::vec(any::<bool>(), 36)) {
            let a = TorusAction::standard(2, 16).unwrap();
            let s = VertexSet::from_fn(a.size(), |x| {
                let p = a.coords(x);
                (5..11).contains(&p[0]) && (5..11).contains(&p[1]) && bits[((p[0] - 5) * 6 + p[1] - 5) as usize]
            });
            prop_assume!(!s.is_empty());
            let dg = delta_graph(&a, &a.edge_boundary(&s));
            for c in dg.components() {
                let circ = eulerian_circuit(&dg, &c).unwrap();
                let mut steps: Vec<(usize, usize)> = circ.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))).collect();
                steps.sort_unstable();
                let mut want: Vec<(usize, usize)> = c.iter().flat_map(|&u| dg.adj[u].iter().map(move |&v| (u, v))).filter(|(u, v)| u < v).collect();
                want.sort_unstable();
                prop_assert_eq!(steps, want);
            }
        }
    }
}
