//! Schreier graph of a translation action of Z^d on the pixel torus (Z_N)^k.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vertex_set::VertexSet;

/// Sentinel used in distance fields for "farther than the cap".
pub const FAR: u32 = u32::MAX;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ActionSpec {
    pub k: usize,
    pub n: u32,
    pub translations: Vec<Vec<i64>>,
    pub r_free: u32,
}

/// Coordinates of each orbit as a product of cyclic groups, one factor per translation.
#[derive(Clone, Debug)]
pub struct Chart {
    pub orders: Vec<u32>,
    coord: Vec<u32>,
    local: Vec<u32>,
    by_local: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct TorusAction {
    spec: ActionSpec,
    d: usize,
    size: usize,
    strides: Vec<usize>,
    disp: Vec<Vec<u32>>,
    gens: Vec<Vec<i32>>,
    rev: Vec<usize>,
    nbr: Vec<u32>,
    orbit_of: Vec<u32>,
    orbit_bases: Vec<usize>,
    chart: Option<Chart>,
}

/// Directed edge (x, γ x) where γ is the generator with index `gen`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub gen: usize,
}

/// For each generator, the sources x of present directed edges (x, γ x).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSet {
    pub per_gen: Vec<VertexSet>,
}

#[derive(Clone, Debug)]
pub struct Boundaries {
    pub outer: VertexSet,
    pub inner: VertexSet,
    pub edge: EdgeSet,
}

#[derive(Clone, Debug)]
pub struct PowerComponent {
    pub points: Vec<usize>,
    pub diameter: u32,
}

impl PowerComponent {
    pub fn set(&self, universe: usize) -> VertexSet {
        VertexSet::from_indices(universe, self.points.iter().copied())
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// All vectors of {-r..r}^d in lexicographic order.
pub fn cube_vectors(d: usize, r: i32) -> Vec<Vec<i32>> {
    let side = (2 * r + 1) as usize;
    let total = side.pow(d as u32);
    (0..total)
        .map(|mut t| {
            let mut v = vec![0i32; d];
            for j in (0..d).rev() {
                v[j] = (t % side) as i32 - r;
                t /= side;
            }
            v
        })
        .collect()
}

fn is_positive(eps: &[i32]) -> bool {
    eps.iter().find(|&&e| e != 0).is_some_and(|&e| e > 0)
}

impl TorusAction {
    pub fn new(k: usize, n: u32, translations: Vec<Vec<i64>>, r_free: u32) -> Result<Self> {
        Self::from_spec(ActionSpec { k, n, translations, r_free })
    }

    /// Unit translations along every axis, with the largest relation-free radius.
    pub fn standard(k: usize, n: u32) -> Result<Self> {
        let t = (0..k)
            .map(|i| (0..k).map(|j| i64::from(i == j)).collect())
            .collect();
        Self::new(k, n, t, (n.saturating_sub(1)) / 2)
    }

    pub fn from_spec(spec: ActionSpec) -> Result<Self> {
        let ActionSpec { k, n, ref translations, r_free } = spec;
        let d = translations.len();
        if k == 0 || d == 0 || n < 2 {
            return Err(Error::InvalidAction(format!("need k ≥ 1, d ≥ 1, N ≥ 2 (k={k}, d={d}, N={n})")));
        }
        if r_free == 0 {
            return Err(Error::InvalidAction("R_free must be at least 1 so the Schreier graph is simple".into()));
        }
        if translations.iter().any(|t| t.len() != k) {
            return Err(Error::InvalidAction(format!("every translation needs {k} coordinates")));
        }
        let size = (n as usize)
            .checked_pow(k as u32)
            .filter(|&s| s <= u32::MAX as usize)
            .ok_or_else(|| Error::InvalidAction("grid too large".into()))?;
        let disp: Vec<Vec<u32>> = translations
            .iter()
            .map(|t| t.iter().map(|&c| c.rem_euclid(n as i64) as u32).collect())
            .collect();
        if let Some(detail) = find_relation(k, n, &disp, r_free) {
            return Err(Error::SmallRelation { r_free, detail });
        }
        let mut strides = vec![1usize; k];
        for j in 1..k {
            strides[j] = strides[j - 1] * n as usize;
        }
        let gens: Vec<Vec<i32>> = cube_vectors(d, 1).into_iter().filter(|e| e.iter().any(|&x| x != 0)).collect();
        let rev = gens
            .iter()
            .map(|g| {
                let neg: Vec<i32> = g.iter().map(|x| -x).collect();
                gens.iter().position(|h| *h == neg).unwrap()
            })
            .collect();
        let mut a = TorusAction {
            spec: spec.clone(),
            d,
            size,
            strides,
            disp,
            gens,
            rev,
            nbr: Vec::new(),
            orbit_of: Vec::new(),
            orbit_bases: Vec::new(),
            chart: None,
        };
        let ng = a.gens.len();
        let mut nbr = vec![0u32; size * ng];
        for x in 0..size {
            for g in 0..ng {
                nbr[x * ng + g] = a.translate(x, &a.gens[g].clone()) as u32;
            }
        }
        a.nbr = nbr;
        a.compute_orbits();
        a.chart = a.compute_chart();
        Ok(a)
    }

    pub fn spec(&self) -> &ActionSpec {
        &self.spec
    }
    pub fn k(&self) -> usize {
        self.spec.k
    }
    pub fn n(&self) -> u32 {
        self.spec.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn r_free(&self) -> u32 {
        self.spec.r_free
    }
    /// Number of grid points N^k.
    pub fn size(&self) -> usize {
        self.size
    }
    pub fn num_gens(&self) -> usize {
        self.gens.len()
    }
    pub fn generator(&self, g: usize) -> &[i32] {
        &self.gens[g]
    }
    pub fn reverse_gen(&self, g: usize) -> usize {
        self.rev[g]
    }
    /// Generator whose first nonzero coordinate is +1; each undirected edge has one positive orientation.
    pub fn is_positive_gen(&self, g: usize) -> bool {
        is_positive(&self.gens[g])
    }
    pub fn gen_index(&self, eps: &[i32]) -> Option<usize> {
        self.gens.iter().position(|g| g == eps)
    }
    pub fn chart(&self) -> Option<&Chart> {
        self.chart.as_ref()
    }
    pub fn require_chart(&self) -> Result<&Chart> {
        self.chart.as_ref().ok_or_else(|| {
            Error::NoChart("orbits are not products of the cyclic groups generated by the translations".into())
        })
    }

    pub fn coords(&self, x: usize) -> Vec<u32> {
        let n = self.spec.n as usize;
        (0..self.spec.k).map(|j| ((x / self.strides[j]) % n) as u32).collect()
    }

    pub fn point(&self, coords: &[u32]) -> usize {
        coords.iter().zip(&self.strides).map(|(&c, s)| (c % self.spec.n) as usize * s).sum()
    }

    /// x + Σ ε_i t_i.
    pub fn translate(&self, x: usize, eps: &[i32]) -> usize {
        let n = self.spec.n as i64;
        let mut out = 0usize;
        for j in 0..self.spec.k {
            let mut c = ((x / self.strides[j]) % n as usize) as i64;
            for (i, &e) in eps.iter().enumerate() {
                c += e as i64 * self.disp[i][j] as i64;
            }
            out += c.rem_euclid(n) as usize * self.strides[j];
        }
        out
    }

    /// Displacement Σ ε_i t_i as a vector in (Z_N)^k.
    pub fn displacement(&self, eps: &[i32]) -> Vec<u32> {
        let n = self.spec.n as i64;
        (0..self.spec.k)
            .map(|j| {
                let s: i64 = eps.iter().enumerate().map(|(i, &e)| e as i64 * self.disp[i][j] as i64).sum();
                s.rem_euclid(n) as u32
            })
            .collect()
    }

    /// x shifted by a spatial vector.
    pub fn shift(&self, x: usize, v: &[u32]) -> usize {
        let n = self.spec.n as usize;
        let mut out = 0usize;
        for j in 0..self.spec.k {
            let c = (x / self.strides[j]) % n;
            out += (c + v[j] as usize) % n * self.strides[j];
        }
        out
    }

    #[inline]
    pub fn step(&self, x: usize, g: usize) -> usize {
        self.nbr[x * self.gens.len() + g] as usize
    }

    #[inline]
    pub fn neighbor_row(&self, x: usize) -> &[u32] {
        let ng = self.gens.len();
        &self.nbr[x * ng..(x + 1) * ng]
    }

    pub fn neighbors(&self, x: usize) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::with_capacity(self.gens.len());
        for &y in self.neighbor_row(x) {
            let y = y as usize;
            if y != x && !out.contains(&y) {
                out.push(y);
            }
        }
        out
    }

    /// Generator index g with g·x = y, if x and y are adjacent.
    pub fn edge_gen(&self, x: usize, y: usize) -> Option<usize> {
        self.neighbor_row(x).iter().position(|&z| z as usize == y)
    }

    /// Graph distance, or `None` when it exceeds `cap`.
    pub fn dist(&self, x: usize, y: usize, cap: u32) -> Option<u32> {
        if x == y {
            return Some(0);
        }
        let mut seen = HashSet::from([x]);
        let mut frontier = vec![x];
        for r in 1..=cap {
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in self.neighbor_row(u) {
                    let v = v as usize;
                    if v == y {
                        return Some(r);
                    }
                    if seen.insert(v) {
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                return None;
            }
            frontier = next;
        }
        None
    }

    /// Multi-source BFS distances to `r`, with [`FAR`] beyond `cap`.
    pub fn distance_field(&self, r: &VertexSet, cap: u32) -> Vec<u32> {
        let mut dist = vec![FAR; self.size];
        let mut q = VecDeque::new();
        for x in r.iter() {
            dist[x] = 0;
            q.push_back(x);
        }
        while let Some(u) = q.pop_front() {
            let du = dist[u];
            if du >= cap {
                continue;
            }
            for &v in self.neighbor_row(u) {
                let v = v as usize;
                if dist[v] == FAR {
                    dist[v] = du + 1;
                    q.push_back(v);
                }
            }
        }
        dist
    }

    pub fn ball(&self, r: &VertexSet, q: u32) -> VertexSet {
        if q == 0 {
            return r.clone();
        }
        let f = self.distance_field(r, q);
        VertexSet::from_fn(self.size, |x| f[x] != FAR)
    }

    /// Points within distance `q` of a single point, with their distances.
    pub fn ball_of(&self, x: usize, q: u32) -> Vec<(usize, u32)> {
        let mut out = vec![(x, 0)];
        let mut seen = HashSet::from([x]);
        let mut i = 0;
        while i < out.len() {
            let (u, du) = out[i];
            i += 1;
            if du == q {
                continue;
            }
            for &v in self.neighbor_row(u) {
                if seen.insert(v as usize) {
                    out.push((v as usize, du + 1));
                }
            }
        }
        out
    }

    pub fn outer_boundary(&self, r: &VertexSet) -> VertexSet {
        self.ball(r, 1).difference(r)
    }

    pub fn inner_boundary(&self, r: &VertexSet) -> VertexSet {
        VertexSet::from_fn(self.size, |x| {
            r.contains(x) && self.neighbor_row(x).iter().any(|&y| !r.contains(y as usize))
        })
    }

    pub fn edge_boundary(&self, r: &VertexSet) -> EdgeSet {
        let ng = self.gens.len();
        let mut per_gen = vec![VertexSet::empty(self.size); ng];
        for x in r.iter() {
            for g in 0..ng {
                if !r.contains(self.step(x, g)) {
                    per_gen[g].insert(x);
                }
            }
        }
        EdgeSet { per_gen }
    }

    pub fn boundaries(&self, r: &VertexSet) -> Boundaries {
        Boundaries { outer: self.outer_boundary(r), inner: self.inner_boundary(r), edge: self.edge_boundary(r) }
    }

    /// Components of G ↾ R (plain adjacency) as a label per point; `u32::MAX` outside R.
    pub fn component_labels(&self, r: &VertexSet) -> (Vec<u32>, usize) {
        let mut label = vec![u32::MAX; self.size];
        let mut count = 0u32;
        let mut stack = Vec::new();
        for s in r.iter() {
            if label[s] != u32::MAX {
                continue;
            }
            label[s] = count;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in self.neighbor_row(u) {
                    let v = v as usize;
                    if r.contains(v) && label[v] == u32::MAX {
                        label[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (label, count as usize)
    }

    /// Distinct nonzero displacements Σ ε_i t_i with ‖ε‖∞ ≤ r, one per ± pair.
    pub fn half_offsets(&self, r: u32) -> Vec<Vec<u32>> {
        let mut seen = HashSet::new();
        let zero = vec![0u32; self.spec.k];
        let mut out = Vec::new();
        for eps in cube_vectors(self.d, r as i32) {
            if !is_positive(&eps) {
                continue;
            }
            let v = self.displacement(&eps);
            let neg: Vec<i32> = eps.iter().map(|e| -e).collect();
            let nv = self.displacement(&neg);
            if v == zero || seen.contains(&v) || seen.contains(&nv) {
                continue;
            }
            seen.insert(v.clone());
            out.push(v);
        }
        out
    }

    /// Components of G^{≤r} ↾ R as labels (`u32::MAX` outside R), numbered by minimal point.
    pub fn power_labels(&self, r: &VertexSet, scale: u32) -> (Vec<u32>, usize) {
        if scale <= 1 {
            return self.component_labels(r);
        }
        let mut uf = UnionFind::new(self.size);
        let offs = self.half_offsets(scale);
        for x in r.iter() {
            for v in &offs {
                let y = self.shift(x, v);
                if r.contains(y) {
                    uf.union(x, y);
                }
            }
        }
        let mut label = vec![u32::MAX; self.size];
        let mut root_label = vec![u32::MAX; self.size];
        let mut count = 0u32;
        for x in r.iter() {
            let root = uf.find(x);
            if root_label[root] == u32::MAX {
                root_label[root] = count;
                count += 1;
            }
            label[x] = root_label[root];
        }
        (label, count as usize)
    }

    pub fn power_components(&self, r: &VertexSet, scale: u32) -> Vec<PowerComponent> {
        let (label, count) = self.power_labels(r, scale);
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); count];
        for x in r.iter() {
            groups[label[x] as usize].push(x);
        }
        groups
            .into_iter()
            .map(|points| {
                let diameter = self.diameter(&points);
                PowerComponent { points, diameter }
            })
            .collect()
    }

    /// G-metric diameter of a point set inside one orbit; `u32::MAX` if it spans orbits.
    pub fn diameter(&self, points: &[usize]) -> u32 {
        if points.len() <= 1 {
            return 0;
        }
        let o = self.orbit_of[points[0]];
        if points.iter().any(|&p| self.orbit_of[p] != o) {
            return u32::MAX;
        }
        match &self.chart {
            Some(ch) => (0..self.d)
                .map(|i| {
                    let ord = ch.orders[i];
                    let mut present = vec![false; ord as usize];
                    for &p in points {
                        present[ch.coord[p * self.d + i] as usize] = true;
                    }
                    let vals: Vec<u32> = (0..ord).filter(|&a| present[a as usize]).collect();
                    cyclic_diameter(&vals, ord)
                })
                .max()
                .unwrap_or(0),
            None => {
                let member: HashSet<usize> = points.iter().copied().collect();
                let mut best = 0;
                for &p in points {
                    let f = self.distance_field(&VertexSet::from_indices(self.size, [p]), FAR - 1);
                    for &q in &member {
                        best = best.max(f[q]);
                    }
                }
                best
            }
        }
    }

    fn compute_orbits(&mut self) {
        let mut orbit_of = vec![u32::MAX; self.size];
        let mut bases = Vec::new();
        let mut stack = Vec::new();
        for s in 0..self.size {
            if orbit_of[s] != u32::MAX {
                continue;
            }
            let id = bases.len() as u32;
            bases.push(s);
            orbit_of[s] = id;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in self.neighbor_row(u) {
                    if orbit_of[v as usize] == u32::MAX {
                        orbit_of[v as usize] = id;
                        stack.push(v as usize);
                    }
                }
            }
        }
        self.orbit_of = orbit_of;
        self.orbit_bases = bases;
    }

    fn compute_chart(&self) -> Option<Chart> {
        let n = self.spec.n as u64;
        let orders: Vec<u32> = self
            .disp
            .iter()
            .map(|t| t.iter().map(|&c| n / gcd(n, c as u64)).fold(1u64, |a, b| a / gcd(a, b) * b) as u32)
            .collect();
        let prod: u64 = orders.iter().map(|&o| o as u64).product();
        let orbit_size = self.size as u64 / self.orbit_bases.len() as u64;
        if prod != orbit_size || !(self.size as u64).is_multiple_of(self.orbit_bases.len() as u64) {
            return None;
        }
        let d = self.d;
        let mut coord = vec![0u32; self.size * d];
        let mut local = vec![u32::MAX; self.size];
        let mut by_local = Vec::with_capacity(self.orbit_bases.len());
        for &b in &self.orbit_bases {
            let mut pts = vec![0usize; prod as usize];
            for lin in 0..prod as usize {
                let mut a = vec![0i32; d];
                let mut t = lin;
                for i in 0..d {
                    a[i] = (t % orders[i] as usize) as i32;
                    t /= orders[i] as usize;
                }
                let x = self.translate(b, &a);
                if local[x] != u32::MAX {
                    return None;
                }
                local[x] = lin as u32;
                for i in 0..d {
                    coord[x * d + i] = a[i] as u32;
                }
                pts[lin] = x;
            }
            by_local.push(pts);
        }
        Some(Chart { orders, coord, local, by_local })
    }

    pub fn num_orbits(&self) -> usize {
        self.orbit_bases.len()
    }

    pub fn orbit_id(&self, x: usize) -> usize {
        self.orbit_of[x] as usize
    }

    pub fn orbits(&self) -> Vec<VertexSet> {
        let mut out = vec![VertexSet::empty(self.size); self.orbit_bases.len()];
        for x in 0..self.size {
            out[self.orbit_of[x] as usize].insert(x);
        }
        out
    }

    /// G-metric diameter of each orbit.
    pub fn orbit_diameter(&self) -> u32 {
        match &self.chart {
            Some(ch) => ch.orders.iter().map(|&o| o / 2).max().unwrap_or(0),
            None => {
                let mut best = 0;
                for &b in &self.orbit_bases {
                    let f = self.distance_field(&VertexSet::from_indices(self.size, [b]), FAR - 1);
                    best = best.max(f.iter().filter(|&&v| v != FAR).copied().max().unwrap_or(0));
                }
                best
            }
        }
    }
}

impl Chart {
    pub fn coord(&self, x: usize) -> &[u32] {
        let d = self.orders.len();
        &self.coord[x * d..(x + 1) * d]
    }

    pub fn point(&self, orbit: usize, a: &[u32]) -> usize {
        let mut lin = 0usize;
        let mut mul = 1usize;
        for (i, &o) in self.orders.iter().enumerate() {
            lin += (a[i] % o) as usize * mul;
            mul *= o as usize;
        }
        self.by_local[orbit][lin]
    }

    pub fn local_index(&self, x: usize) -> usize {
        self.local[x] as usize
    }

    /// Closed-form distance ℓ∞ of cyclic coordinate differences, for points of one orbit.
    pub fn dist(&self, x: usize, y: usize) -> u32 {
        self.orders
            .iter()
            .enumerate()
            .map(|(i, &o)| {
                let a = self.coord(x)[i];
                let b = self.coord(y)[i];
                let t = a.abs_diff(b);
                t.min(o - t)
            })
            .max()
            .unwrap_or(0)
    }
}

fn cyclic_diameter(sorted: &[u32], ord: u32) -> u32 {
    let cyc = |a: u32, b: u32| {
        let t = a.abs_diff(b);
        t.min(ord - t)
    };
    let mut best = 0;
    for &a in sorted {
        let target = (a + ord / 2) % ord;
        let i = sorted.partition_point(|&v| v < target);
        for j in [i, i + sorted.len() - 1] {
            best = best.max(cyc(a, sorted[j % sorted.len()]));
        }
    }
    best
}

fn find_relation(k: usize, n: u32, disp: &[Vec<u32>], r: u32) -> Option<String> {
    let d = disp.len();
    let mut seen = std::collections::HashMap::new();
    for eps in cube_vectors(d, r as i32) {
        let v: Vec<u32> = (0..k)
            .map(|j| {
                let s: i64 = eps.iter().enumerate().map(|(i, &e)| e as i64 * disp[i][j] as i64).sum();
                s.rem_euclid(n as i64) as u32
            })
            .collect();
        if let Some(prev) = seen.insert(v, eps.clone()) {
            return Some(format!("{prev:?} and {eps:?} give the same displacement"));
        }
    }
    None
}

/// Largest R ≤ `limit` for which ε ↦ Σ ε_i t_i is injective on {-R..R}^d.
pub fn max_relation_free_radius(k: usize, n: u32, translations: &[Vec<i64>], limit: u32) -> u32 {
    let disp: Vec<Vec<u32>> =
        translations.iter().map(|t| t.iter().map(|&c| c.rem_euclid(n as i64) as u32).collect()).collect();
    let mut r = 0;
    while r < limit && find_relation(k, n, &disp, r + 1).is_none() {
        r += 1;
    }
    r
}

pub(crate) struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect() }
    }
    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let p = self.parent[x] as usize;
            self.parent[x] = self.parent[p];
            x = p;
        }
        x
    }
    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo as u32;
        }
    }
}

impl EdgeSet {
    pub fn empty(a: &TorusAction) -> Self {
        EdgeSet { per_gen: vec![VertexSet::empty(a.size()); a.num_gens()] }
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.per_gen[e.gen].contains(e.from)
    }

    pub fn insert(&mut self, e: Edge) {
        self.per_gen[e.gen].insert(e.from);
    }

    pub fn directed(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (gen, s) in self.per_gen.iter().enumerate() {
            out.extend(s.iter().map(|from| Edge { from, gen }));
        }
        out.sort();
        out
    }

    /// Undirected edges in positive orientation, sorted.
    pub fn undirected(&self, a: &TorusAction) -> Vec<Edge> {
        let mut out: Vec<Edge> = self.directed().into_iter().map(|e| e.canonical(a)).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn is_empty(&self) -> bool {
        self.per_gen.iter().all(|s| s.is_empty())
    }
}

impl Edge {
    pub fn to(&self, a: &TorusAction) -> usize {
        a.step(self.from, self.gen)
    }

    pub fn reversed(&self, a: &TorusAction) -> Edge {
        Edge { from: self.to(a), gen: a.reverse_gen(self.gen) }
    }

    pub fn canonical(&self, a: &TorusAction) -> Edge {
        if a.is_positive_gen(self.gen) {
            *self
        } else {
            self.reversed(a)
        }
    }
}
