//! Asymptotic-dimension witnesses, greedy colorings of graph powers and rainbow toasts.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_graph::{TorusAction, FAR};
use crate::locality::{LocalityCertificate, Registry, Window, WindowProcedure};
use crate::vertex_set::VertexSet;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsdimWitness {
    pub scale: u32,
    pub colors: Vec<VertexSet>,
    pub diameter_bound: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub pass: bool,
    pub uncovered: Option<usize>,
    /// Largest G-metric diameter of a G^{≤r} component, per color.
    pub max_diameter: Vec<u32>,
    pub diameter_bound: u32,
    pub failure: Option<String>,
}

/// Points of a cycle of length `ord` lying within distance `rho` of some cut.
fn cut_bands(ord: u32, cuts: &[u32], rho: u32) -> Vec<bool> {
    let mut bad = vec![false; ord as usize];
    for &c in cuts {
        for t in 0..=2 * rho {
            bad[((c + ord - rho % ord + t) % ord) as usize] = true;
        }
    }
    bad
}

/// The (d+1)-colored shifted-cube cover at scale r, read off the orbit chart.
pub fn shifted_cube_witness(action: &TorusAction, r: u32) -> Result<AsdimWitness> {
    if r == 0 {
        return Err(Error::Precondition("scale must be at least 1".into()));
    }
    let chart = action.require_chart()?;
    let colors = action.d() + 1;
    let l = colors as u32 * (r + 1);
    let rho = r / 2;
    let mut bad: Vec<Vec<Vec<bool>>> = Vec::new();
    let mut bound = 0u32;
    for &ord in &chart.orders {
        let periods = ord / l;
        if periods == 0 {
            return Err(Error::ScaleTooLarge(format!("cube pitch L={l} exceeds orbit axis length {ord}")));
        }
        let m = periods * colors as u32;
        let cuts: Vec<u32> = (0..m).map(|t| (t as u64 * ord as u64 / m as u64) as u32).collect();
        let mut per_color = Vec::new();
        for i in 0..colors {
            let own: Vec<u32> = cuts.iter().enumerate().filter(|(t, _)| t % colors == i).map(|(_, &c)| c).collect();
            let widest = (0..own.len())
                .map(|t| {
                    let next = if t + 1 < own.len() { own[t + 1] } else { own[0] + ord };
                    next - own[t]
                })
                .max()
                .unwrap();
            bound = bound.max(widest.saturating_sub(2 * rho + 2).min(ord / 2));
            per_color.push(cut_bands(ord, &own, rho));
        }
        bad.push(per_color);
    }
    if bound > l {
        return Err(Error::ScaleTooLarge(format!(
            "axis lengths {:?} leave pieces of diameter {bound} > L={l}",
            chart.orders
        )));
    }
    let sets = (0..colors)
        .map(|i| {
            VertexSet::from_fn(action.size(), |x| {
                chart.coord(x).iter().enumerate().all(|(a, &c)| !bad[a][i][c as usize])
            })
        })
        .collect();
    Ok(AsdimWitness { scale: r, colors: sets, diameter_bound: bound })
}

pub fn verify_witness(action: &TorusAction, w: &AsdimWitness) -> WitnessReport {
    let mut cover = VertexSet::empty(action.size());
    for c in &w.colors {
        cover.union_with(c);
    }
    let uncovered = cover.complement().first();
    let max_diameter: Vec<u32> = w
        .colors
        .iter()
        .map(|c| action.power_components(c, w.scale).iter().map(|p| p.diameter).max().unwrap_or(0))
        .collect();
    let mut failure = None;
    if let Some(x) = uncovered {
        failure = Some(format!("point {x} ({:?}) is not covered", action.coords(x)));
    } else if let Some((i, &dm)) = max_diameter.iter().enumerate().find(|(_, &dm)| dm > w.diameter_bound) {
        failure = Some(format!("color {i} has a component of diameter {dm} > {}", w.diameter_bound));
    }
    WitnessReport { pass: failure.is_none(), uncovered, max_diameter, diameter_bound: w.diameter_bound, failure }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub radius: u32,
    pub colors: Vec<u32>,
    pub num_colors: u32,
    /// Longest chain of points, each colored after a G^{≤R}-neighbor later in the chain.
    pub chain_depth: u32,
    pub basis: Vec<VertexSet>,
}

fn is_discrete(action: &TorusAction, set: &VertexSet, offs: &[Vec<u32>]) -> bool {
    set.iter().all(|x| offs.iter().all(|v| !set.contains(action.shift(x, v))))
}

/// Split a set into R-discrete pieces, greedily in index order.
fn refine(action: &TorusAction, set: &VertexSet, offs: &[Vec<u32>]) -> Vec<VertexSet> {
    let mut parts: Vec<VertexSet> = Vec::new();
    for x in set.iter() {
        let clash = |p: &VertexSet| {
            offs.iter().any(|v| {
                let mut neg = v.clone();
                for c in neg.iter_mut() {
                    *c = (action.n() - *c) % action.n();
                }
                p.contains(action.shift(x, v)) || p.contains(action.shift(x, &neg))
            })
        };
        match parts.iter_mut().find(|p| !clash(p)) {
            Some(p) => {
                p.insert(x);
            }
            None => parts.push(VertexSet::from_indices(action.size(), [x])),
        }
    }
    parts
}

/// Axis-aligned pixel rectangles of the given side, split until each is R-discrete.
pub fn default_basis(action: &TorusAction, radius: u32, side: u32) -> Vec<VertexSet> {
    let side = side.max(1);
    let tiles = action.n().div_ceil(side);
    let k = action.k();
    let mut out = Vec::new();
    let offs = action.half_offsets(radius);
    for t in 0..(tiles as usize).pow(k as u32) {
        let mut tc = Vec::with_capacity(k);
        let mut r = t;
        for _ in 0..k {
            tc.push((r % tiles as usize) as u32);
            r /= tiles as usize;
        }
        let rect = VertexSet::from_fn(action.size(), |x| {
            action.coords(x).iter().zip(&tc).all(|(&c, &ti)| c / side == ti)
        });
        if rect.is_empty() {
            continue;
        }
        if is_discrete(action, &rect, &offs) {
            out.push(rect);
        } else {
            out.extend(refine(action, &rect, &offs));
        }
    }
    out
}

/// Proper coloring of G^{≤R}: basis sets in order, each point gets the least color unused nearby.
pub fn greedy_power_coloring(action: &TorusAction, radius: u32, basis: &[VertexSet]) -> Result<Coloring> {
    let n = action.size();
    let mut cover = VertexSet::empty(n);
    for b in basis {
        cover.union_with(b);
    }
    if let Some(x) = cover.complement().first() {
        return Err(Error::Precondition(format!("basis does not cover point {x}")));
    }
    let offs = action.half_offsets(radius);
    let mut full_offs = offs.clone();
    for v in &offs {
        full_offs.push(v.iter().map(|&c| (action.n() - c) % action.n()).collect());
    }
    let mut refined = Vec::new();
    for b in basis {
        if is_discrete(action, b, &offs) {
            refined.push(b.clone());
        } else {
            refined.extend(refine(action, b, &offs));
        }
    }
    let mut colors = vec![u32::MAX; n];
    let mut depth = vec![0u32; n];
    let mut num_colors = 0;
    for b in &refined {
        for x in b.iter() {
            if colors[x] != u32::MAX {
                continue;
            }
            let mut used = Vec::new();
            let mut dmax = 0;
            for v in &full_offs {
                let y = action.shift(x, v);
                if colors[y] != u32::MAX {
                    used.push(colors[y]);
                    dmax = dmax.max(depth[y]);
                }
            }
            let c = (0..).find(|c| !used.contains(c)).unwrap();
            colors[x] = c;
            depth[x] = dmax + 1;
            num_colors = num_colors.max(c + 1);
        }
    }
    let chain_depth = depth.iter().copied().max().unwrap_or(0);
    Ok(Coloring { radius, colors, num_colors, chain_depth, basis: refined })
}

impl Coloring {
    pub fn class(&self, c: u32) -> VertexSet {
        VertexSet::from_fn(self.colors.len(), |x| self.colors[x] == c)
    }

    /// Registers the basis sets and a windowed procedure for every color class.
    pub fn register(&self, reg: &mut Registry, prefix: &str) -> Vec<LocalityCertificate> {
        let names: Vec<String> = (0..self.basis.len()).map(|j| format!("{prefix}basis_{j}")).collect();
        for (name, b) in names.iter().zip(&self.basis) {
            reg.register_set(name, b.clone());
        }
        (0..self.num_colors)
            .map(|c| {
                let id = format!("{prefix}greedy_color_{c}");
                reg.register_procedure(&id, Arc::new(GreedyColor { color: c, radius: self.radius, bases: names.clone() }));
                LocalityCertificate { radius: self.radius * self.chain_depth, bases: names.clone(), procedure: id }
            })
            .collect()
    }
}

struct GreedyColor {
    color: u32,
    radius: u32,
    bases: Vec<String>,
}

impl GreedyColor {
    fn basis_index(&self, w: &Window<'_>, y: usize) -> Result<usize> {
        for (j, b) in self.bases.iter().enumerate() {
            if w.member(b, y)? {
                return Ok(j);
            }
        }
        Err(Error::Precondition(format!("point {y} is in no basis set")))
    }

    fn color_of(&self, w: &Window<'_>, y: usize, memo: &mut HashMap<usize, u32>) -> Result<u32> {
        if let Some(&c) = memo.get(&y) {
            return Ok(c);
        }
        let j = self.basis_index(w, y)?;
        let mut used = Vec::new();
        for (z, dz) in w.action.ball_of(y, self.radius) {
            if dz == 0 {
                continue;
            }
            if self.basis_index(w, z)? < j {
                used.push(self.color_of(w, z, memo)?);
            }
        }
        let c = (0..).find(|c| !used.contains(c)).unwrap();
        memo.insert(y, c);
        Ok(c)
    }
}

impl WindowProcedure for GreedyColor {
    fn decide(&self, w: &Window<'_>) -> Result<bool> {
        Ok(self.color_of(w, w.center, &mut HashMap::new())? == self.color)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RainbowToast {
    /// layers[n-1][i] = U_n^i.
    pub layers: Vec<Vec<VertexSet>>,
    pub diameter_bounds: Vec<u32>,
    /// Deepest layer that is not the trivial cover (U^0 = X).
    pub nontrivial_depth: u32,
    pub periods: u32,
}

impl RainbowToast {
    pub fn n_max(&self) -> u32 {
        self.layers.len() as u32
    }

    pub fn layer(&self, n: u32) -> &[VertexSet] {
        &self.layers[n as usize - 1]
    }

    pub fn witness(&self, n: u32) -> AsdimWitness {
        AsdimWitness { scale: n, colors: self.layer(n).to_vec(), diameter_bound: self.diameter_bounds[n as usize - 1] }
    }
}

/// Per-color bad sets of one chart axis for layers 1..=depth, or None if colors collide.
fn nested_walls(ord: u32, colors: usize, depth: u32, periods: u32) -> Option<Vec<Vec<Vec<bool>>>> {
    let o = ord as i64;
    let wrap = |x: i64| x.rem_euclid(o) as usize;
    // bad[n-1][i][coordinate]
    let mut bad = vec![vec![vec![false; ord as usize]; colors]; depth as usize];
    for i in 0..colors {
        let mut walls: Vec<i64> = Vec::new();
        for n in (1..=depth).rev() {
            let b = &mut bad[n as usize - 1][i];
            if n == depth {
                let h = depth.div_ceil(2) as i64;
                for t in 0..periods as i64 {
                    let c = (t * colors as i64 + i as i64) * o / (periods as i64 * colors as i64);
                    for x in c - h..=c + h {
                        b[wrap(x)] = true;
                    }
                }
            } else {
                for &w in &walls {
                    for x in w - (n as i64 - 1)..=w + (n as i64 - 1) {
                        b[wrap(x)] = true;
                    }
                }
            }
            widen(b, n + 1);
            if b.iter().all(|&v| v) {
                return None;
            }
            for x in 0..o {
                if b[x as usize] && (!b[wrap(x - 1)] || !b[wrap(x + 1)]) {
                    walls.push(x);
                }
            }
            walls.sort_unstable();
            walls.dedup();
        }
    }
    for layer in &bad {
        for x in 0..ord as usize {
            if layer.iter().filter(|c| c[x]).count() > 1 {
                return None;
            }
        }
    }
    Some(bad)
}

/// Grow every maximal run of `true` symmetrically until it has at least `width` members.
fn widen(b: &mut [bool], width: u32) {
    let o = b.len() as i64;
    loop {
        let mut changed = false;
        let Some(start) = (0..o).find(|&x| !b[x as usize]) else { return };
        let mut x = start;
        let end = start + o;
        while x < end {
            if b[x.rem_euclid(o) as usize] {
                let s = x;
                while x < end && b[x.rem_euclid(o) as usize] {
                    x += 1;
                }
                let len = x - s;
                if len < width as i64 {
                    let need = width as i64 - len;
                    let left = need / 2;
                    for y in s - left..x + (need - left) {
                        b[y.rem_euclid(o) as usize] = true;
                    }
                    x += need - left;
                    changed = true;
                }
            } else {
                x += 1;
            }
        }
        if !changed {
            return;
        }
    }
}

fn rainbow_from_layout(action: &TorusAction, n_max: u32, depth: u32, periods: u32) -> Option<RainbowToast> {
    let chart = action.chart()?;
    let colors = action.d() + 1;
    let per_axis: Vec<Vec<Vec<Vec<bool>>>> = if depth == 0 {
        Vec::new()
    } else {
        chart.orders.iter().map(|&o| nested_walls(o, colors, depth, periods)).collect::<Option<_>>()?
    };
    let size = action.size();
    let mut layers = Vec::new();
    let mut bounds = Vec::new();
    for n in 1..=n_max {
        if n <= depth {
            let layer: Vec<VertexSet> = (0..colors)
                .map(|i| {
                    VertexSet::from_fn(size, |x| {
                        chart.coord(x).iter().enumerate().all(|(a, &c)| !per_axis[a][n as usize - 1][i][c as usize])
                    })
                })
                .collect();
            let bound = layer
                .iter()
                .map(|u| action.power_components(u, n).iter().map(|p| p.diameter).max().unwrap_or(0))
                .max()
                .unwrap_or(0);
            layers.push(layer);
            bounds.push(bound);
        } else {
            let mut layer = vec![VertexSet::empty(size); colors];
            layer[0] = VertexSet::full(size);
            layers.push(layer);
            bounds.push(action.orbit_diameter());
        }
    }
    Some(RainbowToast { layers, diameter_bounds: bounds, nontrivial_depth: depth, periods })
}

/// Rainbow toast with layers 1..=n_max; layers past the reachable depth are the trivial cover.
pub fn build_rainbow_toast(action: &TorusAction, n_max: u32) -> Result<RainbowToast> {
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be at least 1".into()));
    }
    let chart = action.require_chart()?;
    let colors = action.d() + 1;
    let mut best: Option<(u32, u32)> = None;
    for periods in 1..=8u32 {
        let mut depth = 0;
        for m in 1..=n_max {
            if chart.orders.iter().all(|&o| nested_walls(o, colors, m, periods).is_some()) {
                depth = m;
            } else {
                break;
            }
        }
        // one period leaves pieces as wide as the orbit, so it is only a fallback
        let key = |(d, p): (u32, u32)| (p > 1, d, p);
        if depth > 0 && best.is_none_or(|b| key((depth, periods)) > key(b)) {
            best = Some((depth, periods));
        }
    }
    let (depth, periods) = best.ok_or_else(|| {
        Error::ScaleTooLarge(format!("no rainbow layer fits orbit axes {:?} (achieved depth 0)", chart.orders))
    })?;
    let rt = rainbow_from_layout(action, n_max, depth, periods)
        .ok_or_else(|| Error::Internal("layout vanished between search and build".into()))?;
    let rep = verify_rainbow_toast(action, &rt);
    if !rep.pass {
        return Err(Error::Internal(format!("rainbow toast failed verification: {:?}", rep.failure)));
    }
    Ok(rt)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RainbowReport {
    pub pass: bool,
    pub layers: Vec<WitnessReport>,
    pub nontrivial_depth: u32,
    pub failure: Option<String>,
}

pub fn verify_rainbow_toast(action: &TorusAction, rt: &RainbowToast) -> RainbowReport {
    let n_max = rt.n_max();
    let mut failure = None;
    let mut layers = Vec::new();
    for n in 1..=n_max {
        let rep = verify_witness(action, &rt.witness(n));
        if !rep.pass && failure.is_none() {
            failure = Some(format!("clause (1) at layer {n}: {}", rep.failure.clone().unwrap_or_default()));
        }
        layers.push(rep);
    }
    let colors = rt.layers.first().map_or(0, |l| l.len());
    'outer: for i in 0..colors {
        for m in 2..=n_max {
            let boundary = action.outer_boundary(&rt.layer(m)[i]);
            if boundary.is_empty() {
                continue;
            }
            let field = action.distance_field(&boundary, m - 1);
            for n in 1..m {
                if let Some(x) = rt.layer(n)[i].iter().find(|&x| field[x] != FAR && field[x] < n) {
                    if failure.is_none() {
                        failure = Some(format!(
                            "clause (2): color {i}, point {x} of U_{n} is at distance {} < {n} from the outer boundary of U_{m}",
                            field[x]
                        ));
                    }
                    break 'outer;
                }
            }
        }
    }
    RainbowReport { pass: failure.is_none(), layers, nontrivial_depth: rt.nontrivial_depth, failure }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_cube_examples() {
        let a = TorusAction::standard(2, 32).unwrap();
        for r in 1..=3 {
            let w = shifted_cube_witness(&a, r).unwrap();
            let rep = verify_witness(&a, &w);
            assert!(rep.pass, "{rep:?}");
            assert!(w.diameter_bound <= 3 * (r + 1));
        }
        let w = shifted_cube_witness(&a, 2).unwrap();
        assert!(verify_witness(&a, &w).max_diameter.iter().all(|&d| d <= 9));
    }

    #[test]
    fn one_dimensional_intervals() {
        let a = TorusAction::standard(1, 64).unwrap();
        let w = shifted_cube_witness(&a, 1).unwrap();
        assert_eq!(w.colors.len(), 2);
        for c in &w.colors {
            // brute force: maximal runs on the cycle
            let comps = a.power_components(c, 1);
            for p in &comps {
                assert!(p.points.len() <= 4);
            }
            for (i, p) in comps.iter().enumerate() {
                for q in &comps[i + 1..] {
                    let gap = p.points.iter().flat_map(|&x| q.points.iter().map(move |&y| (x, y)))
                        .map(|(x, y)| a.dist(x, y, 64).unwrap()).min().unwrap();
                    assert!(gap >= 2);
                }
            }
        }
    }

    #[test]
    fn same_color_components_are_separated() {
        let a = TorusAction::standard(2, 24).unwrap();
        for r in 1..=2 {
            let w = shifted_cube_witness(&a, r).unwrap();
            for c in &w.colors {
                let comps = a.power_components(c, r);
                for (i, p) in comps.iter().enumerate() {
                    for q in &comps[i + 1..] {
                        let ch = a.chart().unwrap();
                        let gap = p.points.iter().flat_map(|&x| q.points.iter().map(move |&y| ch.dist(x, y))).min().unwrap();
                        assert!(gap > r);
                    }
                }
            }
        }
    }

    #[test]
    fn scale_too_large() {
        let a = TorusAction::standard(2, 8).unwrap();
        assert!(matches!(shifted_cube_witness(&a, 5), Err(Error::ScaleTooLarge(_))));
    }

    #[test]
    fn bad_witnesses_fail() {
        let a = TorusAction::standard(2, 16).unwrap();
        let mut colors = vec![VertexSet::empty(a.size()); 3];
        colors[0] = VertexSet::full(a.size());
        let w = AsdimWitness { scale: 1, colors, diameter_bound: 3 };
        assert!(!verify_witness(&a, &w).pass);
        let mut w = shifted_cube_witness(&a, 1).unwrap();
        for c in w.colors.iter_mut() {
            c.remove(37);
        }
        let rep = verify_witness(&a, &w);
        assert_eq!(rep.uncovered, Some(37));
    }

    #[test]
    fn greedy_coloring_is_proper() {
        let a = TorusAction::standard(2, 32).unwrap();
        let basis = default_basis(&a, 2, 4);
        let c = greedy_power_coloring(&a, 2, &basis).unwrap();
        assert!(c.num_colors <= 25);
        for x in 0..a.size() {
            for (y, _) in a.ball_of(x, 2).into_iter().skip(1) {
                assert_ne!(c.colors[x], c.colors[y]);
            }
        }
        let path = TorusAction::standard(1, 30).unwrap();
        let singletons: Vec<VertexSet> = (0..30).map(|x| VertexSet::from_indices(30, [x])).collect();
        assert!(greedy_power_coloring(&path, 1, &singletons).unwrap().num_colors <= 3);
    }

    #[test]
    fn greedy_color_classes_are_local() {
        let a = TorusAction::new(2, 16, vec![vec![3, 1], vec![1, 4]], 2).unwrap();
        let basis = default_basis(&a, 1, 2);
        let c = greedy_power_coloring(&a, 1, &basis).unwrap();
        let mut reg = Registry::new();
        let certs = c.register(&mut reg, "");
        for (col, cert) in certs.iter().enumerate() {
            let rep = reg.check_local(&a, &c.class(col as u32), cert, 40, col as u64).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn rainbow_small() {
        let a = TorusAction::standard(2, 64).unwrap();
        let rt = build_rainbow_toast(&a, 4).unwrap();
        assert!(rt.nontrivial_depth >= 3);
        let rep = verify_rainbow_toast(&a, &rt);
        assert!(rep.pass, "{:?}", rep.failure);
        let one = build_rainbow_toast(&a, 1).unwrap();
        assert_eq!(one.n_max(), 1);
        assert!(verify_witness(&a, &one.witness(1)).pass);
    }

    #[test]
    fn rainbow_clause_two_detects_shrinking() {
        let a = TorusAction::standard(2, 64).unwrap();
        let mut rt = build_rainbow_toast(&a, 3).unwrap();
        // pull a non-isolated point of U_1^i ∩ U_2^i out of U_2^i: it becomes outer boundary inside U_1^i
        let i = 0;
        let u1 = rt.layer(1)[i].clone();
        let u2 = rt.layer(2)[i].clone();
        let target = u2
            .iter()
            .find(|&x| u1.contains(x) && a.neighbors(x).iter().any(|&y| u2.contains(y)))
            .unwrap();
        rt.layers[1][i].remove(target);
        let rep = verify_rainbow_toast(&a, &rt);
        assert!(!rep.pass);
        assert!(rep.failure.unwrap().contains("clause (2)"));
    }

    #[test]
    fn widen_merges_runs() {
        let mut b = vec![false; 12];
        b[0] = true;
        b[5] = true;
        widen(&mut b, 3);
        assert_eq!(b.iter().filter(|&&v| v).count(), 6);
    }
}
