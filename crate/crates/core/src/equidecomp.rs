//! Pixel shapes, box counting, and translation equidecompositions read off integral flows.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{Divergence, DyadicFlow};
use crate::grid_graph::{Edge, TorusAction};
use crate::render::{self, Rgb};
use crate::vertex_set::VertexSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    A,
    B,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Disk,
    Square,
    Mask(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub pixels: VertexSet,
    /// Pixels with an axis neighbour outside the shape.
    pub boundary: VertexSet,
    pub label: Label,
}

/// Plain integer grid (Z_N)^k with the same indexing as `TorusAction`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub k: usize,
    pub n: u32,
}

impl Grid {
    pub fn new(k: usize, n: u32) -> Result<Self> {
        let ok = k >= 1 && n >= 2 && (n as usize).checked_pow(k as u32).is_some_and(|s| s <= u32::MAX as usize);
        if !ok {
            return Err(Error::Precondition(format!("unsupported grid k={k}, N={n}")));
        }
        Ok(Grid { k, n })
    }

    pub fn of(action: &TorusAction) -> Self {
        Grid { k: action.k(), n: action.n() }
    }

    pub fn size(&self) -> usize {
        (self.n as usize).pow(self.k as u32)
    }

    pub fn coords(&self, x: usize) -> Vec<u32> {
        let n = self.n as usize;
        let mut x = x;
        (0..self.k)
            .map(|_| {
                let c = (x % n) as u32;
                x /= n;
                c
            })
            .collect()
    }

    pub fn point(&self, c: &[u32]) -> usize {
        c.iter().rev().fold(0usize, |acc, &v| acc * self.n as usize + (v % self.n) as usize)
    }

    pub fn shift(&self, x: usize, v: &[u32]) -> usize {
        let c: Vec<u32> = self.coords(x).iter().zip(v).map(|(&a, &b)| ((a as u64 + b as u64) % self.n as u64) as u32).collect();
        self.point(&c)
    }

    /// y − x coordinatewise mod N.
    pub fn difference(&self, x: usize, y: usize) -> Vec<u32> {
        self.coords(x).iter().zip(self.coords(y)).map(|(&a, b)| (b + self.n - a) % self.n).collect()
    }

    /// ℓ∞ norm of a vector of (Z_N)^k, each coordinate read in (−N/2, N/2].
    pub fn norm(&self, v: &[u32]) -> u32 {
        v.iter().map(|&c| c.min(self.n - c)).max().unwrap_or(0)
    }

    fn axis_neighbours(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.coords(x);
        (0..self.k).flat_map(move |j| {
            [1, self.n - 1].into_iter().map({
                let c = c.clone();
                move |s| {
                    let mut c = c.clone();
                    c[j] = (c[j] + s) % self.n;
                    self.point(&c)
                }
            })
        })
    }
}

impl Shape {
    pub fn new(grid: Grid, pixels: VertexSet, label: Label) -> Self {
        let boundary = VertexSet::from_indices(
            pixels.universe(),
            pixels.iter().filter(|&x| grid.axis_neighbours(x).any(|y| !pixels.contains(y))).collect::<Vec<_>>(),
        );
        Shape { pixels, boundary, label }
    }

    pub fn count(&self) -> usize {
        self.pixels.count()
    }
}

/// Side s of a square (cube) with s^k = target.
fn cube_side(k: usize, target: usize) -> Option<u32> {
    let guess = (target as f64).powf(1.0 / k as f64).round() as u64;
    (guess.saturating_sub(1)..=guess + 1).find(|&s| s.checked_pow(k as u32) == Some(target as u64)).map(|s| s as u32)
}

fn square(grid: Grid, side: u32) -> Result<VertexSet> {
    if side == 0 || side > grid.n {
        return Err(Error::Precondition(format!("square side {side} does not fit in N={}", grid.n)));
    }
    let lo = (grid.n - side) / 2;
    Ok(VertexSet::from_fn(grid.size(), |x| grid.coords(x).iter().all(|&c| c >= lo && c < lo + side)))
}

// squared distance of pixel centres from the grid centre, in units of 1/4
fn centre_dist2(grid: Grid, x: usize) -> u64 {
    grid.coords(x).iter().map(|&c| (2 * c as i64 + 1 - grid.n as i64).pow(2) as u64).sum()
}

fn disk(grid: Grid, target: usize) -> Result<VertexSet> {
    let mut by_dist: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for x in 0..grid.size() {
        by_dist.entry(centre_dist2(grid, x)).or_default().push(x);
    }
    // the disk may not cross the edge of the fundamental domain
    let limit = (grid.n as u64).pow(2);
    let mut set = VertexSet::empty(grid.size());
    let mut have = 0usize;
    for (&r2, ring) in &by_dist {
        if have == target {
            break;
        }
        if r2 > limit {
            return Err(Error::Precondition(format!(
                "a disk of {target} pixels does not fit in N={} (reached {have})",
                grid.n
            )));
        }
        let need = target - have;
        if ring.len() <= need {
            for &x in ring {
                set.insert(x);
            }
            have += ring.len();
        } else {
            // trim the last ring: evenly spaced in index order
            for i in 0..need {
                set.insert(ring[i * ring.len() / need]);
            }
            have = target;
        }
    }
    if have != target {
        return Err(Error::Precondition(format!("target {target} exceeds the grid")));
    }
    Ok(set)
}

/// Plain (P1) or raw (P4) PBM; black pixels are members. Row r is coordinate 1, column c coordinate 0.
pub fn read_pbm(bytes: &[u8], grid: Grid) -> Result<VertexSet> {
    if grid.k != 2 {
        return Err(Error::Precondition("masks need k = 2".into()));
    }
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Precondition("truncated PBM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(bytes)?;
    let parse = |s: String| s.parse::<usize>().map_err(|_| Error::Precondition(format!("bad PBM size `{s}`")));
    let w = parse(token(bytes)?)?;
    let h = parse(token(bytes)?)?;
    let n = grid.n as usize;
    if w != n || h != n {
        return Err(Error::Precondition(format!("mask is {w}x{h}, grid is {n}x{n}")));
    }
    let mut set = VertexSet::empty(grid.size());
    match magic.as_str() {
        "P1" => {
            let mut i = 0;
            while i < w * h {
                while pos < bytes.len() && !matches!(bytes[pos], b'0' | b'1') {
                    pos += 1;
                }
                if pos == bytes.len() {
                    return Err(Error::Precondition("truncated PBM data".into()));
                }
                if bytes[pos] == b'1' {
                    set.insert(grid.point(&[(i % w) as u32, (i / w) as u32]));
                }
                pos += 1;
                i += 1;
            }
        }
        "P4" => {
            let data = &bytes[pos + 1..];
            let row = w.div_ceil(8);
            if data.len() < row * h {
                return Err(Error::Precondition("truncated PBM data".into()));
            }
            for r in 0..h {
                for c in 0..w {
                    if data[r * row + c / 8] >> (7 - c % 8) & 1 == 1 {
                        set.insert(grid.point(&[c as u32, r as u32]));
                    }
                }
            }
        }
        m => return Err(Error::Precondition(format!("unsupported mask format `{m}`"))),
    }
    Ok(set)
}

/// Shape with exactly `target` pixels (masks: `target` is checked when given).
pub fn rasterize(kind: &ShapeKind, grid: Grid, target: Option<usize>, label: Label) -> Result<Shape> {
    if grid.n < 8 {
        return Err(Error::Precondition(format!("rasterizing needs N ≥ 8, got {}", grid.n)));
    }
    let pixels = match kind {
        ShapeKind::Square | ShapeKind::Disk => {
            let t = target.ok_or_else(|| Error::Precondition("disk and square need a pixel target".into()))?;
            if t == 0 {
                return Err(Error::Precondition("empty target".into()));
            }
            if *kind == ShapeKind::Square {
                let s = cube_side(grid.k, t)
                    .ok_or_else(|| Error::Precondition(format!("{t} is not a perfect {}-th power", grid.k)))?;
                square(grid, s)?
            } else {
                disk(grid, t)?
            }
        }
        ShapeKind::Mask(path) => {
            let set = read_pbm(&std::fs::read(path)?, grid)?;
            if let Some(t) = target {
                if set.count() != t {
                    return Err(Error::Precondition(format!("mask has {} pixels, target {t}", set.count())));
                }
            }
            set
        }
    };
    Ok(Shape::new(grid, pixels, label))
}

/// Disk (A) and square (B) of side `side`, with equal pixel counts.
pub fn disk_and_square(grid: Grid, side: u32) -> Result<(Shape, Shape)> {
    let t = (side as usize).pow(grid.k as u32);
    let b = rasterize(&ShapeKind::Square, grid, Some(t), Label::B)?;
    let a = rasterize(&ShapeKind::Disk, grid, Some(t), Label::A)?;
    Ok((a, b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiEstimate {
    pub dimension: f64,
    /// (box side in pixels, boxes meeting the set).
    pub counts: Vec<(u32, usize)>,
}

/// Dyadic box sides N/16, …, 2, 1 (at least two scales).
pub fn default_scales(n: u32) -> Vec<u32> {
    let top = (n / 16).max(2);
    let mut out = Vec::new();
    let mut s = 1u32;
    while s <= top {
        out.push(s);
        s *= 2;
    }
    out.reverse();
    out
}

/// Least-squares slope of log N(ε) against log(1/ε), counting aligned boxes exactly.
pub fn minkowski_estimate(set: &VertexSet, grid: Grid, scales: &[u32]) -> Result<MinkowskiEstimate> {
    if scales.len() < 2 {
        return Err(Error::Precondition("box counting needs at least two scales".into()));
    }
    if scales.iter().any(|&s| s == 0 || !s.is_power_of_two() || s > grid.n) || scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("scales must be a strictly descending dyadic list within the grid".into()));
    }
    if set.is_empty() {
        return Err(Error::Precondition("box counting on the empty set".into()));
    }
    let mut counts = Vec::new();
    for &s in scales {
        let boxes: HashSet<Vec<u32>> = set.iter().map(|x| grid.coords(x).iter().map(|c| c / s).collect()).collect();
        counts.push((s, boxes.len()));
    }
    let pts: Vec<(f64, f64)> =
        counts.iter().map(|&(s, c)| ((grid.n as f64 / s as f64).ln(), (c as f64).ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let mut dimension = sxy / sxx;
    if counts.iter().all(|c| c.1 == counts[0].1) {
        dimension = 0.0;
    }
    Ok(MinkowskiEstimate { dimension, counts })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub displacement: Vec<u32>,
    pub pixels: VertexSet,
}

/// Pieces of A, each moved by its displacement; sorted by displacement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equidecomposition {
    pub grid: Grid,
    pub pieces: Vec<Piece>,
}

impl Equidecomposition {
    /// Pieces are the fibres of a ↦ f(a) − a.
    pub fn from_matching(grid: Grid, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut by: BTreeMap<Vec<u32>, VertexSet> = BTreeMap::new();
        for (a, b) in pairs {
            by.entry(grid.difference(a, b)).or_insert_with(|| VertexSet::empty(grid.size())).insert(a);
        }
        Equidecomposition {
            grid,
            pieces: by.into_iter().map(|(displacement, pixels)| Piece { displacement, pixels }).collect(),
        }
    }

    pub fn max_displacement(&self) -> u32 {
        self.pieces.iter().map(|p| self.grid.norm(&p.displacement)).max().unwrap_or(0)
    }

    /// Colour per pixel: A-side by piece, or B-side by the piece that lands there.
    pub fn colours(&self, target_side: bool) -> Vec<Rgb> {
        let mut img = vec![render::WHITE; self.grid.size()];
        // the other shape, faintly
        for p in &self.pieces {
            for x in p.pixels.iter() {
                let y = if target_side { x } else { self.grid.shift(x, &p.displacement) };
                img[y] = render::LIGHT;
            }
        }
        for p in &self.pieces {
            let c = render::palette(render::fnv1a(p.displacement.iter().map(|&v| v as u64)));
            for x in p.pixels.iter() {
                let y = if target_side { self.grid.shift(x, &p.displacement) } else { x };
                img[y] = c;
            }
        }
        img
    }

    /// Two-dimensional grids only.
    pub fn to_ppm(&self, target_side: bool) -> Result<Vec<u8>> {
        if self.grid.k != 2 {
            return Err(Error::Precondition("piece maps render for k = 2 only".into()));
        }
        let n = self.grid.n as usize;
        render::ppm(n, n, &self.colours(target_side))
    }
}

/// Unit paths from sources to sinks and the leftover cycles of an integral flow.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathDecomposition {
    pub paths: Vec<Vec<usize>>,
    pub cycles: Vec<Vec<usize>>,
}

impl PathDecomposition {
    /// Re-sum every walk as a unit flow.
    pub fn resum(&self, action: &TorusAction) -> Result<DyadicFlow> {
        let mut f = DyadicFlow::zero(action, 0);
        for w in self.paths.iter().chain(&self.cycles) {
            for p in w.windows(2) {
                let g = action
                    .edge_gen(p[0], p[1])
                    .ok_or_else(|| Error::Internal(format!("walk step {} → {} is not an edge", p[0], p[1])))?;
                f.add(action, Edge { from: p[0], gen: g }, 1)?;
            }
        }
        Ok(f)
    }
}

struct Residual<'a> {
    action: &'a TorusAction,
    ng: usize,
    w: Vec<i64>,
    ptr: Vec<usize>,
}

impl<'a> Residual<'a> {
    fn new(action: &'a TorusAction, psi: &DyadicFlow) -> Self {
        let ng = action.num_gens();
        let mut w = vec![0i64; action.size() * ng];
        for x in 0..action.size() {
            for g in 0..ng {
                w[x * ng + g] = psi.get(action, Edge { from: x, gen: g });
            }
        }
        Residual { action, ng, w, ptr: vec![0; action.size()] }
    }

    /// Lexicographically least neighbour receiving positive flow from x.
    fn next(&self, x: usize) -> Option<(usize, usize)> {
        (0..self.ng)
            .filter(|&g| self.w[x * self.ng + g] > 0)
            .map(|g| (self.action.step(x, g), g))
            .min()
    }

    fn take(&mut self, x: usize, g: usize) {
        let y = self.action.step(x, g);
        self.w[x * self.ng + g] -= 1;
        self.w[y * self.ng + self.action.reverse_gen(g)] += 1;
    }

    fn any_positive(&mut self, x: usize) -> bool {
        while self.ptr[x] < self.ng && self.w[x * self.ng + self.ptr[x]] <= 0 {
            self.ptr[x] += 1;
        }
        self.ptr[x] < self.ng
    }
}

fn check_flow(action: &TorusAction, psi: &DyadicFlow, a: &VertexSet, b: &VertexSet) -> Result<DyadicFlow> {
    if a.universe() != action.size() || b.universe() != action.size() {
        return Err(Error::Precondition("shapes live on a different grid".into()));
    }
    let c = Divergence::from_sets(a, b);
    c.check_feasible(action)?;
    if !psi.is_integral() {
        return Err(Error::Precondition("flow is not integral".into()));
    }
    let mut psi = psi.clone();
    psi.normalize();
    let out = psi.out_nums(action)?;
    if let Some(x) = (0..action.size()).find(|&x| out[x] != c.c[x]) {
        return Err(Error::NotAFlow(format!("out-flow {} at vertex {x}, expected {}", out[x], c.c[x])));
    }
    Ok(psi)
}

/// Split ψ into unit paths from A∖B to B∖A (least source first, least edge each step) and cycles.
pub fn decompose_paths(action: &TorusAction, psi: &DyadicFlow, a: &VertexSet, b: &VertexSet) -> Result<PathDecomposition> {
    let psi = check_flow(action, psi, a, b)?;
    let mut res = Residual::new(action, &psi);
    let mut demand: Vec<bool> = (0..action.size()).map(|x| b.contains(x) && !a.contains(x)).collect();
    let mut dec = PathDecomposition::default();
    let mut pos = vec![usize::MAX; action.size()];
    for s in a.difference(b).iter() {
        let mut path = vec![s];
        pos[s] = 0;
        let mut at = s;
        while !(demand[at] && at != s) {
            let (y, g) = res
                .next(at)
                .ok_or_else(|| Error::Internal(format!("path from {s} stalls at {at}")))?;
            res.take(at, g);
            if pos[y] != usize::MAX {
                // closed a loop: split it off as a cycle
                let cyc: Vec<usize> = path.drain(pos[y] + 1..).chain([y]).collect();
                for &v in &cyc[..cyc.len() - 1] {
                    if v != y {
                        pos[v] = usize::MAX;
                    }
                }
                dec.cycles.push([vec![y], cyc].concat());
                at = y;
                continue;
            }
            pos[y] = path.len();
            path.push(y);
            at = y;
        }
        demand[at] = false;
        for &v in &path {
            pos[v] = usize::MAX;
        }
        dec.paths.push(path);
    }
    if let Some(t) = demand.iter().position(|&d| d) {
        return Err(Error::Internal(format!("sink {t} left unmatched")));
    }
    // what remains is a circulation
    for s in 0..action.size() {
        while res.any_positive(s) {
            let mut walk = vec![s];
            pos[s] = 0;
            let mut at = s;
            loop {
                let (y, g) = res.next(at).ok_or_else(|| Error::Internal(format!("circulation stalls at {at}")))?;
                res.take(at, g);
                if pos[y] != usize::MAX {
                    let cyc: Vec<usize> = walk.drain(pos[y] + 1..).chain([y]).collect();
                    for &v in &cyc[..cyc.len() - 1] {
                        if v != y {
                            pos[v] = usize::MAX;
                        }
                    }
                    dec.cycles.push([vec![y], cyc].concat());
                    if y == s && walk.len() == 1 {
                        break;
                    }
                    at = y;
                    continue;
                }
                pos[y] = walk.len();
                walk.push(y);
                at = y;
            }
            pos[s] = usize::MAX;
        }
    }
    Ok(dec)
}

/// Equidecomposition from an integral (1_A − 1_B)-flow: sources follow their paths, A ∩ B stays put.
pub fn flow_to_pieces(action: &TorusAction, psi: &DyadicFlow, a: &Shape, b: &Shape) -> Result<Equidecomposition> {
    let dec = decompose_paths(action, psi, &a.pixels, &b.pixels)?;
    let grid = Grid::of(action);
    let moved = dec.paths.iter().map(|p| (p[0], *p.last().expect("paths are nonempty")));
    let fixed = a.pixels.intersection(&b.pixels).iter().map(|x| (x, x)).collect::<Vec<_>>();
    let e = Equidecomposition::from_matching(grid, moved.chain(fixed));
    let report = verify_equidecomposition(&e, &a.pixels, &b.pixels);
    if !report.pass {
        return Err(Error::Internal(format!("extracted pieces fail verification: {:?}", report.failures)));
    }
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquiReport {
    pub pass: bool,
    pub pieces: usize,
    pub empty_pieces: usize,
    pub max_displacement: u32,
    pub pieces_disjoint: bool,
    pub pieces_cover_a: bool,
    pub translates_disjoint: bool,
    pub translates_cover_b: bool,
    pub locality: String,
    pub failures: Vec<String>,
}

pub fn verify_equidecomposition(e: &Equidecomposition, a: &VertexSet, b: &VertexSet) -> EquiReport {
    let grid = e.grid;
    let mut failures = Vec::new();
    if a.universe() != grid.size() || b.universe() != grid.size() {
        failures.push("shapes live on a different grid".into());
    }
    let mut seen = VertexSet::empty(grid.size());
    let mut landed = VertexSet::empty(grid.size());
    let (mut disjoint, mut tdisjoint) = (true, true);
    let mut dup = std::collections::BTreeSet::new();
    for p in &e.pieces {
        if p.pixels.universe() != grid.size() || p.displacement.len() != grid.k {
            failures.push(format!("piece {:?} has the wrong shape", p.displacement));
            continue;
        }
        if !dup.insert(p.displacement.clone()) {
            failures.push(format!("displacement {:?} appears twice", p.displacement));
        }
        for x in p.pixels.iter() {
            if !seen.insert(x) && disjoint {
                disjoint = false;
                failures.push(format!("pixel {x} lies in two pieces"));
            }
            let y = grid.shift(x, &p.displacement);
            if !landed.insert(y) && tdisjoint {
                tdisjoint = false;
                failures.push(format!("translated pixel {y} is hit twice"));
            }
        }
    }
    let cover_a = a.universe() == seen.universe() && seen == *a;
    if !cover_a {
        failures.push("pieces do not union to A".into());
    }
    let cover_b = b.universe() == landed.universe() && landed == *b;
    if !cover_b {
        failures.push("translated pieces do not union to B".into());
    }
    EquiReport {
        pass: failures.is_empty(),
        pieces: e.pieces.len(),
        empty_pieces: e.pieces.iter().filter(|p| p.pixels.is_empty()).count(),
        max_displacement: e.max_displacement(),
        pieces_disjoint: disjoint,
        pieces_cover_a: cover_a,
        translates_disjoint: tdisjoint,
        translates_cover_b: cover_b,
        locality: "not certified".into(),
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: u32) -> Grid {
        Grid::new(2, n).unwrap()
    }

    #[test]
    fn square_count_and_boundary() {
        let s = rasterize(&ShapeKind::Square, g(16), Some(36), Label::B).unwrap();
        assert_eq!(s.count(), 36);
        assert_eq!(s.boundary.count(), 20);
        assert!(s.boundary.is_subset(&s.pixels));
        assert!(rasterize(&ShapeKind::Square, g(16), Some(35), Label::B).is_err());
    }

    #[test]
    fn disk_matches_square() {
        let (a, b) = disk_and_square(g(32), 12).unwrap();
        assert_eq!(a.count(), 144);
        assert_eq!(b.count(), 144);
        assert!(rasterize(&ShapeKind::Disk, g(8), Some(64), Label::A).is_err());
        assert!(rasterize(&ShapeKind::Disk, g(4), Some(4), Label::A).is_err());
    }

    #[test]
    fn pbm_plain_and_raw() {
        let gr = g(8);
        let mut p1 = String::from("P1\n# mask\n8 8\n");
        for r in 0..8 {
            for c in 0..8 {
                p1.push(if r == 2 && c < 3 { '1' } else { '0' });
                p1.push(' ');
            }
            p1.push('\n');
        }
        let a = read_pbm(p1.as_bytes(), gr).unwrap();
        let mut p4 = b"P4\n8 8\n".to_vec();
        p4.extend((0..8).map(|r| if r == 2 { 0b1110_0000u8 } else { 0 }));
        let b = read_pbm(&p4, gr).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![16, 17, 18]);
    }

    #[test]
    fn point_has_dimension_zero() {
        let gr = g(64);
        let s = VertexSet::from_indices(gr.size(), [gr.point(&[5, 7])]);
        let m = minkowski_estimate(&s, gr, &default_scales(64)).unwrap();
        assert_eq!(m.dimension, 0.0);
        assert!(minkowski_estimate(&s, gr, &[4]).is_err());
        assert!(minkowski_estimate(&s, gr, &[2, 4]).is_err());
    }

    #[test]
    fn identity_and_single_path() {
        let action = TorusAction::standard(2, 8).unwrap();
        let gr = Grid::of(&action);
        let a = Shape::new(gr, VertexSet::from_indices(64, [3, 9, 10]), Label::A);
        let e = flow_to_pieces(&action, &DyadicFlow::zero(&action, 0), &a, &Shape { label: Label::B, ..a.clone() })
            .unwrap();
        assert_eq!(e.pieces.len(), 1);
        assert_eq!(e.pieces[0].displacement, vec![0, 0]);

        // a = (1,1) → (2,1) → (3,2) = b
        let (x, y, z) = (gr.point(&[1, 1]), gr.point(&[2, 1]), gr.point(&[3, 2]));
        let mut psi = DyadicFlow::zero(&action, 0);
        for (u, v) in [(x, y), (y, z)] {
            psi.add(&action, Edge { from: u, gen: action.edge_gen(u, v).unwrap() }, 1).unwrap();
        }
        let a = Shape::new(gr, VertexSet::from_indices(64, [x]), Label::A);
        let b = Shape::new(gr, VertexSet::from_indices(64, [z]), Label::B);
        let e = flow_to_pieces(&action, &psi, &a, &b).unwrap();
        assert_eq!(e.pieces.len(), 1);
        assert_eq!(e.pieces[0].displacement, vec![2, 1]);
        let dec = decompose_paths(&action, &psi, &a.pixels, &b.pixels).unwrap();
        assert_eq!(dec.paths, vec![vec![x, y, z]]);
        assert_eq!(dec.resum(&action).unwrap(), psi);
    }

    #[test]
    fn path_through_cycle_resums() {
        let action = TorusAction::standard(2, 8).unwrap();
        let gr = Grid::of(&action);
        let p = |c: [u32; 2]| gr.point(&c);
        let walk = [p([0, 0]), p([1, 0]), p([2, 1]), p([1, 1]), p([1, 0]), p([2, 0]), p([3, 0])];
        let mut psi = DyadicFlow::zero(&action, 0);
        for w in walk.windows(2) {
            psi.add(&action, Edge { from: w[0], gen: action.edge_gen(w[0], w[1]).unwrap() }, 1).unwrap();
        }
        let a = VertexSet::from_indices(64, [walk[0]]);
        let b = VertexSet::from_indices(64, [walk[6]]);
        let dec = decompose_paths(&action, &psi, &a, &b).unwrap();
        let mut back = dec.resum(&action).unwrap();
        back.normalize();
        assert_eq!(back, psi);
        assert_eq!(dec.paths.len(), 1);
    }

    #[test]
    fn tampered_pieces_fail() {
        let gr = g(8);
        let a = VertexSet::from_indices(64, [1, 2]);
        let e = Equidecomposition::from_matching(gr, [(1, 1), (2, 2)]);
        assert!(verify_equidecomposition(&e, &a, &a).pass);
        let mut bad = e.clone();
        bad.pieces.push(Piece { displacement: vec![1, 0], pixels: VertexSet::from_indices(64, [1]) });
        let r = verify_equidecomposition(&bad, &a, &a);
        assert!(!r.pass && !r.pieces_disjoint);
    }

    #[test]
    fn unbalanced_shapes_are_rejected() {
        let action = TorusAction::standard(2, 8).unwrap();
        let a = VertexSet::from_indices(64, [1, 2]);
        let b = VertexSet::from_indices(64, [3]);
        let r = decompose_paths(&action, &DyadicFlow::zero(&action, 0), &a, &b);
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }
}
