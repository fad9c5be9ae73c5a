//! Bounded geometry decompositions and the toasts built from them.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asdim::RainbowToast;
use crate::error::{Error, Result};
use crate::grid_graph::{TorusAction, FAR};
use crate::locality::{BaseRef, Combination, LocalityCertificate, Registry, Window, WindowProcedure};
use crate::vertex_set::VertexSet;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bgd {
    /// X_0..X_{n_max}.
    pub layers: Vec<VertexSet>,
    /// Value of X_n for every n past the explicit layers; empty for a terminating sequence.
    pub stationary_tail: VertexSet,
    pub p: u32,
    pub q_big: u32,
    /// D_0..D_{n_max+1}: diameter bounds for components of G ↾ (X ∖ X_n^∞).
    pub diameter_bounds: Vec<u32>,
    /// Rainbow scales r_n the layers were read from (empty for hand-made decompositions).
    pub radii: Vec<u32>,
}

impl Bgd {
    pub fn n_max(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    /// Number of levels 0..=n_max+1 at which complement components are taken.
    pub fn levels(&self) -> usize {
        self.layers.len() + 1
    }

    /// X_n^∞ = ⋃_{k ≥ n} X_k.
    pub fn tail(&self, n: usize) -> VertexSet {
        let mut t = self.stationary_tail.clone();
        for l in self.layers.iter().skip(n) {
            t.union_with(l);
        }
        t
    }

    /// Bounds D_n from the realized component diameters of this layer sequence.
    pub fn realized_diameters(&self, action: &TorusAction) -> Vec<u32> {
        (0..self.levels())
            .map(|n| {
                let free = self.tail(n).complement();
                action.power_components(&free, 1).iter().map(|c| c.diameter).max().unwrap_or(0)
            })
            .collect()
    }

    /// Layers with realized bounds filled in.
    pub fn from_layers(action: &TorusAction, layers: Vec<VertexSet>, p: u32, q_big: u32) -> Self {
        let mut b = Bgd {
            stationary_tail: VertexSet::empty(action.size()),
            layers,
            p,
            q_big,
            diameter_bounds: Vec::new(),
            radii: Vec::new(),
        };
        b.diameter_bounds = b.realized_diameters(action);
        b
    }
}

/// Hand-made two-layer BGD of axis-parallel hyperplanes: pitch p at offset 0, then pitch 2p at offset p/2.
pub fn grid_line_bgd(action: &TorusAction, pitch: u32, q_big: u32) -> Result<Bgd> {
    let n = action.n();
    if pitch < 4 || !n.is_multiple_of(2 * pitch) {
        return Err(Error::Precondition(format!("grid lines need 4 ≤ pitch and 2·pitch | N (pitch {pitch}, N {n})")));
    }
    let lines = |p: u32, off: u32| VertexSet::from_fn(action.size(), |x| action.coords(x).iter().any(|&c| c % p == off));
    let b = Bgd::from_layers(action, vec![lines(pitch, 0), lines(2 * pitch, pitch / 2)], 2, q_big);
    let rep = verify_bgd(action, &b);
    if !rep.pass {
        return Err(Error::Internal(format!("grid-line BGD failed verification: {:?}", rep.failure)));
    }
    Ok(b)
}

/// BGD whose n-th layer is the union of outer boundaries of the rainbow layer r_n.
pub fn bgd_from_rainbow(action: &TorusAction, rt: &RainbowToast, q_big: u32) -> Result<Bgd> {
    if q_big == 0 {
        return Err(Error::Precondition("Q must be at least 1".into()));
    }
    let size = action.size();
    let mut layers = Vec::new();
    let mut radii = Vec::new();
    let mut r = 2u32;
    loop {
        // layers past the explicit ones are the trivial cover, whose boundaries are empty
        let mut y = VertexSet::empty(size);
        if r <= rt.n_max() {
            for u in rt.layer(r) {
                y.union_with(&action.outer_boundary(u));
            }
        }
        if y.is_empty() {
            break;
        }
        let dn = action.power_components(&y.complement(), 1).iter().map(|c| c.diameter).max().unwrap_or(0);
        layers.push(y);
        radii.push(r);
        r = (2 * q_big + dn).max(r) + 1;
    }
    let mut b = Bgd::from_layers(action, layers, action.d() as u32 + 2, q_big);
    b.radii = radii;
    Ok(b)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BgdReport {
    pub pass: bool,
    pub tails_vanish: bool,
    pub realized_diameters: Vec<u32>,
    pub max_multiplicity: u32,
    pub failure: Option<String>,
    /// A point of the offending component, when a clause fails.
    pub witness: Option<usize>,
}

pub fn verify_bgd(action: &TorusAction, b: &Bgd) -> BgdReport {
    let tails_vanish = b.stationary_tail.is_empty();
    let mut failure = (!tails_vanish).then(|| "clause (1): the tails never become empty".to_string());
    let mut witness = b.stationary_tail.first();
    let realized = b.realized_diameters(action);
    if failure.is_none() {
        if b.diameter_bounds.len() != realized.len() {
            failure = Some(format!("clause (2): expected {} diameter bounds", realized.len()));
        } else if let Some(n) = (0..realized.len()).find(|&n| realized[n] > b.diameter_bounds[n]) {
            failure = Some(format!("clause (2): level {n} has diameter {} > D_{n} = {}", realized[n], b.diameter_bounds[n]));
        }
    }
    let near: Vec<VertexSet> = b.layers.iter().map(|l| action.ball(l, b.q_big)).collect();
    let near_tail = action.ball(&b.stationary_tail, b.q_big);
    let mut max_mult = 0u32;
    for n in 0..b.levels() {
        let free = b.tail(n).complement();
        let (label, count) = action.component_labels(&free);
        let mut mult = vec![0u32; count];
        let mut first = vec![usize::MAX; count];
        for x in free.iter() {
            let c = label[x] as usize;
            if first[c] == usize::MAX {
                first[c] = x;
            }
        }
        for (k, nk) in near.iter().enumerate().skip(n) {
            let mut hit = vec![false; count];
            for x in nk.iter() {
                if label[x] != u32::MAX {
                    hit[label[x] as usize] = true;
                }
            }
            let _ = k;
            for c in 0..count {
                mult[c] += hit[c] as u32;
            }
        }
        if !b.stationary_tail.is_empty() {
            for x in near_tail.iter() {
                if label[x] != u32::MAX {
                    mult[label[x] as usize] = u32::MAX;
                }
            }
        }
        for c in 0..count {
            max_mult = max_mult.max(mult[c]);
            if mult[c] > b.p && failure.is_none() {
                failure = Some(format!(
                    "clause (3): a component at level {n} is Q-close to {} layers > P = {}",
                    mult[c], b.p
                ));
                witness = Some(first[c]);
            }
        }
    }
    BgdReport { pass: failure.is_none(), tails_vanish, realized_diameters: realized, max_multiplicity: max_mult, failure, witness }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub points: Vec<usize>,
    pub stage: u32,
    /// Last level at which the component is still a component.
    pub last_level: u32,
    pub amplitude: i64,
    pub terminal: bool,
    /// L(R) = {l ≥ s(R) : dist(R, X_l) ≤ Q}.
    pub near_layers: Vec<u32>,
    /// Index of Succ(R) in the hierarchy; None for terminal components.
    pub successor: Option<usize>,
}

impl Component {
    pub fn set(&self, universe: usize) -> VertexSet {
        VertexSet::from_indices(universe, self.points.iter().copied())
    }
}

/// All complement components of a BGD across levels, with stage, amplitude and successors.
pub struct Hierarchy {
    pub comps: Vec<Component>,
    /// level_labels[n][x] = index of the component of x at level n, or u32::MAX inside X_n^∞.
    pub level_labels: Vec<Vec<u32>>,
    /// Distance to X_l capped at Q.
    pub layer_fields: Vec<Vec<u32>>,
    pub p: u32,
    pub q_big: u32,
    size: usize,
}

impl Hierarchy {
    pub fn new(action: &TorusAction, b: &Bgd) -> Result<Self> {
        if !b.stationary_tail.is_empty() {
            return Err(Error::Precondition("BGD tails never vanish".into()));
        }
        let size = action.size();
        let layer_fields: Vec<Vec<u32>> = b.layers.iter().map(|l| action.distance_field(l, b.q_big)).collect();
        let orbit_sizes: Vec<usize> = action.orbits().iter().map(|o| o.count()).collect();
        let mut comps: Vec<Component> = Vec::new();
        let mut level_labels: Vec<Vec<u32>> = Vec::new();
        for n in 0..b.levels() {
            let tail = b.tail(n);
            let free = tail.complement();
            let (label, count) = action.component_labels(&free);
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); count];
            for x in free.iter() {
                groups[label[x] as usize].push(x);
            }
            let mut ids = vec![u32::MAX; size];
            for pts in groups {
                let prev = (n > 0).then(|| &b.layers[n - 1]);
                let fresh = prev.is_none_or(|xl| pts.iter().any(|&x| xl.contains(x)));
                let idx = if fresh {
                    let terminal = pts.len() == orbit_sizes[action.orbit_id(pts[0])];
                    comps.push(Component {
                        points: pts.clone(),
                        stage: n as u32,
                        last_level: n as u32,
                        amplitude: -1,
                        terminal,
                        near_layers: Vec::new(),
                        successor: None,
                    });
                    comps.len() - 1
                } else {
                    let idx = level_labels[n - 1][pts[0]] as usize;
                    comps[idx].last_level = n as u32;
                    idx
                };
                for &x in &pts {
                    ids[x] = idx as u32;
                }
            }
            level_labels.push(ids);
        }
        for c in comps.iter_mut() {
            let near: Vec<u32> = (0..b.layers.len())
                .filter(|&l| c.points.iter().any(|&x| layer_fields[l][x] != FAR))
                .map(|l| l as u32)
                .collect();
            c.amplitude = near.last().map_or(-1, |&l| l as i64);
            c.near_layers = near.into_iter().filter(|&l| l >= c.stage).collect();
        }
        for i in 0..comps.len() {
            if !comps[i].terminal {
                let next = comps[i].last_level as usize + 1;
                if next >= level_labels.len() {
                    return Err(Error::Internal("non-terminal component at the last level".into()));
                }
                comps[i].successor = Some(level_labels[next][comps[i].points[0]] as usize);
            }
        }
        Ok(Hierarchy { comps, level_labels, layer_fields, p: b.p, q_big: b.q_big, size })
    }

    /// Components of G ↾ (X ∖ X_n^∞), as indices into `comps`.
    pub fn components_at(&self, n: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = self.level_labels[n].iter().filter(|&&c| c != u32::MAX).map(|&c| c as usize).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn is_maximal(&self, i: usize) -> bool {
        let c = &self.comps[i];
        match c.successor {
            None => true,
            Some(s) => c.amplitude < self.comps[s].amplitude,
        }
    }

    fn check_q(&self, q: u32) -> Result<()> {
        if q == 0 || q * (self.p + 1) > self.q_big {
            return Err(Error::Precondition(format!(
                "q(P+1) ≤ Q fails: q={q}, P={}, Q={}",
                self.p, self.q_big
            )));
        }
        Ok(())
    }

    /// Int(R): points of R at distance ≥ q(P−p+i) from X_{l_i} for each l_i ∈ L(R).
    pub fn interior(&self, i: usize, q: u32) -> Result<VertexSet> {
        self.check_q(q)?;
        let c = &self.comps[i];
        if c.terminal {
            return Ok(c.set(self.size));
        }
        let p = c.near_layers.len() as u32;
        Ok(VertexSet::from_indices(
            self.size,
            c.points.iter().copied().filter(|&x| {
                c.near_layers.iter().enumerate().all(|(j, &l)| {
                    let need = q * (self.p - p + j as u32 + 1);
                    self.layer_fields[l as usize][x] >= need
                })
            }),
        ))
    }

    fn union_of(&self, pick: impl Fn(&Component) -> bool) -> VertexSet {
        let mut s = VertexSet::empty(self.size);
        for c in self.comps.iter().filter(|c| pick(c)) {
            for &x in &c.points {
                s.insert(x);
            }
        }
        s
    }

    /// S_n = ⋃{R : s(R) = n}.
    pub fn s_set(&self, n: u32) -> VertexSet {
        self.union_of(|c| c.stage == n)
    }

    /// A_n^k = ⋃{R : s(R) = n, a(R) = k}.
    pub fn a_set(&self, n: u32, k: i64) -> VertexSet {
        self.union_of(|c| c.stage == n && c.amplitude == k)
    }

    /// T_n^k = ⋃{Int(R) : R maximal, s(R) = n, a(R) = k}.
    pub fn t_set(&self, n: u32, k: i64, q: u32) -> Result<VertexSet> {
        let mut s = VertexSet::empty(self.size);
        for i in 0..self.comps.len() {
            let c = &self.comps[i];
            if c.stage == n && c.amplitude == k && self.is_maximal(i) {
                s.union_with(&self.interior(i, q)?);
            }
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toast {
    pub layers: Vec<VertexSet>,
    pub q: u32,
    pub piece_diameter_bounds: Vec<u32>,
}

impl Toast {
    /// Layers with realized G^{≤q} piece diameters as bounds.
    pub fn from_layers(action: &TorusAction, layers: Vec<VertexSet>, q: u32) -> Self {
        let piece_diameter_bounds = layers
            .iter()
            .map(|t| action.power_components(t, q).iter().map(|c| c.diameter).max().unwrap_or(0))
            .collect();
        Toast { layers, q, piece_diameter_bounds }
    }
}

pub fn toast_from_bgd(action: &TorusAction, b: &Bgd, q: u32) -> Result<Toast> {
    let h = Hierarchy::new(action, b)?;
    h.check_q(q)?;
    let mut layers = vec![VertexSet::empty(action.size()); b.levels()];
    for i in 0..h.comps.len() {
        if h.is_maximal(i) {
            let s = h.comps[i].stage as usize;
            layers[s].union_with(&h.interior(i, q)?);
        }
    }
    Ok(Toast::from_layers(action, layers, q))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToastReport {
    pub pass: bool,
    pub uncovered: Option<usize>,
    pub piece_diameters: Vec<u32>,
    /// Violated clause (1, 2 or 3) of the toast definition.
    pub clause: Option<u8>,
    pub failure: Option<String>,
}

pub fn verify_toast(action: &TorusAction, t: &Toast) -> ToastReport {
    let mut cover = VertexSet::empty(action.size());
    for l in &t.layers {
        cover.union_with(l);
    }
    let uncovered = cover.complement().first();
    let piece_diameters: Vec<u32> = t
        .layers
        .iter()
        .map(|l| action.power_components(l, t.q).iter().map(|c| c.diameter).max().unwrap_or(0))
        .collect();
    let mut clause = None;
    let mut failure = None;
    if let Some(x) = uncovered {
        clause = Some(1);
        failure = Some(format!("clause (1): point {x} lies in no layer"));
    } else if let Some(n) = (0..t.layers.len())
        .find(|&n| t.piece_diameter_bounds.get(n).is_none_or(|&b| piece_diameters[n] > b))
    {
        clause = Some(2);
        failure = Some(format!(
            "clause (2): layer {n} has a piece of diameter {} above its bound {:?}",
            piece_diameters[n],
            t.piece_diameter_bounds.get(n)
        ));
    } else {
        'outer: for m in 1..t.layers.len() {
            let inner = action.inner_boundary(&t.layers[m]);
            if inner.is_empty() {
                continue;
            }
            let field = action.distance_field(&inner, t.q.saturating_sub(1));
            for n in 0..m {
                if let Some(x) = t.layers[n].iter().find(|&x| field[x] != FAR && field[x] < t.q) {
                    clause = Some(3);
                    failure = Some(format!(
                        "clause (3): point {x} of T_{n} is at distance {} < q = {} from the inner boundary of T_{m}",
                        field[x], t.q
                    ));
                    break 'outer;
                }
            }
        }
    }
    ToastReport { pass: failure.is_none(), uncovered, piece_diameters, clause, failure }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    S { n: u32 },
    A { n: u32, k: i64 },
    T { n: u32, k: i64 },
}

struct BgdConsts {
    p: u32,
    q_big: u32,
    q: u32,
    diameters: Vec<u32>,
    layer_names: Vec<String>,
    tail_names: Vec<String>,
}

struct Membership {
    which: Which,
    c: Arc<BgdConsts>,
}

impl Membership {
    fn in_tail(&self, w: &Window<'_>, l: usize, y: usize) -> Result<bool> {
        match self.c.tail_names.get(l) {
            Some(name) => w.member(name, y),
            None => Ok(false),
        }
    }

    fn tail_ref<'a>(&self, w: &Window<'a>, l: usize) -> Result<Option<BaseRef<'a>>> {
        self.c.tail_names.get(l).map(|name| w.base(name)).transpose()
    }

    /// Component of G ↾ (X ∖ X_l^∞) through x, explored inside the window.
    fn component(&self, w: &Window<'_>, l: usize, x: usize) -> Result<Vec<usize>> {
        let tail = self.tail_ref(w, l)?;
        let mut seen = vec![false; w.action.size()];
        seen[x] = true;
        let mut out = vec![x];
        let mut i = 0;
        while i < out.len() {
            let u = out[i];
            i += 1;
            for v in w.action.neighbors(u) {
                // points beyond the window are farther than the diameter bound from x
                if !seen[v] && w.contains_point(v) && !tail.map_or(Ok(false), |t| w.has(t, v))? {
                    seen[v] = true;
                    out.push(v);
                }
            }
        }
        Ok(out)
    }

    /// Which layers X_l meet B(R, Q).
    fn reach(&self, w: &Window<'_>, r: &[usize]) -> Result<Vec<bool>> {
        let layers = self.c.layer_names.iter().map(|n| w.base(n)).collect::<Result<Vec<_>>>()?;
        let mut hits = vec![false; layers.len()];
        let mut depth = vec![u32::MAX; w.action.size()];
        let mut q: VecDeque<usize> = VecDeque::new();
        for &x in r {
            depth[x] = 0;
            q.push_back(x);
        }
        while let Some(u) = q.pop_front() {
            for (l, &base) in layers.iter().enumerate() {
                if !hits[l] && w.has(base, u)? {
                    hits[l] = true;
                }
            }
            let du = depth[u];
            if du == self.c.q_big {
                continue;
            }
            for v in w.action.neighbors(u) {
                if depth[v] == u32::MAX {
                    depth[v] = du + 1;
                    q.push_back(v);
                }
            }
        }
        Ok(hits)
    }

    fn amplitude(&self, w: &Window<'_>, r: &[usize]) -> Result<i64> {
        Ok(self.reach(w, r)?.iter().rposition(|&h| h).map_or(-1, |l| l as i64))
    }

    /// x ∈ S_n, returning the component when it is.
    fn stage_component(&self, w: &Window<'_>, n: u32) -> Result<Option<Vec<usize>>> {
        let x = w.center;
        if self.in_tail(w, n as usize, x)? {
            return Ok(None);
        }
        let r = self.component(w, n as usize, x)?;
        if n == 0 {
            return Ok(Some(r));
        }
        let prev = &self.c.layer_names[n as usize - 1];
        for &y in &r {
            if w.member(prev, y)? {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }

    fn dist_at_least(&self, w: &Window<'_>, layer: &str, need: u32) -> Result<bool> {
        for (y, dy) in w.action.ball_of(w.center, need.saturating_sub(1)) {
            let _ = dy;
            if w.member(layer, y)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl WindowProcedure for Membership {
    fn decide(&self, w: &Window<'_>) -> Result<bool> {
        match self.which {
            Which::S { n } => Ok(self.stage_component(w, n)?.is_some()),
            Which::A { n, k } => match self.stage_component(w, n)? {
                Some(r) => Ok(self.amplitude(w, &r)? == k),
                None => Ok(false),
            },
            Which::T { n, k } => {
                let Some(r) = self.stage_component(w, n)? else { return Ok(false) };
                let hits = self.reach(w, &r)?;
                if hits.iter().rposition(|&h| h).map_or(-1, |l| l as i64) != k {
                    return Ok(false);
                }
                if k == n as i64 - 1 {
                    // amplitude s−1 means R is a whole orbit, hence maximal with Int(R) = R
                    return Ok(true);
                }
                let mut succ = None;
                for l in n + 1..=(k + 1) as u32 {
                    let bigger = self.component(w, l as usize, w.center)?;
                    if bigger.len() > r.len() {
                        succ = Some(bigger);
                        break;
                    }
                }
                let succ = succ.ok_or_else(|| Error::Internal("successor not found below level a(R)+1".into()))?;
                if self.amplitude(w, &succ)? <= k {
                    return Ok(false);
                }
                let near_layers: Vec<usize> = (n as usize..=k as usize).filter(|&l| hits[l]).collect();
                let p = near_layers.len() as u32;
                for (j, &l) in near_layers.iter().enumerate() {
                    let need = self.c.q * (self.c.p - p + j as u32 + 1);
                    if !self.dist_at_least(w, &self.c.layer_names[l], need)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

/// Certificates for the membership procedures of every toast layer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToastCertificates {
    pub procedures: Vec<(Which, LocalityCertificate)>,
    /// T_n as the union of its T_n^k.
    pub layers: Vec<LocalityCertificate>,
    /// X ∖ T_n as (X ∖ S_n) ∪ ⋃_k (A_n^k ∖ T_n^k).
    pub complements: Vec<LocalityCertificate>,
}

/// Amplitudes a component of stage n can have.
pub fn amplitude_range(b: &Bgd, n: u32) -> Vec<i64> {
    (n as i64 - 1..=b.n_max() as i64).filter(|&k| k >= -1 && (k >= n as i64 || k == n as i64 - 1)).collect()
}

pub fn register_toast_locality(reg: &mut Registry, b: &Bgd, q: u32, prefix: &str) -> Result<ToastCertificates> {
    if q == 0 || q * (b.p + 1) > b.q_big {
        return Err(Error::Precondition(format!("q(P+1) ≤ Q fails: q={q}, P={}, Q={}", b.p, b.q_big)));
    }
    let layer_names: Vec<String> = (0..b.layers.len()).map(|l| format!("{prefix}X_{l}")).collect();
    let tail_names: Vec<String> = (0..b.layers.len()).map(|l| format!("{prefix}Xinf_{l}")).collect();
    for l in 0..b.layers.len() {
        reg.register_set(&layer_names[l], b.layers[l].clone());
        reg.register_set(&tail_names[l], b.tail(l));
    }
    let c = Arc::new(BgdConsts { p: b.p, q_big: b.q_big, q, diameters: b.diameter_bounds.clone(), layer_names, tail_names });
    let bases: Vec<String> = c.layer_names.iter().chain(&c.tail_names).cloned().collect();
    let mut procedures = Vec::new();
    let mut layers = Vec::new();
    let mut complements = Vec::new();
    let mut add = |reg: &mut Registry, which: Which, radius: u32| {
        let id = format!("{prefix}{which:?}");
        reg.register_procedure(&id, Arc::new(Membership { which, c: c.clone() }));
        let cert = LocalityCertificate { radius, bases: bases.clone(), procedure: id };
        procedures.push((which, cert.clone()));
        cert
    };
    for n in 0..b.levels() as u32 {
        let s = add(reg, Which::S { n }, c.diameters[n as usize]);
        let mut t_parts = Vec::new();
        let mut comp_parts = vec![reg.compose_certs(&[s], Combination::Complement)?];
        for k in amplitude_range(b, n) {
            let radius = c.diameters[(k + 1) as usize] + b.q_big;
            let a = add(reg, Which::A { n, k }, radius);
            let t = add(reg, Which::T { n, k }, radius);
            comp_parts.push(reg.compose_certs(&[a, t.clone()], Combination::Difference)?);
            t_parts.push(t);
        }
        layers.push(reg.compose_certs(&t_parts, Combination::Union)?);
        complements.push(reg.compose_certs(&comp_parts, Combination::Union)?);
    }
    Ok(ToastCertificates { procedures, layers, complements })
}

/// Global value of a membership set, for comparison with the windowed procedures.
pub fn global_membership(h: &Hierarchy, which: Which, q: u32) -> Result<VertexSet> {
    match which {
        Which::S { n } => Ok(h.s_set(n)),
        Which::A { n, k } => Ok(h.a_set(n, k)),
        Which::T { n, k } => h.t_set(n, k, q),
    }
}

/// Per-level statistics for reports.
pub fn stage_summary(h: &Hierarchy) -> BTreeMap<u32, (usize, usize)> {
    let mut out = BTreeMap::new();
    for i in 0..h.comps.len() {
        let e = out.entry(h.comps[i].stage).or_insert((0, 0));
        e.0 += 1;
        e.1 += h.is_maximal(i) as usize;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asdim::build_rainbow_toast;

    /// Grid lines of the given pitch and offset along both axes.
    pub(crate) fn lines(a: &TorusAction, pitch: u32, offset: u32) -> VertexSet {
        VertexSet::from_fn(a.size(), |x| a.coords(x).iter().any(|&c| (c + pitch - offset % pitch).is_multiple_of(pitch)))
    }

    #[test]
    fn easy_bgd_constants() {
        let a = TorusAction::standard(2, 64).unwrap();
        let rt = build_rainbow_toast(&a, 6).unwrap();
        let b = bgd_from_rainbow(&a, &rt, 10).unwrap();
        assert_eq!(b.p, 4);
        assert_eq!(b.radii.first(), Some(&2));
        assert!(verify_bgd(&a, &b).pass);
    }

    #[test]
    fn stationary_tail_fails_clause_one() {
        let a = TorusAction::standard(2, 16).unwrap();
        let l = lines(&a, 8, 0);
        let mut b = Bgd::from_layers(&a, vec![l.clone(), l.clone()], 4, 10);
        assert!(verify_bgd(&a, &b).pass);
        b.stationary_tail = l;
        let rep = verify_bgd(&a, &b);
        assert!(!rep.tails_vanish);
        assert!(rep.failure.unwrap().contains("clause (1)"));
    }

    #[test]
    fn multiplicity_violation_has_witness() {
        let a = TorusAction::standard(2, 32).unwrap();
        let layers = (0..4).map(|i| lines(&a, 16, i)).collect();
        let b = Bgd::from_layers(&a, layers, 2, 3);
        let rep = verify_bgd(&a, &b);
        assert!(!rep.pass);
        assert!(rep.failure.unwrap().contains("clause (3)"));
        assert!(rep.witness.is_some());
    }

    #[test]
    fn interior_threshold_formula() {
        let a = TorusAction::standard(2, 64).unwrap();
        let b = Bgd::from_layers(&a, vec![lines(&a, 32, 0)], 4, 10);
        let h = Hierarchy::new(&a, &b).unwrap();
        let i = h.components_at(0)[0];
        assert_eq!(h.comps[i].near_layers, vec![0]);
        // P=4, p=1, i=1, q=2 gives threshold 8
        let int = h.interior(i, 2).unwrap();
        for x in h.comps[i].points.iter().copied() {
            assert_eq!(int.contains(x), h.layer_fields[0][x] >= 8);
        }
        assert!(matches!(h.interior(i, 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn terminal_components() {
        let a = TorusAction::standard(2, 32).unwrap();
        let b = Bgd::from_layers(&a, vec![lines(&a, 16, 0)], 2, 6);
        let h = Hierarchy::new(&a, &b).unwrap();
        let top = h.components_at(1);
        assert_eq!(top.len(), 1);
        let c = &h.comps[top[0]];
        assert!(c.terminal);
        assert_eq!(c.amplitude, c.stage as i64 - 1);
        assert_eq!(h.interior(top[0], 2).unwrap().count(), a.size());
        let empty = Bgd::from_layers(&a, vec![], 2, 6);
        let h = Hierarchy::new(&a, &empty).unwrap();
        assert_eq!(h.comps[0].amplitude, -1);
    }

    #[test]
    fn toast_clauses() {
        let a = TorusAction::standard(2, 64).unwrap();
        let b = Bgd::from_layers(&a, vec![lines(&a, 32, 0), lines(&a, 64, 16)], 2, 6);
        assert!(verify_bgd(&a, &b).pass);
        let t = toast_from_bgd(&a, &b, 2).unwrap();
        assert!(verify_toast(&a, &t).pass, "{:?}", verify_toast(&a, &t));
        let mut broken = t.clone();
        let x = (0..a.size()).find(|&x| broken.layers.iter().filter(|l| l.contains(x)).count() == 1).unwrap();
        for l in broken.layers.iter_mut() {
            l.remove(x);
        }
        assert_eq!(verify_toast(&a, &broken).clause, Some(1));
    }

    #[test]
    fn moved_piece_breaks_clause_three() {
        let a = TorusAction::standard(2, 32).unwrap();
        let square = |lo: u32, hi: u32| VertexSet::from_fn(a.size(), |x| a.coords(x).iter().all(|&c| (lo..hi).contains(&c)));
        let inner = square(10, 14);
        let outer = square(4, 20);
        let t = Toast::from_layers(&a, vec![inner.clone(), outer.clone(), VertexSet::full(a.size())], 2);
        assert!(verify_toast(&a, &t).pass);
        let shifted = square(5, 9);
        let bad = Toast::from_layers(&a, vec![shifted, outer, VertexSet::full(a.size())], 2);
        assert_eq!(verify_toast(&a, &bad).clause, Some(3));
    }

    #[test]
    fn windowed_membership_matches_global() {
        let a = TorusAction::standard(2, 32).unwrap();
        let b = Bgd::from_layers(&a, vec![lines(&a, 16, 0), lines(&a, 32, 8)], 2, 6);
        let h = Hierarchy::new(&a, &b).unwrap();
        let mut reg = Registry::new();
        let certs = register_toast_locality(&mut reg, &b, 2, "t.").unwrap();
        for (which, cert) in &certs.procedures {
            let target = global_membership(&h, *which, 2).unwrap();
            let rep = reg.check_local(&a, &target, cert, usize::MAX, 0).unwrap();
            assert!(rep.pass, "{which:?}: {rep:?}");
        }
        let t = toast_from_bgd(&a, &b, 2).unwrap();
        for (n, cert) in certs.layers.iter().enumerate() {
            assert!(reg.check_local(&a, &t.layers[n], cert, usize::MAX, 0).unwrap().pass);
            let comp = t.layers[n].complement();
            assert!(reg.check_local(&a, &comp, &certs.complements[n], 200, 1).unwrap().pass);
        }
    }
}
