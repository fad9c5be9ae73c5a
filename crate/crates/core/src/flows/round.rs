use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::delta::{delta_graph, eulerian_circuit, PieceRegions};
use super::integral::{min_sup_flow, FlowGraph};
use super::{round_half_down, scale, ApproxFlows, Divergence, Dyadic, DyadicFlow};
use crate::decomp::Toast;
use crate::error::{Error, Result};
use crate::grid_graph::{Edge, EdgeSet, TorusAction, UnionFind};
use crate::vertex_set::VertexSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Init,
    Adjust,
    Round,
    Complete,
}

/// One edit of ψ on an undirected edge (positive orientation), as a numerator at the log exponent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub edge: Edge,
    pub layer: Option<u32>,
    pub delta: i64,
    pub phase: Phase,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLog {
    pub exp: u32,
    /// m_n used for layer n.
    pub schedule: Vec<u32>,
    /// Schedules tried before the successful one.
    pub failed_schedules: Vec<Vec<u32>>,
    /// Sup norm of the completion flow on each finite component D.
    pub completion_max: i64,
    pub entries: Vec<AuditEntry>,
}

#[derive(Clone, Debug, Default)]
pub struct RoundOptions {
    /// Fixed m_n per layer; the automatic doubling schedule when absent.
    pub schedule: Option<Vec<u32>>,
}

#[derive(Clone, Debug)]
pub struct Rounding {
    pub psi: DyadicFlow,
    pub log: AuditLog,
}

/// First m with ‖φ_m^out − c‖∞ · (D_n + 1)^d < 1/4 for each layer, made non-decreasing.
pub fn schedule_for(action: &TorusAction, toast: &Toast, flows: &ApproxFlows) -> Vec<u32> {
    let d = action.d() as i32;
    let mut out = Vec::new();
    let mut prev = 0;
    for t in &toast.layers {
        let diam = action.power_components(t, 1).iter().map(|c| c.diameter).max().unwrap_or(0);
        let m = flows
            .decay
            .iter()
            .find(|row| row.out_error.to_f64() * ((diam + 1) as f64).powi(d) < 0.25)
            .map_or(flows.m_max(), |row| row.m);
        prev = m.max(prev);
        out.push(prev);
    }
    out
}

/// For each vertex, the least n with x ∈ B(T_n, 1); the minimal layer of an edge is the smaller value at its ends.
pub fn minimal_layers(action: &TorusAction, layers: &[VertexSet]) -> Vec<u32> {
    let mut ml = vec![u32::MAX; action.size()];
    for (n, t) in layers.iter().enumerate().rev() {
        for x in action.ball(t, 1).iter() {
            ml[x] = n as u32;
        }
    }
    ml
}

struct Editor<'a> {
    action: &'a TorusAction,
    psi: DyadicFlow,
    entries: Vec<AuditEntry>,
}

impl Editor<'_> {
    fn add(&mut self, e: Edge, delta: i64, layer: Option<u32>, phase: Phase) -> Result<()> {
        if delta == 0 {
            return Ok(());
        }
        self.psi.add(self.action, e, delta)?;
        let (edge, delta) = if self.action.is_positive_gen(e.gen) { (e, delta) } else { (e.reversed(self.action), -delta) };
        self.entries.push(AuditEntry { edge, layer, delta, phase });
        Ok(())
    }

    fn edge(&self, a: usize, b: usize) -> Result<Edge> {
        let gen = self.action.edge_gen(a, b).ok_or_else(|| Error::Internal(format!("{a} and {b} are not adjacent")))?;
        Ok(Edge { from: a, gen })
    }
}

/// Steps (1) and (2): initialization from φ_{m_n} on ∂_E T_n, then adjustment and rounding per piece.
fn rounding_steps<'a>(
    action: &'a TorusAction,
    layers: &[VertexSet],
    flows: &ApproxFlows,
    schedule: &[u32],
    exp: u32,
) -> Result<(Editor<'a>, EdgeSet)> {
    let mut ed = Editor { action, psi: DyadicFlow::zero(action, exp), entries: Vec::new() };
    let mut all = EdgeSet::empty(action);
    let bds: Vec<EdgeSet> = layers.iter().map(|t| action.edge_boundary(t)).collect();
    for (n, bd) in bds.iter().enumerate() {
        let phi = &flows.flows[schedule[n] as usize];
        for e in bd.undirected(action) {
            let v = phi.value(action, e).at(exp)?;
            let cur = ed.psi.get(action, e);
            ed.add(e, v - cur, Some(n as u32), Phase::Init)?;
            all.insert(e);
        }
    }
    for (n, t) in layers.iter().enumerate() {
        let (labels, count) = action.component_labels(t);
        let mut pieces = vec![Vec::new(); count];
        for x in t.iter() {
            pieces[labels[x] as usize].push(x);
        }
        for piece in pieces {
            let s = VertexSet::from_indices(action.size(), piece.iter().copied());
            let bd = action.edge_boundary(&s);
            if bd.is_empty() {
                continue;
            }
            let dg = delta_graph(action, &bd);
            let regions = PieceRegions::new(action, &s)?;
            for comp in dg.components() {
                let edges: Vec<Edge> = comp.iter().map(|&i| dg.vertices[i]).collect();
                let region = regions.region(action, &s, &edges)?;
                let circuit = eulerian_circuit(&dg, &comp)?;
                let orient = |e: Edge| if region.set.contains(e.from) { e } else { e.reversed(action) };
                let seq: Vec<Edge> = circuit.iter().map(|&i| orient(dg.vertices[i])).collect();
                let mut out = 0i64;
                for &e in &edges {
                    out = out.checked_add(ed.psi.get(action, orient(e))).ok_or(Error::Overflow)?;
                }
                let len = seq.len();
                let last = if len == 1 { seq[0] } else { seq[len - 2] };
                let adjust = scale(round_half_down(out, exp), exp)? - out;
                ed.add(last, adjust, Some(n as u32), Phase::Adjust)?;
                for s_idx in 0..len.saturating_sub(2) {
                    let (cur, next) = (seq[s_idx], seq[s_idx + 1]);
                    let val = ed.psi.get(action, cur);
                    let delta = scale(round_half_down(val, exp), exp)? - val;
                    if delta == 0 {
                        continue;
                    }
                    let (u, v) = (cur.from, cur.to(action));
                    let (a, b) = (next.from, next.to(action));
                    let w = if a != u && a != v { a } else { b };
                    for (p, q) in [(u, v), (v, w), (w, u)] {
                        let e = ed.edge(p, q)?;
                        ed.add(e, delta, Some(n as u32), Phase::Round)?;
                    }
                }
            }
        }
    }
    for e in all.undirected(action) {
        let v = ed.psi.get(action, e);
        if v & ((1i64 << exp) - 1) != 0 {
            return Err(Error::Internal(format!("boundary edge {e:?} is fractional after rounding")));
        }
    }
    Ok((ed, all))
}

/// Finite components D of the non-boundary edges, each with its vertices and edges.
fn completion_components(action: &TorusAction, boundary: &EdgeSet) -> Vec<(Vec<usize>, Vec<Edge>)> {
    let mut uf = UnionFind::new(action.size());
    let mut inner = Vec::new();
    for g in (0..action.num_gens()).filter(|&g| action.is_positive_gen(g)) {
        for x in 0..action.size() {
            let e = Edge { from: x, gen: g };
            if !boundary.contains(e) {
                uf.union(x, e.to(action));
                inner.push(e);
            }
        }
    }
    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<Edge>)> = BTreeMap::new();
    for e in inner {
        let r = uf.find(e.from);
        groups.entry(r).or_default().1.push(e);
    }
    for x in 0..action.size() {
        let r = uf.find(x);
        if let Some(g) = groups.get_mut(&r) {
            g.0.push(x);
        }
    }
    let mut out: Vec<(Vec<usize>, Vec<Edge>)> = groups.into_values().collect();
    for (_, es) in out.iter_mut() {
        es.sort_unstable();
    }
    out.sort_by_key(|(v, _)| v[0]);
    out
}

/// Replace ψ on D by an integral flow of least sup norm carrying the residual divergence.
fn complete_component(
    ed: &mut Editor<'_>,
    c: &mut dyn FnMut(usize) -> Result<i64>,
    verts: &[usize],
    edges: &[Edge],
    boundary: &EdgeSet,
    exp: u32,
) -> Result<i64> {
    let action = ed.action;
    let local: HashMap<usize, usize> = verts.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let mut r = vec![0i64; verts.len()];
    for (i, &x) in verts.iter().enumerate() {
        let mut bsum = 0i64;
        for g in 0..action.num_gens() {
            let e = Edge { from: x, gen: g };
            if boundary.contains(e.canonical(action)) {
                bsum = bsum.checked_add(ed.psi.get(action, e)).ok_or(Error::Overflow)?;
            }
        }
        r[i] = c(x)? - (bsum >> exp);
    }
    let fg = FlowGraph { n: verts.len(), edges: edges.iter().map(|e| (local[&e.from], local[&e.to(action)])).collect() };
    let (f, bound) = min_sup_flow(&fg, &r)?;
    for (e, v) in edges.iter().zip(f) {
        let delta = scale(v, exp)? - ed.psi.get(action, *e);
        ed.add(*e, delta, None, Phase::Complete)?;
    }
    Ok(bound)
}

fn attempt(
    action: &TorusAction,
    toast: &Toast,
    flows: &ApproxFlows,
    c: &Divergence,
    schedule: &[u32],
) -> Result<Rounding> {
    let exp = schedule.iter().map(|&m| flows.flows[m as usize].exp).max().unwrap_or(0);
    let (mut ed, boundary) = rounding_steps(action, &toast.layers, flows, schedule, exp)?;
    let mut completion_max = 0;
    let comps = completion_components(action, &boundary);
    let mut covered = VertexSet::empty(action.size());
    for (verts, edges) in &comps {
        let b = complete_component(&mut ed, &mut |x| Ok(c.c[x]), verts, edges, &boundary, exp)?;
        completion_max = completion_max.max(b);
        for &x in verts {
            covered.insert(x);
        }
    }
    let out = ed.psi.out_nums(action)?;
    // vertices with no inner edges must already balance
    for x in covered.complement().iter() {
        if out[x] != scale(c.c[x], exp)? {
            return Err(Error::Infeasible(format!("vertex {x} has only boundary edges and the wrong out-flow")));
        }
    }
    let mut psi = ed.psi.clone();
    if !psi.is_integral() {
        return Err(Error::Internal("ψ is not integral after completion".into()));
    }
    psi.normalize();
    let psi = psi.rescaled(0).map_err(|_| Error::Internal("ψ has a fractional part".into()))?;
    Ok(Rounding {
        psi,
        log: AuditLog { exp, schedule: schedule.to_vec(), failed_schedules: Vec::new(), completion_max, entries: ed.entries },
    })
}

/// Round the approximate flows along a 2-toast into an integral c-flow.
pub fn round_flows(
    action: &TorusAction,
    toast: &Toast,
    flows: &ApproxFlows,
    c: &Divergence,
    opts: &RoundOptions,
) -> Result<Rounding> {
    if action.d() < 2 {
        return Err(Error::Precondition("rounding needs triangles, so d ≥ 2".into()));
    }
    if toast.q < 2 {
        return Err(Error::Precondition(format!("rounding needs a 2-toast, got q = {}", toast.q)));
    }
    c.check_feasible(action)?;
    let m_max = flows.m_max();
    let mut schedule = match &opts.schedule {
        Some(s) if s.len() == toast.layers.len() => s.clone(),
        Some(s) => {
            return Err(Error::Precondition(format!("schedule has {} entries for {} layers", s.len(), toast.layers.len())))
        }
        None => schedule_for(action, toast, flows),
    };
    if let Some(m) = schedule.iter().find(|&&m| m > m_max) {
        return Err(Error::Precondition(format!("m_n = {m} exceeds the computed flows (m ≤ {m_max})")));
    }
    let mut failed = Vec::new();
    loop {
        match attempt(action, toast, flows, c, &schedule) {
            Ok(mut r) => {
                r.log.failed_schedules = failed;
                return Ok(r);
            }
            Err(Error::Infeasible(msg)) => {
                if schedule.iter().all(|&m| m == m_max) || opts.schedule.is_some() {
                    return Err(Error::Infeasible(format!("completion infeasible with m_n = {schedule:?}: {msg}")));
                }
                failed.push(schedule.clone());
                schedule = schedule.iter().map(|&m| (2 * m).max(1).min(m_max)).collect();
            }
            Err(e) => return Err(e),
        }
    }
}

/// ψ on one edge meeting T_n, recomputed from layers ≤ n, φ and c inside a window around the edge.
pub fn recompute_edge_local(
    action: &TorusAction,
    toast: &Toast,
    flows: &ApproxFlows,
    c: &Divergence,
    log: &AuditLog,
    e: Edge,
    n: usize,
) -> Result<i64> {
    let e = e.canonical(action);
    let x = e.from;
    let reach = toast.layers[..=n]
        .iter()
        .map(|t| action.power_components(t, 1).iter().map(|p| p.diameter).max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    let radius = reach + 3;
    let window = VertexSet::from_indices(action.size(), action.ball_of(x, radius).into_iter().map(|(p, _)| p));
    let mut layers: Vec<VertexSet> = toast.layers[..=n].iter().map(|t| t.intersection(&window)).collect();
    layers.push(VertexSet::full(action.size()));
    let mut schedule = log.schedule[..=n].to_vec();
    schedule.push(*log.schedule.last().unwrap_or(&0));
    let (mut ed, boundary) = rounding_steps(action, &layers, flows, &schedule, log.exp)?;
    if !boundary.contains(e) {
        let comps = completion_components(action, &boundary);
        let (verts, edges) = comps
            .iter()
            .find(|(_, es)| es.binary_search(&e).is_ok())
            .ok_or_else(|| Error::Internal("edge in no completion component".into()))?;
        let mut lookup = |y: usize| {
            if !window.contains(y) {
                return Err(Error::InsufficientWindow(format!("c queried at {y} outside B({x}, {radius})")));
            }
            Ok(c.c[y])
        };
        complete_component(&mut ed, &mut lookup, verts, edges, &boundary, log.exp)?;
    }
    let v = ed.psi.get(action, e);
    Ok(v >> log.exp)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundedReport {
    pub pass: bool,
    pub integral: bool,
    /// Vertices where ψ^out ≠ c.
    pub divergence_errors: Vec<usize>,
    pub sup_norm: i64,
    /// Largest |net step-(2) change| on one edge.
    pub max_step2_change: Dyadic,
    pub step2_bound: Dyadic,
    pub minimal_layer_ok: bool,
    pub log_matches_psi: bool,
    pub locality_checked: usize,
    pub locality_pass: bool,
    pub failures: Vec<String>,
}

pub fn verify_rounded(
    action: &TorusAction,
    psi: &DyadicFlow,
    c: &Divergence,
    toast: &Toast,
    log: &AuditLog,
    locality: Option<(&ApproxFlows, usize, u64)>,
) -> Result<RoundedReport> {
    let mut failures = Vec::new();
    let integral = psi.is_integral();
    if !integral {
        failures.push("ψ is not integral".to_string());
    }
    let out = psi.out_nums(action)?;
    let mut divergence_errors = Vec::new();
    for x in 0..action.size() {
        if out[x] != scale(c.c[x], psi.exp)? {
            divergence_errors.push(x);
        }
    }
    if !divergence_errors.is_empty() {
        failures.push(format!("ψ^out ≠ c at {} vertices", divergence_errors.len()));
    }
    let sup = psi.sup_norm();
    let sup_norm = round_half_down(sup.num, sup.exp);

    let ml = minimal_layers(action, &toast.layers);
    let mut net: HashMap<Edge, i64> = HashMap::new();
    let mut total: HashMap<Edge, i64> = HashMap::new();
    let mut layers_of: HashMap<Edge, Vec<u32>> = HashMap::new();
    let mut minimal_layer_ok = true;
    for en in &log.entries {
        *total.entry(en.edge).or_default() += en.delta;
        if matches!(en.phase, Phase::Adjust | Phase::Round) {
            *net.entry(en.edge).or_default() += en.delta;
            let l = layers_of.entry(en.edge).or_default();
            if let Some(layer) = en.layer {
                if !l.contains(&layer) {
                    l.push(layer);
                }
            }
            let want = ml[en.edge.from].min(ml[en.edge.to(action)]);
            if en.layer != Some(want) && minimal_layer_ok {
                minimal_layer_ok = false;
                failures.push(format!(
                    "edge {:?} edited in step (2) at layer {:?}, minimal layer is {want}",
                    en.edge, en.layer
                ));
            }
        }
    }
    if let Some((e, l)) = layers_of.iter().find(|(_, l)| l.len() > 1) {
        if minimal_layer_ok {
            failures.push(format!("edge {e:?} edited in step (2) at layers {l:?}"));
        }
        minimal_layer_ok = false;
    }
    let worst = net.values().map(|v| v.abs()).max().unwrap_or(0);
    let max_step2_change = Dyadic::new(worst, log.exp);
    let step2_bound = Dyadic::new(3i64.pow(action.d() as u32), 1);
    if max_step2_change > step2_bound {
        failures.push(format!("step (2) changed an edge by {max_step2_change} > {step2_bound}"));
    }
    let mut log_matches_psi = true;
    for g in (0..action.num_gens()).filter(|&g| action.is_positive_gen(g)) {
        for x in 0..action.size() {
            let e = Edge { from: x, gen: g };
            let logged = total.get(&e).copied().unwrap_or(0);
            if scale(psi.get(action, e), log.exp - psi.exp.min(log.exp))? != logged {
                log_matches_psi = false;
            }
        }
    }
    if !log_matches_psi {
        failures.push("audit log does not sum to ψ".into());
    }

    let mut locality_checked = 0;
    let mut locality_pass = true;
    if let Some((flows, samples, seed)) = locality {
        let edges: Vec<(Edge, usize)> = (0..action.size())
            .flat_map(|x| {
                (0..action.num_gens())
                    .filter(|&g| action.is_positive_gen(g))
                    .map(move |g| Edge { from: x, gen: g })
            })
            .filter_map(|e| {
                let y = e.to(action);
                toast.layers.iter().position(|t| t.contains(e.from) || t.contains(y)).map(|n| (e, n))
            })
            .collect();
        let picks: Vec<usize> = if samples >= edges.len() {
            (0..edges.len()).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = sample(&mut rng, edges.len(), samples).into_vec();
            v.sort_unstable();
            v
        };
        for i in picks {
            let (e, n) = edges[i];
            locality_checked += 1;
            match recompute_edge_local(action, toast, flows, c, log, e, n) {
                Ok(v) if v == psi.get(action, e) >> psi.exp => {}
                Ok(v) => {
                    locality_pass = false;
                    failures.push(format!("windowed recomputation of {e:?} (layer {n}) gave {v}"));
                    break;
                }
                Err(err) => {
                    locality_pass = false;
                    failures.push(format!("windowed recomputation of {e:?} failed: {err}"));
                    break;
                }
            }
        }
    }
    Ok(RoundedReport {
        pass: failures.is_empty(),
        integral,
        divergence_errors,
        sup_norm,
        max_step2_change,
        step2_bound,
        minimal_layer_ok,
        log_matches_psi,
        locality_checked,
        locality_pass,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{toast_from_bgd, Bgd};
    use crate::flows::approx_flows;

    fn lines(a: &TorusAction, pitch: u32, offset: u32) -> VertexSet {
        VertexSet::from_fn(a.size(), |x| a.coords(x).iter().any(|&c| c % pitch == offset % pitch))
    }

    fn blob_pair(a: &TorusAction) -> Divergence {
        let n = a.n();
        let disk = VertexSet::from_fn(a.size(), |x| {
            let p = a.coords(x);
            let (dx, dy) = (p[0] as i64 - (n / 4) as i64, p[1] as i64 - (n / 3) as i64);
            dx * dx + dy * dy <= ((n / 7) * (n / 7)) as i64
        });
        let k = disk.count();
        let mut sq = VertexSet::empty(a.size());
        let side = (k as f64).sqrt().ceil() as u32;
        for i in 0..k as u32 {
            sq.insert(a.point(&[n / 2 + i % side, n / 2 + i / side]));
        }
        Divergence::from_sets(&disk, &sq)
    }

    fn setup(n: u32) -> (TorusAction, Toast, ApproxFlows, Divergence) {
        let a = TorusAction::standard(2, n).unwrap();
        let b = Bgd::from_layers(&a, vec![lines(&a, n / 2, 0), lines(&a, n, n / 4)], 2, 6);
        let t = toast_from_bgd(&a, &b, 2).unwrap();
        let c = blob_pair(&a);
        let f = approx_flows(&a, &c, 16).unwrap();
        (a, t, f, c)
    }

    #[test]
    fn rounded_flow_passes_verification() {
        let (a, t, f, c) = setup(64);
        assert!(t.layers.iter().take(2).any(|l| !l.is_empty()));
        let r = round_flows(&a, &t, &f, &c, &RoundOptions::default()).unwrap();
        let rep = verify_rounded(&a, &r.psi, &c, &t, &r.log, Some((&f, 12, 3))).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(r.log.entries.iter().any(|e| e.phase == Phase::Round));
    }

    #[test]
    fn bumped_numerator_breaks_two_vertices() {
        let (a, t, f, c) = setup(32);
        let r = round_flows(&a, &t, &f, &c, &RoundOptions::default()).unwrap();
        let mut psi = r.psi.clone();
        let e = Edge { from: 7, gen: psi.gens[0] };
        psi.add(&a, e, 1).unwrap();
        let rep = verify_rounded(&a, &psi, &c, &t, &r.log, None).unwrap();
        assert_eq!(rep.divergence_errors.len(), 2);
        assert!(!rep.pass);
    }

    #[test]
    fn forged_second_layer_edit_is_caught() {
        let (a, t, f, c) = setup(32);
        let r = round_flows(&a, &t, &f, &c, &RoundOptions::default()).unwrap();
        let mut log = r.log.clone();
        let i = log.entries.iter().position(|e| e.phase == Phase::Round).unwrap();
        let mut forged = log.entries[i].clone();
        forged.layer = forged.layer.map(|l| l + 1);
        forged.delta = 0;
        log.entries.push(forged);
        let rep = verify_rounded(&a, &r.psi, &c, &t, &log, None).unwrap();
        assert!(!rep.minimal_layer_ok);
    }

    #[test]
    fn adjustment_absorbs_a_quarter() {
        let (a, t, mut f, c) = setup(32);
        let top = f.m_max() as usize;
        let mut phi = f.flows[top].rescaled(f.flows[top].exp.max(2)).unwrap();
        let e = a.edge_boundary(&t.layers[0]).undirected(&a)[0];
        let quarter = 1i64 << (phi.exp - 2);
        phi.add(&a, e, quarter).unwrap();
        f.flows[top] = phi;
        let opts = RoundOptions { schedule: Some(vec![top as u32; t.layers.len()]) };
        let r = round_flows(&a, &t, &f, &c, &opts).unwrap();
        assert!(r.log.entries.iter().any(|e| e.phase == Phase::Adjust));
        let rep = verify_rounded(&a, &r.psi, &c, &t, &r.log, Some((&f, 6, 5))).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}
