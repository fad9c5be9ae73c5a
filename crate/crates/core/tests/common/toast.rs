use toastkit::asdim::build_rainbow_toast;
use toastkit::decomp::{bgd_from_rainbow, grid_line_bgd, toast_from_bgd, verify_bgd, verify_toast, Bgd, Hierarchy};
use toastkit::grid_graph::FAR;
use toastkit::{TorusAction, VertexSet};

fn lines(a: &TorusAction, pitch: u32, off: u32) -> VertexSet {
    VertexSet::from_fn(a.size(), |x| a.coords(x).iter().any(|&c| c % pitch == off))
}

// dist(s, t) ≥ r
fn far_apart(a: &TorusAction, s: &VertexSet, t: &VertexSet, r: u32) -> bool {
    if s.is_empty() || t.is_empty() || r == 0 {
        return true;
    }
    let f = a.distance_field(s, r);
    t.iter().all(|x| f[x] == FAR || f[x] >= r)
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

pub fn instances() -> Vec<(&'static str, TorusAction, Bgd)> {
    let mut out = Vec::new();
    for n in [32u32, 64] {
        let a = TorusAction::standard(2, n).unwrap();
        let rt = build_rainbow_toast(&a, 3).unwrap();
        out.push(("rainbow", a.clone(), bgd_from_rainbow(&a, &rt, 10).unwrap()));
        out.push(("grid lines", a.clone(), grid_line_bgd(&a, n / 2, 6).unwrap()));
    }
    let a = TorusAction::standard(2, 64).unwrap();
    out.push(("grid lines, pitch 16", a.clone(), grid_line_bgd(&a, 16, 6).unwrap()));
    let three = Bgd::from_layers(&a, vec![lines(&a, 16, 0), lines(&a, 32, 8), lines(&a, 64, 24)], 3, 8);
    out.push(("three line layers", a, three));
    out
}

/// Interior properties (1)–(5), nesting, stage monotonicity and the toast clauses, over all components and pairs.
/// Returns the number of (component, q) cases checked.
pub fn check_interiors(name: &str, a: &TorusAction, b: &Bgd) -> Result<usize, String> {
    ensure!(verify_bgd(a, b).pass, "{name}: {:?}", verify_bgd(a, b));
    let q_max = b.q_big / (b.p + 1);
    let h = Hierarchy::new(a, b).map_err(|e| e.to_string())?;
    let n = a.size();
    let sets: Vec<VertexSet> = h.comps.iter().map(|c| c.set(n)).collect();
    let mut cases = 0;
    for q in 1..=q_max.min(2) {
        let ints: Vec<VertexSet> = (0..h.comps.len()).map(|i| h.interior(i, q).unwrap()).collect();
        for (i, r) in sets.iter().enumerate() {
            cases += 1;
            let c = &h.comps[i];
            // (1) points whose Q-ball stays in R are interior
            let outside = r.complement();
            let f = a.distance_field(&outside, b.q_big + 1);
            let deep = VertexSet::from_fn(n, |x| r.contains(x) && (f[x] == FAR || f[x] > b.q_big));
            ensure!(deep.is_subset(&ints[i]), "{name} q={q}: (1) fails for component {i}");
            ensure!(ints[i].is_subset(r), "{name} q={q}: interior of {i} leaves the component");
            // (2)
            if !c.terminal {
                ensure!(far_apart(a, &ints[i], &outside, q), "{name} q={q}: (2) fails for component {i}");
            } else {
                ensure!(ints[i] == *r, "{name} q={q}: terminal component {i} is not its own interior");
            }
            for (j, r2) in sets.iter().enumerate() {
                if i == j {
                    continue;
                }
                let nested = r.is_subset(r2) || r2.is_subset(r);
                ensure!(nested || !r.intersects(r2), "{name}: components {i}, {j} overlap without nesting");
                // (3)
                if !r.intersects(r2) {
                    ensure!(far_apart(a, &ints[i], &ints[j], 2 * q), "{name} q={q}: (3) fails for {i}, {j}");
                }
                if r.is_subset(r2) && r != r2 {
                    // (4)
                    ensure!(ints[i].is_subset(&ints[j]), "{name} q={q}: (4) fails for {i} ⊂ {j}");
                    // (5)
                    if h.is_maximal(i) {
                        ensure!(far_apart(a, &ints[i], &ints[j].complement(), q), "{name} q={q}: (5) fails for {i} ⊂ {j}");
                    }
                    ensure!(c.stage < h.comps[j].stage, "{name}: stage not increasing");
                    ensure!(c.amplitude <= h.comps[j].amplitude, "{name}: amplitude not monotone");
                }
            }
            ensure!(
                (0..sets.len()).any(|j| h.is_maximal(j) && r.is_subset(&sets[j])),
                "{name}: {i} has no maximal cover"
            );
            if let Some(s) = c.successor {
                ensure!(h.comps[s].stage as i64 <= c.amplitude + 1, "{name}: successor stage too late");
            }
        }
        let t = toast_from_bgd(a, b, q).map_err(|e| e.to_string())?;
        let rep = verify_toast(a, &t);
        ensure!(rep.pass, "{name} q={q}: {rep:?}");
    }
    Ok(cases)
}
