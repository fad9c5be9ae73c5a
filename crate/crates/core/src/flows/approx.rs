use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Divergence, Dyadic, DyadicFlow};
use crate::error::{Error, Result};
use crate::grid_graph::{Edge, TorusAction};
use crate::locality::LocalityReport;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecayRow {
    pub m: u32,
    /// ‖φ_m^out − c‖∞.
    pub out_error: Dyadic,
    /// ‖φ_m − φ_{m+1}‖∞, absent for the last m.
    pub step: Option<Dyadic>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxFlows {
    pub flows: Vec<DyadicFlow>,
    pub decay: Vec<DecayRow>,
}

impl ApproxFlows {
    pub fn m_max(&self) -> u32 {
        self.flows.len() as u32 - 1
    }
}

fn axis_gens(action: &TorusAction) -> Vec<usize> {
    let d = action.d();
    (0..d)
        .map(|i| {
            let mut e = vec![0i32; d];
            e[i] = 1;
            action.gen_index(&e).expect("unit vectors are generators")
        })
        .collect()
}

fn sides(orders: &[u32], m: u32) -> Vec<u32> {
    orders.iter().map(|&o| o.min(1u32 << m.min(31))).collect()
}

/// Cube points in mixed-radix order (axis 0 fastest), starting from its corner.
fn cube_points(action: &TorusAction, gens: &[usize], corner: usize, sides: &[u32]) -> Vec<usize> {
    let total: usize = sides.iter().map(|&s| s as usize).product();
    let mut pts = vec![corner; total];
    for idx in 1..total {
        let mut stride = 1usize;
        for (j, &s) in sides.iter().enumerate() {
            if !(idx / stride).is_multiple_of(s as usize) {
                pts[idx] = action.step(pts[idx - stride], gens[j]);
                break;
            }
            stride *= s as usize;
        }
    }
    pts
}

/// Dimension-by-dimension averaging inside one cube; returns flow numerators at exponent log2(|cube|).
fn cube_flow(
    gens: &[usize],
    pts: &[usize],
    sides: &[u32],
    c: &mut dyn FnMut(usize) -> Result<i64>,
    mut emit: impl FnMut(Edge, i64),
) -> Result<()> {
    let total = pts.len() as i64;
    let mut v: Vec<i64> = pts.iter().map(|&x| c(x).map(|c| c * total)).collect::<Result<_>>()?;
    let mut stride = 1usize;
    for (j, &s) in sides.iter().enumerate() {
        let s = s as usize;
        for start in 0..pts.len() {
            if !(start / stride).is_multiple_of(s) {
                continue;
            }
            let sum: i64 = (0..s).map(|p| v[start + p * stride]).sum();
            let avg = sum / s as i64;
            let mut prefix = 0i64;
            for p in 0..s {
                let i = start + p * stride;
                prefix += v[i] - avg;
                v[i] = avg;
                if p + 1 < s && prefix != 0 {
                    emit(Edge { from: pts[i], gen: gens[j] }, prefix);
                }
            }
        }
        stride *= s;
    }
    Ok(())
}

/// φ_0, ..., φ_{m_max} by dyadic cube averaging in the orbit chart.
pub fn approx_flows(action: &TorusAction, c: &Divergence, m_max: u32) -> Result<ApproxFlows> {
    c.check_feasible(action)?;
    let chart = action.require_chart()?;
    if let Some(o) = chart.orders.iter().find(|o| !o.is_power_of_two()) {
        return Err(Error::Precondition(format!("orbit axis length {o} is not a power of two")));
    }
    let top = chart.orders.iter().map(|o| o.trailing_zeros()).max().unwrap_or(0);
    let m_max = m_max.min(top);
    let gens = axis_gens(action);
    let mut flows = Vec::new();
    for m in 0..=m_max {
        let sd = sides(&chart.orders, m);
        let exp: u32 = sd.iter().map(|s| s.trailing_zeros()).sum();
        let mut phi = DyadicFlow::zero(action, exp);
        for x in 0..action.size() {
            if chart.coord(x).iter().zip(&sd).any(|(&a, &s)| a % s != 0) {
                continue;
            }
            let pts = cube_points(action, &gens, x, &sd);
            let mut err = None;
            cube_flow(&gens, &pts, &sd, &mut |y| Ok(c.c[y]), |e, v| {
                if let Err(e) = phi.add(action, e, v) {
                    err = Some(e);
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
        }
        phi.normalize();
        flows.push(phi);
    }
    let mut decay = Vec::new();
    for m in 0..flows.len() {
        let out = flows[m].out_nums(action)?;
        let e = flows[m].exp;
        let mut worst = 0i64;
        for x in 0..action.size() {
            worst = worst.max((out[x] - super::scale(c.c[x], e)?).abs());
        }
        let step = match flows.get(m + 1) {
            Some(next) => Some(flows[m].distance(next)?),
            None => None,
        };
        decay.push(DecayRow { m: m as u32, out_error: Dyadic::new(worst, e), step });
    }
    Ok(ApproxFlows { flows, decay })
}

/// φ_m on a positive axis edge, computed from c queried through `c` (which may refuse far points).
pub fn approx_edge_value(
    action: &TorusAction,
    m: u32,
    e: Edge,
    c: &mut dyn FnMut(usize) -> Result<i64>,
) -> Result<Dyadic> {
    let chart = action.require_chart()?;
    let gens = axis_gens(action);
    let Some(axis) = gens.iter().position(|&g| g == e.gen) else {
        return Ok(Dyadic::ZERO);
    };
    let sd = sides(&chart.orders, m);
    let exp: u32 = sd.iter().map(|s| s.trailing_zeros()).sum();
    // walk back to the cube corner
    let mut corner = e.from;
    for (j, &s) in sd.iter().enumerate() {
        let back = action.reverse_gen(gens[j]);
        for _ in 0..chart.coord(e.from)[j] % s {
            corner = action.step(corner, back);
        }
    }
    let pts = cube_points(action, &gens, corner, &sd);
    let mut out = 0i64;
    cube_flow(&gens, &pts, &sd, c, |f, v| {
        if f.from == e.from && f.gen == gens[axis] {
            out += v;
        }
    })?;
    Ok(Dyadic::new(out, exp))
}

/// Recompute φ_m on sampled positive axis edges from c restricted to B(x, 2^m − 1).
pub fn check_flow_locality(
    action: &TorusAction,
    c: &Divergence,
    phi: &DyadicFlow,
    m: u32,
    samples: usize,
    seed: u64,
) -> Result<LocalityReport> {
    let chart = action.require_chart()?;
    let radius = (1u32 << m) - 1;
    let gens = axis_gens(action);
    let n = action.size();
    let points: Vec<usize> = if samples >= n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = sample(&mut rng, n, samples.max(1)).into_vec();
        v.sort_unstable();
        v
    };
    let mut report = LocalityReport {
        pass: true,
        checked: 0,
        radius,
        procedure: format!("approx_flow_{m}"),
        witness: None,
        error: None,
    };
    for x in points {
        for &g in &gens {
            report.checked += 1;
            let e = Edge { from: x, gen: g };
            let mut lookup = |y: usize| {
                if action.orbit_id(y) != action.orbit_id(x) || chart.dist(x, y) > radius {
                    return Err(Error::InsufficientWindow(format!("c queried at {y} outside B({x}, {radius})")));
                }
                Ok(c.c[y])
            };
            match approx_edge_value(action, m, e, &mut lookup) {
                Ok(v) if v == phi.value(action, e) => {}
                Ok(_) => {
                    report.pass = false;
                    report.witness = Some(x);
                    return Ok(report);
                }
                Err(err) => {
                    report.pass = false;
                    report.witness = Some(x);
                    report.error = Some(err.to_string());
                    return Ok(report);
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vertex_set::VertexSet;

    fn disk_square(a: &TorusAction) -> Divergence {
        let n = a.n() as i64;
        let disk = VertexSet::from_fn(a.size(), |x| {
            let p = a.coords(x);
            let (dx, dy) = (p[0] as i64 - n / 4, p[1] as i64 - n / 2);
            dx * dx + dy * dy <= (n / 8) * (n / 8)
        });
        let k = disk.count();
        let side = (k as f64).sqrt() as usize;
        let mut sq = VertexSet::empty(a.size());
        let mut added = 0;
        'outer: for j in 0..n as u32 {
            for i in 0..side as u32 + 2 {
                if added == k {
                    break 'outer;
                }
                sq.insert(a.point(&[3 * a.n() / 4 - side as u32 / 2 + i % (side as u32 + 2), a.n() / 2 - side as u32 / 2 + j]));
                added += 1;
            }
        }
        Divergence::from_sets(&disk, &sq)
    }

    #[test]
    fn zero_divergence_gives_zero_flows() {
        let a = TorusAction::standard(2, 16).unwrap();
        let f = approx_flows(&a, &Divergence::zero(a.size()), 10).unwrap();
        assert_eq!(f.m_max(), 4);
        assert!(f.flows.iter().all(|p| p.sup_norm() == Dyadic::ZERO));
    }

    #[test]
    fn first_flow_is_zero_and_last_is_exact() {
        let a = TorusAction::standard(2, 32).unwrap();
        let c = disk_square(&a);
        let f = approx_flows(&a, &c, 10).unwrap();
        assert_eq!(f.flows[0].sup_norm(), Dyadic::ZERO);
        assert_eq!(f.decay.last().unwrap().out_error, Dyadic::ZERO);
        for w in f.decay.windows(2) {
            assert!(w[1].out_error <= w[0].out_error);
        }
        for (m, p) in f.flows.iter().enumerate() {
            // 2^{dm} φ_m is integral
            assert!(p.exp <= 2 * m as u32);
        }
    }

    #[test]
    fn out_error_is_minus_cube_average() {
        let a = TorusAction::standard(2, 16).unwrap();
        let c = disk_square(&a);
        let f = approx_flows(&a, &c, 2).unwrap();
        let out = f.flows[2].out_nums(&a).unwrap();
        let e = f.flows[2].exp;
        for x in 0..a.size() {
            let p = a.coords(x);
            let cube: i64 = (0..a.size())
                .filter(|&y| a.coords(y).iter().zip(&p).all(|(q, r)| q / 4 == r / 4))
                .map(|y| c.c[y])
                .sum();
            let want = Dyadic::int(c.c[x]).checked_sub(Dyadic::new(cube, 4)).unwrap();
            assert_eq!(Dyadic::new(out[x], e), want);
        }
    }

    #[test]
    fn locality_of_each_level() {
        let a = TorusAction::new(2, 32, vec![vec![3, 1], vec![1, 4]], 3).unwrap();
        let c = Divergence { c: (0..a.size()).map(|x| if x % 7 == 0 { 1 } else if x % 7 == 3 { -1 } else { 0 }).collect() };
        let mut c = c;
        let s: i64 = c.c.iter().sum();
        // rebalance the single orbit
        let mut x = 1;
        for _ in 0..s.abs() {
            while c.c[x] != 0 {
                x += 1;
            }
            c.c[x] = -s.signum();
        }
        let f = approx_flows(&a, &c, 10).unwrap();
        for m in 0..=f.m_max() {
            let rep = check_flow_locality(&a, &c, &f.flows[m as usize], m, 64, m as u64).unwrap();
            assert!(rep.pass, "{m}: {rep:?}");
        }
    }

    #[test]
    fn infeasible_divergence_rejected() {
        let a = TorusAction::standard(2, 8).unwrap();
        let mut c = Divergence::zero(a.size());
        c.c[3] = 1;
        assert!(matches!(approx_flows(&a, &c, 3), Err(Error::Infeasible(_))));
    }
}
