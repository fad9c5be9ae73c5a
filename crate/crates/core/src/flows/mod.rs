//! Exact dyadic flows on the Schreier graph and the rounding pipeline.

mod approx;
mod delta;
mod integral;
mod round;

pub use approx::{approx_edge_value, approx_flows, check_flow_locality, ApproxFlows, DecayRow};
pub use delta::{delta_graph, eulerian_circuit, regions_for, DeltaGraph, Region};
pub use integral::{integralize, min_sup_flow, FlowGraph, MaxFlow};
pub use round::{
    minimal_layers, recompute_edge_local, round_flows, schedule_for, verify_rounded, AuditEntry, AuditLog, Phase,
    RoundOptions, RoundedReport, Rounding,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_graph::{Edge, EdgeSet, TorusAction};
use crate::vertex_set::VertexSet;

/// Exact value num / 2^exp.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dyadic {
    pub num: i64,
    pub exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };

    pub fn new(num: i64, exp: u32) -> Self {
        Dyadic { num, exp }.normalized()
    }

    pub fn int(v: i64) -> Self {
        Dyadic { num: v, exp: 0 }
    }

    pub fn normalized(mut self) -> Self {
        while self.exp > 0 && self.num % 2 == 0 {
            self.num /= 2;
            self.exp -= 1;
        }
        if self.num == 0 {
            self.exp = 0;
        }
        self
    }

    /// Numerator at a larger exponent.
    pub fn at(self, exp: u32) -> Result<i64> {
        if exp < self.exp {
            return Err(Error::Internal(format!("cannot express /2^{} at exponent {exp}", self.exp)));
        }
        scale(self.num, exp - self.exp)
    }

    pub fn checked_add(self, o: Dyadic) -> Result<Dyadic> {
        let e = self.exp.max(o.exp);
        Ok(Dyadic::new(self.at(e)?.checked_add(o.at(e)?).ok_or(Error::Overflow)?, e))
    }

    pub fn checked_sub(self, o: Dyadic) -> Result<Dyadic> {
        self.checked_add(-o)
    }

    pub fn is_integer(self) -> bool {
        self.normalized().exp == 0
    }

    /// Nearest integer, rounding half-integers down.
    pub fn round_half_down(self) -> i64 {
        round_half_down(self.num, self.exp)
    }

    pub fn abs(self) -> Dyadic {
        Dyadic { num: self.num.abs(), exp: self.exp }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / (self.exp as f64).exp2()
    }
}

impl std::ops::Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { num: -self.num, exp: self.exp }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        let e = self.exp.max(o.exp);
        let a = (self.num as i128) << (e - self.exp);
        let b = (o.num as i128) << (e - o.exp);
        a.cmp(&b)
    }
}

impl std::fmt::Display for Dyadic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let d = self.normalized();
        if d.exp == 0 {
            write!(f, "{}", d.num)
        } else {
            write!(f, "{}/{}", d.num, 1u64 << d.exp)
        }
    }
}

pub(crate) fn scale(num: i64, by: u32) -> Result<i64> {
    if by >= 63 {
        return if num == 0 { Ok(0) } else { Err(Error::Overflow) };
    }
    num.checked_mul(1i64 << by).ok_or(Error::Overflow)
}

/// [num / 2^exp] with half-integers rounded down.
pub fn round_half_down(num: i64, exp: u32) -> i64 {
    if exp == 0 {
        return num;
    }
    let half = 1i64 << (exp - 1);
    // ceil((num - half) / 2^exp)
    let t = num - half;
    t.div_euclid(1i64 << exp) + (t.rem_euclid(1i64 << exp) != 0) as i64
}

/// Antisymmetric edge labelling num / 2^exp, stored once per undirected edge in positive orientation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicFlow {
    pub exp: u32,
    /// Positive generators, in generator order.
    pub gens: Vec<usize>,
    /// num[j][x] is the numerator of φ(x, γ_j x) for γ_j = gens[j].
    pub num: Vec<Vec<i64>>,
}

impl DyadicFlow {
    pub fn zero(action: &TorusAction, exp: u32) -> Self {
        let gens: Vec<usize> = (0..action.num_gens()).filter(|&g| action.is_positive_gen(g)).collect();
        let num = vec![vec![0; action.size()]; gens.len()];
        DyadicFlow { exp, gens, num }
    }

    fn slot(&self, g: usize) -> Option<usize> {
        self.gens.iter().position(|&h| h == g)
    }

    /// Numerator of φ(x, γ_g x).
    pub fn get(&self, action: &TorusAction, e: Edge) -> i64 {
        match self.slot(e.gen) {
            Some(j) => self.num[j][e.from],
            None => {
                let r = e.reversed(action);
                -self.num[self.slot(r.gen).expect("reverse of a negative generator is positive")][r.from]
            }
        }
    }

    pub fn value(&self, action: &TorusAction, e: Edge) -> Dyadic {
        Dyadic::new(self.get(action, e), self.exp)
    }

    /// Add `delta` (a numerator) to φ(e), and its negative to the reverse edge.
    pub fn add(&mut self, action: &TorusAction, e: Edge, delta: i64) -> Result<()> {
        let (j, x, s) = match self.slot(e.gen) {
            Some(j) => (j, e.from, delta),
            None => {
                let r = e.reversed(action);
                (self.slot(r.gen).expect("positive reverse"), r.from, -delta)
            }
        };
        self.num[j][x] = self.num[j][x].checked_add(s).ok_or(Error::Overflow)?;
        Ok(())
    }

    /// The same flow at a larger exponent.
    pub fn rescaled(&self, exp: u32) -> Result<DyadicFlow> {
        if exp < self.exp {
            return Err(Error::Internal("rescale to a smaller exponent".into()));
        }
        let by = exp - self.exp;
        let num = self
            .num
            .iter()
            .map(|row| row.iter().map(|&v| scale(v, by)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(DyadicFlow { exp, gens: self.gens.clone(), num })
    }

    /// Lower the exponent while all numerators are even.
    pub fn normalize(&mut self) {
        while self.exp > 0 && self.num.iter().flatten().all(|v| v % 2 == 0) {
            for v in self.num.iter_mut().flatten() {
                *v /= 2;
            }
            self.exp -= 1;
        }
    }

    pub fn is_integral(&self) -> bool {
        let m = (1i64 << self.exp) - 1;
        self.num.iter().flatten().all(|v| v & m == 0)
    }

    /// Out-flow numerators at every vertex.
    pub fn out_nums(&self, action: &TorusAction) -> Result<Vec<i64>> {
        let mut out = vec![0i64; action.size()];
        for (j, &g) in self.gens.iter().enumerate() {
            for x in 0..action.size() {
                let v = self.num[j][x];
                if v != 0 {
                    let y = action.step(x, g);
                    out[x] = out[x].checked_add(v).ok_or(Error::Overflow)?;
                    out[y] = out[y].checked_sub(v).ok_or(Error::Overflow)?;
                }
            }
        }
        Ok(out)
    }

    pub fn sup_norm(&self) -> Dyadic {
        let m = self.num.iter().flatten().map(|v| v.abs()).max().unwrap_or(0);
        Dyadic::new(m, self.exp)
    }

    /// ‖self − other‖∞.
    pub fn distance(&self, other: &DyadicFlow) -> Result<Dyadic> {
        let e = self.exp.max(other.exp);
        let a = self.rescaled(e)?;
        let b = other.rescaled(e)?;
        let mut m = 0i64;
        for (ra, rb) in a.num.iter().zip(&b.num) {
            for (x, y) in ra.iter().zip(rb) {
                m = m.max(x.checked_sub(*y).ok_or(Error::Overflow)?.abs());
            }
        }
        Ok(Dyadic::new(m, e))
    }

    /// Undirected edges carrying a nonzero value.
    pub fn support(&self, action: &TorusAction) -> EdgeSet {
        let mut s = EdgeSet::empty(action);
        for (j, &g) in self.gens.iter().enumerate() {
            for x in 0..action.size() {
                if self.num[j][x] != 0 {
                    s.insert(Edge { from: x, gen: g });
                }
            }
        }
        s
    }
}

/// φ^out(x).
pub fn out_flow(action: &TorusAction, phi: &DyadicFlow, x: usize) -> Result<Dyadic> {
    let mut s = 0i64;
    for g in 0..action.num_gens() {
        s = s.checked_add(phi.get(action, Edge { from: x, gen: g })).ok_or(Error::Overflow)?;
    }
    Ok(Dyadic::new(s, phi.exp))
}

/// φ^out(S) as the sum over the edge boundary of S.
pub fn out_flow_set(action: &TorusAction, phi: &DyadicFlow, s: &VertexSet) -> Result<Dyadic> {
    let mut t = 0i64;
    for e in action.edge_boundary(s).directed() {
        t = t.checked_add(phi.get(action, e)).ok_or(Error::Overflow)?;
    }
    Ok(Dyadic::new(t, phi.exp))
}

/// Integer target out-flow c, e.g. 1_A − 1_B.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub c: Vec<i64>,
}

impl Divergence {
    pub fn from_sets(a: &VertexSet, b: &VertexSet) -> Self {
        Divergence { c: (0..a.universe()).map(|x| a.contains(x) as i64 - b.contains(x) as i64).collect() }
    }

    pub fn zero(size: usize) -> Self {
        Divergence { c: vec![0; size] }
    }

    /// Sum of c over each orbit.
    pub fn orbit_sums(&self, action: &TorusAction) -> Vec<i64> {
        let mut s = vec![0i64; action.num_orbits()];
        for (x, &v) in self.c.iter().enumerate() {
            s[action.orbit_id(x)] += v;
        }
        s
    }

    pub fn check_feasible(&self, action: &TorusAction) -> Result<()> {
        if self.c.len() != action.size() {
            return Err(Error::Precondition("divergence has the wrong length".into()));
        }
        if let Some((o, s)) = self.orbit_sums(action).into_iter().enumerate().find(|&(_, s)| s != 0) {
            return Err(Error::Infeasible(format!("orbit {o} has divergence sum {s}")));
        }
        Ok(())
    }
}
