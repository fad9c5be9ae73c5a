//! Locality certificates: a set is r-local in some base sets when membership of x is decided by
//! the base sets restricted to B(x, r). Certificates are checked by recomputing membership from
//! windows through a registered procedure.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_graph::TorusAction;
use crate::vertex_set::VertexSet;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalityCertificate {
    pub radius: u32,
    pub bases: Vec<String>,
    pub procedure: String,
}

/// Base data visible from a point: the ball B(center, radius) and the base sets restricted to it.
pub struct Window<'a> {
    pub action: &'a TorusAction,
    pub center: usize,
    pub radius: u32,
    // explicit ball, only for actions without a chart
    ball: Option<HashMap<usize, u32>>,
    order: OnceLock<Vec<usize>>,
    sets: &'a BTreeMap<String, VertexSet>,
    allowed: &'a [String],
}

impl<'a> Window<'a> {
    fn build(
        action: &'a TorusAction,
        center: usize,
        radius: u32,
        sets: &'a BTreeMap<String, VertexSet>,
        allowed: &'a [String],
        parent: Option<&Window<'_>>,
    ) -> Result<Self> {
        let ball = if action.chart().is_some() {
            None
        } else {
            Some(action.ball_of(center, radius).into_iter().collect::<HashMap<_, _>>())
        };
        let w = Window { action, center, radius, ball, order: OnceLock::new(), sets, allowed };
        if let Some(parent) = parent {
            let inside = match parent.depth(center) {
                Some(dc) => dc + radius <= parent.radius || w.points().iter().all(|&p| parent.contains_point(p)),
                None => false,
            };
            if !inside {
                return Err(Error::InsufficientWindow(format!(
                    "B({center}, {radius}) is not inside the enclosing window"
                )));
            }
        }
        Ok(w)
    }

    pub fn contains_point(&self, y: usize) -> bool {
        self.depth(y).is_some()
    }

    /// Distance from the center, for points inside the window.
    pub fn depth(&self, y: usize) -> Option<u32> {
        match (&self.ball, self.action.chart()) {
            (Some(b), _) => b.get(&y).copied(),
            (None, Some(ch)) => {
                if self.action.orbit_id(y) != self.action.orbit_id(self.center) {
                    return None;
                }
                let d = ch.dist(self.center, y);
                (d <= self.radius).then_some(d)
            }
            (None, None) => unreachable!(),
        }
    }

    /// Window points in BFS order from the center.
    pub fn points(&self) -> &[usize] {
        self.order
            .get_or_init(|| self.action.ball_of(self.center, self.radius).into_iter().map(|(p, _)| p).collect())
    }

    /// Membership of y in a base set; fails if y is outside the window or the base is not declared.
    pub fn member(&self, base: &str, y: usize) -> Result<bool> {
        let b = self.base(base)?;
        self.has(b, y)
    }

    /// Resolve a declared base set once, for repeated queries through `has`.
    pub fn base(&self, base: &str) -> Result<BaseRef<'a>> {
        if !self.allowed.iter().any(|b| b == base) {
            return Err(Error::UnknownBase(base.to_string()));
        }
        self.sets.get(base).map(BaseRef).ok_or_else(|| Error::UnknownBase(base.to_string()))
    }

    pub fn has(&self, base: BaseRef<'_>, y: usize) -> Result<bool> {
        if !self.contains_point(y) {
            return Err(Error::InsufficientWindow(format!(
                "query at {y} outside B({}, {})",
                self.center, self.radius
            )));
        }
        Ok(base.0.contains(y))
    }

    pub fn sub_window(&self, center: usize, radius: u32, allowed: &'a [String]) -> Result<Window<'a>> {
        Window::build(self.action, center, radius, self.sets, allowed, Some(self))
    }
}

/// A base set resolved inside a window.
#[derive(Clone, Copy)]
pub struct BaseRef<'a>(&'a VertexSet);

pub trait WindowProcedure: Send + Sync {
    fn decide(&self, w: &Window<'_>) -> Result<bool>;
}

/// Registered base sets and windowed procedures.
#[derive(Default, Clone)]
pub struct Registry {
    sets: BTreeMap<String, VertexSet>,
    procs: BTreeMap<String, Arc<dyn WindowProcedure>>,
    certs: BTreeMap<String, LocalityCertificate>,
}

struct Identity;
impl WindowProcedure for Identity {
    fn decide(&self, w: &Window<'_>) -> Result<bool> {
        w.member(&w.allowed[0], w.center)
    }
}

struct OuterBoundary;
impl WindowProcedure for OuterBoundary {
    fn decide(&self, w: &Window<'_>) -> Result<bool> {
        let base = &w.allowed[0];
        if w.member(base, w.center)? {
            return Ok(false);
        }
        for y in w.action.neighbors(w.center) {
            if w.member(base, y)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

struct InnerBoundary;
impl WindowProcedure for InnerBoundary {
    fn decide(&self, w: &Window<'_>) -> Result<bool> {
        let base = &w.allowed[0];
        if !w.member(base, w.center)? {
            return Ok(false);
        }
        for y in w.action.neighbors(w.center) {
            if !w.member(base, y)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Combination {
    Union,
    Intersection,
    /// First set minus all the others.
    Difference,
    Complement,
    /// B(·, q) of a single set.
    Dilate(u32),
}

impl Combination {
    fn radius(&self) -> u32 {
        match self {
            Combination::Dilate(q) => *q,
            _ => 0,
        }
    }
}

struct Composite {
    how: Combination,
    children: Vec<(LocalityCertificate, Arc<dyn WindowProcedure>)>,
}

impl WindowProcedure for Composite {
    fn decide(&self, w: &Window<'_>) -> Result<bool> {
        let eval = |i: usize, at: usize| -> Result<bool> {
            let (cert, p) = &self.children[i];
            let sub = w.sub_window(at, cert.radius, &cert.bases)?;
            p.decide(&sub)
        };
        match &self.how {
            Combination::Union => {
                for i in 0..self.children.len() {
                    if eval(i, w.center)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Combination::Intersection => {
                for i in 0..self.children.len() {
                    if !eval(i, w.center)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Combination::Difference => {
                if !eval(0, w.center)? {
                    return Ok(false);
                }
                for i in 1..self.children.len() {
                    if eval(i, w.center)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Combination::Complement => Ok(!eval(0, w.center)?),
            Combination::Dilate(q) => {
                for (y, _) in w.action.ball_of(w.center, *q) {
                    if eval(0, y)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalityReport {
    pub pass: bool,
    pub checked: usize,
    pub radius: u32,
    pub procedure: String,
    pub witness: Option<usize>,
    pub error: Option<String>,
}

impl Registry {
    pub fn new() -> Self {
        let mut r = Registry::default();
        r.register_procedure("identity", Arc::new(Identity));
        r.register_procedure("outer_boundary", Arc::new(OuterBoundary));
        r.register_procedure("inner_boundary", Arc::new(InnerBoundary));
        r
    }

    pub fn register_set(&mut self, id: &str, set: VertexSet) {
        self.sets.insert(id.to_string(), set);
    }

    pub fn set(&self, id: &str) -> Option<&VertexSet> {
        self.sets.get(id)
    }

    pub fn register_procedure(&mut self, id: &str, p: Arc<dyn WindowProcedure>) {
        self.procs.insert(id.to_string(), p);
    }

    /// Remember a certificate under a name so reports can list it.
    pub fn register_certificate(&mut self, name: &str, cert: LocalityCertificate) {
        self.certs.insert(name.to_string(), cert);
    }

    pub fn certificates(&self) -> &BTreeMap<String, LocalityCertificate> {
        &self.certs
    }

    fn resolve(&self, cert: &LocalityCertificate) -> Result<Arc<dyn WindowProcedure>> {
        for b in &cert.bases {
            if !self.sets.contains_key(b) {
                return Err(Error::UnknownBase(b.clone()));
            }
        }
        self.procs.get(&cert.procedure).cloned().ok_or_else(|| Error::UnknownProcedure(cert.procedure.clone()))
    }

    /// Membership of x recomputed from the window B(x, radius).
    pub fn decide(&self, action: &TorusAction, cert: &LocalityCertificate, x: usize) -> Result<bool> {
        let p = self.resolve(cert)?;
        let w = Window::build(action, x, cert.radius, &self.sets, &cert.bases, None)?;
        p.decide(&w)
    }

    /// Certificate for a Boolean combination (or dilation) of certified sets.
    pub fn compose_certs(&mut self, certs: &[LocalityCertificate], how: Combination) -> Result<LocalityCertificate> {
        let arity_ok = match how {
            Combination::Complement | Combination::Dilate(_) => certs.len() == 1,
            _ => !certs.is_empty(),
        };
        if !arity_ok {
            return Err(Error::Precondition(format!("{how:?} got {} certificates", certs.len())));
        }
        let mut children = Vec::new();
        let mut bases: Vec<String> = Vec::new();
        for c in certs {
            children.push((c.clone(), self.resolve(c)?));
            for b in &c.bases {
                if !bases.contains(b) {
                    bases.push(b.clone());
                }
            }
        }
        let radius = certs.iter().map(|c| c.radius).max().unwrap_or(0) + how.radius();
        let id = format!(
            "{:?}[{}]",
            how,
            certs.iter().map(|c| format!("{}@{}", c.procedure, c.radius)).collect::<Vec<_>>().join(",")
        );
        self.register_procedure(&id, Arc::new(Composite { how, children }));
        Ok(LocalityCertificate { radius, bases, procedure: id })
    }

    /// Recompute membership from windows on `samples` points (all points when samples ≥ |X|).
    pub fn check_local(
        &self,
        action: &TorusAction,
        target: &VertexSet,
        cert: &LocalityCertificate,
        samples: usize,
        seed: u64,
    ) -> Result<LocalityReport> {
        let p = self.resolve(cert)?;
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
            radius: cert.radius,
            procedure: cert.procedure.clone(),
            witness: None,
            error: None,
        };
        for x in points {
            report.checked += 1;
            let verdict = Window::build(action, x, cert.radius, &self.sets, &cert.bases, None).and_then(|w| p.decide(&w));
            match verdict {
                Ok(b) if b == target.contains(x) => {}
                Ok(_) => {
                    report.pass = false;
                    report.witness = Some(x);
                    break;
                }
                Err(e) => {
                    report.pass = false;
                    report.witness = Some(x);
                    report.error = Some(e.to_string());
                    break;
                }
            }
        }
        Ok(report)
    }
}

pub fn base_cert(id: &str) -> LocalityCertificate {
    LocalityCertificate { radius: 0, bases: vec![id.to_string()], procedure: "identity".into() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(a: &TorusAction, lo: u32, hi: u32) -> VertexSet {
        VertexSet::from_fn(a.size(), |x| a.coords(x).iter().all(|&c| (lo..hi).contains(&c)))
    }

    #[test]
    fn identity_and_boundary() {
        let a = TorusAction::standard(2, 16).unwrap();
        let r = square(&a, 3, 8);
        let mut reg = Registry::new();
        reg.register_set("R", r.clone());
        let id = base_cert("R");
        assert!(reg.check_local(&a, &r, &id, usize::MAX, 0).unwrap().pass);
        let ob = LocalityCertificate { radius: 1, bases: vec!["R".into()], procedure: "outer_boundary".into() };
        assert!(reg.check_local(&a, &a.outer_boundary(&r), &ob, usize::MAX, 0).unwrap().pass);
        let small = LocalityCertificate { radius: 0, ..ob };
        let rep = reg.check_local(&a, &a.outer_boundary(&r), &small, usize::MAX, 0).unwrap();
        assert!(!rep.pass && rep.error.is_some());
    }

    #[test]
    fn global_property_is_not_local() {
        // two orbits (even and odd columns); "orbit of the origin" needs the whole orbit
        let a = TorusAction::new(2, 16, vec![vec![2, 0], vec![0, 1]], 3).unwrap();
        assert_eq!(a.num_orbits(), 2);
        let target = a.orbits()[a.orbit_id(0)].clone();
        let marker = VertexSet::from_indices(a.size(), [0]);
        let mut reg = Registry::new();
        reg.register_set("origin", marker);
        let cert = base_cert("origin");
        let grown = reg.compose_certs(&[cert], Combination::Dilate(3)).unwrap();
        let rep = reg.check_local(&a, &target, &grown, 200, 7).unwrap();
        assert!(!rep.pass);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn composition_radii() {
        let a = TorusAction::standard(2, 16).unwrap();
        let r = square(&a, 2, 6);
        let s = square(&a, 5, 11);
        let mut reg = Registry::new();
        reg.register_set("R", r.clone());
        reg.register_set("S", s.clone());
        let (cr, cs) = (base_cert("R"), base_cert("S"));
        let u = reg.compose_certs(&[cr.clone(), cs.clone()], Combination::Union).unwrap();
        assert_eq!(u.radius, 0);
        assert!(reg.check_local(&a, &r.union(&s), &u, usize::MAX, 0).unwrap().pass);
        let c = reg.compose_certs(std::slice::from_ref(&u), Combination::Complement).unwrap();
        assert_eq!(c.radius, 0);
        assert!(reg.check_local(&a, &r.union(&s).complement(), &c, usize::MAX, 0).unwrap().pass);
        let ob = LocalityCertificate { radius: 1, bases: vec!["R".into()], procedure: "outer_boundary".into() };
        let b = reg.compose_certs(&[ob], Combination::Dilate(1)).unwrap();
        assert_eq!(b.radius, 2);
        assert!(reg.check_local(&a, &a.ball(&a.outer_boundary(&r), 1), &b, usize::MAX, 0).unwrap().pass);
        let diff = reg.compose_certs(&[cr, cs], Combination::Difference).unwrap();
        assert!(reg.check_local(&a, &r.difference(&s), &diff, 50, 3).unwrap().pass);
    }

    #[test]
    fn unknown_ids_rejected() {
        let a = TorusAction::standard(2, 8).unwrap();
        let reg = Registry::new();
        let e = reg.check_local(&a, &VertexSet::empty(64), &base_cert("missing"), 1, 0);
        assert!(matches!(e, Err(Error::UnknownBase(_))));
        let mut reg = Registry::new();
        reg.register_set("R", VertexSet::empty(64));
        let bad = LocalityCertificate { radius: 0, bases: vec!["R".into()], procedure: "nope".into() };
        assert!(matches!(reg.check_local(&a, &VertexSet::empty(64), &bad, 1, 0), Err(Error::UnknownProcedure(_))));
    }
}
