use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::artifact::{Artifact, Payload};
use super::config::{RunConfig, ToastSource};
use super::CliError;
use crate::asdim::{build_rainbow_toast, shifted_cube_witness, verify_rainbow_toast, verify_witness, RainbowToast};
use crate::decomp::{
    bgd_from_rainbow, global_membership, grid_line_bgd, register_toast_locality, stage_summary, toast_from_bgd,
    verify_bgd, verify_toast, Bgd, Hierarchy, Toast,
};
use crate::equidecomp::{
    default_scales, flow_to_pieces, minkowski_estimate, rasterize, verify_equidecomposition, Equidecomposition, Label,
    Shape,
};
use crate::flows::{approx_flows, check_flow_locality, round_flows, verify_rounded, ApproxFlows, Divergence, Phase, RoundOptions, Rounding};
use crate::grid_graph::TorusAction;
use crate::locality::{LocalityReport, Registry};

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub config: RunConfig,
    pub pass: bool,
    pub stages: BTreeMap<String, Value>,
    pub timing_ms: BTreeMap<String, u64>,
}

/// One run: stages compute on demand and cache, each adding its section to the report.
pub struct Session {
    pub cfg: RunConfig,
    pub action: TorusAction,
    pub exhaustive: bool,
    pub report: Report,
    pub artifacts: Vec<Artifact>,
    shapes: Option<(Shape, Shape)>,
    rainbow: Option<RainbowToast>,
    bgd: Option<Bgd>,
    toast: Option<Toast>,
    flows: Option<(Divergence, ApproxFlows)>,
    rounding: Option<Rounding>,
    pieces: Option<Equidecomposition>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn locality_json(name: &str, r: &LocalityReport) -> Value {
    json!({ "certificate": name, "radius": r.radius, "checked": r.checked, "pass": r.pass, "witness": r.witness, "error": r.error })
}

impl Session {
    pub fn new(command: &str, cfg: RunConfig, exhaustive: bool, flows: bool) -> Result<Self, CliError> {
        cfg.validate(flows)?;
        let action = cfg.action()?;
        let report = Report {
            schema: 1,
            command: command.to_string(),
            config: cfg.clone(),
            pass: true,
            stages: BTreeMap::new(),
            timing_ms: BTreeMap::new(),
        };
        Ok(Session {
            cfg,
            action,
            exhaustive,
            report,
            artifacts: Vec::new(),
            shapes: None,
            rainbow: None,
            bgd: None,
            toast: None,
            flows: None,
            rounding: None,
            pieces: None,
        })
    }

    fn stage(&mut self, name: &str, start: Instant, pass: bool, body: Value) -> Result<(), CliError> {
        self.report.timing_ms.insert(name.to_string(), start.elapsed().as_millis() as u64);
        self.report.stages.insert(name.to_string(), body);
        if !pass {
            self.report.pass = false;
            return Err(CliError::Verification(format!("stage `{name}` failed verification")));
        }
        Ok(())
    }

    fn keep(&mut self, payload: Payload) {
        self.artifacts.push(Artifact::new(&self.action, payload));
    }

    fn samples(&self) -> usize {
        if self.exhaustive {
            usize::MAX
        } else {
            self.cfg.locality_samples
        }
    }

    pub fn shapes(&mut self) -> Result<(Shape, Shape), CliError> {
        if let Some(s) = &self.shapes {
            return Ok(s.clone());
        }
        let t0 = Instant::now();
        let grid = self.cfg.grid()?;
        let target = (self.cfg.side() as usize).pow(self.cfg.k as u32);
        let b = rasterize(&self.cfg.shape.b, grid, Some(target), Label::B)?;
        let a = rasterize(&self.cfg.shape.a, grid, Some(b.count()), Label::A)?;
        let scales = default_scales(self.cfg.n);
        let dims: Vec<Value> = [&a, &b]
            .iter()
            .map(|s| {
                let m = minkowski_estimate(&s.boundary, grid, &scales)?;
                Ok(json!({ "label": s.label, "pixels": s.count(), "boundary_pixels": s.boundary.count(), "boundary_dimension": m.dimension, "box_counts": m.counts }))
            })
            .collect::<Result<_, crate::Error>>()?;
        let balanced = a.count() == b.count();
        self.keep(Payload::Shapes { a: a.clone(), b: b.clone() });
        self.shapes = Some((a.clone(), b.clone()));
        self.stage("rasterize", t0, balanced, json!({ "pass": balanced, "shapes": dims, "equal_counts": balanced }))?;
        Ok((a, b))
    }

    pub fn witness(&mut self) -> Result<(), CliError> {
        let t0 = Instant::now();
        let w = shifted_cube_witness(&self.action, self.cfg.witness_scale)?;
        let rep = verify_witness(&self.action, &w);
        let pass = rep.pass;
        self.keep(Payload::Witness { witness: w });
        self.stage("witness", t0, pass, to_value(&rep))
    }

    pub fn rainbow(&mut self) -> Result<RainbowToast, CliError> {
        if let Some(r) = &self.rainbow {
            return Ok(r.clone());
        }
        let t0 = Instant::now();
        let rt = build_rainbow_toast(&self.action, self.cfg.toast_depth)?;
        let rep = verify_rainbow_toast(&self.action, &rt);
        let body = json!({
            "pass": rep.pass,
            "n_max": rt.n_max(),
            "nontrivial_depth": rep.nontrivial_depth,
            "diameter_bounds": rt.diameter_bounds,
            "failure": rep.failure,
            "layers": rep.layers,
        });
        self.keep(Payload::Rainbow { rainbow: rt.clone() });
        self.rainbow = Some(rt.clone());
        self.stage("rainbow", t0, rep.pass, body)?;
        Ok(rt)
    }

    pub fn bgd(&mut self) -> Result<Bgd, CliError> {
        if let Some(b) = &self.bgd {
            return Ok(b.clone());
        }
        let b = match self.cfg.toast_source {
            ToastSource::Pipeline => {
                let rt = self.rainbow()?;
                let t0 = Instant::now();
                let b = bgd_from_rainbow(&self.action, &rt, self.cfg.q_big())?;
                self.bgd_stage(t0, b)?
            }
            ToastSource::GridLines => {
                let t0 = Instant::now();
                let b = grid_line_bgd(&self.action, self.cfg.pitch(), self.cfg.q_big())?;
                self.bgd_stage(t0, b)?
            }
        };
        Ok(b)
    }

    fn bgd_stage(&mut self, t0: Instant, b: Bgd) -> Result<Bgd, CliError> {
        let rep = verify_bgd(&self.action, &b);
        let mut body = to_value(&rep);
        body["source"] = to_value(&self.cfg.toast_source);
        body["P"] = json!(b.p);
        body["Q"] = json!(b.q_big);
        body["layers"] = json!(b.layers.len());
        body["layer_sizes"] = json!(b.layers.iter().map(|l| l.count()).collect::<Vec<_>>());
        body["diameter_bounds"] = json!(b.diameter_bounds);
        body["radii"] = json!(b.radii);
        self.keep(Payload::Bgd { bgd: b.clone() });
        self.bgd = Some(b.clone());
        self.stage("bgd", t0, rep.pass, body)?;
        Ok(b)
    }

    pub fn toast(&mut self) -> Result<Toast, CliError> {
        if let Some(t) = &self.toast {
            return Ok(t.clone());
        }
        let b = self.bgd()?;
        let t0 = Instant::now();
        let q = self.cfg.q;
        let t = toast_from_bgd(&self.action, &b, q)?;
        let rep = verify_toast(&self.action, &t);
        let h = Hierarchy::new(&self.action, &b)?;
        let mut reg = Registry::new();
        let certs = register_toast_locality(&mut reg, &b, q, "")?;
        let samples = self.samples();
        let seed = self.cfg.seed;
        let mut loc = Vec::new();
        let mut loc_pass = true;
        for (which, cert) in &certs.procedures {
            let target = global_membership(&h, *which, q)?;
            let r = reg.check_local(&self.action, &target, cert, samples, seed)?;
            loc_pass &= r.pass;
            loc.push(locality_json(&format!("{which:?}"), &r));
        }
        for (n, cert) in certs.layers.iter().enumerate() {
            let r = reg.check_local(&self.action, &t.layers[n], cert, samples, seed)?;
            loc_pass &= r.pass;
            loc.push(locality_json(&format!("T_{n}"), &r));
            let comp = t.layers[n].complement();
            let r = reg.check_local(&self.action, &comp, &certs.complements[n], samples, seed)?;
            loc_pass &= r.pass;
            let mut v = locality_json(&format!("X∖T_{n}"), &r);
            v["degenerate"] = json!(true);
            loc.push(v);
        }
        let stages: BTreeMap<String, (usize, usize)> =
            stage_summary(&h).into_iter().map(|(s, v)| (s.to_string(), v)).collect();
        let pass = rep.pass && loc_pass;
        let body = json!({
            "pass": pass,
            "q": q,
            "clauses": rep,
            "layer_sizes": t.layers.iter().map(|l| l.count()).collect::<Vec<_>>(),
            "piece_diameter_bounds": t.piece_diameter_bounds,
            "components_by_stage": stages,
            "locality": { "mode": if self.exhaustive { "exhaustive" } else { "sampled" }, "pass": loc_pass, "checks": loc },
        });
        self.keep(Payload::Toast { toast: t.clone() });
        self.toast = Some(t.clone());
        self.stage("toast", t0, pass, body)?;
        Ok(t)
    }

    pub fn flows(&mut self) -> Result<(Divergence, ApproxFlows), CliError> {
        if let Some(f) = &self.flows {
            return Ok(f.clone());
        }
        let (a, b) = self.shapes()?;
        let t0 = Instant::now();
        let c = Divergence::from_sets(&a.pixels, &b.pixels);
        c.check_feasible(&self.action)?;
        let f = approx_flows(&self.action, &c, self.cfg.m_max())?;
        let monotone = f.decay.windows(2).all(|w| w[1].out_error <= w[0].out_error);
        let last = f.decay.last().map(|r| r.out_error.num == 0).unwrap_or(false);
        let exact_expected = f.m_max() == self.cfg.n.ilog2();
        let mut loc = Vec::new();
        let mut loc_pass = true;
        for m in 1..=f.m_max() {
            let r = check_flow_locality(&self.action, &c, &f.flows[m as usize], m, self.cfg.edge_samples, self.cfg.seed)?;
            loc_pass &= r.pass;
            loc.push(locality_json(&format!("phi_{m}"), &r));
        }
        let decay: Vec<Value> = f
            .decay
            .iter()
            .map(|r| json!({ "m": r.m, "out_error": r.out_error.to_string(), "out_error_f64": r.out_error.to_f64(), "step": r.step.map(|s| s.to_string()) }))
            .collect();
        let pass = monotone && (last || !exact_expected) && loc_pass;
        let body = json!({
            "pass": pass,
            "m_max": f.m_max(),
            "decay": decay,
            "monotone": monotone,
            "exact_at_m_max": last,
            "locality": { "pass": loc_pass, "checks": loc },
        });
        self.keep(Payload::Flows { divergence: c.clone(), decay: f.decay.clone() });
        self.flows = Some((c.clone(), f.clone()));
        self.stage("flows", t0, pass, body)?;
        Ok((c, f))
    }

    pub fn round(&mut self) -> Result<Rounding, CliError> {
        if let Some(r) = &self.rounding {
            return Ok(r.clone());
        }
        let toast = self.toast()?;
        let (c, f) = self.flows()?;
        let t0 = Instant::now();
        let r = round_flows(&self.action, &toast, &f, &c, &RoundOptions::default())?;
        let rep = verify_rounded(&self.action, &r.psi, &c, &toast, &r.log, Some((&f, self.cfg.edge_samples, self.cfg.seed)))?;
        let count = |p: Phase| r.log.entries.iter().filter(|e| e.phase == p).count();
        let mut body = to_value(&rep);
        body["max_step2_change_f64"] = json!(rep.max_step2_change.to_f64());
        body["schedule"] = json!(r.log.schedule);
        body["failed_schedules"] = json!(r.log.failed_schedules);
        body["completion_max"] = json!(r.log.completion_max);
        body["edits"] = json!({
            "init": count(Phase::Init),
            "adjust": count(Phase::Adjust),
            "round": count(Phase::Round),
            "complete": count(Phase::Complete),
        });
        self.keep(Payload::Rounded { divergence: c, toast, psi: r.psi.clone(), log: r.log.clone() });
        self.rounding = Some(r.clone());
        self.stage("round", t0, rep.pass, body)?;
        Ok(r)
    }

    pub fn square(&mut self) -> Result<Equidecomposition, CliError> {
        if let Some(e) = &self.pieces {
            return Ok(e.clone());
        }
        let (a, b) = self.shapes()?;
        let r = self.round()?;
        let t0 = Instant::now();
        let e = flow_to_pieces(&self.action, &r.psi, &a, &b)?;
        let rep = verify_equidecomposition(&e, &a.pixels, &b.pixels);
        let mut body = to_value(&rep);
        body["moved_pixels"] = json!(a.pixels.difference(&b.pixels).count());
        body["piece_sizes"] = json!(e.pieces.iter().map(|p| p.pixels.count()).collect::<Vec<_>>());
        self.keep(Payload::Equidecomposition { a: a.pixels.clone(), b: b.pixels.clone(), equidecomposition: e.clone() });
        self.pieces = Some(e.clone());
        self.stage("square", t0, rep.pass, body)?;
        Ok(e)
    }
}
