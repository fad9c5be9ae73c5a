use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::CliError;
use crate::asdim::{verify_rainbow_toast, verify_witness, AsdimWitness, RainbowToast};
use crate::decomp::{verify_bgd, verify_toast, Bgd, Toast};
use crate::equidecomp::{verify_equidecomposition, Equidecomposition, Grid, Shape};
use crate::flows::{approx_flows, verify_rounded, AuditLog, DecayRow, Divergence, DyadicFlow};
use crate::grid_graph::{ActionSpec, Edge, TorusAction};
use crate::render::{self, Rgb};
use crate::vertex_set::VertexSet;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Payload {
    Shapes { a: Shape, b: Shape },
    Witness { witness: AsdimWitness },
    Rainbow { rainbow: RainbowToast },
    Bgd { bgd: Bgd },
    Toast { toast: Toast },
    Flows { divergence: Divergence, decay: Vec<DecayRow> },
    Rounded { divergence: Divergence, toast: Toast, psi: DyadicFlow, log: AuditLog },
    Equidecomposition { a: VertexSet, b: VertexSet, equidecomposition: Equidecomposition },
}

/// A serialized construction together with the action it lives on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Artifact {
    pub schema: u32,
    pub action: ActionSpec,
    #[serde(flatten)]
    pub payload: Payload,
}

impl Artifact {
    pub fn new(action: &TorusAction, payload: Payload) -> Self {
        Artifact { schema: 1, action: action.spec().clone(), payload }
    }

    pub fn kind(&self) -> &'static str {
        match self.payload {
            Payload::Shapes { .. } => "shapes",
            Payload::Witness { .. } => "witness",
            Payload::Rainbow { .. } => "rainbow",
            Payload::Bgd { .. } => "bgd",
            Payload::Toast { .. } => "toast",
            Payload::Flows { .. } => "flows",
            Payload::Rounded { .. } => "rounded",
            Payload::Equidecomposition { .. } => "equidecomposition",
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let a: Artifact =
            serde_json::from_str(&text).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))?;
        if a.schema != 1 {
            return Err(CliError::Artifact(format!("unsupported schema {}", a.schema)));
        }
        Ok(a)
    }

    fn universe_ok(&self, action: &TorusAction) -> Result<(), CliError> {
        let n = action.size();
        let sets: Vec<&VertexSet> = match &self.payload {
            Payload::Shapes { a, b } => vec![&a.pixels, &b.pixels],
            Payload::Witness { witness } => witness.colors.iter().collect(),
            Payload::Rainbow { rainbow } => rainbow.layers.iter().flatten().collect(),
            Payload::Bgd { bgd } => bgd.layers.iter().chain([&bgd.stationary_tail]).collect(),
            Payload::Toast { toast } | Payload::Rounded { toast, .. } => toast.layers.iter().collect(),
            Payload::Flows { .. } => Vec::new(),
            Payload::Equidecomposition { a, b, .. } => vec![a, b],
        };
        if sets.iter().any(|s| s.universe() != n) {
            return Err(CliError::Artifact(format!("a vertex set does not range over the {n} grid points")));
        }
        Ok(())
    }

    /// Re-run the matching verifier; returns (pass, report).
    pub fn verify(&self) -> Result<(bool, Value), CliError> {
        let action = TorusAction::from_spec(self.action.clone())?;
        self.universe_ok(&action)?;
        let grid = Grid::of(&action);
        Ok(match &self.payload {
            Payload::Shapes { a, b } => {
                let ra = Shape::new(grid, a.pixels.clone(), a.label);
                let rb = Shape::new(grid, b.pixels.clone(), b.label);
                let pass = ra == *a && rb == *b && a.count() == b.count();
                (pass, json!({ "pass": pass, "pixels": [a.count(), b.count()], "boundaries_match": ra == *a && rb == *b }))
            }
            Payload::Witness { witness } => {
                let r = verify_witness(&action, witness);
                (r.pass, serde_json::to_value(&r).expect("serializes"))
            }
            Payload::Rainbow { rainbow } => {
                let r = verify_rainbow_toast(&action, rainbow);
                (r.pass, serde_json::to_value(&r).expect("serializes"))
            }
            Payload::Bgd { bgd } => {
                let r = verify_bgd(&action, bgd);
                (r.pass, serde_json::to_value(&r).expect("serializes"))
            }
            Payload::Toast { toast } => {
                let r = verify_toast(&action, toast);
                (r.pass, serde_json::to_value(&r).expect("serializes"))
            }
            Payload::Flows { divergence, decay } => {
                let m_max = decay.len().saturating_sub(1) as u32;
                let f = approx_flows(&action, divergence, m_max)?;
                let same = f.decay == *decay;
                let monotone = decay.windows(2).all(|w| w[1].out_error <= w[0].out_error);
                (same && monotone, json!({ "pass": same && monotone, "decay_reproduced": same, "monotone": monotone }))
            }
            Payload::Rounded { divergence, toast, psi, log } => {
                let r = verify_rounded(&action, psi, divergence, toast, log, None)?;
                (r.pass, serde_json::to_value(&r).expect("serializes"))
            }
            Payload::Equidecomposition { a, b, equidecomposition } => {
                if equidecomposition.grid != grid {
                    return Err(CliError::Artifact("equidecomposition grid differs from the action".into()));
                }
                let r = verify_equidecomposition(equidecomposition, a, b);
                (r.pass, serde_json::to_value(&r).expect("serializes"))
            }
        })
    }

    /// PPM images as (suffix, bytes); two-dimensional grids only.
    pub fn render(&self) -> Result<Vec<(String, Vec<u8>)>, CliError> {
        let action = TorusAction::from_spec(self.action.clone())?;
        self.universe_ok(&action)?;
        if action.k() != 2 {
            return Err(CliError::Core(crate::Error::Precondition("rendering needs k = 2".into())));
        }
        let n = action.n() as usize;
        let paint = |sets: &[&VertexSet], first: bool| -> Vec<Rgb> {
            (0..n * n)
                .map(|x| {
                    let mut hit = sets.iter().enumerate().filter(|(_, s)| s.contains(x)).map(|(i, _)| i);
                    let i = if first { hit.next() } else { hit.next_back() };
                    i.map(render::layer_colour).unwrap_or(render::WHITE)
                })
                .collect()
        };
        let img = |px: Vec<Rgb>| render::ppm(n, n, &px).map_err(CliError::Core);
        let mut out = Vec::new();
        match &self.payload {
            Payload::Shapes { a, b } => {
                let px = (0..n * n)
                    .map(|x| match (a.pixels.contains(x), b.pixels.contains(x)) {
                        (true, true) => render::layer_colour(2),
                        (true, false) => render::layer_colour(0),
                        (false, true) => render::layer_colour(1),
                        _ => render::WHITE,
                    })
                    .collect();
                out.push(("shapes".to_string(), img(px)?));
            }
            Payload::Witness { witness } => {
                out.push(("witness".into(), img(paint(&witness.colors.iter().collect::<Vec<_>>(), true))?));
            }
            Payload::Rainbow { rainbow } => {
                for l in 1..=rainbow.n_max() {
                    let sets: Vec<&VertexSet> = rainbow.layer(l).iter().collect();
                    out.push((format!("rainbow_{l}"), img(paint(&sets, true))?));
                }
            }
            Payload::Bgd { bgd } => {
                out.push(("bgd".into(), img(paint(&bgd.layers.iter().collect::<Vec<_>>(), false))?));
            }
            Payload::Toast { toast } => {
                out.push(("toast".into(), img(paint(&toast.layers.iter().collect::<Vec<_>>(), true))?));
            }
            Payload::Rounded { toast, psi, .. } => {
                out.push(("toast".into(), img(paint(&toast.layers.iter().collect::<Vec<_>>(), true))?));
                let mut mag = vec![0i64; n * n];
                for x in 0..n * n {
                    for g in 0..action.num_gens() {
                        mag[x] = mag[x].max(psi.get(&action, Edge { from: x, gen: g }).abs() >> psi.exp);
                    }
                }
                let top = mag.iter().copied().max().unwrap_or(0).max(1);
                let px = mag.iter().map(|&m| {
                    let v = 255 - (m * 255 / top) as u8;
                    [v, v, 255]
                });
                out.push(("flow".into(), img(px.collect())?));
            }
            Payload::Flows { divergence, .. } => {
                let px = divergence
                    .c
                    .iter()
                    .map(|&v| match v.signum() {
                        1 => render::layer_colour(0),
                        -1 => render::layer_colour(1),
                        _ => render::WHITE,
                    })
                    .collect();
                out.push(("divergence".into(), img(px)?));
            }
            Payload::Equidecomposition { equidecomposition, .. } => {
                out.push(("pieces".into(), equidecomposition.to_ppm(false)?));
                out.push(("pieces_b".into(), equidecomposition.to_ppm(true)?));
            }
        }
        Ok(out)
    }
}
