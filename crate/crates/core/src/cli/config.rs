use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::equidecomp::{Grid, ShapeKind};
use crate::error::{Error, Result};
use crate::grid_graph::TorusAction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToastSource {
    /// rainbow toast → BGD → toast
    Pipeline,
    /// hand-made grid-line BGD → toast
    GridLines,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeConfig {
    pub a: ShapeKind,
    pub b: ShapeKind,
    /// Square side; the disk gets side^k pixels too. Defaults to N/4.
    pub side: Option<u32>,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig { a: ShapeKind::Disk, b: ShapeKind::Square, side: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub n: u32,
    pub k: usize,
    pub d: usize,
    /// Translation vectors t_1..t_d; empty means the unit axes (needs d = k).
    pub translations: Vec<Vec<i64>>,
    /// Relation-free radius; derived as (N−1)/2 for unit axes when absent.
    #[serde(rename = "R_free")]
    pub r_free: Option<u32>,
    pub q: u32,
    /// Nearness scale; q(d+3) when absent.
    #[serde(rename = "Q")]
    pub q_big: Option<u32>,
    /// Scale r of the stand-alone asymptotic-dimension witness.
    pub witness_scale: u32,
    /// Rainbow toast depth n_max.
    pub toast_depth: u32,
    pub toast_source: ToastSource,
    /// Grid-line pitch; N/2 when absent.
    pub grid_pitch: Option<u32>,
    /// Largest dyadic cube exponent for approximate flows; log2 N when absent.
    pub m_max: Option<u32>,
    pub seed: u64,
    /// Sampled points per locality certificate (all points with --verify-exhaustive).
    pub locality_samples: usize,
    /// Sampled edges for flow and rounding locality checks.
    pub edge_samples: usize,
    pub shape: ShapeConfig,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 128,
            k: 2,
            d: 2,
            translations: Vec::new(),
            r_free: None,
            q: 2,
            q_big: None,
            witness_scale: 2,
            toast_depth: 3,
            toast_source: ToastSource::Pipeline,
            grid_pitch: None,
            m_max: None,
            seed: 0,
            locality_samples: 256,
            edge_samples: 16,
            shape: ShapeConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Precondition(format!("config {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Multiplicity bound: d + 2 for the pipeline, 2 for the two grid-line layers.
    pub fn p(&self) -> u32 {
        match self.toast_source {
            ToastSource::Pipeline => self.d as u32 + 2,
            ToastSource::GridLines => 2,
        }
    }

    pub fn q_big(&self) -> u32 {
        self.q_big.unwrap_or(self.q * (self.d as u32 + 3))
    }

    pub fn m_max(&self) -> u32 {
        self.m_max.unwrap_or(self.n.max(1).ilog2())
    }

    pub fn side(&self) -> u32 {
        self.shape.side.unwrap_or(self.n / 4)
    }

    pub fn pitch(&self) -> u32 {
        self.grid_pitch.unwrap_or(self.n / 2)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.k, self.n)
    }

    /// Checks the invariants shared by every command; `flows` adds the power-of-two requirement.
    pub fn validate(&self, flows: bool) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Precondition("q must be at least 1".into()));
        }
        let (p, qb) = (self.p(), self.q_big());
        if self.q * (p + 1) > qb {
            return Err(Error::Precondition(format!(
                "q(P+1) ≤ Q fails: q = {}, P = {p}, Q = {qb}",
                self.q
            )));
        }
        if self.translations.is_empty() && self.d != self.k {
            return Err(Error::Precondition(format!("unit translations need d = k (d = {}, k = {})", self.d, self.k)));
        }
        if !self.translations.is_empty() && self.translations.len() != self.d {
            return Err(Error::Precondition(format!("{} translations given for d = {}", self.translations.len(), self.d)));
        }
        if flows && !self.n.is_power_of_two() {
            return Err(Error::Precondition(format!("flows need N to be a power of two, got {}", self.n)));
        }
        Ok(())
    }

    pub fn action(&self) -> Result<TorusAction> {
        if self.translations.is_empty() {
            let mut a = TorusAction::standard(self.k, self.n)?;
            if let Some(r) = self.r_free {
                a = TorusAction::new(self.k, self.n, a.spec().translations.clone(), r)?;
            }
            Ok(a)
        } else {
            let r = self.r_free.ok_or_else(|| Error::Precondition("R_free is required with explicit translations".into()))?;
            TorusAction::new(self.k, self.n, self.translations.clone(), r)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.q_big(), 10);
        assert!(c.validate(true).is_ok());
    }

    #[test]
    fn q_bound_is_named() {
        let c: RunConfig = toml::from_str("q = 3\nQ = 10\n").unwrap();
        let e = c.validate(false).unwrap_err().to_string();
        assert!(e.contains("q(P+1) ≤ Q"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("bogus = 1\n").is_err());
        let c: RunConfig = toml::from_str("N = 96\n[shape]\nside = 20\n").unwrap();
        assert_eq!((c.n, c.side()), (96, 20));
        assert!(c.validate(true).is_err());
    }
}
