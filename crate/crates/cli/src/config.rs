//! Pipeline configuration: a small line-based key-value format in which
//! every numeral is kept as an exact decimal string and converted outward
//! to intervals only inside the computation.
//!
//! Example:
//! ```text
//! name = paper
//! grid = 4 4 2
//! cube = 0.25
//! hole = 1 1 0
//! hole = 1 1 1
//! eps = 0.25
//! degrees = 3 2 2
//! f.x = 15:0,0,0 -30:0,1,0 15:0,2,0
//! f.z = 10:0,0,2
//! eig_levels = 2
//! ```

use nsverify_core::error::{Error, Result};
use nsverify_core::mesh::BlockDomain;
use nsverify_core::rat::{rat_from_decimal, Rat};
use nsverify_core::spaces::PolySpec;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub name: String,
    pub grid: (usize, usize, usize),
    /// Cube edge length, exact decimal.
    pub cube: String,
    pub holes: Vec<(usize, usize, usize)>,
    /// Viscosity, exact decimal.
    pub eps: String,
    /// Body force, per component: (coefficient decimal, powers of x, y, z).
    pub f: [Vec<(String, [u8; 3])>; 3],
    /// Velocity, pressure, flux-index degrees (k, d, m).
    pub degrees: (u8, u8, u8),
    /// Refinement levels for the eigenvalue stage.
    pub eig_levels: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// de Casteljau depth for sup-norm bounds.
    pub sup_depth: usize,
    /// Optional externally supplied averaging constant (exact decimal).
    pub c0h_override: Option<String>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            name: "unnamed".into(),
            grid: (1, 1, 1),
            cube: "1".into(),
            holes: Vec::new(),
            eps: "1".into(),
            f: Default::default(),
            degrees: (3, 2, 2),
            eig_levels: 1,
            newton_tol: 1e-12,
            newton_max_iter: 30,
            sup_depth: 3,
            c0h_override: None,
            cache_dir: None,
        }
    }
}

impl PipelineConfig {
    /// The published example: ((0,1)^2 minus [1/4,1/2]^2) x (0,1/2),
    /// f = (15(1-y)^2, 0, 10 z^2), eps = 1/4, degrees (3, 2, 2).
    pub fn paper_example() -> Self {
        PipelineConfig {
            name: "paper-example".into(),
            grid: (4, 4, 2),
            cube: "0.25".into(),
            holes: vec![(1, 1, 0), (1, 1, 1)],
            eps: "0.25".into(),
            f: [
                vec![
                    ("15".into(), [0, 0, 0]),
                    ("-30".into(), [0, 1, 0]),
                    ("15".into(), [0, 2, 0]),
                ],
                vec![],
                vec![("10".into(), [0, 0, 2])],
            ],
            degrees: (3, 2, 2),
            eig_levels: 2,
            // the paper-supplied averaging constant for reproduction runs
            c0h_override: Some("0.0625".into()),
            ..Default::default()
        }
    }

    /// Desk-scale single-cube-hole variant for quick full-pipeline runs.
    pub fn desk() -> Self {
        PipelineConfig {
            name: "desk".into(),
            grid: (3, 3, 1),
            cube: "0.25".into(),
            holes: vec![(1, 1, 0)],
            eps: "0.25".into(),
            f: [
                vec![
                    ("15".into(), [0, 0, 0]),
                    ("-30".into(), [0, 1, 0]),
                    ("15".into(), [0, 2, 0]),
                ],
                vec![],
                vec![("10".into(), [0, 0, 2])],
            ],
            degrees: (3, 2, 2),
            eig_levels: 2,
            sup_depth: 3,
            ..Default::default()
        }
    }

    pub fn domain(&self) -> Result<BlockDomain> {
        let cube: Rat = rat_from_decimal(&self.cube)?;
        let mut d = BlockDomain::full(self.grid.0, self.grid.1, self.grid.2, cube);
        for &(x, y, z) in &self.holes {
            if x >= self.grid.0 || y >= self.grid.1 || z >= self.grid.2 {
                return Err(Error::Config(format!("hole ({x},{y},{z}) outside grid")));
            }
            d.set(x, y, z, false);
        }
        d.validate()?;
        Ok(d)
    }

    pub fn eps_interval(&self) -> Result<nsverify_core::Interval> {
        nsverify_core::Interval::from_decimal(&self.eps)
    }

    pub fn poly_spec(&self) -> Result<PolySpec> {
        let mut spec = PolySpec::default();
        for c in 0..3 {
            for (coef, pows) in &self.f[c] {
                spec.comps[c].push((rat_from_decimal(coef)?, *pows));
            }
        }
        Ok(spec)
    }

    /// Canonical text form (also the on-disk format).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "grid = {} {} {}", self.grid.0, self.grid.1, self.grid.2);
        let _ = writeln!(s, "cube = {}", self.cube);
        for h in &self.holes {
            let _ = writeln!(s, "hole = {} {} {}", h.0, h.1, h.2);
        }
        let _ = writeln!(s, "eps = {}", self.eps);
        let _ = writeln!(s, "degrees = {} {} {}", self.degrees.0, self.degrees.1, self.degrees.2);
        for (c, name) in ["x", "y", "z"].iter().enumerate() {
            if self.f[c].is_empty() {
                continue;
            }
            let terms: Vec<String> = self.f[c]
                .iter()
                .map(|(v, p)| format!("{}:{},{},{}", v, p[0], p[1], p[2]))
                .collect();
            let _ = writeln!(s, "f.{} = {}", name, terms.join(" "));
        }
        let _ = writeln!(s, "eig_levels = {}", self.eig_levels);
        let _ = writeln!(s, "newton_tol = {:e}", self.newton_tol);
        let _ = writeln!(s, "newton_max_iter = {}", self.newton_max_iter);
        let _ = writeln!(s, "sup_depth = {}", self.sup_depth);
        if let Some(c) = &self.c0h_override {
            let _ = writeln!(s, "c0h_override = {c}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig { holes: Vec::new(), ..Default::default() };
        cfg.f = Default::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: missing '='", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            let nums = || -> Result<Vec<usize>> {
                value
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad integer in {key}"))))
                    .collect()
            };
            match key {
                "name" => cfg.name = value.to_string(),
                "grid" => {
                    let v = nums()?;
                    if v.len() != 3 {
                        return Err(Error::Parse("grid needs three integers".into()));
                    }
                    cfg.grid = (v[0], v[1], v[2]);
                }
                "cube" => cfg.cube = value.to_string(),
                "hole" => {
                    let v = nums()?;
                    if v.len() != 3 {
                        return Err(Error::Parse("hole needs three integers".into()));
                    }
                    cfg.holes.push((v[0], v[1], v[2]));
                }
                "eps" => cfg.eps = value.to_string(),
                "degrees" => {
                    let v = nums()?;
                    if v.len() != 3 {
                        return Err(Error::Parse("degrees needs three integers".into()));
                    }
                    cfg.degrees = (v[0] as u8, v[1] as u8, v[2] as u8);
                }
                "f.x" | "f.y" | "f.z" => {
                    let c = match key {
                        "f.x" => 0,
                        "f.y" => 1,
                        _ => 2,
                    };
                    for term in value.split_whitespace() {
                        let (coef, pows) = term.split_once(':').ok_or_else(|| {
                            Error::Parse(format!("bad term {term:?} (want coeff:px,py,pz)"))
                        })?;
                        let p: Vec<u8> = pows
                            .split(',')
                            .map(|t| t.parse().map_err(|_| Error::Parse("bad power".into())))
                            .collect::<Result<_>>()?;
                        if p.len() != 3 {
                            return Err(Error::Parse("powers need px,py,pz".into()));
                        }
                        rat_from_decimal(coef)?; // validate now
                        cfg.f[c].push((coef.to_string(), [p[0], p[1], p[2]]));
                    }
                }
                "eig_levels" => {
                    cfg.eig_levels =
                        value.parse().map_err(|_| Error::Parse("bad eig_levels".into()))?
                }
                "newton_tol" => {
                    cfg.newton_tol =
                        value.parse().map_err(|_| Error::Parse("bad newton_tol".into()))?
                }
                "newton_max_iter" => {
                    cfg.newton_max_iter =
                        value.parse().map_err(|_| Error::Parse("bad newton_max_iter".into()))?
                }
                "sup_depth" => {
                    cfg.sup_depth =
                        value.parse().map_err(|_| Error::Parse("bad sup_depth".into()))?
                }
                "c0h_override" => cfg.c0h_override = Some(value.to_string()),
                other => return Err(Error::Parse(format!("unknown key {other:?}"))),
            }
        }
        Ok(cfg)
    }

    /// Stable content hash of a list of config fields (cache keys).
    pub fn hash_fields(parts: &[&str]) -> String {
        // FNV-1a 64-bit, printed as hex; deterministic across runs
        let mut h: u64 = 0xcbf29ce484222325;
        for p in parts {
            for b in p.bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    pub fn mesh_key(&self) -> String {
        Self::hash_fields(&[
            &format!("{:?}", self.grid),
            &self.cube,
            &format!("{:?}", self.holes),
        ])
    }

    pub fn spaces_key(&self) -> String {
        Self::hash_fields(&[&self.mesh_key(), &format!("{:?}", self.degrees)])
    }

    pub fn approx_key(&self) -> String {
        Self::hash_fields(&[
            &self.spaces_key(),
            &self.eps,
            &format!("{:?}", self.f),
            &format!("{:e}", self.newton_tol),
            &format!("{}", self.newton_max_iter),
        ])
    }

    pub fn eig_key(&self) -> String {
        Self::hash_fields(&[&self.mesh_key(), &format!("{}", self.eig_levels)])
    }

    pub fn kappa_key(&self) -> String {
        self.spaces_key()
    }

    pub fn correct_key(&self) -> String {
        Self::hash_fields(&[&self.approx_key(), &format!("{}", self.sup_depth)])
    }

    pub fn certificate_key(&self) -> String {
        Self::hash_fields(&[&self.to_text()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let cfg = PipelineConfig::paper_example();
        let text = cfg.to_text();
        let back = PipelineConfig::from_text(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.domain().unwrap().cube_count(), 30);
    }

    #[test]
    fn cache_keys_separate_fields() {
        let a = PipelineConfig::paper_example();
        let mut b = a.clone();
        b.eps = "0.5".into();
        // eps change invalidates approx but not mesh/spaces/eig/kappa
        assert_eq!(a.mesh_key(), b.mesh_key());
        assert_eq!(a.spaces_key(), b.spaces_key());
        assert_eq!(a.eig_key(), b.eig_key());
        assert_eq!(a.kappa_key(), b.kappa_key());
        assert_ne!(a.approx_key(), b.approx_key());
        let mut c = a.clone();
        c.eig_levels = 1;
        assert_ne!(a.eig_key(), c.eig_key());
        assert_eq!(a.approx_key(), c.approx_key());
    }
}
