//! Certificate document (machine-readable, all bounds as decimal strings
//! that round-trip the underlying directed-rounded doubles), the
//! human-readable summary, the timing table and the raw streamline export.

use nsverify_core::error::Result;
use nsverify_core::interval::Interval;
use nsverify_core::nsolve::ApproxSolution;
use nsverify_core::polytet::BernsteinPoly;
use nsverify_core::mesh::TetMesh;
use serde::{Deserialize, Serialize};

/// Shortest round-trip decimal of an f64: reading the string back yields
/// exactly the stored bound, so directed rounding survives serialization.
pub fn format_f64(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub schema_version: u32,
    pub name: String,
    pub config_hash: String,
    pub verdict: VerdictDoc,
    pub dims: DimsDoc,
    pub constants: ConstantsDoc,
    pub girault_raviart: GrDoc,
    pub provenance: ProvenanceDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictDoc {
    /// "verified" or "failed".
    pub status: String,
    pub reason: Option<String>,
    /// Radius of the uniqueness ball, present only when verified.
    pub rho: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimsDoc {
    pub u_h0: usize,
    pub x_h0: usize,
    pub v_h: usize,
    pub rt: usize,
    pub x_h: usize,
    pub u_h: usize,
    pub sv_tets: usize,
    pub coarse_tets: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormsDoc {
    pub u_l2: [String; 2],
    pub grad_l2: [String; 2],
    pub u_sup: String,
    pub u_sup_witness: String,
    pub grad_sup: String,
    pub grad_sup_witness: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaDoc {
    pub value: String,
    pub grad_term: String,
    pub projection_term: String,
    pub moment_term: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsDoc {
    pub lambda1_lower: String,
    pub lambda1_upper: Option<String>,
    pub lambda_h1_lower: String,
    pub c_p: String,
    pub c_4p: String,
    pub g: String,
    pub kappa_h: String,
    pub c0h: String,
    pub c0h_overridden: bool,
    pub c_h: String,
    pub c_ha: String,
    pub norms: NormsDoc,
    pub nu1: String,
    pub nu2: String,
    pub nu3: String,
    pub tau: String,
    pub tau_float: String,
    pub kappa: String,
    pub k: Option<String>,
    pub delta: DeltaDoc,
    pub alpha: Option<String>,
    pub omega: Option<String>,
    pub alpha_omega: Option<String>,
    pub f_l2: [String; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrDoc {
    pub n_bound: String,
    pub f_dual: String,
    pub ratio: String,
    pub conclusive: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvenanceDoc {
    pub degrees: Vec<usize>,
    pub eig_levels: usize,
    pub sup_depth: usize,
    pub overrides: Vec<String>,
    pub newton_tol: String,
}

impl CertificateDoc {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| nsverify_core::Error::Parse(format!("certificate: {e}")))
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let c = &self.constants;
        let mut s = String::new();
        s.push_str(&format!("certificate for '{}'\n", self.name));
        s.push_str(&format!(
            "  spaces: dim U_h0 = {}, dim X_h0 = {}, dim V_h = {} ({} elements)\n",
            self.dims.u_h0, self.dims.x_h0, self.dims.v_h, self.dims.sv_tets
        ));
        s.push_str(&format!(
            "  eigenvalue: lambda_1 >= {} (discrete >= {}{})\n",
            c.lambda1_lower,
            c.lambda_h1_lower,
            match &c.lambda1_upper {
                Some(u) => format!(", upper bound {u}"),
                None => String::new(),
            }
        ));
        s.push_str(&format!(
            "  constants: C_P <= {}, C_4P <= {}, G <= {}\n",
            c.c_p, c.c_4p, c.g
        ));
        s.push_str(&format!(
            "  a priori: kappa_h <= {}, C_0h = {}{}, C_h <= {}, C_hA <= {}\n",
            c.kappa_h,
            c.c0h,
            if c.c0h_overridden { " (supplied)" } else { "" },
            c.c_h,
            c.c_ha
        ));
        s.push_str(&format!(
            "  solution norms: |u| in [{}, {}], |grad u| in [{}, {}]\n",
            c.norms.u_l2[0], c.norms.u_l2[1], c.norms.grad_l2[0], c.norms.grad_l2[1]
        ));
        s.push_str(&format!(
            "                  sup |u| <= {} (>= {}), sup |grad u| <= {} (>= {})\n",
            c.norms.u_sup, c.norms.u_sup_witness, c.norms.grad_sup, c.norms.grad_sup_witness
        ));
        s.push_str(&format!(
            "  operator bounds: nu1 <= {}, nu2 <= {}, nu3 <= {}, tau <= {}\n",
            c.nu1, c.nu2, c.nu3, c.tau
        ));
        s.push_str(&format!(
            "  contraction: kappa = {}{}\n",
            c.kappa,
            match &c.k {
                Some(k) => format!(", K <= {k}"),
                None => ", K unavailable (kappa >= 1)".into(),
            }
        ));
        s.push_str(&format!(
            "  residual: delta <= {} (terms {}, {}, {})\n",
            c.delta.value, c.delta.grad_term, c.delta.projection_term, c.delta.moment_term
        ));
        if let (Some(a), Some(w), Some(aw)) = (&c.alpha, &c.omega, &c.alpha_omega) {
            s.push_str(&format!("  existence test: alpha = {a}, omega = {w}, alpha*omega = {aw}\n"));
        }
        s.push_str(&format!(
            "  classical small-data check: ratio = {} ({})\n",
            self.girault_raviart.ratio,
            if self.girault_raviart.conclusive { "conclusive" } else { "inconclusive" }
        ));
        match self.verdict.status.as_str() {
            "verified" => s.push_str(&format!(
                "  VERDICT: verified; unique solution within radius rho = {}\n",
                self.verdict.rho.as_deref().unwrap_or("?")
            )),
            _ => s.push_str(&format!(
                "  VERDICT: failed ({})\n",
                self.verdict.reason.as_deref().unwrap_or("unknown")
            )),
        }
        s
    }
}

/// Timing table text.
pub fn timing_table(times: &[(String, f64)]) -> String {
    let mut s = String::from("stage timings\n");
    let mut total = 0.0;
    for (name, secs) in times {
        s.push_str(&format!("  {name:<16} {secs:>10.3} s\n"));
        total += secs;
    }
    s.push_str(&format!("  {:<16} {total:>10.3} s\n", "total"));
    s
}

/// Raw streamline data: element centroids with velocity midpoints,
/// one `x y z vx vy vz` row per element.
pub fn streamline_table(mesh: &TetMesh, sol: &ApproxSolution) -> String {
    let mut s = String::from("# x y z vx vy vz\n");
    let quarter = Interval::point(0.25);
    for (t, f) in sol.field.per_element.iter().enumerate() {
        let c = mesh.centroid_f64(t);
        let bary = [quarter, quarter, quarter, quarter];
        let v: Vec<f64> = (0..3)
            .map(|comp| {
                let p: &BernsteinPoly<Interval> = &f[comp];
                p.eval(&bary).mid()
            })
            .collect();
        s.push_str(&format!(
            "{} {} {} {} {} {}\n",
            c[0], c[1], c[2], v[0], v[1], v[2]
        ));
    }
    s
}
