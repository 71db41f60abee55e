//! Stage execution with on-disk caching and the final certificate build.
//!
//! Stage artifacts are keyed by a hash of exactly the config fields the
//! stage depends on, so editing a field invalidates the dependent stages
//! and nothing else. Heavy artifacts (kernel enclosure, reduced stiffness)
//! are stored in a small binary interval format; light reports as JSON.

use crate::config::PipelineConfig;
use crate::report::{
    format_f64, CertificateDoc, ConstantsDoc, DeltaDoc, DimsDoc, GrDoc, NormsDoc, ProvenanceDoc,
    VerdictDoc,
};
use nsverify_core::apriori::{self, KappaResult, KappaSetup};
use nsverify_core::divfree::KernelBasis;
use nsverify_core::eigbound::{self, StokesEigReport};
use nsverify_core::error::{Error, Result};
use nsverify_core::interval::{Interval, IvMat};
use nsverify_core::mesh::{build_cube_mesh, zhang_refine, TetMesh, Topology};
use nsverify_core::nsolve::{self, ApproxSolution, MixedSystem};
use nsverify_core::rat::rat_from_decimal;
use nsverify_core::spaces::{self, Bc, RtSpace, ScalarSpace, SpaceDescriptor};
use nsverify_core::verify::{self, DeltaReport, SolutionNorms};
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

pub struct MeshArtifacts {
    pub coarse: TetMesh,
    pub coarse_topo: Topology,
    pub sv: TetMesh,
    pub sv_topo: Topology,
}

pub struct CoarseSpaces {
    pub rt: RtSpace,
    pub xh: ScalarSpace,
    pub phi: ScalarSpace,
}

pub struct SpaceDims {
    pub u_h0: usize,
    pub x_h0: usize,
    pub v_h: usize,
    pub rt_tensor: usize,
    pub x_h_vec: usize,
    pub u_h_scalar: usize,
}

/// Lazily evaluated pipeline with per-stage wall times.
pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub times: Vec<(String, f64)>,
    meshes: Option<MeshArtifacts>,
    system: Option<MixedSystem>,
    coarse_spaces: Option<CoarseSpaces>,
    approx: Option<(Vec<f64>, Vec<f64>, f64, usize)>,
    kernel: Option<KernelBasis>,
    a_v: Option<IvMat>,
    corrected: Option<ApproxSolution>,
    eig: Option<StokesEigReport>,
    kappa: Option<KappaResult>,
    tau: Option<(f64, f64)>,
    delta: Option<DeltaReport>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Pipeline {
        Pipeline {
            cfg,
            times: Vec::new(),
            meshes: None,
            system: None,
            coarse_spaces: None,
            approx: None,
            kernel: None,
            a_v: None,
            corrected: None,
            eig: None,
            kappa: None,
            tau: None,
            delta: None,
        }
    }

    fn timed<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f(self)?;
        self.times.push((name.to_string(), t0.elapsed().as_secs_f64()));
        Ok(out)
    }

    fn cache_path(&self, stage: &str, key: &str, ext: &str) -> Option<PathBuf> {
        self.cfg.cache_dir.as_ref().map(|d| d.join(format!("{stage}-{key}.{ext}")))
    }

    pub fn meshes(&mut self) -> Result<&MeshArtifacts> {
        if self.meshes.is_none() {
            let arts = self.timed("mesh", |p| {
                let domain = p.cfg.domain()?;
                let coarse = build_cube_mesh(&domain)?;
                let sv = zhang_refine(&coarse);
                let coarse_topo = Topology::build(&coarse);
                let sv_topo = Topology::build(&sv);
                Ok(MeshArtifacts { coarse, coarse_topo, sv, sv_topo })
            })?;
            self.meshes = Some(arts);
        }
        Ok(self.meshes.as_ref().unwrap())
    }

    pub fn system(&mut self) -> Result<&MixedSystem> {
        if self.system.is_none() {
            self.meshes()?;
            let (k, d, _) = self.cfg.degrees;
            let sys = self.timed("system", |p| {
                let m = p.meshes.as_ref().unwrap();
                MixedSystem::build(m.sv.clone(), m.sv_topo.clone(), k, d)
            })?;
            self.system = Some(sys);
        }
        Ok(self.system.as_ref().unwrap())
    }

    pub fn coarse_spaces(&mut self) -> Result<&CoarseSpaces> {
        if self.coarse_spaces.is_none() {
            self.meshes()?;
            let (k, d, m_idx) = self.cfg.degrees;
            let cs = self.timed("coarse-spaces", |p| {
                let m = p.meshes.as_ref().unwrap();
                let spaces::Space::Rt(rt) = spaces::build_space(
                    &m.coarse,
                    &m.coarse_topo,
                    &SpaceDescriptor::raviart_thomas(m_idx, 3),
                )?
                else {
                    unreachable!()
                };
                let spaces::Space::Scalar(xh) = spaces::build_space(
                    &m.coarse,
                    &m.coarse_topo,
                    &SpaceDescriptor::discontinuous(d, Bc::None, 1),
                )?
                else {
                    unreachable!()
                };
                let spaces::Space::Scalar(phi) = spaces::build_space(
                    &m.coarse,
                    &m.coarse_topo,
                    &SpaceDescriptor::lagrange(k, Bc::None, 1),
                )?
                else {
                    unreachable!()
                };
                Ok(CoarseSpaces { rt, xh, phi })
            })?;
            self.coarse_spaces = Some(cs);
        }
        Ok(self.coarse_spaces.as_ref().unwrap())
    }

    pub fn dims(&mut self) -> Result<SpaceDims> {
        self.system()?;
        self.coarse_spaces()?;
        let ms = self.system.as_ref().unwrap();
        let cs = self.coarse_spaces.as_ref().unwrap();
        let u_h0 = 3 * ms.vel.n_reduced;
        let x_h0 = ms.pres.n_full - 1;
        Ok(SpaceDims {
            u_h0,
            x_h0,
            v_h: u_h0 - x_h0,
            rt_tensor: 3 * cs.rt.n_scalar,
            x_h_vec: 3 * cs.xh.n_full,
            u_h_scalar: cs.phi.n_reduced,
        })
    }

    pub fn approx(&mut self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.approx.is_none() {
            self.system()?;
            let key = self.cfg.approx_key();
            if let Some(path) = self.cache_path("approx", &key, "bin") {
                if let Ok(data) = read_f64_file(&path) {
                    let ms = self.system.as_ref().unwrap();
                    if data.len() == ms.n_u + ms.n_p {
                        self.approx =
                            Some((data[..ms.n_u].to_vec(), data[ms.n_u..].to_vec(), 0.0, 0));
                    }
                }
            }
            if self.approx.is_none() {
                let f = self.cfg.poly_spec()?;
                let eps = self.cfg.eps_interval()?.mid();
                let (tol, maxit) = (self.cfg.newton_tol, self.cfg.newton_max_iter);
                let out = self.timed("newton", |p| {
                    let ms = p.system.as_ref().unwrap();
                    nsolve::newton_solve(ms, &f, eps, maxit, tol)
                })?;
                if let Some(path) = self.cache_path("approx", &key, "bin") {
                    let mut all = out.0.clone();
                    all.extend_from_slice(&out.1);
                    let _ = write_f64_file(&path, &all);
                }
                self.approx = Some(out);
            }
        }
        let a = self.approx.as_ref().unwrap();
        Ok((a.0.clone(), a.1.clone()))
    }

    pub fn kernel(&mut self) -> Result<&KernelBasis> {
        if self.kernel.is_none() {
            self.system()?;
            let key = self.cfg.spaces_key();
            let cached = self
                .cache_path("kernel", &key, "bin")
                .and_then(|p| read_kernel(&p).ok());
            let kb = match cached {
                Some(kb) => kb,
                None => {
                    let kb = self.timed("kernel", |p| p.system.as_ref().unwrap().kernel())?;
                    if let Some(path) = self.cache_path("kernel", &key, "bin") {
                        let _ = write_kernel(&path, &kb);
                    }
                    kb
                }
            };
            self.kernel = Some(kb);
        }
        Ok(self.kernel.as_ref().unwrap())
    }

    pub fn a_v(&mut self) -> Result<&IvMat> {
        if self.a_v.is_none() {
            self.kernel()?;
            let key = self.cfg.spaces_key();
            let cached = self.cache_path("av", &key, "bin").and_then(|p| read_ivmat(&p).ok());
            let a_v = match cached {
                Some(m) => m,
                None => {
                    let m = self.timed("reduce-a", |p| {
                        let ms = p.system.as_ref().unwrap();
                        let kb = p.kernel.as_ref().unwrap();
                        Ok(kb.reduce_sym(&ms.a_u))
                    })?;
                    if let Some(path) = self.cache_path("av", &key, "bin") {
                        let _ = write_ivmat(&path, &m);
                    }
                    m
                }
            };
            self.a_v = Some(a_v);
        }
        Ok(self.a_v.as_ref().unwrap())
    }

    pub fn corrected(&mut self) -> Result<&ApproxSolution> {
        if self.corrected.is_none() {
            let (u, p) = self.approx()?;
            self.kernel()?;
            self.a_v()?;
            let depth = self.cfg.sup_depth;
            let sol = self.timed("correct", |pl| {
                let ms = pl.system.as_ref().unwrap();
                let kb = pl.kernel.as_ref().unwrap();
                let a_v = pl.a_v.as_ref().unwrap();
                nsolve::divfree_correct(ms, kb, a_v, &u, p.clone(), depth)
            })?;
            self.corrected = Some(sol);
        }
        Ok(self.corrected.as_ref().unwrap())
    }

    pub fn eig(&mut self) -> Result<&StokesEigReport> {
        if self.eig.is_none() {
            let levels = self.cfg.eig_levels;
            let mut report = self.timed("eig-lower", |p| {
                let domain = p.cfg.domain()?;
                eigbound::stokes_lambda1_lower(&domain, levels)
            })?;
            // conforming upper bound on the Scott-Vogelius mesh
            self.kernel()?;
            let upper = self.timed("eig-upper", |p| {
                let ms = p.system.as_ref().unwrap();
                let kb = p.kernel.as_ref().unwrap();
                let t = verify::sv_ground_state(ms, kb)?;
                eigbound::stokes_lambda1_upper(kb, &ms.a_u, &ms.m_u, &t)
            })?;
            report.lambda1_upper = Some(upper);
            self.eig = Some(report);
        }
        Ok(self.eig.as_ref().unwrap())
    }

    pub fn kappa(&mut self) -> Result<&KappaResult> {
        if self.kappa.is_none() {
            self.coarse_spaces()?;
            self.kernel()?;
            self.a_v()?;
            let res = self.timed("kappa", |p| {
                let m = p.meshes.as_ref().unwrap();
                let ms = p.system.as_ref().unwrap();
                let cs = p.coarse_spaces.as_ref().unwrap();
                let setup = KappaSetup {
                    coarse: &m.coarse,
                    coarse_topo: &m.coarse_topo,
                    ms,
                    kernel: p.kernel.as_ref().unwrap(),
                    a_v: p.a_v.as_ref().unwrap(),
                    rt: &cs.rt,
                    xh: &cs.xh,
                    phi: &cs.phi,
                };
                apriori::compute_kappa_h(&setup)
            })?;
            self.kappa = Some(res);
        }
        Ok(self.kappa.as_ref().unwrap())
    }

    pub fn apriori_report(&mut self) -> Result<apriori::AprioriReport> {
        let kappa = self.kappa()?.kappa_h;
        let eps = self.cfg.eps_interval()?;
        let m = self.meshes()?;
        let h_cube = m
            .coarse
            .h_cube
            .clone()
            .ok_or_else(|| Error::Config("mesh without cube size".into()))?;
        let (c0h, overridden) = match &self.cfg.c0h_override {
            Some(text) => {
                let iv = Interval::from_rat(&rat_from_decimal(text)?);
                (iv.hi, true)
            }
            None => (apriori::compute_c0h(&h_cube)?, false),
        };
        apriori::compose_constants(kappa, c0h, overridden, eps)
    }

    pub fn tau(&mut self) -> Result<(f64, f64)> {
        if self.tau.is_none() {
            self.corrected()?;
            let eps = self.cfg.eps_interval()?;
            let tau = self.timed("tau", |p| {
                let ms = p.system.as_ref().unwrap();
                let kb = p.kernel.as_ref().unwrap();
                let a_v = p.a_v.as_ref().unwrap();
                let sol = p.corrected.as_ref().unwrap();
                let n_v = verify::reduced_convection(ms, kb, &sol.field);
                verify::compute_tau(a_v, &n_v, eps)
            })?;
            self.tau = Some(tau);
        }
        Ok(self.tau.unwrap())
    }

    pub fn delta(&mut self, c0h: f64, c_p: f64) -> Result<&DeltaReport> {
        if self.delta.is_none() {
            self.corrected()?;
            self.coarse_spaces()?;
            let f = self.cfg.poly_spec()?;
            let eps = self.cfg.eps_interval()?;
            let rep = self.timed("delta", |p| {
                let m = p.meshes.as_ref().unwrap();
                let ms = p.system.as_ref().unwrap();
                let cs = p.coarse_spaces.as_ref().unwrap();
                let setup = verify::DeltaSetup {
                    coarse: &m.coarse,
                    ms,
                    rt: &cs.rt,
                    xh: &cs.xh,
                };
                verify::compute_delta(&setup, p.corrected.as_ref().unwrap(), &f, eps, c0h, c_p)
            })?;
            self.delta = Some(rep);
        }
        Ok(self.delta.as_ref().unwrap())
    }

    /// Execute every stage and assemble the certificate document.
    pub fn run(&mut self) -> Result<CertificateDoc> {
        let dims = self.dims()?;
        let eig = self.eig()?.clone();
        let apriori_rep = self.apriori_report()?;
        let sol_norms = {
            let sol = self.corrected()?;
            SolutionNorms { sup: sol.sup, grad_sup: sol.grad_sup }
        };
        let eps = self.cfg.eps_interval()?;
        let (nu1, nu2, nu3) =
            verify::compute_nu(&sol_norms, eig.c_p, apriori_rep.c_h, eps)?;
        let (tau, tau_float) = self.tau()?;
        let delta = self.delta(apriori_rep.c0h, eig.c_p)?.clone();
        let f = self.cfg.poly_spec()?;
        let f_l2 = verify::f_norm(&f, &self.meshes()?.coarse)?;

        let gr = verify::girault_raviart_check(eig.g, eig.c_p, f_l2, eps, None)?;

        let (verdict, constants) = match verify::compute_k(nu1, nu2, nu3, tau, apriori_rep.c_ha) {
            Ok((kappa, k_bound)) => {
                let outcome = verify::certify(k_bound, delta.delta, eig.g)?;
                let verdict = if outcome.verified {
                    VerdictDoc {
                        status: "verified".into(),
                        reason: None,
                        rho: outcome.rho.map(format_f64),
                    }
                } else {
                    VerdictDoc {
                        status: "failed".into(),
                        reason: Some(format!(
                            "existence condition violated: alpha*omega = {} > 1/2",
                            format_f64(outcome.alpha_omega)
                        )),
                        rho: None,
                    }
                };
                let c = self.constants_doc(
                    &eig, &apriori_rep, &sol_norms, nu1, nu2, nu3, tau, tau_float, kappa,
                    Some(k_bound), &delta, Some(&outcome), f_l2,
                )?;
                (verdict, c)
            }
            Err(Error::VerificationFailed(reason)) => {
                let verdict =
                    VerdictDoc { status: "failed".into(), reason: Some(reason), rho: None };
                let kappa_val = {
                    // recompute the kappa value itself for the report
                    let t = Interval::point(tau);
                    let ka = ((t * Interval::point(nu1) * Interval::point(nu2)
                        + Interval::point(nu3))
                        * Interval::point(apriori_rep.c_ha))
                    .hi;
                    ka
                };
                let c = self.constants_doc(
                    &eig, &apriori_rep, &sol_norms, nu1, nu2, nu3, tau, tau_float, kappa_val,
                    None, &delta, None, f_l2,
                )?;
                (verdict, c)
            }
            Err(e) => return Err(e),
        };

        Ok(CertificateDoc {
            schema_version: 1,
            name: self.cfg.name.clone(),
            config_hash: self.cfg.certificate_key(),
            verdict,
            dims: DimsDoc {
                u_h0: dims.u_h0,
                x_h0: dims.x_h0,
                v_h: dims.v_h,
                rt: dims.rt_tensor,
                x_h: dims.x_h_vec,
                u_h: dims.u_h_scalar,
                sv_tets: self.meshes()?.sv.tets.len(),
                coarse_tets: self.meshes()?.coarse.tets.len(),
            },
            constants,
            girault_raviart: GrDoc {
                n_bound: format_f64(gr.n_bound),
                f_dual: format_f64(gr.f_dual),
                ratio: format_f64(gr.ratio),
                conclusive: gr.conclusive,
            },
            provenance: ProvenanceDoc {
                degrees: vec![
                    self.cfg.degrees.0 as usize,
                    self.cfg.degrees.1 as usize,
                    self.cfg.degrees.2 as usize,
                ],
                eig_levels: self.cfg.eig_levels,
                sup_depth: self.cfg.sup_depth,
                overrides: match &self.cfg.c0h_override {
                    Some(v) => vec![format!("c0h={v} (externally supplied)")],
                    None => vec![],
                },
                newton_tol: format!("{:e}", self.cfg.newton_tol),
            },
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn constants_doc(
        &mut self,
        eig: &StokesEigReport,
        ap: &apriori::AprioriReport,
        norms: &SolutionNorms,
        nu1: f64,
        nu2: f64,
        nu3: f64,
        tau: f64,
        tau_float: f64,
        kappa: f64,
        k_bound: Option<f64>,
        delta: &DeltaReport,
        outcome: Option<&verify::CertifyOutcome>,
        f_l2: Interval,
    ) -> Result<ConstantsDoc> {
        let sol = self.corrected()?;
        Ok(ConstantsDoc {
            lambda1_lower: format_f64(eig.lambda1_lower),
            lambda1_upper: eig.lambda1_upper.map(format_f64),
            lambda_h1_lower: format_f64(eig.lambda_h1_lower),
            c_p: format_f64(eig.c_p),
            c_4p: format_f64(eig.c_4p),
            g: format_f64(eig.g),
            kappa_h: format_f64(ap.kappa_h),
            c0h: format_f64(ap.c0h),
            c0h_overridden: ap.c0h_overridden,
            c_h: format_f64(ap.c_h),
            c_ha: format_f64(ap.c_ha),
            norms: NormsDoc {
                u_l2: [format_f64(sol.norm_l2.lo), format_f64(sol.norm_l2.hi)],
                grad_l2: [format_f64(sol.grad_l2.lo), format_f64(sol.grad_l2.hi)],
                u_sup: format_f64(norms.sup),
                u_sup_witness: format_f64(sol.sup_witness),
                grad_sup: format_f64(norms.grad_sup),
                grad_sup_witness: format_f64(sol.grad_sup_witness),
            },
            nu1: format_f64(nu1),
            nu2: format_f64(nu2),
            nu3: format_f64(nu3),
            tau: format_f64(tau),
            tau_float: format_f64(tau_float),
            kappa: format_f64(kappa),
            k: k_bound.map(format_f64),
            delta: DeltaDoc {
                value: format_f64(delta.delta),
                grad_term: format_f64(delta.t1),
                projection_term: format_f64(delta.t2),
                moment_term: format_f64(delta.t3),
            },
            alpha: outcome.map(|o| format_f64(o.alpha)),
            omega: outcome.map(|o| format_f64(o.omega)),
            alpha_omega: outcome.map(|o| format_f64(o.alpha_omega)),
            f_l2: [format_f64(f_l2.lo), format_f64(f_l2.hi)],
        })
    }
}

impl Pipeline {
    /// Replace the Newton stage with an externally computed velocity
    /// (binary artifact or whitespace-separated coefficient text).
    pub fn import_approx(&mut self, path: &PathBuf) -> Result<()> {
        self.system()?;
        let ms = self.system.as_ref().unwrap();
        let data = match read_f64_file(path) {
            Ok(d) => d,
            Err(_) => {
                let text = std::fs::read_to_string(path)?;
                text.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| Error::Parse("bad float".into())))
                    .collect::<Result<Vec<f64>>>()?
            }
        };
        if data.len() == ms.n_u {
            self.approx = Some((data, vec![0.0; ms.n_p], f64::NAN, 0));
        } else if data.len() == ms.n_u + ms.n_p {
            self.approx = Some((data[..ms.n_u].to_vec(), data[ms.n_u..].to_vec(), f64::NAN, 0));
        } else {
            return Err(Error::Config(format!(
                "imported approximation has {} values; expected {} or {}",
                data.len(),
                ms.n_u,
                ms.n_u + ms.n_p
            )));
        }
        Ok(())
    }

    /// Corrected-solution dump: per-element Bernstein coefficient triplets
    /// `element component position lo hi`.
    pub fn write_solution(&mut self, path: &PathBuf) -> Result<()> {
        self.corrected()?;
        let sol = self.corrected.as_ref().unwrap();
        let mut out = String::new();
        out.push_str(&format!(
            "field {} {} 3\n",
            sol.field.per_element.len(),
            sol.field.degree
        ));
        for (el, comps) in sol.field.per_element.iter().enumerate() {
            for (c, poly) in comps.iter().enumerate() {
                for (pos, v) in poly.coeffs.iter().enumerate() {
                    out.push_str(&format!("{el} {c} {pos} {} {}\n", v.lo, v.hi));
                }
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Dump the assembled interval system matrices as sparse triplet files
    /// under the given directory.
    pub fn dump_system(&mut self, dir: &PathBuf) -> Result<()> {
        self.system()?;
        std::fs::create_dir_all(dir)?;
        let ms = self.system.as_ref().unwrap();
        for (name, m) in
            [("stiffness", &ms.a_u), ("mass", &ms.m_u), ("divergence", &ms.b)]
        {
            let mut f = std::fs::File::create(dir.join(format!("{name}.ivtriplets")))?;
            m.write_triplets(&mut f)?;
        }
        Ok(())
    }

    pub fn export_streamlines(&mut self, path: &PathBuf) -> Result<()> {
        self.corrected()?;
        let table = crate::report::streamline_table(
            &self.system.as_ref().unwrap().mesh,
            self.corrected.as_ref().unwrap(),
        );
        std::fs::write(path, table)?;
        Ok(())
    }
}

/// Closed-formula verification from externally supplied constants.
pub struct InjectedConstants {
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
    pub tau: f64,
    pub c_ha: f64,
    pub delta: f64,
    pub g: f64,
}

pub struct InjectedOutcome {
    pub kappa: f64,
    pub k: f64,
    pub alpha: f64,
    pub omega: f64,
    pub alpha_omega: f64,
    pub rho: Option<f64>,
    pub verified: bool,
}

pub fn certify_injected(c: &InjectedConstants) -> Result<InjectedOutcome> {
    let (kappa, k) = verify::compute_k(c.nu1, c.nu2, c.nu3, c.tau, c.c_ha)?;
    let out = verify::certify(k, c.delta, c.g)?;
    Ok(InjectedOutcome {
        kappa,
        k,
        alpha: out.alpha,
        omega: out.omega,
        alpha_omega: out.alpha_omega,
        rho: out.rho,
        verified: out.verified,
    })
}

// ---- small binary artifact format: magic, dims, little-endian f64 ----

fn write_f64_file(path: &PathBuf, data: &[f64]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(b"NSVF")?;
    f.write_all(&(data.len() as u64).to_le_bytes())?;
    for v in data {
        f.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64_file(path: &PathBuf) -> Result<Vec<f64>> {
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != b"NSVF" {
        return Err(Error::Parse("bad artifact magic".into()));
    }
    let mut len = [0u8; 8];
    f.read_exact(&mut len)?;
    let n = u64::from_le_bytes(len) as usize;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    if buf.len() != 8 * n {
        return Err(Error::Parse("artifact length mismatch".into()));
    }
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn write_ivmat(path: &PathBuf, m: &IvMat) -> Result<()> {
    let mut data = Vec::with_capacity(2 * m.data.len() + 2);
    data.push(m.nrows as f64);
    data.push(m.ncols as f64);
    for v in &m.data {
        data.push(v.lo);
        data.push(v.hi);
    }
    write_f64_file(path, &data)
}

fn read_ivmat(path: &PathBuf) -> Result<IvMat> {
    let data = read_f64_file(path)?;
    if data.len() < 2 {
        return Err(Error::Parse("short interval matrix artifact".into()));
    }
    let nrows = data[0] as usize;
    let ncols = data[1] as usize;
    if data.len() != 2 + 2 * nrows * ncols {
        return Err(Error::Parse("interval matrix artifact size mismatch".into()));
    }
    let vals: Vec<Interval> = data[2..]
        .chunks_exact(2)
        .map(|c| Interval::new(c[0], c[1]))
        .collect();
    Ok(IvMat { nrows, ncols, data: vals })
}

fn write_kernel(path: &PathBuf, kb: &KernelBasis) -> Result<()> {
    let mut data = Vec::new();
    data.push(kb.nu as f64);
    data.push(kb.dim as f64);
    data.push(kb.free_cols.len() as f64);
    for &c in &kb.free_cols {
        data.push(c as f64);
    }
    for &c in &kb.dep_cols {
        data.push(c as f64);
    }
    for v in &kb.z.data {
        data.push(v.lo);
        data.push(v.hi);
    }
    write_f64_file(path, &data)
}

fn read_kernel(path: &PathBuf) -> Result<KernelBasis> {
    let data = read_f64_file(path)?;
    if data.len() < 3 {
        return Err(Error::Parse("short kernel artifact".into()));
    }
    let nu = data[0] as usize;
    let dim = data[1] as usize;
    let nfree = data[2] as usize;
    if nfree != dim {
        return Err(Error::Parse("kernel artifact inconsistent".into()));
    }
    let ndep = nu - dim;
    let head = 3 + nfree + ndep;
    if data.len() != head + 2 * nu * dim {
        return Err(Error::Parse("kernel artifact size mismatch".into()));
    }
    let free_cols: Vec<usize> = data[3..3 + nfree].iter().map(|&v| v as usize).collect();
    let dep_cols: Vec<usize> =
        data[3 + nfree..head].iter().map(|&v| v as usize).collect();
    let vals: Vec<Interval> = data[head..]
        .chunks_exact(2)
        .map(|c| Interval::new(c[0], c[1]))
        .collect();
    Ok(KernelBasis {
        nu,
        dim,
        z: IvMat { nrows: nu, ncols: dim, data: vals },
        free_cols,
        dep_cols,
    })
}
