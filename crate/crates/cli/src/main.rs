//! Command-line driver: stage execution, certificate emission, reporting.
//!
//! Exit codes: 0 = verified, 2 = verification failed (mathematical),
//! 1 = execution error.

use clap::{Args, Parser, Subcommand};
use nsverify_cli::config::PipelineConfig;
use nsverify_cli::pipeline::{certify_injected, InjectedConstants, Pipeline};
use nsverify_cli::report;
use nsverify_core::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nsverify",
    about = "Computer-assisted existence certificates for stationary flow on block domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Configuration file (key = value text format).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the built-in published-example configuration.
    #[arg(long)]
    paper_example: bool,
    /// Use the built-in desk-scale configuration.
    #[arg(long)]
    desk: bool,
    /// Stage cache directory.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Override the averaging constant C_0h (exact decimal).
    #[arg(long)]
    override_c0h: Option<String>,
    /// Override the eigenvalue-stage refinement level count.
    #[arg(long)]
    eig_levels: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            PipelineConfig::from_text(&text)?
        } else if self.paper_example {
            PipelineConfig::paper_example()
        } else if self.desk {
            PipelineConfig::desk()
        } else {
            return Err(Error::Config(
                "choose --config FILE, --paper-example or --desk".into(),
            ));
        };
        if let Some(dir) = &self.cache_dir {
            cfg.cache_dir = Some(dir.clone());
        }
        if let Some(c) = &self.override_c0h {
            cfg.c0h_override = Some(c.clone());
        }
        if let Some(l) = self.eig_levels {
            cfg.eig_levels = l;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the meshes and report element/space counts.
    Mesh {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Write the Scott-Vogelius mesh in the text format.
        #[arg(long)]
        mesh_out: Option<PathBuf>,
        /// Write the coarse mesh in the text format.
        #[arg(long)]
        coarse_out: Option<PathBuf>,
    },
    /// Newton iteration plus the verified divergence-free correction.
    Solve {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Import an externally computed velocity (binary artifact or
        /// whitespace-separated coefficients) instead of running Newton.
        #[arg(long)]
        import_approx: Option<PathBuf>,
        /// Write the corrected solution coefficients (midpoints).
        #[arg(long)]
        solution_out: Option<PathBuf>,
    },
    /// Certified constants: eigenvalue bounds and a-priori constants.
    Constants {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Verification stage only (optionally from injected constants).
    Verify {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Inject constants (repeatable): nu1=..., nu2=..., nu3=...,
        /// tau=..., c_ha=..., delta=..., g=...
        #[arg(long, value_name = "KEY=VALUE")]
        inject: Vec<String>,
    },
    /// Full pipeline: certificate, summary and timing table.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Certificate output path (JSON document).
        #[arg(long, default_value = "certificate.json")]
        certificate: PathBuf,
        /// Summary output path (human-readable).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Timing table output path.
        #[arg(long)]
        timings: Option<PathBuf>,
        /// Dump assembled system matrices (sparse interval triplets).
        #[arg(long)]
        dump_system: Option<PathBuf>,
    },
    /// Print a stored certificate and optionally export streamline data.
    Report {
        /// Certificate file to read.
        #[arg(long, default_value = "certificate.json")]
        certificate: PathBuf,
        /// Recompute the solution and export raw streamline point/vector rows.
        #[arg(long)]
        streamlines: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Mesh { cfg, mesh_out, coarse_out } => {
            let cfg = cfg.load()?;
            let mut pl = Pipeline::new(cfg);
            let dims = pl.dims()?;
            let m = pl.meshes()?;
            println!(
                "meshes: {} coarse tets, {} refined tets",
                m.coarse.tets.len(),
                m.sv.tets.len()
            );
            println!(
                "spaces: U_h0 = {}, X_h0 = {}, V_h = {}, RT = {}, X_h = {}, U_h = {}",
                dims.u_h0, dims.x_h0, dims.v_h, dims.rt_tensor, dims.x_h_vec, dims.u_h_scalar
            );
            if let Some(path) = mesh_out {
                let mut f = std::fs::File::create(path)?;
                m.sv.write_text(&mut f)?;
            }
            if let Some(path) = coarse_out {
                let mut f = std::fs::File::create(path)?;
                m.coarse.write_text(&mut f)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { cfg, import_approx, solution_out } => {
            let cfg = cfg.load()?;
            let mut pl = Pipeline::new(cfg);
            if let Some(path) = import_approx {
                pl.import_approx(&path)?;
            }
            let sol = pl.corrected()?;
            println!(
                "corrected solution: |u| in [{}, {}], sup |u| <= {}, sup |grad u| <= {}",
                report::format_f64(sol.norm_l2.lo),
                report::format_f64(sol.norm_l2.hi),
                report::format_f64(sol.sup),
                report::format_f64(sol.grad_sup)
            );
            if let Some(path) = solution_out {
                pl.write_solution(&path)?;
                println!("solution written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Constants { cfg } => {
            let cfg = cfg.load()?;
            let mut pl = Pipeline::new(cfg);
            let eig = pl.eig()?.clone();
            println!(
                "lambda_1 >= {} (discrete >= {}, upper {})",
                report::format_f64(eig.lambda1_lower),
                report::format_f64(eig.lambda_h1_lower),
                eig.lambda1_upper.map(report::format_f64).unwrap_or_else(|| "-".into())
            );
            println!(
                "C_P <= {}, C_4P <= {}, G <= {}",
                report::format_f64(eig.c_p),
                report::format_f64(eig.c_4p),
                report::format_f64(eig.g)
            );
            let ap = pl.apriori_report()?;
            println!(
                "kappa_h <= {}, C_0h = {}{}, C_h <= {}, C_hA <= {}",
                report::format_f64(ap.kappa_h),
                report::format_f64(ap.c0h),
                if ap.c0h_overridden { " (supplied)" } else { "" },
                report::format_f64(ap.c_h),
                report::format_f64(ap.c_ha)
            );
            println!("{}", report::timing_table(&pl.times));
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { cfg, inject } => {
            if !inject.is_empty() {
                let mut map = BTreeMap::new();
                for item in &inject {
                    let (k, v) = item
                        .split_once('=')
                        .ok_or_else(|| Error::Config(format!("bad --inject {item:?}")))?;
                    let val: f64 = v
                        .parse()
                        .map_err(|_| Error::Config(format!("bad number in {item:?}")))?;
                    map.insert(k.trim().to_string(), val);
                }
                let need = |k: &str| -> Result<f64> {
                    map.get(k)
                        .cloned()
                        .ok_or_else(|| Error::Config(format!("missing injected constant {k}")))
                };
                let out = certify_injected(&InjectedConstants {
                    nu1: need("nu1")?,
                    nu2: need("nu2")?,
                    nu3: need("nu3")?,
                    tau: need("tau")?,
                    c_ha: need("c_ha")?,
                    delta: need("delta")?,
                    g: need("g")?,
                })?;
                println!(
                    "kappa = {}, K = {}, alpha = {}, omega = {}, alpha*omega = {}",
                    report::format_f64(out.kappa),
                    report::format_f64(out.k),
                    report::format_f64(out.alpha),
                    report::format_f64(out.omega),
                    report::format_f64(out.alpha_omega)
                );
                return if out.verified {
                    println!(
                        "verified: rho = {}",
                        out.rho.map(report::format_f64).unwrap_or_default()
                    );
                    Ok(ExitCode::SUCCESS)
                } else {
                    println!("failed: alpha*omega > 1/2");
                    Ok(ExitCode::from(2))
                };
            }
            let cfg = cfg.load()?;
            let mut pl = Pipeline::new(cfg);
            let doc = pl.run()?;
            println!("{}", doc.summary());
            Ok(exit_for(&doc))
        }
        Command::Run { cfg, certificate, summary, timings, dump_system } => {
            let cfg = cfg.load()?;
            let mut pl = Pipeline::new(cfg);
            let doc = pl.run()?;
            std::fs::write(&certificate, doc.to_json())?;
            println!("certificate written to {}", certificate.display());
            let text = doc.summary();
            if let Some(path) = summary {
                std::fs::write(path, &text)?;
            }
            println!("{text}");
            let ttable = report::timing_table(&pl.times);
            if let Some(path) = timings {
                std::fs::write(path, &ttable)?;
            }
            println!("{ttable}");
            if let Some(path) = dump_system {
                pl.dump_system(&path)?;
                println!("system matrices dumped to {}", path.display());
            }
            Ok(exit_for(&doc))
        }
        Command::Report { certificate, streamlines, cfg } => {
            let text = std::fs::read_to_string(&certificate)?;
            let doc = report::CertificateDoc::from_json(&text)?;
            println!("{}", doc.summary());
            if let Some(path) = streamlines {
                let cfg = cfg.load()?;
                let mut pl = Pipeline::new(cfg);
                pl.export_streamlines(&path)?;
                println!("streamline data written to {}", path.display());
            }
            Ok(exit_for(&doc))
        }
    }
}

fn exit_for(doc: &report::CertificateDoc) -> ExitCode {
    if doc.verdict.status == "verified" {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
