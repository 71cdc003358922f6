//! `ssprk`: command-line front end for ssp-core.
//!
//! Primary output goes to stdout. With `--out-dir` every artifact (CSV
//! tables, JSON sidecars, method files) is written there as well.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ssp_core::conditions::{imex_conditions, rk_conditions};
use ssp_core::experiments::{
    compare_csv, run_convergence, run_predicted_vs_observed, run_tvd_sweep, sidecar,
    ConvergenceSpec, ErrorNorm, SweepSpec, CONVERGENCE_REFERENCE_TOL,
};
use ssp_core::integrators::integrate;
use ssp_core::library::{bundled_names, resolve};
use ssp_core::optimizer::{optimize, parse_search_spec};
use ssp_core::problems::{catalog_names, example_4_2, problem};
use ssp_core::ssp::{
    imex_is_feasible, imex_ssp_radius, is_absolutely_monotonic, ssp_radius, ImexSspQuery, DEFAULT_REL_TOL,
    FEASIBILITY_TOLERANCE,
};
use ssp_core::stability::{boundary_csv, region_boundary, stability_metrics, Grid};
use ssp_core::tableau::{butcher_to_canonical_shu_osher, write_method, KValue, Method};
use ssp_core::Error;

#[derive(Parser)]
#[command(name = "ssprk", version, about = "Analyze, optimize and run SSP Runge-Kutta and IMEX methods")]
struct Cli {
    /// Overrides the optimizer seed; recorded in experiment sidecars.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory that receives every artifact of the run.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Certified SSP radius of a method file or bundled method.
    SspRadius {
        method: String,
        /// Evaluate an IMEX pair at this K (a number, p/q, or inf).
        #[arg(long)]
        imex_k: Option<String>,
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        rel_tol: f64,
    },
    /// Order-condition residuals as CSV; exits 2 when a condition fails.
    VerifyOrder {
        method: String,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        plin: Option<usize>,
        /// Explicit-part order of an IMEX pair.
        #[arg(long)]
        pe: Option<usize>,
        /// Implicit-part order of an IMEX pair.
        #[arg(long)]
        pi: Option<usize>,
        /// Treat the implicit operator as linear (IMEX only).
        #[arg(long)]
        implicit_linear: bool,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Rewrite a method as a Butcher tableau or a canonical Shu-Osher form.
    Convert {
        method: String,
        #[arg(long, value_parser = ["butcher", "shu-osher"])]
        to: String,
        /// Scaling of the Shu-Osher form (default: the certified radius).
        #[arg(long)]
        r: Option<f64>,
    },
    /// Search for a method with the largest SSP radius.
    Optimize { spec: PathBuf },
    /// Integrate a catalog problem and print the trajectory as CSV.
    Integrate {
        method: String,
        #[arg(long)]
        problem: String,
        #[arg(long)]
        dt: f64,
        /// Defaults to the problem's final time.
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Convergence study with a fitted slope.
    Converge {
        method: String,
        #[arg(long)]
        problem: String,
        /// Comma-separated step sizes (default: the problem's standard list).
        #[arg(long, value_delimiter = ',')]
        dts: Option<Vec<f64>>,
        #[arg(long)]
        t_final: Option<f64>,
        /// first, l2 or max.
        #[arg(long)]
        norm: Option<String>,
    },
    /// Largest TVD step ratio dt/dx observed over the first steps.
    TvdSweep {
        method: String,
        #[arg(long, default_value = "example-2")]
        problem: String,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Predicted and observed TVD steps for methods across wavespeeds.
    CompareDt {
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 100.0])]
        omegas: Vec<f64>,
        /// Method the ratio column is relative to.
        #[arg(long)]
        baseline: Option<String>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Boundary of |R(z)| = 1 on a grid, plus axis metrics.
    StabilityRegion {
        method: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [-10.0, 2.0])]
        re: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [-8.0, 8.0])]
        im: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        nx: usize,
        #[arg(long, default_value_t = 200)]
        ny: usize,
        /// Use the implicit part of an IMEX pair.
        #[arg(long)]
        implicit: bool,
    },
    /// List catalog problems and bundled methods.
    Catalog,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 1e-10)]
    threshold: f64,
    #[arg(long, default_value_t = 1e-12)]
    width: f64,
}

impl SweepArgs {
    fn spec(&self) -> SweepSpec {
        SweepSpec { steps: self.steps, threshold: self.threshold, width: self.width, ..SweepSpec::default() }
    }
}

struct Out {
    dir: Option<PathBuf>,
}

impl Out {
    fn new(dir: Option<PathBuf>) -> anyhow::Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Out { dir })
    }

    /// Writes an artifact into the output directory, if there is one.
    fn file(&self, name: &str, content: &str) -> anyhow::Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        Ok(())
    }

    /// Prints to stdout and also saves as `name`.
    fn primary(&self, name: &str, content: &str) -> anyhow::Result<()> {
        print!("{content}");
        if !content.ends_with('\n') {
            println!();
        }
        self.file(name, content)
    }
}

fn slug(s: &str) -> String {
    let name = Path::new(s).file_stem().and_then(|f| f.to_str()).unwrap_or(s);
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_validation));
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = Out::new(cli.out_dir)?;
    match cli.cmd {
        Cmd::SspRadius { method, imex_k, rel_tol } => {
            let m = resolve(&method)?;
            let (r, cert) = match (&m, imex_k) {
                (Method::Imex(pair), k) => {
                    let k = k.as_deref().map_or(Ok(pair.info().k_designed.unwrap_or(KValue::Infinite)), KValue::parse)?;
                    let q = ImexSspQuery { pair, k };
                    let r = imex_ssp_radius(q, rel_tol)?;
                    (r, imex_is_feasible(q, r, FEASIBILITY_TOLERANCE)?)
                }
                (_, Some(_)) => bail!(Error::Validation(format!("'{method}' is not an IMEX pair; --imex-k does not apply"))),
                (other, None) => {
                    let t = other.to_butcher()?;
                    let r = ssp_radius(&t, rel_tol)?;
                    (r, is_absolutely_monotonic(&t, r, FEASIBILITY_TOLERANCE)?)
                }
            };
            println!("{r:.9}");
            eprintln!(
                "{}: feasible at r = {} ({} binding constraints)",
                m.name(),
                cert.r,
                cert.binding.len()
            );
            let stem = slug(&method);
            out.file(&format!("{stem}-radius.json"), &serde_json::to_string_pretty(&json!({"method": m.name(), "r": r, "certificate": cert}))?)?;
            out.file(&format!("{stem}-binding.csv"), &cert.binding_csv())?;
        }
        Cmd::VerifyOrder { method, p, plin, pe, pi, implicit_linear, tol } => {
            let m = resolve(&method)?;
            let info = m.info().clone();
            let report = match &m {
                Method::Imex(pair) => {
                    let pe = pe.or(p).or(info.p_e).ok_or_else(|| Error::Validation("give --pe (or --p)".into()))?;
                    let pi = pi.or(p).or(info.p_i).ok_or_else(|| Error::Validation("give --pi (or --p)".into()))?;
                    let plin = plin.or(info.p_lin).unwrap_or(pe.max(pi));
                    imex_conditions(pe, pi, plin, implicit_linear)?.evaluate(pair, tol)?
                }
                other => {
                    let p = p.or(info.p).ok_or_else(|| Error::Validation("give --p".into()))?;
                    let plin = plin.or(info.p_lin).unwrap_or(p);
                    rk_conditions(p, plin)?.evaluate(&other.to_butcher()?, tol)?
                }
            };
            out.primary(&format!("{}-residuals.csv", slug(&method)), &report.to_csv())?;
            let verdict = if report.all_pass() { "PASS" } else { "FAIL" };
            eprintln!(
                "{verdict}: max residual {:e} (tol {tol:e}), attained p = {}, p_lin = {}",
                report.max_abs(),
                report.p_attained,
                report.p_lin_attained.max(report.p_attained)
            );
            for row in report.failing() {
                eprintln!("  failing {} (order {}): {:e}", row.id, row.order, row.residual);
            }
            if !report.all_pass() {
                return Ok(ExitCode::from(2));
            }
        }
        Cmd::Convert { method, to, r } => {
            let m = resolve(&method)?;
            let t = m.to_butcher()?;
            let converted: Method = if to == "butcher" {
                t.into()
            } else {
                let r = match r {
                    Some(r) => r,
                    None => ssp_radius(&t, DEFAULT_REL_TOL)?,
                };
                butcher_to_canonical_shu_osher(&t, r)?.into()
            };
            out.primary(&format!("{}-{to}.txt", slug(&method)), &write_method(&converted))?;
        }
        Cmd::Optimize { spec } => {
            let text = fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let mut s = parse_search_spec(&text)?;
            if let Some(seed) = cli.seed {
                s.budget.seed = seed;
            }
            let res = optimize(&s)?;
            for w in &res.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("certified r = {} ({})", res.r, res.termination);
            let name = res.method.name().to_string();
            out.primary(&format!("{name}.txt"), &write_method(&res.method))?;
            out.file(&format!("{name}-log.json"), &serde_json::to_string_pretty(&json!({"spec": s, "result": res}))?)?;
        }
        Cmd::Integrate { method, problem: name, dt, t_final, stride } => {
            let m = resolve(&method)?;
            let p = problem(&name)?;
            let t_final = t_final.or(p.t_final).ok_or_else(|| Error::Validation("the problem has no default final time; give --t-final".into()))?;
            let traj = integrate(&m, &p.system, &p.u0, dt, t_final, stride)?;
            let stem = format!("{}-{}", slug(&method), p.name);
            out.primary(&format!("{stem}-trajectory.csv"), &traj.to_csv())?;
            let params = json!({"method": m.name(), "dt": dt, "t_final": t_final, "stride": stride});
            out.file(&format!("{stem}-trajectory.json"), &serde_json::to_string_pretty(&sidecar("integrate", &p, &params, cli.seed))?)?;
        }
        Cmd::Converge { method, problem: name, dts, t_final, norm } => {
            let m = resolve(&method)?;
            let p = problem(&name)?;
            let mut spec = match ConvergenceSpec::for_problem(&p) {
                Ok(s) => s,
                Err(e) if dts.is_some() => {
                    let t = t_final.or(p.t_final).ok_or(e)?;
                    ConvergenceSpec { dts: Vec::new(), t_final: t, norm: ErrorNorm::L2, reference_tol: CONVERGENCE_REFERENCE_TOL }
                }
                Err(e) => return Err(e.into()),
            };
            if let Some(d) = dts {
                spec.dts = d;
            }
            if let Some(t) = t_final {
                spec.t_final = t;
            }
            if let Some(n) = norm {
                spec.norm = ErrorNorm::parse(&n).ok_or_else(|| Error::Validation(format!("unknown norm '{n}'")))?;
            }
            let res = run_convergence(&m, &p, &spec)?;
            eprintln!("slope {:.4} over {} points", res.slope, res.fit_points);
            let stem = format!("{}-{}", slug(&method), p.name);
            out.primary(&format!("{stem}-convergence.csv"), &res.to_csv())?;
            let params = json!({"method": m.name(), "spec": spec, "slope": res.slope, "fit_points": res.fit_points});
            out.file(&format!("{stem}-convergence.json"), &serde_json::to_string_pretty(&sidecar("converge", &p, &params, cli.seed))?)?;
        }
        Cmd::TvdSweep { method, problem: name, sweep } => {
            let m = resolve(&method)?;
            let p = problem(&name)?;
            let spec = sweep.spec();
            let res = run_tvd_sweep(&m, &p, &spec)?;
            let fmt = |v: Option<f64>| v.map_or("none".to_string(), |v| format!("{v:.12}"));
            println!("lambda_star={} predicted={} gap={}", fmt(res.lambda_star), fmt(res.predicted), res.gap().map_or("none".into(), |g| format!("{g:e}")));
            if let Some(note) = &res.note {
                eprintln!("{note}");
            }
            let stem = format!("{}-{}", slug(&method), p.name);
            out.file(&format!("{stem}-sweep.csv"), &res.samples_csv())?;
            let params = json!({"method": m.name(), "spec": spec, "result": res});
            out.file(&format!("{stem}-sweep.json"), &serde_json::to_string_pretty(&sidecar("tvd-sweep", &p, &params, cli.seed))?)?;
        }
        Cmd::CompareDt { methods, omegas, baseline, sweep } => {
            let ms = methods.iter().map(|m| resolve(m)).collect::<Result<Vec<_>, _>>()?;
            if let Some(b) = &baseline {
                if !ms.iter().any(|m| m.name() == b) {
                    bail!(Error::Validation(format!("baseline '{b}' is not among the methods")));
                }
            }
            let spec = sweep.spec();
            let rows = run_predicted_vs_observed(&ms, &omegas, example_4_2, baseline.as_deref(), &spec)?;
            out.primary("compare-dt.csv", &compare_csv(&rows))?;
            let p = example_4_2(omegas[0])?;
            let params = json!({"methods": methods, "omegas": omegas, "baseline": baseline, "spec": spec,
                "normalization": "lambda = dt/dx; predicted = r(K) * dt_fe_explicit / dx for IMEX pairs, C * dt_fe / dx otherwise"});
            out.file("compare-dt.json", &serde_json::to_string_pretty(&sidecar("compare-dt", &p, &params, cli.seed))?)?;
        }
        Cmd::StabilityRegion { method, re, im, nx, ny, implicit } => {
            let m = resolve(&method)?;
            let t = match (&m, implicit) {
                (Method::Imex(pair), true) => pair.implicit().clone(),
                (Method::Imex(pair), false) => pair.explicit().clone(),
                (other, _) => other.to_butcher()?,
            };
            if re.len() != 2 || im.len() != 2 {
                bail!(Error::Validation("--re and --im each take two values, e.g. --re=-10,2".into()));
            }
            let grid = Grid::new((re[0], re[1]), (im[0], im[1]), nx, ny)?;
            let pts = region_boundary(&t, &grid);
            let stem = slug(&method);
            out.primary(&format!("{stem}-boundary.csv"), &boundary_csv(&pts))?;
            let metrics = stability_metrics(&t, 0.0, 1e-9);
            let text = serde_json::to_string_pretty(&json!({"method": m.name(), "metrics": metrics,
                "grid": {"re": re, "im": im, "nx": nx, "ny": ny}}))?;
            eprintln!("{text}");
            out.file(&format!("{stem}-metrics.json"), &text)?;
        }
        Cmd::Catalog => {
            let mut s = String::from("kind,name\n");
            for n in catalog_names() {
                s.push_str(&format!("problem,{n}\n"));
            }
            for n in bundled_names() {
                s.push_str(&format!("method,{n}\n"));
            }
            out.primary("catalog.csv", &s)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
