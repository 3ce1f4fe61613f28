//! Command-line front end: configuration merging, dispatch and deterministic output.
//!
//! Every CSV starts with `#` comment lines carrying the version, the resolved configuration
//! and the seed; JSON outputs wrap the report with the same fields. Wall time goes to a
//! `<output>.manifest.json` sidecar so that the main outputs are byte-identical across runs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::boundary::{sphere_rule, stiefel_rule, QuadratureRule};
use crate::error::{Error, Result};
use crate::fatou::{boundary_limit, domination_check, invert_l2, l2_distance, norm_sandwich, radial_profile, transform_fits};
use crate::group::{selftest, ShilovPoint};
use crate::hua::{convergence_slope, eigen_check, third_order_ratio, FDScheme, LieBasis};
use crate::io::write_atomic;
use crate::ktypes::{random_band_limited, spectrum, Resampler};
use crate::poisson::{
    cs_report, gamma_estimate, kernel_form_check, phi_s, radial_point, renormalized_phi_zonal, transform, BoundaryFunction, CsParams,
};
use crate::structure::{restricted_roots, spectral_param, validated_structure, SpectralParam, StructureData};
use crate::suite::{run_suite, Tolerances};
use crate::C64;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SHILOV_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "shilov", version, about = "Poisson transforms on the Shilov boundary of I_{r,r+b}")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    #[arg(long, global = true)]
    pub r: Option<usize>,
    #[arg(long, global = true)]
    pub b: Option<usize>,
    #[arg(long = "s-re", global = true, allow_hyphen_values = true)]
    pub s_re: Option<f64>,
    #[arg(long = "s-im", global = true, allow_hyphen_values = true)]
    pub s_im: Option<f64>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// `sphere` (rank one) or `stiefel` (Monte Carlo).
    #[arg(long, global = true)]
    pub rule: Option<String>,
    #[arg(long, global = true)]
    pub level: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "t-start", global = true)]
    pub t_start: Option<f64>,
    #[arg(long = "t-stop", global = true)]
    pub t_stop: Option<f64>,
    #[arg(long = "t-step", global = true)]
    pub t_step: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// TOML file with any of the configuration fields; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub tol: TolFlags,
}

#[derive(Args, Debug, Default, Clone)]
pub struct TolFlags {
    #[arg(long = "tol-cocycle", global = true)]
    pub cocycle: Option<f64>,
    #[arg(long = "tol-kernel-form", global = true)]
    pub kernel_form: Option<f64>,
    #[arg(long = "tol-hua-rel", global = true)]
    pub hua_rel: Option<f64>,
    #[arg(long = "tol-hua-zero", global = true)]
    pub hua_zero: Option<f64>,
    #[arg(long = "tol-slope", global = true)]
    pub slope: Option<f64>,
    #[arg(long = "tol-ratio-cv", global = true)]
    pub ratio_cv: Option<f64>,
    #[arg(long = "tol-ratio-c", global = true)]
    pub ratio_c: Option<f64>,
    #[arg(long = "tol-cs-rank-one", global = true)]
    pub cs_rank_one: Option<f64>,
    #[arg(long = "tol-cs-monte-carlo", global = true)]
    pub cs_monte_carlo: Option<f64>,
    #[arg(long = "tol-fatou-sup", global = true)]
    pub fatou_sup: Option<f64>,
    #[arg(long = "tol-fatou-l2", global = true)]
    pub fatou_l2: Option<f64>,
    #[arg(long = "tol-sandwich-slack", global = true)]
    pub sandwich_slack: Option<f64>,
    #[arg(long = "tol-schur-cv", global = true)]
    pub schur_cv: Option<f64>,
    #[arg(long = "tol-hardy-coeff", global = true)]
    pub hardy_coeff: Option<f64>,
    #[arg(long = "tol-inversion", global = true)]
    pub inversion: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Structure constants and the brute-force restricted roots.
    Structure,
    #[command(subcommand)]
    Group(GroupCmd),
    #[command(subcommand)]
    Poisson(PoissonCmd),
    #[command(subcommand)]
    Hua(HuaCmd),
    #[command(subcommand)]
    Fatou(FatouCmd),
    #[command(subcommand)]
    Ktypes(KtypesCmd),
    /// Full acceptance battery; writes suite.json and suite.csv into --out (a directory).
    Suite {
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Subcommand, Debug)]
pub enum GroupCmd {
    /// Cocycle, translation and contraction laws.
    Selftest,
}

#[derive(Subcommand, Debug)]
pub enum PoissonCmd {
    /// Determinant form against the horospherical form of the kernel.
    Kernel,
    /// `𝓟_s f(a_t·0)` along the t grid.
    Transform {
        /// `one`, `u1` or `random` (degree-2 polynomial from the seed).
        #[arg(long, default_value = "u1")]
        function: String,
    },
    /// `φ_s(a_t)` and its renormalization along the t grid.
    Phi,
    /// `c_s` by the product formula, the radial limit and the chart integral.
    Cs,
    /// `‖f‖_p`, the Hardy norm and the two bounds for a random polynomial.
    Norms,
}

#[derive(Subcommand, Debug)]
pub enum HuaCmd {
    /// Second-order eigenvalue law at random points, with convergence slopes.
    Check {
        #[arg(long, default_value_t = 5)]
        points: usize,
    },
    /// Third-order ratio and its coefficient fit.
    ThirdRatio {
        #[arg(long, default_value_t = 10)]
        points: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum FatouCmd {
    /// Renormalized profile on Haar nodes; CSV rows (node_index, t, re, im).
    Profile {
        #[arg(long, default_value_t = 16)]
        nodes: usize,
    },
    /// Boundary limit of a random polynomial against its values.
    Limit {
        #[arg(long, default_value_t = 16)]
        nodes: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Inversion round trip at each t of the grid.
    Invert,
    /// Pointwise domination on random chart nodes.
    Dominate {
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
    },
    /// Norm sandwich for random polynomials.
    Sandwich {
        #[arg(long, default_value_t = 5)]
        functions: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum KtypesCmd {
    /// `Φ_{s,δ}(a_t)` for all δ up to the given total degree; CSV (p, q, t, phi_re, phi_im).
    Spectrum {
        #[arg(long = "max-degree", default_value_t = 3)]
        max_degree: usize,
    },
}

/// Resolved configuration, serialized into every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub r: usize,
    pub b: usize,
    pub s_re: f64,
    pub s_im: f64,
    pub p: f64,
    pub rule: String,
    pub level: usize,
    pub samples: usize,
    pub seed: u64,
    pub t_start: f64,
    pub t_stop: f64,
    pub t_step: f64,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            r: 1,
            b: 1,
            s_re: 2.5,
            s_im: 0.0,
            p: 2.0,
            rule: "sphere".into(),
            level: 16,
            samples: 20_000,
            seed: 7,
            t_start: 0.0,
            t_stop: 6.0,
            t_step: 0.5,
            out: None,
            workers: None,
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    /// Defaults, then the config file, then flags.
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let mut c = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                toml::from_str(&text).map_err(|e| Error::Invalid(format!("config {}: {e}", path.display())))?
            }
            None => Self::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = flags.$field.clone() { c.$field = v; } )* };
        }
        set!(r, b, s_re, s_im, p, rule, level, samples, seed, t_start, t_stop, t_step);
        if flags.out.is_some() {
            c.out = flags.out.clone();
        }
        if flags.workers.is_some() {
            c.workers = flags.workers;
        }
        let t = &flags.tol;
        macro_rules! tol {
            ($($field:ident),*) => { $( if let Some(v) = t.$field { c.tolerances.$field = v; } )* };
        }
        tol!(
            cocycle, kernel_form, hua_rel, hua_zero, slope, ratio_cv, ratio_c, cs_rank_one, cs_monte_carlo, fatou_sup, fatou_l2,
            sandwich_slack, schur_cv, hardy_coeff, inversion
        );
        if !(c.t_step > 0.0) || c.t_stop < c.t_start || c.t_start < 0.0 {
            return Err(Error::Invalid("t grid needs 0 <= t-start <= t-stop and t-step > 0".into()));
        }
        Ok(c)
    }

    pub fn t_grid(&self) -> Vec<f64> {
        let n = ((self.t_stop - self.t_start) / self.t_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.t_start + self.t_step * i as f64).collect()
    }

    pub fn structure(&self) -> Result<StructureData> {
        validated_structure(self.r, self.b)
    }

    pub fn spectral(&self) -> Result<SpectralParam> {
        Ok(spectral_param(C64::new(self.s_re, self.s_im), &self.structure()?))
    }

    pub fn quadrature(&self, sd: &StructureData) -> Result<QuadratureRule> {
        match self.rule.as_str() {
            "sphere" if sd.r == 1 => sphere_rule(sd, self.level),
            "sphere" => Err(Error::RankOneOnly(sd.r)),
            "stiefel" => stiefel_rule(sd, self.samples, self.seed),
            other => Err(Error::Invalid(format!("unknown rule '{other}' (sphere or stiefel)"))),
        }
    }
}

struct Output {
    version: &'static str,
    config: RunConfig,
    started: Instant,
}

impl Output {
    fn header(&self) -> Result<String> {
        Ok(format!(
            "# shilov {}\n# config: {}\n# seed: {}\n",
            self.version,
            serde_json::to_string(&self.config)?,
            self.config.seed
        ))
    }

    fn emit(&self, default_name: &str, body: String) -> Result<()> {
        match &self.config.out {
            None => print!("{body}"),
            Some(path) => {
                let path = if path.is_dir() { path.join(default_name) } else { path.clone() };
                write_atomic(&path, body.as_bytes())?;
                self.manifest(&path, &[path.clone()])?;
            }
        }
        Ok(())
    }

    fn manifest(&self, anchor: &Path, files: &[PathBuf]) -> Result<()> {
        let name = anchor.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let side = anchor.with_file_name(format!("{name}.manifest.json"));
        let m = json!({
            "version": self.version,
            "config": self.config,
            "seed": self.config.seed,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "outputs": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
        });
        write_atomic(&side, serde_json::to_string_pretty(&m)?.as_bytes())
    }

    fn json(&self, default_name: &str, report: impl Serialize) -> Result<()> {
        let v = json!({ "version": self.version, "config": self.config, "seed": self.config.seed, "report": report });
        self.emit(default_name, serde_json::to_string_pretty(&v)? + "\n")
    }

    fn csv(&self, default_name: &str, columns: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
        let mut body = self.header()?;
        body.push_str(columns);
        body.push('\n');
        for row in rows {
            body.push_str(&row);
            body.push('\n');
        }
        self.emit(default_name, body)
    }
}

/// Parses `argv` (including the program name) and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn set_workers(config: &RunConfig) {
    let n = config.workers.or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()));
    if let Some(n) = n {
        // the global pool can only be built once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn row(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(",")
}

/// Runs the parsed command; `Ok(false)` means a check ran but failed.
pub fn execute(cli: &Cli) -> Result<bool> {
    let config = RunConfig::resolve(&cli.flags)?;
    set_workers(&config);
    let out = Output { version: env!("CARGO_PKG_VERSION"), config: config.clone(), started: Instant::now() };
    let tol = &config.tolerances;
    match &cli.command {
        Command::Structure => {
            let sd = config.structure()?;
            let roots = restricted_roots(&sd)?;
            let rep = json!({
                "structure": sd, "positive_roots": roots.positive_map(), "zero_dim": roots.zero_dim,
                "reconstructed_n": roots.reconstructed_n(sd.r),
            });
            out.json("structure.json", rep)?;
            println!("structure r={} b={}: n={} a={} roots verified", sd.r, sd.b, sd.n, sd.a);
            Ok(true)
        }
        Command::Group(GroupCmd::Selftest) => {
            let sd = config.structure()?;
            let rep = selftest(&sd, config.seed, 200, 1000)?;
            let ok = rep.passed;
            println!(
                "group selftest: cocycle {:.2e}, {} contraction violations: {}",
                rep.cocycle_max_residual,
                rep.contraction_violations,
                verdict(ok)
            );
            out.json("selftest.json", rep)?;
            Ok(ok)
        }
        Command::Poisson(cmd) => poisson(cmd, &config, &out),
        Command::Hua(cmd) => {
            let sd = config.structure()?;
            let scheme = FDScheme::default();
            match cmd {
                HuaCmd::Check { points } => {
                    let basis = LieBasis::trace_form(&sd);
                    let chk = eigen_check(&sd, C64::new(config.s_re, config.s_im), *points, config.seed, &basis, &scheme)?;
                    let slopes: Vec<_> =
                        [2, 4].iter().map(|&o| convergence_slope(&sd, 3.0, &basis, o, 0.05, config.seed)).collect::<Result<_>>()?;
                    let ok = chk.max_residual <= tol.hua_rel && slopes.iter().all(|s| (s.slope - s.order as f64).abs() <= tol.slope);
                    println!("hua check: max relative residual {:.2e}: {}", chk.max_residual, verdict(ok));
                    out.json("hua_check.json", json!({ "eigen": chk, "slopes": slopes }))?;
                    Ok(ok)
                }
                HuaCmd::ThirdRatio { points } => {
                    let rep = third_order_ratio(&sd, &[2.5, 3.5, 4.5, 5.5, 7.0], *points, config.seed, &FDScheme::third_order())?;
                    let ok = rep.max_cv <= tol.ratio_cv && rep.fit.c_rel_err <= tol.ratio_c;
                    println!("hua third-ratio: CV {:.2e}, c = {:.4}: {}", rep.max_cv, rep.fit.c, verdict(ok));
                    out.json("third_ratio.json", rep)?;
                    Ok(ok)
                }
            }
        }
        Command::Fatou(cmd) => fatou(cmd, &config, &out),
        Command::Ktypes(KtypesCmd::Spectrum { max_degree }) => {
            let sp = config.spectral()?;
            let profiles = spectrum(&sp, *max_degree, &config.t_grid())?;
            let rows = profiles.iter().flat_map(|pr| {
                pr.t_grid.iter().zip(&pr.values).map(move |(&t, &(re, im))| {
                    format!("{},{},{}", pr.delta.p, pr.delta.q, row(&[t, re, im]))
                })
            });
            out.csv("spectrum.csv", "p,q,t,phi_re,phi_im", rows)?;
            println!("ktypes spectrum: {} K-types x {} t values", profiles.len(), config.t_grid().len());
            Ok(true)
        }
        Command::Suite { only } => {
            let dir = config.out.clone().unwrap_or_else(|| PathBuf::from("suite-out"));
            std::fs::create_dir_all(&dir)?;
            let mut timings = Vec::new();
            let rep = run_suite(config.seed, tol, only, |o, secs| {
                println!("criterion {:>2} {:<20} {} ({secs:.1} s) {}", o.id, o.name, verdict(o.passed), o.summary);
                timings.push(json!({ "id": o.id, "wall_time_s": secs }));
            });
            let body = json!({ "version": out.version, "config": config, "seed": config.seed, "report": rep });
            let json_path = dir.join("suite.json");
            write_atomic(&json_path, (serde_json::to_string_pretty(&body)? + "\n").as_bytes())?;
            let mut csv = out.header()?;
            csv.push_str("id,name,passed,summary\n");
            for c in &rep.criteria {
                csv.push_str(&format!("{},{},{},\"{}\"\n", c.id, c.name, c.passed, c.summary.replace('"', "'")));
            }
            let csv_path = dir.join("suite.csv");
            write_atomic(&csv_path, csv.as_bytes())?;
            let side = dir.join("suite.manifest.json");
            let m = json!({
                "version": out.version, "config": config, "seed": config.seed,
                "wall_time_s": out.started.elapsed().as_secs_f64(), "criteria": timings,
                "outputs": [json_path.display().to_string(), csv_path.display().to_string()],
            });
            write_atomic(&side, serde_json::to_string_pretty(&m)?.as_bytes())?;
            println!("suite: {} of {} criteria passed", rep.criteria.iter().filter(|c| c.passed).count(), rep.criteria.len());
            Ok(rep.all_passed)
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn test_function(name: &str, sd: &StructureData, seed: u64) -> Result<BoundaryFunction> {
    Ok(match name {
        "one" => BoundaryFunction::one(),
        "u1" => BoundaryFunction::new("U_11", |u: &ShilovPoint| u.first()),
        "random" => random_band_limited(sd, 2, seed).to_function("random degree-2 polynomial"),
        other => return Err(Error::Invalid(format!("unknown function '{other}' (one, u1, random)"))),
    })
}

fn poisson(cmd: &PoissonCmd, config: &RunConfig, out: &Output) -> Result<bool> {
    let sp = config.spectral()?;
    let sd = &sp.sd;
    let tol = &config.tolerances;
    match cmd {
        PoissonCmd::Kernel => {
            let rep = kernel_form_check(&sp, config.samples.min(10_000), config.seed)?;
            let ok = rep.max_rel_err <= tol.kernel_form;
            println!("poisson kernel: max relative error {:.2e}: {}", rep.max_rel_err, verdict(ok));
            out.json("kernel.json", rep)?;
            Ok(ok)
        }
        PoissonCmd::Transform { function } => {
            let f = test_function(function, sd, config.seed)?;
            let rule = config.quadrature(sd)?;
            let rows = config
                .t_grid()
                .iter()
                .map(|&t| transform(&sp, &f, &radial_point(t, sd), &rule).map(|v| row(&[t, v.re, v.im])))
                .collect::<Result<Vec<_>>>()?;
            out.csv("transform.csv", "t,re,im", rows)?;
            println!("poisson transform of {}: {} t values", f.description, config.t_grid().len());
            Ok(true)
        }
        PoissonCmd::Phi => {
            let rule = config.quadrature(sd)?;
            let rows = config
                .t_grid()
                .iter()
                .map(|&t| {
                    let v = phi_s(&sp, t, &rule)?;
                    let ren = if sd.r == 1 { renormalized_phi_zonal(&sp, t)? } else { v * (-(sp.growth * t)).exp() };
                    Ok(row(&[t, v.re, v.im, ren.re, ren.im]))
                })
                .collect::<Result<Vec<_>>>()?;
            out.csv("phi.csv", "t,phi_re,phi_im,renormalized_re,renormalized_im", rows)?;
            println!("poisson phi: {} t values", config.t_grid().len());
            Ok(true)
        }
        PoissonCmd::Cs => {
            let params = CsParams { seed: config.seed, samples: config.samples.max(1), ..CsParams::default() };
            let rep = cs_report(&sp, &params)?;
            let limit = if sd.r == 1 { tol.cs_rank_one } else { tol.cs_monte_carlo };
            let ok = rep.max_pairwise_rel_err <= limit;
            println!("poisson cs: max pairwise relative error {:.2e}: {}", rep.max_pairwise_rel_err, verdict(ok));
            out.json("cs.json", rep)?;
            Ok(ok)
        }
        PoissonCmd::Norms => {
            let rs = Resampler::new(sd, 3)?;
            let rule = config.quadrature(sd)?;
            let norm_rule = sphere_rule(sd, 8)?;
            let f = random_band_limited(sd, 3, config.seed).to_function("random degree-3 polynomial");
            let reps = norm_sandwich(&sp, &[config.p], &[f], &config.t_grid(), &rs, &rule, &norm_rule, tol.sandwich_slack)?;
            let gamma = gamma_estimate(&sp, &config.t_grid(), config.samples, config.seed)?;
            let ok = reps.iter().all(|r| r.all_ok);
            println!("poisson norms: {}", verdict(ok));
            out.json("norms.json", json!({ "sandwich": reps, "gamma": gamma }))?;
            Ok(ok)
        }
    }
}

fn fatou(cmd: &FatouCmd, config: &RunConfig, out: &Output) -> Result<bool> {
    let sp = config.spectral()?;
    let sd = &sp.sd;
    let tol = &config.tolerances;
    let f = random_band_limited(sd, 2, config.seed).to_function("random degree-2 polynomial");
    match cmd {
        FatouCmd::Profile { nodes } => {
            let rule = config.quadrature(sd)?;
            let nodes = stiefel_rule(sd, *nodes, config.seed.wrapping_add(1))?.nodes;
            let prof = radial_profile(&sp, &f, &nodes, &config.t_grid(), &rule)?;
            let rows = prof.rows().into_iter().map(|(i, t, re, im)| format!("{i},{}", row(&[t, re, im])));
            out.csv("profile.csv", "node_index,t,re,im", rows)?;
            println!("fatou profile: {} nodes x {} t values", nodes.len(), prof.t_grid.len());
            Ok(true)
        }
        FatouCmd::Limit { nodes, tol: limit_tol } => {
            let rule = config.quadrature(sd)?;
            let nodes = stiefel_rule(sd, *nodes, config.seed.wrapping_add(1))?.nodes;
            let prof = radial_profile(&sp, &f, &nodes, &config.t_grid(), &rule)?;
            let rep = boundary_limit(&sp, &prof, Some(&f), *limit_tol)?;
            let err = if sd.r == 1 { rep.sup_error } else { rep.l2_error }.unwrap_or(f64::INFINITY);
            let bound = if sd.r == 1 { tol.fatou_sup } else { tol.fatou_l2 };
            let ok = err <= bound && (sd.r > 1 || rep.converged);
            println!("fatou limit: {} error {err:.2e}, converged = {}: {}", if sd.r == 1 { "sup" } else { "L2" }, rep.converged, verdict(ok));
            out.json("limit.json", rep)?;
            Ok(ok)
        }
        FatouCmd::Invert => {
            let rs = Resampler::new(sd, 2)?;
            let rule = config.quadrature(sd)?;
            let check = sphere_rule(sd, 8)?;
            let ts = config.t_grid();
            let fits = transform_fits(&sp, &f, &ts, &rs, &rule)?;
            let mut errs = Vec::new();
            for (fit, &t) in fits.iter().zip(&ts) {
                let big_f = |u: &ShilovPoint| fit.eval_matrix(u.matrix());
                let g = invert_l2(&sp, &big_f, t, &rs, &rule)?.to_function("g_t");
                errs.push((t, l2_distance(&g, &f, &check)));
            }
            let last = errs.last().map(|e| e.1).unwrap_or(f64::INFINITY);
            let ok = last <= tol.inversion;
            println!("fatou invert: L2 error {last:.2e} at t = {}: {}", config.t_stop, verdict(ok));
            out.json("invert.json", json!({ "errors": errs }))?;
            Ok(ok)
        }
        FatouCmd::Dominate { nodes } => {
            let rep = domination_check(&sp, &[0.5, 1.0, 2.0, 4.0], *nodes, 3.0, config.seed)?;
            let ok = rep.violations == 0;
            println!("fatou dominate: {} violations ({:?} branch): {}", rep.violations, rep.branch, verdict(ok));
            out.json("dominate.json", rep)?;
            Ok(ok)
        }
        FatouCmd::Sandwich { functions } => {
            let rs = Resampler::new(sd, 3)?;
            let rule = config.quadrature(sd)?;
            let norm_rule = sphere_rule(sd, 8)?;
            let fs: Vec<BoundaryFunction> = (0..*functions as u64)
                .map(|i| random_band_limited(sd, 3, config.seed.wrapping_add(i)).to_function(format!("f{i}")))
                .collect();
            let reps = norm_sandwich(&sp, &[config.p], &fs, &config.t_grid(), &rs, &rule, &norm_rule, tol.sandwich_slack)?;
            let ok = reps.iter().all(|r| r.all_ok);
            println!("fatou sandwich: {} functions: {}", fs.len(), verdict(ok));
            out.json("sandwich.json", reps)?;
            Ok(ok)
        }
    }
}
