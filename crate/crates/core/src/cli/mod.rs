//! Batch front end: argument parsing and the four subcommands.
//!
//! Every command writes its results under an output directory. Reports carry
//! no timings or host information, so reruns with the same seed produce
//! byte-identical files whatever the worker count.

mod doc;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

pub use doc::{Experiment, ExperimentDoc, SiteWeight, Suite, VerifySettings};

use crate::error::{Error, Result};
use crate::quadrant::{Axis, QuadrantPoint};
use crate::trotter::Simulator;
use crate::verify::quadrant_suite::{exact_draws, quadrant_suite, QuadrantSettings};
use crate::verify::{self, cjson, ComplexEstimate, InterfaceReport, InterfaceSettings, PathEstimate, ReplicaRunner, Report, SuiteReport, System};

#[derive(Debug, Parser)]
#[command(name = "imub", version, about = "Trotter simulation of infinite-rate mutually catalytic branching")]
pub struct Cli {
    /// Master seed; overrides the document's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Output directory; overrides the document's.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact draws from the harmonic measure of the quadrant, as CSV.
    SampleQuadrant(SampleArgs),
    /// Simulate paths described by an experiment document.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run verification suites; exits nonzero if any check fails.
    Verify {
        /// Required unless only the quadrant and interface suites run.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated subset of suites; defaults to the document's list.
        #[arg(long, value_delimiter = ',')]
        suite: Vec<Suite>,
    },
    /// Interface law for step initial data on a window of Z.
    InterfaceStudy(InterfaceArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub u: f64,
    #[arg(long)]
    pub v: f64,
    #[arg(long)]
    pub n: u64,
}

#[derive(Debug, Args)]
pub struct InterfaceArgs {
    /// Document whose `verify.interface` block supplies the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub u: Option<f64>,
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub time: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub replicas: Option<u64>,
}

const DEFAULT_OUT: &str = "out";

/// Runs a parsed command line; returns whether every check passed.
pub fn run(cli: Cli) -> Result<bool> {
    let started = Instant::now();
    let outcome = match cli.command {
        Command::SampleQuadrant(a) => {
            let out = cli.out.unwrap_or_else(|| DEFAULT_OUT.into());
            std::fs::create_dir_all(&out)?;
            let path = out.join("samples.csv");
            let file = BufWriter::new(File::create(&path)?);
            cmd_sample_quadrant(a.u, a.v, a.n, cli.seed.unwrap_or(0), cli.workers, file)?;
            log::info!("wrote {}", path.display());
            true
        }
        Command::Simulate { config } => {
            let exp = Experiment::from_path(&config)?;
            let out = output_dir(cli.out, &exp);
            let runner = ReplicaRunner::new(cli.seed.unwrap_or(exp.doc.seed), cli.workers);
            cmd_simulate(&exp, &runner, &out)?;
            true
        }
        Command::Verify { config, suite } => {
            let exp = config.as_deref().map(Experiment::from_path).transpose()?;
            let suites = match (&exp, suite.is_empty()) {
                (_, false) => suite,
                (Some(e), true) if !e.doc.verify.suites.is_empty() => e.doc.verify.suites.clone(),
                (Some(_), true) => Suite::ALL.to_vec(),
                (None, true) => vec![Suite::Quadrant],
            };
            let seed = cli.seed.or(exp.as_ref().map(|e| e.doc.seed)).unwrap_or(0);
            let out = match &exp {
                Some(e) => output_dir(cli.out, e),
                None => cli.out.unwrap_or_else(|| DEFAULT_OUT.into()),
            };
            let outcome = cmd_verify(exp.as_ref(), &suites, &ReplicaRunner::new(seed, cli.workers), &out)?;
            for s in &outcome {
                println!("{:<12} {}", s.suite, if s.pass { "PASS" } else { "FAIL" });
                for r in s.reports.iter().filter(|r| !r.pass) {
                    println!("  failed: {} {}", r.test, r.params);
                }
            }
            outcome.iter().all(|s| s.pass)
        }
        Command::InterfaceStudy(a) => {
            let mut s = match &a.config {
                Some(path) => ExperimentDoc::from_path(path)?.verify.interface,
                None => InterfaceSettings::default(),
            };
            s.u = a.u.unwrap_or(s.u);
            s.v = a.v.unwrap_or(s.v);
            s.radius = a.radius.unwrap_or(s.radius);
            s.time = a.time.unwrap_or(s.time);
            s.epsilon = a.epsilon.unwrap_or(s.epsilon);
            s.replicas = a.replicas.unwrap_or(s.replicas);
            let out = cli.out.unwrap_or_else(|| DEFAULT_OUT.into());
            let report = cmd_interface_study(&s, &ReplicaRunner::new(cli.seed.unwrap_or(0), cli.workers), &out)?;
            for r in &report.rows {
                println!("k={:>3}  empirical={:.5}  formula={:.5}  {}", r.site, r.empirical, r.formula, if r.pass { "ok" } else { "FAIL" });
            }
            println!("P[b1 = b2] = {:.5}", report.equal_frequency);
            report.pass
        }
    };
    log::info!("finished in {:.2?}", started.elapsed());
    Ok(outcome)
}

fn output_dir(flag: Option<PathBuf>, exp: &Experiment) -> PathBuf {
    flag.or_else(|| exp.doc.output_dir.clone()).unwrap_or_else(|| DEFAULT_OUT.into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Writes `n` exact draws from `Q_{(u,v)}` as `axis,value` rows after a header.
pub fn cmd_sample_quadrant<W: Write>(u: f64, v: f64, n: u64, seed: u64, workers: usize, out: W) -> Result<()> {
    let x = QuadrantPoint::new(u, v)?;
    let draws = exact_draws(&ReplicaRunner::new(seed, workers), "sample-quadrant", x, n)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis", "value"])?;
    for d in &draws {
        w.write_record([d.axis().as_str(), &d.value().to_string()])?;
    }
    w.flush()?;
    let vertical = draws.iter().filter(|d| d.axis() == Axis::Vertical).count();
    log::info!("{n} draws, vertical fraction {:.6}", vertical as f64 / n.max(1) as f64);
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
struct TimeSummary {
    time: f64,
    sites: Vec<i64>,
    mean_type1: Vec<f64>,
    se_type1: Vec<f64>,
    mean_type2: Vec<f64>,
    se_type2: Vec<f64>,
    martingale_mean: Vec<serde_json::Value>,
    martingale_se: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, Serialize)]
struct EpsilonSummary {
    epsilon: f64,
    replicas: u64,
    jumps: usize,
    records: Vec<TimeSummary>,
}

fn path_header(exp: &Experiment, ny: usize, interface: bool) -> Vec<String> {
    let mut h = vec!["replica".to_string(), "time".to_string()];
    for s in exp.matrix.sites() {
        h.push(format!("type1[{s}]"));
        h.push(format!("type2[{s}]"));
    }
    for j in 0..ny {
        h.push(format!("m_re[{j}]"));
        h.push(format!("m_im[{j}]"));
    }
    if interface {
        h.push("b1".into());
        h.push("b2".into());
    }
    h
}

/// Simulates every `ε` of the document; writes `summary.json` and, unless
/// disabled, `paths_eps_<ε>.csv`.
pub fn cmd_simulate(exp: &Experiment, runner: &ReplicaRunner, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let doc = &exp.doc;
    if !crate::lattice::is_boundary_state(&exp.x0) {
        log::warn!("initial state has sites carrying both types; they are resampled at the first jump");
    }
    let mut summaries = Vec::new();
    for &eps in &doc.epsilons {
        let sim = Simulator::new(&exp.matrix, Some(&exp.beta), doc.params(eps), exp.tests.clone())?;
        let started = Instant::now();
        let paths = runner.map(&format!("simulate/eps={eps}"), doc.replicas, |_, rng| sim.run(&exp.x0, rng))?;
        log::info!("eps={eps}: {} replicas in {:.2?}", doc.replicas, started.elapsed());
        let times = sim.record_times();
        let ny = exp.tests.len();
        if doc.write_paths {
            let interface = paths.first().is_some_and(|p| p.interface.is_some());
            let mut w = csv::Writer::from_path(out.join(format!("paths_eps_{eps}.csv")))?;
            w.write_record(path_header(exp, ny, interface))?;
            for (i, p) in paths.iter().enumerate() {
                for (r, state) in p.states.iter().enumerate() {
                    let mut row = vec![i.to_string(), p.times[r].to_string()];
                    for pt in state.points() {
                        row.push(pt.u.to_string());
                        row.push(pt.v.to_string());
                    }
                    for m in &p.martingale_values {
                        row.push(m[r].re.to_string());
                        row.push(m[r].im.to_string());
                    }
                    if let Some(iface) = &p.interface {
                        row.push(iface[r].b1.to_string());
                        row.push(iface[r].b2.to_string());
                    }
                    w.write_record(&row)?;
                }
            }
            w.flush()?;
        }
        let records = times
            .iter()
            .enumerate()
            .map(|(r, &time)| {
                let per_site = |f: &dyn Fn(&crate::lattice::Configuration) -> &[f64]| -> Vec<PathEstimate> {
                    (0..exp.matrix.len()).map(|k| PathEstimate::from_samples(paths.iter().map(|p| f(&p.states[r])[k]))).collect()
                };
                let e1 = per_site(&|c| c.type1());
                let e2 = per_site(&|c| c.type2());
                let m: Vec<ComplexEstimate> =
                    (0..ny).map(|j| ComplexEstimate::from_samples(paths.iter().map(|p| p.martingale_values[j][r]))).collect();
                TimeSummary {
                    time,
                    sites: exp.matrix.sites().to_vec(),
                    mean_type1: e1.iter().map(|e| e.mean).collect(),
                    se_type1: e1.iter().map(PathEstimate::se).collect(),
                    mean_type2: e2.iter().map(|e| e.mean).collect(),
                    se_type2: e2.iter().map(PathEstimate::se).collect(),
                    martingale_mean: m.iter().map(|e| cjson(e.mean())).collect(),
                    martingale_se: m.iter().map(|e| cjson(e.se())).collect(),
                }
            })
            .collect();
        summaries.push(EpsilonSummary { epsilon: eps, replicas: doc.replicas, jumps: doc.params(eps).jump_count(), records });
    }
    write_json(
        &out.join("summary.json"),
        &json!({"seed": runner.master_seed, "horizon": doc.horizon, "runs": summaries}),
    )
}

fn need(exp: Option<&Experiment>, suite: Suite) -> Result<&Experiment> {
    exp.ok_or_else(|| Error::InvalidParams(format!("suite {} needs --config", suite.as_str())))
}

fn need_tests(exp: &Experiment, suite: Suite) -> Result<()> {
    if exp.tests.is_empty() {
        Err(Error::InvalidParams(format!("suite {} needs at least one test function", suite.as_str())))
    } else {
        Ok(())
    }
}

/// Runs one suite and returns its reports.
pub fn run_suite(exp: Option<&Experiment>, suite: Suite, runner: &ReplicaRunner) -> Result<SuiteReport> {
    let started = Instant::now();
    let mut reports: Vec<Report> = Vec::new();
    match suite {
        Suite::Quadrant => {
            let settings = exp.map_or_else(QuadrantSettings::default, |e| e.doc.verify.quadrant.clone());
            reports = quadrant_suite(&settings, runner)?;
        }
        Suite::Interface => {
            let settings = exp.map_or_else(InterfaceSettings::default, |e| e.doc.verify.interface.clone());
            reports.push(verify::interface_law_test(&settings, runner)?.report());
        }
        _ => {
            let e = need(exp, suite)?;
            let sys = System { matrix: &e.matrix, beta: &e.beta, x0: &e.x0 };
            let n = e.doc.verify_replicas();
            let v = &e.doc.verify;
            let site = e.verify_site();
            let t = e.verify_time();
            match suite {
                Suite::Martingale => {
                    need_tests(e, suite)?;
                    for &eps in &e.doc.epsilons {
                        for y in &e.tests {
                            let r = verify::martingale_mean_test(&sys, &e.doc.params(eps), y, n, runner, v.drift_scale)?;
                            reports.push(r.report());
                        }
                    }
                }
                Suite::Marginal => {
                    for &eps in &e.doc.epsilons {
                        let p = e.doc.params(eps);
                        reports.push(verify::marginal_law_test(&sys, &p, site, t, n, runner)?.report());
                        reports.push(verify::aggregated_marginal_test(&sys, &p, &e.weights(), t, n, runner)?.report());
                        reports.push(verify::mean_flow_test(&sys, &p, t, n, runner)?.report());
                    }
                }
                Suite::Correlation => {
                    let tc = v.correlation_time.unwrap_or(t);
                    for &eps in &e.doc.epsilons {
                        reports.push(verify::correlation_test(&sys, &e.doc.params(eps), site, tc, n, runner)?.report());
                    }
                }
                Suite::Doob => {
                    for &eps in &e.doc.epsilons {
                        let p = e.doc.params(eps);
                        let r = verify::submartingale_doob_test(&sys, &p, v.doob_level, n, runner, v.doob_growth_override)?;
                        reports.push(r.report());
                    }
                }
                Suite::Refinement => {
                    need_tests(e, suite)?;
                    let base = e.doc.params(e.doc.epsilons[0]);
                    for y in &e.tests {
                        reports.push(verify::refinement_study(&sys, &base, y, &e.doc.epsilons, n, runner)?.report());
                    }
                }
                Suite::Quadrant | Suite::Interface => unreachable!(),
            }
        }
    }
    log::info!("suite {} done in {:.2?}", suite.as_str(), started.elapsed());
    Ok(SuiteReport::new(suite.as_str(), reports))
}

/// Runs the suites in order and writes `verify_report.json`.
pub fn cmd_verify(exp: Option<&Experiment>, suites: &[Suite], runner: &ReplicaRunner, out: &Path) -> Result<Vec<SuiteReport>> {
    if let Some(s) = suites.iter().find(|s| s.needs_system() && exp.is_none()) {
        need(exp, *s)?;
    }
    if let Some(e) = exp {
        e.check_suites(suites)?;
    }
    std::fs::create_dir_all(out)?;
    let results = suites.iter().map(|&s| run_suite(exp, s, runner)).collect::<Result<Vec<_>>>()?;
    let pass = results.iter().all(|s| s.pass);
    write_json(&out.join("verify_report.json"), &json!({"seed": runner.master_seed, "pass": pass, "suites": results}))?;
    Ok(results)
}

/// Runs the interface check and writes `interface_study.csv` and `.json`.
pub fn cmd_interface_study(s: &InterfaceSettings, runner: &ReplicaRunner, out: &Path) -> Result<InterfaceReport> {
    std::fs::create_dir_all(out)?;
    let report = verify::interface_law_test(s, runner)?;
    let mut w = csv::Writer::from_path(out.join("interface_study.csv"))?;
    w.write_record(["site", "empirical", "formula", "window_value", "tolerance", "pass"])?;
    for r in &report.rows {
        w.write_record([
            r.site.to_string(),
            r.empirical.to_string(),
            r.formula.to_string(),
            r.window_value.to_string(),
            r.tolerance.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    write_json(&out.join("interface_study.json"), &report.report())?;
    Ok(report)
}
