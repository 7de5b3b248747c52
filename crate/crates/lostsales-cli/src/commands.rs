//! One function per subcommand. Each writes its artifacts through the run
//! context (atomic writes, recorded in the manifest) and reports whether the
//! run was clean or found a verification failure; hard errors propagate for
//! exit-code classification in `main`.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use lostsales::bounds;
use lostsales::demand::DemandDistribution;
use lostsales::dp::{self, DpConfig, DpTelemetry};
use lostsales::error::Error;
use lostsales::lattice::Rat;
use lostsales::lindley::{self, TailSuiteReport};
use lostsales::policy;
use lostsales::report::{sha256_hex, OutputRecord, RunManifest, ARTIFACT_VERSION};
use lostsales::sim::{self, CostSummary};
use lostsales::stream::{child_seed, Stream};
use lostsales::suite::{self, RatioTable};
use lostsales::Result;

use crate::config::ExperimentConfig;

/// Did the run complete with every requested check passing?
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    VerificationFailed,
}

/// Shared run state: resolved config, provenance, and the manifest that
/// records every artifact the command writes.
pub struct RunContext {
    pub cfg: ExperimentConfig,
    pub command: String,
    pub config_sha256: String,
    pub manifest: RunManifest,
    started: Instant,
}

/// Provenance wrapper: every JSON artifact carries the artifact version,
/// the config hash, and the root seed next to its payload.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    artifact_version: u32,
    command: &'a str,
    config_sha256: &'a str,
    root_seed: u64,
    report: T,
}

impl RunContext {
    pub fn new(cfg: ExperimentConfig, command: &str, config_sha256: String) -> Self {
        let manifest = RunManifest::new(command, config_sha256.clone(), cfg.seed);
        RunContext {
            cfg,
            command: command.to_string(),
            config_sha256,
            manifest,
            started: Instant::now(),
        }
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, report: T) -> Result<()> {
        let envelope = Envelope {
            artifact_version: ARTIFACT_VERSION,
            command: &self.command,
            config_sha256: &self.config_sha256,
            root_seed: self.cfg.seed,
            report,
        };
        let mut text = serde_json::to_string_pretty(&envelope)
            .map_err(|e| Error::Artifact(format!("{name}: {e}")))?;
        text.push('\n');
        self.manifest.emit(&self.out_path(name), text.as_bytes())
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.manifest.emit(&self.out_path(name), bytes)
    }

    /// Saves the manifest (with total wall time) next to the artifacts.
    pub fn finish(mut self) -> Result<()> {
        let elapsed = self.started.elapsed().as_millis() as u64;
        self.manifest.timings_ms.push(("total".to_string(), elapsed));
        let name = format!("{}.manifest.json", self.command);
        self.manifest.save(&self.out_path(&name))
    }
}

fn build_demand(cfg: &ExperimentConfig) -> Result<DemandDistribution> {
    cfg.demand.build()
}

pub fn cmd_constants(ctx: &mut RunContext) -> Result<Status> {
    let d = build_demand(&ctx.cfg)?;
    let report = bounds::constants_report(
        &d,
        ctx.cfg.c,
        ctx.cfg.h,
        &ctx.cfg.rates,
        &ctx.cfg.epsilons,
    )?;
    ctx.write_json("constants.json", &report)?;
    Ok(Status::Clean)
}

/// Stationary-law summary without the full pmf dump.
#[derive(Serialize)]
struct SupremumSummary {
    rate: Rat,
    unit: Rat,
    mean: f64,
    second_moment: f64,
    residual: f64,
    iterations: usize,
    support_atoms: usize,
}

#[derive(Serialize)]
struct LindleyReport {
    instance: String,
    theta: f64,
    supremum: SupremumSummary,
    tail_suite: TailSuiteReport,
    all_pass: bool,
}

pub fn cmd_lindley(ctx: &mut RunContext) -> Result<Status> {
    let d = build_demand(&ctx.cfg)?;
    let rate = *ctx.cfg.rates.first().ok_or_else(|| {
        Error::BadParameter("lindley needs at least one entry in `rates`".into())
    })?;
    let sup = lindley::stationary_waiting(&d, rate, ctx.cfg.tol)?;
    let theta = lindley::theta(&d, rate)?.value();
    let mut stream = Stream::child(ctx.cfg.seed, "cli-lindley", 0);
    let tail_suite =
        lindley::verify_tail_suite(&d, rate, ctx.cfg.k_max, ctx.cfg.mc_samples, &mut stream)?;
    let all_pass = tail_suite.all_pass();
    let report = LindleyReport {
        instance: lostsales::report::instance_fingerprint(&d, ctx.cfg.c, ctx.cfg.h, b"lindley"),
        theta,
        supremum: SupremumSummary {
            rate,
            unit: sup.unit,
            mean: sup.mean,
            second_moment: sup.second_moment,
            residual: sup.residual,
            iterations: sup.iterations,
            support_atoms: sup.pmf.len(),
        },
        tail_suite,
        all_pass,
    };
    ctx.write_json("lindley.json", &report)?;
    Ok(if all_pass { Status::Clean } else { Status::VerificationFailed })
}

pub fn cmd_z_search(ctx: &mut RunContext) -> Result<Status> {
    let d = build_demand(&ctx.cfg)?;
    let best =
        policy::best_constant_z(&d, ctx.cfg.c, ctx.cfg.h, ctx.cfg.grid_step, ctx.cfg.tol)?;
    ctx.write_json("zsearch.json", &best)?;
    Ok(Status::Clean)
}

#[derive(Serialize)]
struct DpReport {
    instance: String,
    lead_time: usize,
    horizon: usize,
    opt: f64,
    telemetry: DpTelemetry,
    table_artifact: Option<String>,
}

pub fn cmd_dp(ctx: &mut RunContext) -> Result<Status> {
    let d = build_demand(&ctx.cfg)?;
    let cfg = &ctx.cfg;
    let mut dp_cfg = DpConfig::new(cfg.lead_time, cfg.horizon);
    dp_cfg.order_cap_units = cfg.order_cap_units;
    dp_cfg.inventory_cap_units = cfg.inventory_cap_units;
    dp_cfg.order_step_units = cfg.order_step_units;
    dp_cfg.state_budget = cfg.state_budget;
    dp_cfg.check_cap_sensitivity = cfg.check_cap_sensitivity;
    dp_cfg.keep_policy = cfg.keep_table;
    let sol = dp::solve(&d, cfg.c, cfg.h, &dp_cfg)?;
    let mut table_artifact = None;
    if let Some(table) = sol.table {
        let path = ctx.out_path("dp_table.bin");
        table.save(&path)?;
        let bytes = std::fs::read(&path)?;
        ctx.manifest.outputs.push(OutputRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        table_artifact = Some(path.display().to_string());
    }
    let report = DpReport {
        instance: lostsales::report::instance_fingerprint(&d, ctx.cfg.c, ctx.cfg.h, b"dp"),
        lead_time: ctx.cfg.lead_time,
        horizon: ctx.cfg.horizon,
        opt: sol.opt,
        telemetry: sol.telemetry,
        table_artifact,
    };
    ctx.write_json("dp.json", &report)?;
    Ok(Status::Clean)
}

#[derive(Serialize)]
struct SimulateReport {
    instance: String,
    policy: lostsales::policy::PolicySpec,
    lead_time: usize,
    horizon: usize,
    cost: CostSummary,
    trajectory_csv: String,
}

pub fn cmd_simulate(ctx: &mut RunContext) -> Result<Status> {
    let d = build_demand(&ctx.cfg)?;
    let spec = ctx
        .cfg
        .policy
        .clone()
        .ok_or_else(|| Error::BadParameter("simulate needs a `policy` in the config".into()))?;
    let built = spec.build(&d, ctx.cfg.c, ctx.cfg.h, ctx.cfg.tol)?;
    let cost = sim::simulate(
        &built,
        &d,
        ctx.cfg.c,
        ctx.cfg.h,
        ctx.cfg.lead_time,
        ctx.cfg.horizon,
        ctx.cfg.replications,
        child_seed(ctx.cfg.seed, "cli-simulate", 0),
    )?;

    let mut demand_stream = Stream::child(ctx.cfg.seed, "cli-trajectory-demand", 0);
    let mut policy_stream = Stream::child(ctx.cfg.seed, "cli-trajectory-policy", 0);
    let traj = sim::simulate_one(
        &built,
        &d,
        ctx.cfg.lead_time,
        ctx.cfg.horizon,
        &mut demand_stream,
        &mut policy_stream,
    )?;
    let unit = traj.unit.to_f64();
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["t", "I", "x1", "order", "D", "N", "C"])
        .map_err(|e| Error::Artifact(format!("trajectory.csv: {e}")))?;
    for step in &traj.steps {
        writer
            .serialize((
                step.t,
                step.inventory as f64 * unit,
                step.receipt as f64 * unit,
                step.order as f64 * unit,
                step.demand as f64 * unit,
                step.lost as f64 * unit,
                traj.cost(step, ctx.cfg.c, ctx.cfg.h),
            ))
            .map_err(|e| Error::Artifact(format!("trajectory.csv: {e}")))?;
    }
    let csv_bytes = writer
        .into_inner()
        .map_err(|e| Error::Artifact(format!("trajectory.csv: {e}")))?;
    ctx.write_bytes("trajectory.csv", &csv_bytes)?;
    let report = SimulateReport {
        instance: lostsales::report::instance_fingerprint(&d, ctx.cfg.c, ctx.cfg.h, b"simulate"),
        policy: spec,
        lead_time: ctx.cfg.lead_time,
        horizon: ctx.cfg.horizon,
        cost,
        trajectory_csv: ctx.out_path("trajectory.csv").display().to_string(),
    };
    ctx.write_json("simulate.json", &report)?;
    Ok(Status::Clean)
}

pub fn cmd_lower_bound(ctx: &mut RunContext) -> Result<Status> {
    let d = build_demand(&ctx.cfg)?;
    let mut stream = Stream::child(ctx.cfg.seed, "cli-lower-bound", 0);
    let sol = bounds::lower_bound_optimize(
        &d,
        ctx.cfg.c,
        ctx.cfg.h,
        ctx.cfg.lead_time,
        ctx.cfg.optimizer_budget,
        &mut stream,
    )?;
    ctx.write_json("lower_bound.json", &sol)?;
    Ok(Status::Clean)
}

/// Gap outcome when the minimizing rate reaches mean demand: no stationary
/// comparison policy exists, so nothing was certified.
#[derive(Serialize)]
struct DegenerateGap {
    degenerate: bool,
    r_star: String,
    mean_demand: f64,
    lower_bound: bounds::LowerBoundSolution,
}

#[derive(Serialize)]
#[serde(untagged)]
enum GapOutcome {
    Certified(bounds::GapReport),
    Degenerate(DegenerateGap),
}

pub fn cmd_gap(ctx: &mut RunContext) -> Result<Status> {
    let d = build_demand(&ctx.cfg)?;
    let mut opt_stream = Stream::child(ctx.cfg.seed, "cli-gap-opt", 0);
    let sol = bounds::lower_bound_optimize(
        &d,
        ctx.cfg.c,
        ctx.cfg.h,
        ctx.cfg.lead_time,
        ctx.cfg.optimizer_budget,
        &mut opt_stream,
    )?;
    let mut panel_stream = Stream::child(ctx.cfg.seed, "cli-gap-panel", 0);
    let (outcome, status) = match bounds::gap_certificate(
        &d,
        ctx.cfg.c,
        ctx.cfg.h,
        ctx.cfg.lead_time,
        &sol,
        ctx.cfg.panel_samples,
        &mut panel_stream,
    ) {
        Ok(rep) => {
            let status = if rep.pass { Status::Clean } else { Status::VerificationFailed };
            (GapOutcome::Certified(rep), status)
        }
        Err(Error::RStarDegenerate { rstar, mean }) => (
            GapOutcome::Degenerate(DegenerateGap {
                degenerate: true,
                r_star: rstar,
                mean_demand: mean,
                lower_bound: sol,
            }),
            Status::VerificationFailed,
        ),
        Err(e) => return Err(e),
    };
    ctx.write_json("gap.json", &outcome)?;
    Ok(status)
}

pub fn cmd_ratio_table(ctx: &mut RunContext) -> Result<Status> {
    let cfg = ctx.cfg.clone();
    let mut cells = Vec::new();
    for lead_time in cfg.lead_time_grid() {
        let mut instances = Vec::new();
        for spec in cfg.demand_grid() {
            let d = spec.build()?;
            for (c, h) in cfg.cost_grid() {
                instances.push((d.label().to_string(), d.clone(), c, h));
            }
        }
        cells.extend(suite::ratio_table(&instances, lead_time, cfg.horizon).cells);
    }
    let table = RatioTable::from_cells(cells);
    ctx.write_bytes("ratio_table.csv", table.csv().as_bytes())?;
    ctx.write_json("ratio_table.json", &table)?;
    Ok(Status::Clean)
}

#[derive(Serialize)]
struct VerifyReport {
    criteria: Vec<suite::CriterionResult>,
    passed: usize,
    failed: usize,
}

pub fn cmd_verify(ctx: &mut RunContext, criteria: &[usize]) -> Result<Status> {
    let results = if criteria.is_empty() {
        suite::run_all(ctx.cfg.seed)
    } else {
        suite::run_selected(ctx.cfg.seed, criteria)
    };
    for r in &results {
        println!("{}", r.line());
    }
    let passed = results.iter().filter(|r| r.pass).count();
    let failed = results.len() - passed;
    let report = VerifyReport { criteria: results, passed, failed };
    ctx.write_json("verify.json", &report)?;
    Ok(if failed == 0 { Status::Clean } else { Status::VerificationFailed })
}

/// Exit-code classification for hard errors: budget exhaustion is its own
/// code so batch drivers can retry with bigger budgets; everything else is
/// a config/usage error.
pub fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded { .. } | Error::StateBudgetExceeded { .. } => 3,
        _ => 2,
    }
}

