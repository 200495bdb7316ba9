//! Subcommand implementations behind the `ubcs` binary.
//!
//! Each command reads the network (and VOT file where needed), runs the
//! pipeline, and writes its outputs into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use ubcs_core::pipeline::{run_equilibria, run_scheme, PipelineConfig};
use ubcs_core::report::{write_cost_csv, EquilibriaReport, OutcomeReport};
use ubcs_core::scheme::OutsiderSampler;
use ubcs_core::{assign_subscriber, Network, SchemeRun, VerificationReport, VotSpec};

pub const DEFAULT_GRID: usize = 401;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub network: PathBuf,
    pub vot: Option<PathBuf>,
    /// Overrides the class count from the VOT file.
    pub classes: Option<usize>,
    pub tol: f64,
    /// VOT points in the cost report.
    pub grid: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(network: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            network: network.into(),
            vot: None,
            classes: None,
            tol: ubcs_core::equilibrium::DEFAULT_TOL,
            grid: DEFAULT_GRID,
            seed: DEFAULT_SEED,
            out: out.into(),
        }
    }

    pub fn with_vot(mut self, vot: impl Into<PathBuf>) -> Self {
        self.vot = Some(vot.into());
        self
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.tol > 0.0 && self.tol.is_finite(), "--tol must be positive, got {}", self.tol);
        ensure!(self.grid >= 2, "--grid must be at least 2, got {}", self.grid);
        if let Some(m) = self.classes {
            ensure!(m >= 1, "--classes must be at least 1");
        }
        Ok(())
    }

    fn load_network(&self) -> Result<Network> {
        let text = fs::read_to_string(&self.network).with_context(|| format!("reading {}", self.network.display()))?;
        Network::from_json(&text).with_context(|| format!("parsing {}", self.network.display()))
    }

    fn load_vot(&self) -> Result<VotSpec> {
        let path = self.vot.as_ref().context("--vot is required for this command")?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        VotSpec::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn pipeline(&self, spec: &VotSpec) -> PipelineConfig {
        PipelineConfig {
            classes: self.classes.unwrap_or_else(|| spec.classes_or_default()),
            tol: self.tol,
            cost_grid: self.grid,
            ..PipelineConfig::default()
        }
    }

    fn run(&self) -> Result<(Network, SchemeRun)> {
        self.validate()?;
        let net = self.load_network()?;
        let spec = self.load_vot()?;
        let run = run_scheme(&net, &spec.distribution, &self.pipeline(&spec))?;
        Ok((net, run))
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }
}

/// What a command reports back to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    /// True when every verification check passed.
    pub passed: bool,
    /// Human-readable summary for the terminal.
    pub text: String,
}

fn to_json<S: Serialize>(value: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn report_verification(v: &VerificationReport) -> bool {
    if !v.passed() {
        log::error!("verification failed: {v:?}");
    }
    v.passed()
}

/// Writes `equilibria.json` and `equilibria.txt`.
pub fn cmd_equilibria(cfg: &RunConfig) -> Result<CommandOutput> {
    cfg.validate()?;
    let net = cfg.load_network()?;
    let pc = PipelineConfig { tol: cfg.tol, ..PipelineConfig::default() };
    let eq = run_equilibria(&net, &pc)?;
    let report = EquilibriaReport::new(&net, &eq.ue, &eq.so);
    let text = report.to_text();
    cfg.write("equilibria.json", to_json(&report)?)?;
    cfg.write("equilibria.txt", &text)?;
    Ok(CommandOutput { passed: true, text })
}

#[derive(Debug, Serialize)]
struct SchemeOutput<'a> {
    outcome: &'a OutcomeReport,
    verification: &'a VerificationReport,
}

/// Writes `scheme.json`, `scheme.txt` and `verification.json`.
pub fn cmd_scheme(cfg: &RunConfig) -> Result<CommandOutput> {
    let (net, run) = cfg.run()?;
    let outcome = OutcomeReport::new(&net, &run.equilibria.paths, &run.outcome);
    let text = outcome.to_text();
    cfg.write("scheme.json", to_json(&SchemeOutput { outcome: &outcome, verification: &run.verification })?)?;
    cfg.write("scheme.txt", &text)?;
    cfg.write("verification.json", to_json(&run.verification)?)?;
    Ok(CommandOutput { passed: report_verification(&run.verification), text })
}

/// Writes `improvement.csv`.
pub fn cmd_improvement(cfg: &RunConfig) -> Result<CommandOutput> {
    let (_, run) = cfg.run()?;
    let mut buf = Vec::new();
    write_cost_csv(&run.costs, &mut buf)?;
    cfg.write("improvement.csv", &buf)?;
    let text = format!("wrote {} cost points to {}\n", run.costs.points.len(), cfg.out.join("improvement.csv").display());
    Ok(CommandOutput { passed: report_verification(&run.verification), text })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Subscriber,
    Outsider,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RosterRow {
    pub user_id: String,
    pub role: Role,
    pub vot: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentRow {
    pub user_id: String,
    pub role: Role,
    pub vot: Option<f64>,
    pub path: String,
    pub time_min: f64,
    pub payment_usd: f64,
}

pub fn read_roster(path: &Path) -> Result<Vec<RosterRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = rdr.deserialize().collect::<Result<Vec<RosterRow>, _>>().with_context(|| format!("parsing {}", path.display()))?;
    Ok(rows)
}

/// Guides every roster entry. Subscribers are routed by declared VOT;
/// outsiders are drawn in roster order from one sampler seeded with `seed`.
pub fn assign_roster(net: &Network, run: &SchemeRun, roster: &[RosterRow], seed: u64) -> Result<Vec<AssignmentRow>> {
    let mut sampler = OutsiderSampler::new(&run.outcome, seed)?;
    let label = |path: usize| -> String {
        let ids: Vec<String> = net.link_ids(&run.equilibria.paths.paths[path]).iter().map(i64::to_string).collect();
        ids.join("-")
    };
    roster
        .iter()
        .map(|row| {
            let g = match row.role {
                Role::Subscriber => {
                    let Some(vot) = row.vot else {
                        bail!("subscriber {} has no declared VOT", row.user_id);
                    };
                    assign_subscriber(&run.outcome, vot).with_context(|| format!("subscriber {}", row.user_id))?
                }
                Role::Outsider => sampler.sample(&run.outcome),
            };
            Ok(AssignmentRow {
                user_id: row.user_id.clone(),
                role: row.role,
                vot: row.vot,
                path: label(g.path),
                time_min: g.time,
                payment_usd: g.payment,
            })
        })
        .collect()
}

/// Writes `assignments.csv` for the roster.
pub fn cmd_assign(cfg: &RunConfig, roster: &Path) -> Result<CommandOutput> {
    let (net, run) = cfg.run()?;
    let rows = assign_roster(&net, &run, &read_roster(roster)?, cfg.seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    cfg.write("assignments.csv", w.into_inner()?)?;
    let text = format!("assigned {} users to {}\n", rows.len(), cfg.out.join("assignments.csv").display());
    Ok(CommandOutput { passed: report_verification(&run.verification), text })
}
