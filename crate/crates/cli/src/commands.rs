//! Subcommand implementations: shared input loading, artifact writers, and
//! the error-to-exit-code mapping.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use macroplace_core::agent::{
    collect_episode, train_loop_with, FeatureExtractor, PolicyModel, PpoError, SampleMode,
    TrainConfig,
};
use macroplace_core::canvas::{CanvasError, GridSpec};
use macroplace_core::env::{
    evaluate_poses, random_action, EnvContext, EnvError, Episode, MacroPlacementRecord,
    PlacementSnapshot, PoseRecord, SnapshotError,
};
use macroplace_core::geometry::Point;
use macroplace_core::agent::model::CheckpointError;
use macroplace_core::grouping::{assign_groups, GroupAssignment, GroupingError};
use macroplace_core::netlist::{load_netlist, Netlist, NetlistError};
use macroplace_core::proxy::{reward, MacroPose, ProxyCosts, ProxyError};
use macroplace_core::refine::{
    anneal, pin_accessibility_violations, sa_place_from_scratch, FineGrid, RefineError, TraceRow,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::render::{render_svg, RenderError};
use crate::{Command, CommonArgs};

/// Every failure a command can report, keyed to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad file, format, or configuration; exit code 2.
    Validation(String),
    /// The placer ran out of legal positions; exit code 3.
    NoLegalAction(String),
    /// Training produced a non-finite loss; exit code 4.
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::NoLegalAction(_) => 3,
            CliError::Divergence(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::NoLegalAction(m) | CliError::Divergence(m) => {
                write!(f, "{m}")
            }
        }
    }
}

impl std::error::Error for CliError {}

macro_rules! validation_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> CliError {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}

validation_from!(
    NetlistError,
    GroupingError,
    CanvasError,
    EnvError,
    SnapshotError,
    CheckpointError,
    ProxyError,
    RenderError,
    std::io::Error,
    serde_json::Error
);

impl From<RefineError> for CliError {
    fn from(e: RefineError) -> CliError {
        match e {
            RefineError::NoLegalStart => CliError::NoLegalAction(e.to_string()),
            RefineError::NotFullyPlaced => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PpoError> for CliError {
    fn from(e: PpoError) -> CliError {
        match e {
            PpoError::BadConfig(m) => CliError::Validation(m),
            PpoError::EmptyMask => CliError::NoLegalAction(e.to_string()),
            PpoError::NonFiniteLoss => CliError::Divergence(format!("training diverged: {e}")),
        }
    }
}

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Group { common, groups } => cmd_group(&common, groups.as_deref()),
        Command::Train { common, updates, workers, checkpoint, snapshot_every } => {
            cmd_train(&common, updates, workers, checkpoint.as_deref(), snapshot_every)
        }
        Command::Place { common, checkpoint, sa, random, post, zero_omega } => {
            cmd_place(&common, checkpoint, sa, random, post, zero_omega)
        }
        Command::Eval { common, placement } => cmd_eval(&common, &placement),
        Command::Render { common, placement } => cmd_render(&common, &placement),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Validation)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &common.netlist {
        cfg.netlist = Some(p.clone());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(g) = common.grid {
        cfg.grid = Some(g);
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    cfg.validate().map_err(CliError::Validation)?;
    Ok(cfg)
}

struct Inputs {
    cfg: RunConfig,
    netlist: Arc<Netlist>,
    groups: GroupAssignment,
}

fn load_inputs(common: &CommonArgs, groups_flag: Option<&Path>) -> Result<Inputs, CliError> {
    let cfg = load_config(common)?;
    let path = cfg
        .netlist
        .clone()
        .ok_or_else(|| CliError::Validation("no netlist: pass --netlist or set it in the config".into()))?;
    let netlist = Arc::new(load_netlist(&path)?);
    let groups_path = groups_flag.map(Path::to_path_buf).or_else(|| cfg.groups.clone());
    let groups = match &groups_path {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            parse_groups(&text, &netlist, p)?
        }
        None => derive_groups(&netlist)?,
    };
    Ok(Inputs { cfg, netlist, groups })
}

fn derive_groups(netlist: &Netlist) -> Result<GroupAssignment, CliError> {
    let names: Vec<&str> = netlist.macros.iter().map(|m| m.name.as_str()).collect();
    Ok(assign_groups(&names)?)
}

/// Parses a group assignment file and checks it partitions the macro set.
fn parse_groups(text: &str, netlist: &Netlist, path: &Path) -> Result<GroupAssignment, CliError> {
    let parsed: GroupAssignment = serde_json::from_str(text)
        .map_err(|e| CliError::Validation(format!("groups {}: {e}", path.display())))?;
    let known: HashSet<&str> = netlist.macros.iter().map(|m| m.name.as_str()).collect();
    let mut seen: HashSet<&str> = HashSet::new();
    for g in &parsed.groups {
        for name in &g.macro_names {
            if !known.contains(name.as_str()) {
                return Err(CliError::Validation(format!("groups: unknown macro {name}")));
            }
            if !seen.insert(name.as_str()) {
                return Err(CliError::Validation(format!("groups: macro {name} listed twice")));
            }
        }
    }
    for name in known {
        if !seen.contains(name) {
            return Err(CliError::Validation(format!("groups: macro {name} unassigned")));
        }
    }
    Ok(parsed)
}

fn make_ctx(inputs: &Inputs) -> Result<Arc<EnvContext>, CliError> {
    let spec = match inputs.cfg.grid {
        Some(d) => GridSpec::with_dims(&inputs.netlist, d.rows, d.cols)?,
        None => GridSpec::derive(&inputs.netlist)?,
    };
    Ok(Arc::new(EnvContext::new(
        inputs.netlist.clone(),
        inputs.groups.clone(),
        spec,
        inputs.cfg.weights,
    )?))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn cmd_group(common: &CommonArgs, groups_flag: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let path = cfg
        .netlist
        .clone()
        .ok_or_else(|| CliError::Validation("no netlist: pass --netlist or set it in the config".into()))?;
    let netlist = load_netlist(&path)?;
    fs::create_dir_all(&cfg.out)?;
    let groups_path = groups_flag.map(Path::to_path_buf).or_else(|| cfg.groups.clone());
    let (assignment, text) = match &groups_path {
        Some(p) => {
            // A human-provided assignment is echoed byte-for-byte.
            let text = fs::read_to_string(p)?;
            (parse_groups(&text, &netlist, p)?, text)
        }
        None => {
            let a = derive_groups(&netlist)?;
            let mut text = serde_json::to_string_pretty(&a)?;
            text.push('\n');
            (a, text)
        }
    };
    write_text(&cfg.out.join("groups.json"), &text)?;
    write_json(&cfg.out.join("clusters.json"), &netlist.clusters)?;
    println!("G = {}", assignment.len());
    for g in &assignment.groups {
        println!("group {}: size {}", g.id, g.macro_names.len());
    }
    Ok(())
}

fn cmd_train(
    common: &CommonArgs,
    updates: Option<usize>,
    workers: Option<usize>,
    checkpoint: Option<&Path>,
    snapshot_every: usize,
) -> Result<(), CliError> {
    let mut inputs = load_inputs(common, None)?;
    if let Some(u) = updates {
        inputs.cfg.updates = u;
    }
    if let Some(w) = workers {
        if w == 0 {
            return Err(CliError::Validation("workers must be at least 1".into()));
        }
        inputs.cfg.workers = w;
    }
    let ctx = make_ctx(&inputs)?;
    let cfg = &inputs.cfg;
    let fx = FeatureExtractor::new(&ctx);
    let model = match checkpoint {
        Some(p) => PolicyModel::load(p)?,
        None => PolicyModel::init(cfg.seed),
    };
    let tc = TrainConfig { ppo: cfg.ppo, updates: cfg.updates, workers: cfg.workers, seed: cfg.seed };
    fs::create_dir_all(&cfg.out)?;
    let snap_dir = cfg.out.join("snapshots");
    if snapshot_every > 0 {
        fs::create_dir_all(&snap_dir)?;
    }

    let mut csv =
        String::from("update,mean_reward,aborts,wirelength,congestion,density,hierarchy,policy_loss,value_loss,entropy\n");
    let mut snapshot_err: Option<String> = None;
    let (model, _) = train_loop_with(&ctx, &fx, model, &tc, |m, model| {
        let cost_cols = match m.mean_costs {
            Some(c) => format!("{},{},{},{}", c.wirelength, c.congestion, c.density, c.hierarchy),
            None => ",,,".into(),
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            m.update, m.mean_reward, m.aborts, cost_cols, m.policy_loss, m.value_loss, m.entropy
        ));
        println!("update {:>4}  reward {:+.4}  aborts {}", m.update, m.mean_reward, m.aborts);
        if snapshot_every > 0 && (m.update + 1) % snapshot_every == 0 && snapshot_err.is_none() {
            let (_, result) = collect_episode(&ctx, &fx, model, cfg.seed, SampleMode::Greedy, 1.0)
                .expect("greedy rollout is total");
            match render_svg(&ctx.netlist, &ctx.group_of, &result.snapshot) {
                Ok(svg) => {
                    let path = snap_dir.join(format!("update_{:05}.svg", m.update));
                    if let Err(e) = fs::write(path, svg) {
                        snapshot_err = Some(e.to_string());
                    }
                }
                Err(e) => snapshot_err = Some(e.to_string()),
            }
        }
    })?;
    if let Some(e) = snapshot_err {
        return Err(CliError::Validation(format!("snapshot write failed: {e}")));
    }
    write_text(&cfg.out.join("metrics.csv"), &csv)?;
    let ckpt = cfg.out.join("checkpoint.json");
    model.save(&ckpt)?;
    println!("wrote {}", ckpt.display());
    Ok(())
}

/// Grid anchor of a micron position, when it sits exactly on a cell origin.
fn anchor_of(spec: &GridSpec, p: Point) -> Option<(usize, usize)> {
    let col = ((p.0 - spec.origin.0) / spec.cell_w).round();
    let row = ((p.1 - spec.origin.1) / spec.cell_h).round();
    if row < 0.0 || col < 0.0 {
        return None;
    }
    let (r, c) = (row as usize, col as usize);
    if r < spec.n_rows && c < spec.n_cols && spec.cell_origin(r, c) == p {
        Some((r, c))
    } else {
        None
    }
}

fn make_snapshot(ctx: &EnvContext, poses: &[MacroPose], clusters: &[Point]) -> PlacementSnapshot {
    PlacementSnapshot {
        design: ctx.netlist.name.clone(),
        macros: ctx
            .netlist
            .macros
            .iter()
            .enumerate()
            .map(|(i, m)| MacroPlacementRecord {
                name: m.name.clone(),
                pose: Some(PoseRecord {
                    anchor: anchor_of(&ctx.spec, poses[i].position),
                    orientation: poses[i].orientation,
                    position: poses[i].position,
                }),
            })
            .collect(),
        clusters: clusters.to_vec(),
    }
}

/// Poses in netlist order from a snapshot; every macro must be placed.
fn snapshot_poses(netlist: &Netlist, snap: &PlacementSnapshot) -> Result<Vec<MacroPose>, CliError> {
    if snap.macros.len() != netlist.macros.len() {
        return Err(CliError::Validation(format!(
            "placement inconsistent with netlist: {} macros in placement, {} in netlist",
            snap.macros.len(),
            netlist.macros.len()
        )));
    }
    let mut by_name: HashMap<&str, &MacroPlacementRecord> = HashMap::new();
    for rec in &snap.macros {
        if by_name.insert(rec.name.as_str(), rec).is_some() {
            return Err(CliError::Validation(format!("placement lists macro {} twice", rec.name)));
        }
    }
    netlist
        .macros
        .iter()
        .map(|m| {
            let rec = by_name
                .get(m.name.as_str())
                .ok_or_else(|| CliError::Validation(format!("placement missing macro {}", m.name)))?;
            let pose = rec
                .pose
                .as_ref()
                .ok_or_else(|| CliError::Validation(format!("macro {} has no pose", m.name)))?;
            Ok(MacroPose { position: pose.position, orientation: pose.orientation })
        })
        .collect()
}

#[derive(Serialize)]
struct CostReport {
    wirelength: f64,
    congestion: f64,
    density: f64,
    hierarchy: f64,
    weighted_total: f64,
    reward: f64,
    pin_violations: usize,
}

fn cost_report(ctx: &EnvContext, costs: &ProxyCosts, poses: &[MacroPose], fine_dim: usize) -> CostReport {
    let fine = FineGrid::for_spec(&ctx.spec, fine_dim);
    let pin_violations = (0..poses.len())
        .map(|i| pin_accessibility_violations(ctx, poses, i, &fine).len())
        .sum();
    CostReport {
        wirelength: costs.wirelength,
        congestion: costs.congestion,
        density: costs.density,
        hierarchy: costs.hierarchy,
        weighted_total: costs.weighted(&ctx.weights),
        reward: reward(costs, &ctx.weights),
        pin_violations,
    }
}

fn print_costs(report: &CostReport) {
    println!("weighted = {:.6}", report.weighted_total);
    println!("reward = {:.6}", report.reward);
    println!("pin violations = {}", report.pin_violations);
}

fn cmd_place(
    common: &CommonArgs,
    checkpoint: Option<PathBuf>,
    sa: bool,
    random: bool,
    post: bool,
    zero_omega: bool,
) -> Result<(), CliError> {
    let mut inputs = load_inputs(common, None)?;
    if zero_omega {
        inputs.cfg.weights.omega = 0.0;
    }
    let ctx = make_ctx(&inputs)?;
    let cfg = &inputs.cfg;
    fs::create_dir_all(&cfg.out)?;

    let mut trace: Vec<TraceRow> = Vec::new();
    let (mut poses, label) = match (checkpoint, sa, random) {
        (Some(p), false, false) => {
            let model = PolicyModel::load(&p)?;
            let fx = FeatureExtractor::new(&ctx);
            let (_, result) = collect_episode(&ctx, &fx, &model, cfg.seed, SampleMode::Greedy, 1.0)?;
            if result.aborted {
                return Err(CliError::NoLegalAction("policy rollout ran out of legal positions".into()));
            }
            (snapshot_poses(&ctx.netlist, &result.snapshot)?, format!("checkpoint {}", p.display()))
        }
        (None, true, false) => {
            let out = sa_place_from_scratch(&ctx, &cfg.sa, cfg.seed)?;
            trace.extend(out.trace.iter().copied());
            (out.poses, "sa".to_string())
        }
        (None, false, true) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut ep = Episode::new(ctx.clone(), cfg.seed);
            while !ep.is_done() {
                let action = random_action(&ep, &mut rng).expect("running episode has a legal action");
                ep.step(action)?;
            }
            let result = ep.result()?.clone();
            if result.aborted {
                return Err(CliError::NoLegalAction("random placement ran out of legal positions".into()));
            }
            (snapshot_poses(&ctx.netlist, &result.snapshot)?, "random".to_string())
        }
        _ => {
            return Err(CliError::Validation(
                "pick exactly one of --checkpoint, --sa, --random".into(),
            ))
        }
    };

    if post {
        // Separate RNG stream from the source placement.
        let outcome = anneal(&ctx, &poses, &cfg.sa, cfg.seed.wrapping_add(1))?;
        let offset = trace.last().map(|r| r.iteration + 1).unwrap_or(0);
        trace.extend(outcome.trace.iter().map(|r| TraceRow { iteration: r.iteration + offset, ..*r }));
        poses = outcome.poses;
    }

    let (costs, clusters) = evaluate_poses(&ctx, &poses)?;
    let snapshot = make_snapshot(&ctx, &poses, &clusters);
    let report = cost_report(&ctx, &costs, &poses, cfg.sa.fine_dim);

    println!("source: {label}");
    print_costs(&report);
    snapshot.save(&cfg.out.join("placement.json"))?;
    println!("wrote {}", cfg.out.join("placement.json").display());
    write_json(&cfg.out.join("costs.json"), &report)?;
    let svg = render_svg(&ctx.netlist, &ctx.group_of, &snapshot)?;
    write_text(&cfg.out.join("layout.svg"), &svg)?;
    if !trace.is_empty() {
        let mut csv = String::from("iteration,temperature,cost,accepted\n");
        for r in &trace {
            csv.push_str(&format!("{},{},{},{}\n", r.iteration, r.temperature, r.cost, r.accepted));
        }
        write_text(&cfg.out.join("sa_trace.csv"), &csv)?;
    }
    Ok(())
}

fn cmd_eval(common: &CommonArgs, placement: &Path) -> Result<(), CliError> {
    let inputs = load_inputs(common, None)?;
    let ctx = make_ctx(&inputs)?;
    let snap = PlacementSnapshot::load(placement)?;
    let poses = snapshot_poses(&ctx.netlist, &snap)?;
    let (costs, _) = evaluate_poses(&ctx, &poses)?;
    let report = cost_report(&ctx, &costs, &poses, inputs.cfg.sa.fine_dim);
    print_costs(&report);
    fs::create_dir_all(&inputs.cfg.out)?;
    write_json(&inputs.cfg.out.join("costs.json"), &report)?;
    Ok(())
}

fn cmd_render(common: &CommonArgs, placement: &Path) -> Result<(), CliError> {
    let inputs = load_inputs(common, None)?;
    let snap = PlacementSnapshot::load(placement)?;
    let by_name = inputs.groups.group_of();
    let group_of: Vec<usize> = inputs
        .netlist
        .macros
        .iter()
        .map(|m| {
            by_name
                .get(m.name.as_str())
                .copied()
                .ok_or_else(|| CliError::Validation(format!("macro {} missing from groups", m.name)))
        })
        .collect::<Result<_, _>>()?;
    let svg = render_svg(&inputs.netlist, &group_of, &snap)?;
    fs::create_dir_all(&inputs.cfg.out)?;
    write_text(&inputs.cfg.out.join("layout.svg"), &svg)?;
    Ok(())
}
