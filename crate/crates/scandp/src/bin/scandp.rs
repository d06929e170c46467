//! Command-line front end: demonstration generation, training, episode
//! runs, batch suites, record evaluation, and artifact export.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scandp::checkpoint::{load_policy, save_policy};
use scandp::cloud::{write_ply, PointCloud};
use scandp::error::Error;
use scandp::expert::{generate_expert_demo, load_demo, save_demo};
use scandp::grid::OccupancyGrid;
use scandp::harness::{
    load_scenario_mesh, run_episode, run_suite, PolicyKind, RunRecord, ScenarioConfig,
    SUITE_CSV_HEADER,
};
use scandp::render::CameraModel;
use scandp::train::{train_policy, TrainConfig};

#[derive(Parser)]
#[command(name = "scandp", about = "Autonomous 3D scanning workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scripted expert demonstrations.
    Demo(DemoArgs),
    /// Train a policy on saved demonstrations.
    Train(TrainArgs),
    /// Run a single episode from a scenario config.
    Run(RunArgs),
    /// Run a batch of scenarios and write a summary CSV.
    Suite(SuiteArgs),
    /// Aggregate metrics from stored run records.
    Eval(EvalArgs),
    /// Export stored artifacts (grids to PLY, records to CSV).
    Export(ExportArgs),
}

#[derive(Args)]
struct DemoArgs {
    /// Mesh path or builtin:{sphere,cube,l-shape}.
    #[arg(long, default_value = "builtin:sphere")]
    mesh: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Directories holding saved demonstrations.
    #[arg(long, required = true, num_args = 1..)]
    demos: Vec<PathBuf>,
    /// Optional training config JSON; defaults apply otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Individual overrides of the training config.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct ScenarioOverrides {
    /// Scenario config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    init_poses: Option<usize>,
    #[arg(long)]
    scale: Option<f64>,
}

impl ScenarioOverrides {
    fn resolve(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                serde_json::from_str::<ScenarioConfig>(&text)?
            }
            None => {
                let mesh = self.mesh.clone().ok_or_else(|| {
                    Error::InvalidArgument("--config or --mesh is required".into())
                })?;
                ScenarioConfig::minimal(&mesh, PolicyKind::ExpertReplay)
            }
        };
        if let Some(mesh) = &self.mesh {
            cfg.mesh = mesh.clone();
        }
        if let Some(p) = &self.policy {
            cfg.policy = serde_json::from_value(serde_json::Value::String(p.clone()))?;
        }
        if let Some(c) = &self.checkpoint {
            cfg.checkpoint = Some(c.clone());
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        if let Some(n) = self.noise_std {
            cfg.noise_std = n;
        }
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        if let Some(i) = self.init_poses {
            cfg.init_poses = i;
        }
        if let Some(s) = self.scale {
            cfg.scale = s;
        }
        cfg.validate_for_load()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioOverrides,
    /// Seed to run (defaults to the first configured seed).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    init_pose_id: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Scenario config JSON: a single object or an array of scenarios.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Run record JSON files or directories containing them.
    #[arg(required = true, num_args = 1..)]
    records: Vec<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Occupancy grid file; occupied cell centers are written as PLY.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Run record JSON; the executed trajectory is written as CSV.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Occupancy threshold for --grid export.
    #[arg(long, default_value_t = 0.9)]
    kappa: f64,
}

fn collect_records(paths: &[PathBuf]) -> Result<Vec<RunRecord>, Error> {
    let mut records = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<_> = fs::read_dir(path)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|e| e == "json"))
                .collect();
            entries.sort();
            for p in entries {
                records.push(RunRecord::load(&p)?);
            }
        } else {
            records.push(RunRecord::load(path)?);
        }
    }
    if records.is_empty() {
        return Err(Error::InvalidArgument("no run records found".into()));
    }
    Ok(records)
}

fn cmd_demo(args: &DemoArgs) -> Result<(), Error> {
    let cfg = ScenarioConfig::minimal(&args.mesh, PolicyKind::ExpertReplay);
    let mut cfg = cfg;
    cfg.scale = args.scale;
    let mesh = load_scenario_mesh(&cfg)?;
    let cam = CameraModel::default_sensor();
    fs::create_dir_all(&args.out)?;
    for &seed in &args.seeds {
        let demo = generate_expert_demo(&mesh, &cam, seed, args.steps, &cfg.object_label())?;
        let dir = args.out.join(format!("demo_{seed}"));
        save_demo(&demo, &dir)?;
        println!("demo seed {seed}: {} steps -> {}", demo.len(), dir.display());
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), Error> {
    let mut cfg: TrainConfig = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = args.lr {
        cfg.lr = lr;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let demos = args
        .demos
        .iter()
        .map(load_demo)
        .collect::<Result<Vec<_>, _>>()?;
    let (policy, report) = train_policy(&demos, &cfg)?;
    save_policy(&policy, &serde_json::to_value(&cfg)?, &args.out)?;
    println!(
        "trained on {} samples in {:.0}s, final loss {:.4} -> {}",
        report.dataset_size,
        report.runtime_s,
        report.final_loss,
        args.out.display()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let cfg = args.scenario.resolve()?;
    let mesh = load_scenario_mesh(&cfg)?;
    let policy = match &cfg.checkpoint {
        Some(path) if cfg.policy.needs_checkpoint() => Some(load_policy(path)?.0),
        _ => None,
    };
    let seed = args.seed.unwrap_or(cfg.seeds[0]);
    if args.init_pose_id >= cfg.init_poses {
        return Err(Error::InvalidArgument(format!(
            "init_pose_id {} out of range (init_poses = {})",
            args.init_pose_id, cfg.init_poses
        )));
    }
    let out = run_episode(&cfg, &mesh, policy.as_ref(), seed, args.init_pose_id)?;
    let r = &out.record;
    println!(
        "policy {} object {} seed {} init {}: coverage {:.4}, path {:.3} m, {} steps, {:.1}s",
        r.policy, r.object, r.seed, r.init_pose_id, r.coverage_final, r.path_length_m, r.steps,
        r.runtime_s
    );
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let stem = format!("{}_{}_s{}_i{}", r.policy, r.object, r.seed, r.init_pose_id);
        r.save(dir.join(format!("{stem}.json")))?;
        write_ply(&out.cloud, dir.join(format!("{stem}.ply")))?;
        out.grid.save(dir.join(format!("{stem}.ogm")))?;
        println!("artifacts -> {}/{stem}.{{json,ply,ogm}}", dir.display());
    }
    Ok(())
}

fn cmd_suite(args: &SuiteArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.config)?;
    let configs: Vec<ScenarioConfig> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text)?
    } else {
        vec![serde_json::from_str(&text)?]
    };
    let summary = run_suite(&configs, &args.out)?;
    println!("{SUITE_CSV_HEADER}");
    for row in &summary.rows {
        println!("{}", row.to_csv());
    }
    if summary.failures > 0 {
        return Err(Error::Malformed(format!(
            "{} runs failed; see logs",
            summary.failures
        )));
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Error> {
    let records = collect_records(&args.records)?;
    let mut groups: std::collections::BTreeMap<(String, String, String), Vec<&RunRecord>> =
        Default::default();
    for r in &records {
        groups
            .entry((r.policy.clone(), r.object.clone(), format!("{}", r.noise_std)))
            .or_default()
            .push(r);
    }
    println!("policy,object,noise_std,runs,coverage_mean,coverage_std,path_mean_m,path_std_m");
    for ((policy, object, noise), rs) in &groups {
        let n = rs.len() as f64;
        let mean = |f: &dyn Fn(&RunRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
        let std = |f: &dyn Fn(&RunRecord) -> f64, m: f64| {
            (rs.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / n).sqrt()
        };
        let cov = mean(&|r: &RunRecord| r.coverage_final);
        let path = mean(&|r: &RunRecord| r.path_length_m);
        println!(
            "{policy},{object},{noise},{},{:.6},{:.6},{:.6},{:.6}",
            rs.len(),
            cov,
            std(&|r: &RunRecord| r.coverage_final, cov),
            path,
            std(&|r: &RunRecord| r.path_length_m, path),
        );
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> Result<(), Error> {
    match (&args.grid, &args.record) {
        (Some(grid_path), None) => {
            let grid = OccupancyGrid::load(grid_path)?;
            let centers: Vec<_> = grid
                .occupied_cells(args.kappa)
                .into_iter()
                .map(|idx| grid.cell_center(idx))
                .collect();
            write_ply(&PointCloud::new(centers), &args.out)?;
            println!("wrote {}", args.out.display());
            Ok(())
        }
        (None, Some(record_path)) => {
            let r = RunRecord::load(record_path)?;
            let mut csv = String::from("step,x,y,z,qw,qx,qy,qz,cloud_size\n");
            for (i, p) in r.poses.iter().enumerate() {
                let q = p.rotation.quaternion();
                csv.push_str(&format!(
                    "{i},{},{},{},{},{},{},{},{}\n",
                    p.translation.x,
                    p.translation.y,
                    p.translation.z,
                    q.w,
                    q.i,
                    q.j,
                    q.k,
                    r.cloud_sizes.get(i).copied().unwrap_or(0)
                ));
            }
            fs::write(&args.out, csv)?;
            println!("wrote {}", args.out.display());
            Ok(())
        }
        _ => Err(Error::InvalidArgument(
            "export needs exactly one of --grid or --record".into(),
        )),
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidArgument(_) | Error::Config(_) | Error::Json(_) | Error::FileNotFound(_)
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Demo(a) => cmd_demo(a),
        Command::Train(a) => cmd_train(a),
        Command::Run(a) => cmd_run(a),
        Command::Suite(a) => cmd_suite(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::from(0),
        Err(e) => {
            eprintln!("error: {e}");
            if is_config_error(&e) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
