use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use nalgebra::Vector3;
use twinlink::experiment::{
    self, analyze_and_write, run_planner_process, run_twin_process, ExperimentConfig, ExperimentError, Role, Transport,
};
use twinlink::planner::TrajectoryKind;
use twinlink::scenecam::{render_all, write_pfm, write_ppm, Scene};
use twinlink::Transform;

const DEFAULT_OUT: &str = "twinlink_out";

#[derive(Parser)]
#[command(
    name = "twinlink",
    version,
    about = "Planner/render digital-twin experiments over a rosbridge-style bus"
)]
struct Cli {
    /// Experiment config (JSON); the bundled desk experiment if omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "TWINLINK_OUT", value_name = "DIR")]
    out: Option<PathBuf>,
    /// `loopback` or `ws://host:port`.
    #[arg(long, global = true, value_parser = parse_transport)]
    transport: Option<Transport>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fewer setpoints and small images.
    #[arg(long, global = true)]
    fast: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan, simulate, capture and write every output.
    Run {
        /// `both`, or `planner` / `twin` to run one side against a running bridge.
        #[arg(long, default_value = "both", value_parser = parse_role)]
        role: Role,
        /// Seconds to wait for the other side before giving up.
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
    },
    /// Plan only: print one line per setpoint (robot, id, pattern, x y z, qw qx qy qz).
    Plan,
    /// Render RGB, segmentation and depth from one camera pose.
    Render {
        /// Camera at this setpoint's pose.
        #[arg(long, default_value_t = 0, conflicts_with = "eye")]
        setpoint: usize,
        /// Camera position `x,y,z`; requires --target.
        #[arg(long, value_parser = parse_vec3, requires = "target", allow_hyphen_values = true)]
        eye: Option<Vector3<f64>>,
        /// Point the camera looks at, `x,y,z`.
        #[arg(long, value_parser = parse_vec3, requires = "eye", allow_hyphen_values = true)]
        target: Option<Vector3<f64>>,
        #[arg(long)]
        width: Option<u32>,
        #[arg(long)]
        height: Option<u32>,
    },
    /// Recompute report.json and errors.csv from the CSVs of a run.
    Analyze {
        /// Run directory; defaults to --out.
        dir: Option<PathBuf>,
    },
    /// Run the bridge server until killed.
    Serve {
        #[arg(long, default_value = "127.0.0.1:9090")]
        bind: String,
    },
}

fn parse_transport(s: &str) -> Result<Transport, String> {
    s.parse()
}

fn parse_role(s: &str) -> Result<Role, String> {
    s.parse()
}

fn parse_vec3(s: &str) -> Result<Vector3<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Vector3::new(x, y, z)),
        _ => Err(format!("expected three finite numbers x,y,z, got {s:?}")),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::bundled(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = &cli.transport {
        cfg.transport = t.clone();
    }
    if cli.fast {
        cfg.fast_mode();
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn cmd_run(cli: &Cli, role: Role, timeout: f64) -> Result<(), ExperimentError> {
    let cfg = load_config(cli)?;
    let out = out_dir(cli, &cfg);
    if !(timeout > 0.0 && timeout.is_finite()) {
        return Err(ExperimentError::Config("--timeout must be positive".into()));
    }
    let timeout = Duration::from_secs_f64(timeout);
    match role {
        Role::Both => {
            let s = experiment::run(&cfg, &out)?;
            print!("{}", s.table());
            println!("outputs in {}", out.display());
        }
        Role::Planner => {
            let log = run_planner_process(&cfg, &out, timeout)?;
            println!("setpoints reached: {}", log.arrivals.len());
            println!("capture triggers:  {}", log.captures.iter().sum::<usize>());
            println!(
                "planner outputs in {}; run `twinlink analyze` once the twin has finished",
                out.display()
            );
        }
        Role::Twin => {
            let log = run_twin_process(&cfg, &out, timeout)?;
            println!("captures:     {}", log.captures.len());
            println!("images:       {}", log.captures.len() * 3);
            println!("cloud points: {}", log.cloud.len());
            println!("twin outputs in {}", out.display());
        }
    }
    Ok(())
}

fn cmd_plan(cli: &Cli) -> Result<(), ExperimentError> {
    let cfg = load_config(cli)?;
    let plan = experiment::plan(&cfg)?;
    for (sps, p) in plan.setpoints.iter().zip(&plan.plans) {
        for sp in &sps.setpoints {
            let t = sp.pose.translation;
            let [w, x, y, z] = sp.pose.wxyz();
            println!(
                "{} {} {} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
                sps.robot,
                sp.id,
                sp.pattern.as_str(),
                t.x,
                t.y,
                t.z,
                w,
                x,
                y,
                z
            );
        }
        let linear = p.moves.iter().filter(|m| m.kind == TrajectoryKind::Linear).count();
        eprintln!(
            "{}: {} setpoints, {} linear / {} joint moves, {:.2} s",
            p.name,
            p.arrivals.len(),
            linear,
            p.moves.len() - linear,
            p.duration()
        );
    }
    Ok(())
}

fn cmd_render(
    cli: &Cli,
    setpoint: usize,
    eye: Option<Vector3<f64>>,
    target: Option<Vector3<f64>>,
    size: (Option<u32>, Option<u32>),
) -> Result<(), ExperimentError> {
    let mut cfg = load_config(cli)?;
    if size.0.is_some() || size.1.is_some() {
        let i = cfg.camera.intrinsics;
        cfg.set_resolution(size.0.unwrap_or(i.width), size.1.unwrap_or(i.height));
        cfg.camera.intrinsics.validate()?;
    }
    let pose = match (eye, target) {
        (Some(e), Some(t)) => {
            if (t - e).norm() < 1e-9 {
                return Err(ExperimentError::Config("--eye and --target coincide".into()));
            }
            Transform::look_at(e, t, Vector3::z())
        }
        _ => {
            let sp = cfg
                .setpoints()
                .into_iter()
                .flat_map(|r| r.setpoints)
                .find(|s| s.id == setpoint)
                .ok_or_else(|| ExperimentError::Config(format!("no setpoint {setpoint} in this config")))?;
            sp.pose * cfg.camera_offset()
        }
    };
    let out = out_dir(cli, &cfg);
    std::fs::create_dir_all(&out).map_err(|e| ExperimentError::io(&out, e))?;
    let scene = Scene::desk(&cfg.scene, cfg.seed);
    let frame = render_all(&scene, &pose, &cfg.camera.intrinsics, cfg.camera.depth_mode);
    let path = |name: &str| out.join(name);
    write_ppm(&frame.rgb, &path("rgb.ppm"))?;
    write_ppm(&frame.seg, &path("seg.ppm"))?;
    write_pfm(&frame.depth, &path("depth.pfm"))?;
    for f in ["rgb.ppm", "seg.ppm", "depth.pfm"] {
        println!("{}", path(f).display());
    }
    Ok(())
}

fn cmd_analyze(cli: &Cli, dir: Option<&Path>) -> Result<(), ExperimentError> {
    let dir = match dir {
        Some(d) => d.to_path_buf(),
        None => cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    };
    let report = analyze_and_write(&dir)?;
    print!("{}", report.summary());
    Ok(())
}

fn cmd_serve(bind: &str) -> Result<(), ExperimentError> {
    let server = twinlink::bridge::serve(bind)?;
    println!("bridge listening on {}", server.url());
    loop {
        std::thread::park();
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { role, timeout } => cmd_run(&cli, *role, *timeout),
        Command::Plan => cmd_plan(&cli),
        Command::Render {
            setpoint,
            eye,
            target,
            width,
            height,
        } => cmd_render(&cli, *setpoint, *eye, *target, (*width, *height)),
        Command::Analyze { dir } => cmd_analyze(&cli, dir.as_deref()),
        Command::Serve { bind } => cmd_serve(bind),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
