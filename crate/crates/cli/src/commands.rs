//! Subcommands. Every option can also come from the `--config` file under the
//! same name (dashes or underscores); the command line wins.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result, bail};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{Value, json};
use vsearch_core::Vec2;
use vsearch_core::agent::{
    AgentConfig, CircularScan, OracleDetector, OracleDetectorConfig, RandomPolicy, RewardConfig, SearchPolicy, TEST_CONTRAST_RANGE, run_agent_trials,
};
use vsearch_core::elm::{ElmModel, calibrate_threshold, run_trials, trial_setup};
use vsearch_core::io::{image_to_tensor, load_bvst, load_jsonl, save_bvst, save_jsonl, save_pgm, tensor_to_image};
use vsearch_core::metrics::{EnergyModel, ann_flops, policy_activity, policy_as_ann, summarize};
use vsearch_core::retina::{FcgConfig, Retina};
use vsearch_core::rl::{TrainConfig, decile_returns, load_policy, save_policy, train};
use vsearch_core::stimulus::{GaborSpec, NoiseSpec, SearchImage, build_search_image, sample_target_location};
use vsearch_core::trial::TrialRecord;
use vsearch_core::visibility::{TwoIfcRecord, VisibilityParams, WeibullOptions, fit_visibility, fit_weibull, simulate_2ifc};

use crate::config::Config;
use crate::service::{DEFAULT_CONTRAST, DEFAULT_ELM_THRESHOLD, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "vsearch", version, about = "Foveated visual search: stimuli, observers, agents and a trial service")]
pub struct Cli {
    /// Master seed for every random draw in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `key = value` file with defaults for any option.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Where run logs and service state live.
    #[arg(long, global = true)]
    pub data_dir: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noise background plus Gabor target, written as a BVST tensor.
    GenStimulus {
        #[arg(long)]
        contrast: Option<f64>,
        /// Target location (deg); sampled from the seed when absent.
        #[arg(long, allow_hyphen_values = true)]
        target_x: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        target_y: Option<f64>,
        #[arg(long)]
        out: Option<String>,
        /// Optional 8-bit preview.
        #[arg(long)]
        pgm: Option<String>,
    },
    /// Foveated transform of a BVST image at one fixation.
    RetinaTransform {
        #[arg(long = "in")]
        input: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        fix_x: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        fix_y: Option<f64>,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        pgm: Option<String>,
    },
    /// Simulated two-interval detection at a set of locations and durations.
    #[command(name = "simulate-2ifc")]
    Simulate2ifc {
        /// `x,y` in degrees; repeatable.
        #[arg(long = "loc", allow_hyphen_values = true)]
        locs: Vec<String>,
        /// Presentation time (ms); repeatable.
        #[arg(long = "duration")]
        durations: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        /// `reference` or five comma-separated parameters.
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Fit the visibility map to 2IFC records (JSONL).
    FitVisibility {
        #[arg(long = "in")]
        input: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Fit a Weibull psychometric curve to JSONL rows `{level, correct, total}`.
    FitWeibull {
        #[arg(long = "in")]
        input: Option<String>,
        /// Performance falls as the level grows (e.g. eccentricity).
        #[arg(long)]
        inverted: bool,
        #[arg(long)]
        out: Option<String>,
    },
    /// Ideal-observer search trials.
    RunElm {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Calibrate the stopping threshold first.
        #[arg(long)]
        calibrate: bool,
        #[arg(long)]
        target_accuracy: Option<f64>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Agent search trials with a scripted or trained policy.
    RunAgent {
        /// circular, random or spiking.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        ckpt: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// Reward preset (1 or 2); only changes the logged rewards.
        #[arg(long)]
        hp: Option<u8>,
        /// Use the action mean instead of sampling.
        #[arg(long)]
        deterministic: bool,
        #[arg(long)]
        out: Option<String>,
    },
    /// Train the spiking policy with soft actor-critic.
    TrainSac {
        #[arg(long)]
        hp: Option<u8>,
        #[arg(long)]
        trials: Option<usize>,
        /// Checkpoint directory.
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        curves: Option<String>,
    },
    /// Summary statistics for a JSONL trial file.
    Analyze {
        #[arg(long = "in")]
        input: Option<String>,
        #[arg(long)]
        out: Option<String>,
        /// Fixation density map as a BVST tensor.
        #[arg(long)]
        density: Option<String>,
    },
    /// Spiking energy of a policy on recorded trials, next to a dense equivalent.
    Energy {
        #[arg(long)]
        ckpt: Option<String>,
        #[arg(long)]
        trials: Option<String>,
    },
    /// HTTP trial service.
    Serve {
        #[arg(long)]
        addr: Option<String>,
        #[arg(long)]
        agent_ckpt: Option<String>,
        #[arg(long)]
        elm_threshold: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenStimulus { .. } => "gen-stimulus",
            Command::RetinaTransform { .. } => "retina-transform",
            Command::Simulate2ifc { .. } => "simulate-2ifc",
            Command::FitVisibility { .. } => "fit-visibility",
            Command::FitWeibull { .. } => "fit-weibull",
            Command::RunElm { .. } => "run-elm",
            Command::RunAgent { .. } => "run-agent",
            Command::TrainSac { .. } => "train-sac",
            Command::Analyze { .. } => "analyze",
            Command::Energy { .. } => "energy",
            Command::Serve { .. } => "serve",
        }
    }
}

/// Resolved settings for one invocation.
pub struct Ctx {
    pub cfg: Config,
    pub seed: u64,
    pub data_dir: PathBuf,
    command: &'static str,
}

impl Ctx {
    fn req(&mut self, key: &str, cli: Option<String>) -> Result<String> {
        self.cfg.get_opt(key, cli)?.with_context(|| format!("missing --{}", key.replace('_', "-")))
    }

    /// Log the resolved configuration to stderr and append it to `runs.jsonl`.
    fn log_run(&self) -> Result<()> {
        for k in self.cfg.unused() {
            eprintln!("warning: config key `{k}` not used by {}", self.command);
        }
        let entry = json!({
            "command": self.command,
            "seed": self.seed,
            "config": self.cfg.resolved(),
            "time": std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        });
        eprintln!("{} seed={} config={}", self.command, self.seed, serde_json::to_string(self.cfg.resolved())?);
        std::fs::create_dir_all(&self.data_dir).with_context(|| format!("creating {}", self.data_dir.display()))?;
        let mut f = OpenOptions::new().create(true).append(true).open(self.data_dir.join("runs.jsonl"))?;
        writeln!(f, "{entry}")?;
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let seed = cfg.get("seed", cli.seed, 0u64)?;
    let data_dir = PathBuf::from(cfg.get("data_dir", cli.data_dir.clone(), "data".to_string())?);
    let mut ctx = Ctx { cfg, seed, data_dir, command: cli.command.name() };
    match cli.command {
        Command::GenStimulus { contrast, target_x, target_y, out, pgm } => {
            let contrast = ctx.cfg.get("contrast", contrast, DEFAULT_CONTRAST)?;
            let tx = ctx.cfg.get_opt("target_x", target_x)?;
            let ty = ctx.cfg.get_opt("target_y", target_y)?;
            let out = ctx.req("out", out)?;
            let pgm = ctx.cfg.get_opt("pgm", pgm)?;
            ctx.log_run()?;
            let noise = NoiseSpec { seed: ctx.seed, ..NoiseSpec::default() };
            let gabor = GaborSpec { contrast, ..GaborSpec::default() };
            let loc = match (tx, ty) {
                (Some(x), Some(y)) => Vec2::new(x, y),
                (None, None) => sample_target_location(&mut ChaCha8Rng::seed_from_u64(ctx.seed), noise.diameter_px, &gabor),
                _ => bail!("give both --target-x and --target-y, or neither"),
            };
            let img = build_search_image(&noise, &gabor, loc)?;
            if img.clamp_warning {
                eprintln!("warning: {} pixels clamped", img.clamped_pixels);
            }
            save_bvst(&out, &image_to_tensor(&img.pixels))?;
            if let Some(p) = pgm {
                save_pgm(p, &img.pixels)?;
            }
            print_json(&json!({ "out": out, "seed": ctx.seed, "target": img.target, "clamped_pixels": img.clamped_pixels }))?;
        }
        Command::RetinaTransform { input, fix_x, fix_y, out, pgm } => {
            let input = ctx.req("in", input)?;
            let fx = ctx.cfg.get("fix_x", fix_x, 0.0)?;
            let fy = ctx.cfg.get("fix_y", fix_y, 0.0)?;
            let out = ctx.req("out", out)?;
            let pgm = ctx.cfg.get_opt("pgm", pgm)?;
            ctx.log_run()?;
            let pixels = tensor_to_image(&load_bvst(&input)?)?;
            let img = SearchImage { pixels, mean_luminance: 0.5, seed: 0, target: None, clamped_pixels: 0, clamp_warning: false };
            let r = Retina::new(&FcgConfig::default())?.transform(&img, Vec2::new(fx, fy));
            save_bvst(&out, &image_to_tensor(&r.pixels))?;
            if let Some(p) = pgm {
                save_pgm(p, &r.pixels)?;
            }
            print_json(&json!({ "out": out, "fixation": [fx, fy], "shape": r.pixels.shape() }))?;
        }
        Command::Simulate2ifc { locs, durations, trials, params, out } => {
            let trials = ctx.cfg.get("trials", trials, 2000usize)?;
            let params = parse_params(&ctx.cfg.get("params", params, "reference".to_string())?)?;
            let locs = if locs.is_empty() {
                match ctx.cfg.get_opt::<String>("loc", None)? {
                    Some(s) => s.split(';').map(parse_vec2).collect::<Result<Vec<_>>>()?,
                    None => default_locations(),
                }
            } else {
                locs.iter().map(|s| parse_vec2(s)).collect::<Result<Vec<_>>>()?
            };
            let durations = if durations.is_empty() { vec![50.0, 100.0, 250.0, 500.0] } else { durations };
            let out = ctx.req("out", out)?;
            ctx.log_run()?;
            let mut records = Vec::new();
            for (i, &loc) in locs.iter().enumerate() {
                for (j, &d) in durations.iter().enumerate() {
                    let s = ctx.seed.wrapping_mul(1_000_003).wrapping_add((i * durations.len() + j) as u64);
                    records.push(simulate_2ifc(&params, loc, d, trials, s));
                }
            }
            save_jsonl(&out, &records)?;
            print_json(&json!({ "out": out, "conditions": records.len(), "trials_per_condition": trials }))?;
        }
        Command::FitVisibility { input, out } => {
            let input = ctx.req("in", input)?;
            let out = ctx.cfg.get_opt("out", out)?;
            ctx.log_run()?;
            let records: Vec<TwoIfcRecord> = load_jsonl(&input)?;
            let fit = fit_visibility(&records)?;
            write_json_opt(out.as_deref(), &serde_json::to_value(&fit)?)?;
        }
        Command::FitWeibull { input, inverted, out } => {
            let input = ctx.req("in", input)?;
            let out = ctx.cfg.get_opt("out", out)?;
            ctx.log_run()?;
            #[derive(Deserialize)]
            struct Row {
                level: f64,
                correct: u64,
                total: u64,
            }
            let rows: Vec<Row> = load_jsonl(&input)?;
            let levels: Vec<f64> = rows.iter().map(|r| r.level).collect();
            let correct: Vec<u64> = rows.iter().map(|r| r.correct).collect();
            let total: Vec<u64> = rows.iter().map(|r| r.total).collect();
            let fit = fit_weibull(&levels, &correct, &total, &WeibullOptions { inverted, x_max: None })?;
            let mut v = serde_json::to_value(fit)?;
            v["threshold_75"] = json!(fit.threshold(0.75));
            write_json_opt(out.as_deref(), &v)?;
        }
        Command::RunElm { trials, threshold, calibrate, target_accuracy, out } => {
            let n = ctx.cfg.get("trials", trials, 2000usize)?;
            let threshold = ctx.cfg.get("threshold", threshold, DEFAULT_ELM_THRESHOLD)?;
            let calibrate = ctx.cfg.get("calibrate", Some(calibrate).filter(|c| *c), false)?;
            let target_accuracy = ctx.cfg.get("target_accuracy", target_accuracy, 0.98)?;
            let out = ctx.cfg.get_opt("out", out)?;
            ctx.log_run()?;
            let mut model = ElmModel::new(&VisibilityParams::reference(), threshold)?;
            let mut calibration = Value::Null;
            if calibrate {
                let c = calibrate_threshold(&model, target_accuracy, 1000, ctx.seed, 12);
                eprintln!("calibrated threshold {:.4} (accuracy {:.3})", c.threshold, c.accuracy);
                model.threshold = c.threshold;
                calibration = serde_json::to_value(c)?;
            }
            let (elm_trials, batch) = run_trials(&model, n, ctx.seed);
            let records: Vec<TrialRecord> =
                elm_trials.iter().enumerate().map(|(k, t)| model.trial_record(t, trial_setup(model.len(), ctx.seed, k).1)).collect();
            if let Some(p) = &out {
                save_jsonl(p, &records)?;
            }
            let s = summarize(&records)?;
            print_json(&json!({
                "threshold": model.threshold,
                "calibration": calibration,
                "trials": batch.trials,
                "accuracy": batch.accuracy(),
                "timeouts": batch.timeouts,
                "median_fixations": s.median_fixations,
            }))?;
        }
        Command::RunAgent { policy, ckpt, trials, hp, deterministic, out } => {
            let policy = ctx.cfg.get("policy", policy, "circular".to_string())?;
            let ckpt = ctx.cfg.get_opt("ckpt", ckpt)?;
            let n = ctx.cfg.get("trials", trials, 2000usize)?;
            let hp = ctx.cfg.get("hp", hp, 2u8)?;
            let deterministic = ctx.cfg.get("deterministic", Some(deterministic).filter(|d| *d), false)?;
            let out = ctx.cfg.get_opt("out", out)?;
            ctx.log_run()?;
            let reward = RewardConfig::hp(hp).with_context(|| format!("unknown reward preset {hp}"))?;
            let mut pol: Box<dyn SearchPolicy> = match policy.as_str() {
                "circular" => Box::new(CircularScan::default()),
                "random" => Box::new(RandomPolicy),
                "spiking" => {
                    let dir = ckpt.context("--policy spiking needs --ckpt")?;
                    let (mut p, _) = load_policy(Path::new(&dir))?;
                    p.deterministic = deterministic;
                    Box::new(p)
                }
                other => bail!("unknown policy '{other}' (expected circular, random or spiking)"),
            };
            let cfg = AgentConfig { reward, ..AgentConfig::default() };
            let det = OracleDetector::new(OracleDetectorConfig::default());
            let runs = run_agent_trials(&det, pol.as_mut(), &cfg, TEST_CONTRAST_RANGE, n, ctx.seed);
            let records: Vec<TrialRecord> = runs.iter().map(|(s, t)| t.record(*s, &policy)).collect();
            if let Some(p) = &out {
                save_jsonl(p, &records)?;
            }
            let s = summarize(&records)?;
            let clipped: usize = runs.iter().map(|(_, t)| t.clipped_samples()).sum();
            print_json(&json!({
                "policy": policy,
                "trials": s.trials,
                "percent_correct": s.percent_correct,
                "median_fixations": s.median_fixations,
                "median_saccade_deg": s.median_saccade_deg,
                "clipped_samples": clipped,
            }))?;
        }
        Command::TrainSac { hp, trials, out, curves } => {
            let hp = ctx.cfg.get("hp", hp, 2u8)?;
            let mut tc = TrainConfig::hp(hp)?;
            tc.trials = ctx.cfg.get("trials", trials, tc.trials)?;
            let out = ctx.req("out", out)?;
            let curves = ctx.cfg.get_opt("curves", curves)?;
            ctx.log_run()?;
            let mut writer = match &curves {
                Some(p) => Some(BufWriter::new(File::create(p).with_context(|| format!("creating {p}"))?)),
                None => None,
            };
            let mut io_err = None;
            let result = train(&tc, ctx.seed, &mut |c| {
                if let Some(w) = writer.as_mut() {
                    let line = serde_json::to_string(c).map_err(std::io::Error::from).and_then(|l| writeln!(w, "{l}"));
                    if let Err(e) = line {
                        io_err.get_or_insert(e);
                    }
                }
                if c.trial % 100 == 0 {
                    eprintln!(
                        "trial {:>6}  return {:>7.2}  correct {:>5.1}%  fixations {:>5.1}  updates {}",
                        c.trial, c.mean_return, c.percent_correct, c.mean_fixations, c.updates
                    );
                }
            })?;
            if let Some(mut w) = writer {
                w.flush()?;
            }
            if let Some(e) = io_err {
                return Err(e).context("writing curves");
            }
            let mut meta = serde_json::Map::new();
            meta.insert("hp".into(), json!(hp));
            meta.insert("seed".into(), json!(ctx.seed));
            meta.insert("trials".into(), json!(result.curves.len()));
            meta.insert("baseline_return".into(), json!(result.baseline_return));
            save_policy(Path::new(&out), &result.agent.policy, meta)?;
            let (first, last) = decile_returns(&result.curves, 0.1);
            print_json(&json!({
                "out": out,
                "trials": result.curves.len(),
                "updates": result.agent.updates,
                "skipped_updates": result.agent.skipped_updates,
                "baseline_return": result.baseline_return,
                "first_decile_return": first,
                "last_decile_return": last,
                "diverged": result.diverged,
            }))?;
            if let Some(report) = result.diverged {
                eprintln!("training diverged: {report}");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Analyze { input, out, density } => {
            let input = ctx.req("in", input)?;
            let out = ctx.cfg.get_opt("out", out)?;
            let density = ctx.cfg.get_opt("density", density)?;
            ctx.log_run()?;
            let records = read_records(&input)?;
            let s = summarize(&records)?;
            if let Some(p) = density {
                save_bvst(p, &image_to_tensor(&s.density.to_array()))?;
            }
            write_json_opt(out.as_deref(), &serde_json::to_value(&s)?)?;
        }
        Command::Energy { ckpt, trials } => {
            let ckpt = ctx.req("ckpt", ckpt)?;
            let trials = ctx.req("trials", trials)?;
            ctx.log_run()?;
            let (policy, _) = load_policy(Path::new(&ckpt))?;
            let records = read_records(&trials)?;
            let seqs: Vec<Vec<Vec2>> = records.iter().map(|r| r.fixations_deg.clone()).collect();
            let fixations: usize = seqs.iter().map(Vec::len).sum();
            if fixations == 0 {
                bail!("no fixations in {trials}");
            }
            let model = EnergyModel::default();
            let layers = policy_activity(&policy, &seqs);
            let snn = model.energy(&layers) / fixations as f64;
            let flops = ann_flops(&policy_as_ann(&policy));
            let ann = model.ann_energy(flops);
            print_json(&json!({
                "fixations": fixations,
                "time_steps": policy.time_steps,
                "layers": layers.iter().map(|l| json!({ "name": l.name, "spikes": l.spikes, "sops": l.sops, "rate": l.rate() })).collect::<Vec<_>>(),
                "snn_energy_pj_per_fixation": snn,
                "ann_flops_per_fixation": flops,
                "ann_energy_pj_per_fixation": ann,
                "ann_over_snn": ann / snn,
            }))?;
        }
        Command::Serve { addr, agent_ckpt, elm_threshold } => {
            let addr: SocketAddr = ctx.cfg.get("addr", addr, "127.0.0.1:8080".to_string())?.parse().context("bad --addr")?;
            let agent_ckpt = ctx.cfg.get_opt("agent_ckpt", agent_ckpt)?.map(PathBuf::from);
            let elm_threshold = ctx.cfg.get("elm_threshold", elm_threshold, DEFAULT_ELM_THRESHOLD)?;
            ctx.log_run()?;
            let cfg = ServiceConfig { data_dir: ctx.data_dir.clone(), seed: ctx.seed, elm_threshold, agent_ckpt };
            tokio::runtime::Runtime::new()?.block_on(crate::service::serve(cfg, addr))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_json(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_json_opt(path: Option<&str>, v: &Value) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {p}"))?;
            eprintln!("wrote {p}");
            Ok(())
        }
        None => print_json(v),
    }
}

fn read_records(path: &str) -> Result<Vec<TrialRecord>> {
    let f = BufReader::new(File::open(path).with_context(|| format!("opening {path}"))?);
    let mut out = Vec::new();
    for (n, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{path}:{}", n + 1))?);
    }
    Ok(out)
}

pub fn parse_vec2(s: &str) -> Result<Vec2> {
    let (x, y) = s.split_once(',').with_context(|| format!("expected `x,y`, got `{s}`"))?;
    Ok(Vec2::new(x.trim().parse()?, y.trim().parse()?))
}

pub fn parse_params(s: &str) -> Result<VisibilityParams> {
    if s.trim() == "reference" {
        return Ok(VisibilityParams::reference());
    }
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse()).collect::<Result<_, _>>().context("parameters must be numbers")?;
    let arr: [f64; 5] = v.try_into().map_err(|v: Vec<f64>| anyhow::anyhow!("need 5 parameters, got {}", v.len()))?;
    let p = VisibilityParams::from_array(arr);
    if !p.is_valid() {
        bail!("visibility parameters must be positive and finite");
    }
    Ok(p)
}

/// Horizontal and vertical meridians out to 7°.
fn default_locations() -> Vec<Vec2> {
    let mut v = vec![Vec2::new(0.0, 0.0)];
    for e in [1.0, 2.0, 4.0, 6.0, 7.0] {
        v.push(Vec2::new(e, 0.0));
        v.push(Vec2::new(0.0, e));
    }
    v
}
