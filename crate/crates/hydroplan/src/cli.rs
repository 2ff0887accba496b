//! Command-line surface: subcommands `states`, `estimate`, `solve`,
//! `game`, and `synth`, plus the exit-code contract.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical failure. Errors print as a single `error: ...` line on
//! stderr.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::Error;
use crate::formats;
use crate::game::{basin_grid, equilibria, integrate, separatrix_polyline, GameParams, GameState};
use crate::markov::{
    count_transitions, empirical_stage1_distribution, estimate, estimate_stationary,
    synthesize_log,
};
use crate::sdp::{render_report, simulate_forward, solve_backward};
use crate::state_space::{appendix_cross_map, enumerate_states, ProblemDims};

const USAGE: &str = "\
hydroplan - stochastic multi-resource water planning toolkit

USAGE:
  hydroplan states   [--m M] [--n N] [OPTIONS]
  hydroplan estimate --obs PATH [--alpha A] [--stationary] [--hist-k K]... [OPTIONS]
  hydroplan solve    --model PATH [--obs PATH] [OPTIONS]
  hydroplan game     [--u U] [--v V] [--grid R] [--step H] [--horizon T] [--start P,Q] [OPTIONS]
  hydroplan synth    --truth PATH [--trajectories COUNT] [OPTIONS]

SUBCOMMANDS:
  states    List the feasible assignment states (and the published-order
            cross-map for the 2x3 problem)
  estimate  Count stage transitions in an observation log and emit smoothed
            maximum-likelihood transition matrices
  solve     Backward-solve the planning recursion and emit value, policy,
            report and monthly files
  game      Classify the replicator-dynamics equilibria and emit basin,
            separatrix and trajectory files
  synth     Sample synthetic observation trajectories from a known chain

GLOBAL OPTIONS:
  --params PATH   Run configuration (params.json); defaults apply when absent
  --out DIR       Output directory (default: out)
  --seed INT      RNG seed; overrides the configuration value

OPTIONS PER SUBCOMMAND:
  states:   --m, --n, --stages override the configured dimensions
  estimate: --obs (required), --alpha (default from config), --stationary,
            --hist-k K (repeatable; writes hist_k<K>.csv), --m, --n, --stages
  solve:    --model (required), --obs (stage-1 frequencies for the initial
            distribution when the config leaves it null)
  game:     --u, --v (default from config), --grid, --step, --horizon,
            --start P,Q (default 0.9,0.9)
  synth:    --truth (required), --trajectories (default 100), --m, --n

FILES: see docs/formats.md for every emitted format.";

/// Parses and executes; returns the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    match execute(&args) {
        Ok(()) => 0,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            eprintln!("{USAGE}");
            1
        }
        Err(CliError::Lib(error)) => {
            eprintln!("error: {error}");
            if error.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        CliError::Lib(error)
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

struct Flags {
    values: HashMap<String, Vec<String>>,
}

const BOOL_FLAGS: &[&str] = &["stationary"];

impl Flags {
    fn parse(args: &[String]) -> Result<Self, CliError> {
        let mut values: HashMap<String, Vec<String>> = HashMap::new();
        let mut iter = args.iter();
        while let Some(arg) = iter.next() {
            let Some(name) = arg.strip_prefix("--") else {
                return Err(usage(format!("unexpected argument `{arg}`")));
            };
            if BOOL_FLAGS.contains(&name) {
                values.entry(name.to_string()).or_default().push("true".into());
                continue;
            }
            let Some(value) = iter.next() else {
                return Err(usage(format!("flag --{name} needs a value")));
            };
            values.entry(name.to_string()).or_default().push(value.clone());
        }
        Ok(Self { values })
    }

    fn take(&mut self, name: &str) -> Option<String> {
        self.values.remove(name).and_then(|mut v| v.pop())
    }

    fn take_all(&mut self, name: &str) -> Vec<String> {
        self.values.remove(name).unwrap_or_default()
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, name: &str) -> Result<Option<T>, CliError> {
        match self.take(name) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("flag --{name} has invalid value `{raw}`"))),
        }
    }

    fn has(&mut self, name: &str) -> bool {
        self.values.remove(name).is_some()
    }

    /// Rejects any flag nothing claimed.
    fn finish(&mut self) -> Result<(), CliError> {
        if let Some(name) = self.values.keys().next() {
            return Err(usage(format!("unknown flag --{name}")));
        }
        Ok(())
    }
}

struct Common {
    config: RunConfig,
    out_dir: PathBuf,
    out_explicit: bool,
    seed: u64,
}

fn common(flags: &mut Flags) -> Result<Common, CliError> {
    let config = match flags.take("params") {
        Some(path) => RunConfig::load(Path::new(&path))?,
        None => RunConfig::default(),
    };
    let out = flags.take("out");
    let out_explicit = out.is_some();
    let out_dir = PathBuf::from(out.unwrap_or_else(|| "out".to_string()));
    let seed = flags.take_parsed::<u64>("seed")?.unwrap_or(config.seed);
    Ok(Common {
        config,
        out_dir,
        out_explicit,
        seed,
    })
}

fn dims_from(flags: &mut Flags, config: &RunConfig) -> Result<ProblemDims, CliError> {
    let m = flags
        .take_parsed::<usize>("m")?
        .unwrap_or(config.dims.resources);
    let n = flags.take_parsed::<usize>("n")?.unwrap_or(config.dims.users);
    let stages = flags
        .take_parsed::<usize>("stages")?
        .unwrap_or(config.dims.stages);
    Ok(ProblemDims::new(m, n, stages)?)
}

fn require_file(path: &str) -> Result<PathBuf, CliError> {
    let path = PathBuf::from(path);
    if !path.is_file() {
        return Err(CliError::Lib(Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        }));
    }
    Ok(path)
}

fn execute(args: &[String]) -> Result<(), CliError> {
    let Some(command) = args.first() else {
        return Err(usage("missing subcommand"));
    };
    let mut flags = Flags::parse(&args[1..])?;
    match command.as_str() {
        "states" => cmd_states(&mut flags),
        "estimate" => cmd_estimate(&mut flags),
        "solve" => cmd_solve(&mut flags),
        "game" => cmd_game(&mut flags),
        "synth" => cmd_synth(&mut flags),
        other => Err(usage(format!("unknown subcommand `{other}`"))),
    }
}

fn cmd_states(flags: &mut Flags) -> Result<(), CliError> {
    let run = common(flags)?;
    let dims = dims_from(flags, &run.config)?;
    flags.finish()?;
    let space = enumerate_states(dims);
    print!("{}", formats::render_states(&space));
    // Files are written only when an output directory was asked for.
    if run.out_explicit {
        formats::write_states(&run.out_dir.join("states.csv"), &space)?;
        if dims.resources == 2 && dims.users == 3 {
            let map = appendix_cross_map(&space)?;
            formats::write_appendix_map(&run.out_dir.join("appendix_map.csv"), &map)?;
        }
    }
    Ok(())
}

fn cmd_estimate(flags: &mut Flags) -> Result<(), CliError> {
    let run = common(flags)?;
    let dims = dims_from(flags, &run.config)?;
    let obs = flags
        .take("obs")
        .or_else(|| run.config.paths.observations.clone())
        .ok_or_else(|| usage("estimate needs --obs (or paths.observations in the config)"))?;
    let alpha = flags
        .take_parsed::<f64>("alpha")?
        .unwrap_or(run.config.smoothing_alpha);
    let stationary = flags.has("stationary") || run.config.stationary;
    let hist_stages: Vec<usize> = flags
        .take_all("hist-k")
        .into_iter()
        .map(|raw| {
            raw.parse()
                .map_err(|_| usage(format!("flag --hist-k has invalid value `{raw}`")))
        })
        .collect::<Result<_, _>>()?;
    flags.finish()?;

    let obs_path = require_file(&obs)?;
    let space = enumerate_states(dims);
    let log = formats::read_observations(&obs_path)?;
    let counts = count_transitions(&log, &space, dims.stages)?;
    let model = if stationary {
        estimate_stationary(&counts, alpha)?
    } else {
        estimate(&counts, alpha)?
    };
    let model_path = run.out_dir.join("transition_model.csv");
    formats::write_transition_model(&model_path, &model)?;
    for stage in hist_stages {
        let path = run.out_dir.join(format!("hist_k{stage}.csv"));
        formats::write_histogram(&path, &model, stage)?;
    }
    println!(
        "estimated {} stage matrices over {} states from {} records -> {}",
        model.matrices.len(),
        model.state_count,
        log.records.len(),
        model_path.display()
    );
    Ok(())
}

fn cmd_solve(flags: &mut Flags) -> Result<(), CliError> {
    let run = common(flags)?;
    let model_arg = flags
        .take("model")
        .or_else(|| run.config.paths.model.clone())
        .ok_or_else(|| usage("solve needs --model (or paths.model in the config)"))?;
    let obs_arg = flags.take("obs").or_else(|| run.config.paths.observations.clone());
    flags.finish()?;

    run.config.validate()?;
    let dims = run.config.dims()?;
    let model_path = require_file(&model_arg)?;
    let obs_path = obs_arg.map(|p| require_file(&p)).transpose()?;

    let space = enumerate_states(dims);
    let l = space.len();
    let model = formats::read_transition_model(&model_path)?;
    if model.state_count != l {
        return Err(CliError::Lib(Error::Dimension {
            what: "transition model",
            detail: format!("covers {} states but dims give {l}", model.state_count),
        }));
    }
    let terminal = run.config.terminal(l);
    let initial = match &run.config.initial_distribution {
        Some(dist) => dist.clone(),
        None => obs_path
            .as_deref()
            .map(formats::read_observations)
            .transpose()?
            .and_then(|log| empirical_stage1_distribution(&log, l))
            .unwrap_or_else(|| vec![1.0 / l as f64; l]),
    };

    let solution = solve_backward(&space, &model, &run.config.economic, &terminal)?;
    let report = simulate_forward(&solution, &model, &initial, dims.resources, dims.users)?;
    let rendered = render_report(
        &report,
        &run.config.resource_labels(dims.resources),
        &run.config.user_labels(dims.users),
    );

    formats::write_values(&run.out_dir.join("values.csv"), &solution)?;
    formats::write_policy(&run.out_dir.join("policy.csv"), &solution)?;
    formats::write_report(&run.out_dir.join("report.csv"), &rendered)?;
    formats::write_monthly(&run.out_dir.join("monthly.csv"), &report)?;
    println!(
        "solved {} stages x {} states -> {}",
        solution.stages(),
        l,
        run.out_dir.display()
    );
    Ok(())
}

fn cmd_game(flags: &mut Flags) -> Result<(), CliError> {
    let run = common(flags)?;
    let u = flags
        .take_parsed::<f64>("u")?
        .unwrap_or(run.config.game.payoff_a);
    let v = flags
        .take_parsed::<f64>("v")?
        .unwrap_or(run.config.game.payoff_b);
    let grid = flags
        .take_parsed::<usize>("grid")?
        .unwrap_or(run.config.integrator.grid);
    let step = flags
        .take_parsed::<f64>("step")?
        .unwrap_or(run.config.integrator.step);
    let horizon = flags
        .take_parsed::<f64>("horizon")?
        .unwrap_or(run.config.integrator.horizon);
    let start_raw = flags.take("start").unwrap_or_else(|| "0.9,0.9".to_string());
    flags.finish()?;

    let start = parse_start(&start_raw)?;
    let params = GameParams::new(u, v)?;
    let reports = equilibria(params);
    let separatrix = separatrix_polyline(params);
    let (trajectory, limit) = integrate(start, params, step, horizon)?;
    let basin = basin_grid(params, grid, step, horizon)?;

    formats::write_equilibria(&run.out_dir.join("equilibria.csv"), &reports)?;
    formats::write_separatrix(&run.out_dir.join("separatrix.csv"), &separatrix)?;
    formats::write_trajectory(&run.out_dir.join("trajectory.csv"), &trajectory)?;
    formats::write_basin(&run.out_dir.join("basin.csv"), &basin)?;
    println!(
        "equilibria: {}",
        reports
            .iter()
            .map(|r| r.label.to_string())
            .collect::<Vec<_>>()
            .join("/")
    );
    println!("trajectory from ({}, {}) -> {}", start.p, start.q, limit);
    println!("q4_fraction {:.4} on a {grid}x{grid} grid", basin.q4_fraction);
    Ok(())
}

fn parse_start(raw: &str) -> Result<GameState, CliError> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        return Err(usage(format!("--start expects P,Q, got `{raw}`")));
    }
    let p: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| usage(format!("--start has invalid P `{}`", parts[0])))?;
    let q: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| usage(format!("--start has invalid Q `{}`", parts[1])))?;
    Ok(GameState::new(p, q)?)
}

fn cmd_synth(flags: &mut Flags) -> Result<(), CliError> {
    let run = common(flags)?;
    let dims = dims_from(flags, &run.config)?;
    let truth_arg = flags
        .take("truth")
        .or_else(|| run.config.paths.truth_model.clone())
        .ok_or_else(|| usage("synth needs --truth (or paths.truth_model in the config)"))?;
    let trajectories = flags.take_parsed::<usize>("trajectories")?.unwrap_or(100);
    flags.finish()?;

    let truth_path = require_file(&truth_arg)?;
    let space = enumerate_states(dims);
    let truth = formats::read_transition_model(&truth_path)?;
    let log = synthesize_log(
        &space,
        &truth,
        trajectories,
        run.seed,
        run.config.initial_distribution.as_deref(),
    )?;
    let path = run.out_dir.join("observations.csv");
    formats::write_observations(&path, &log)?;
    println!(
        "synthesized {} trajectories x {} stages (seed {}) -> {}",
        trajectories,
        truth.stages(),
        run.seed,
        path.display()
    );
    Ok(())
}
