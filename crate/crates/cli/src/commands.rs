use crate::config::RunConfig;
use crate::{AnalyzeArgs, CliError, EvalArgs, TrainArgs, VerifyArgs};
use cdsac::agent::{evaluate, Checkpoint, LogRecord, Trainer};
use cdsac::gauss::{gradient_curve, GradientCurveSpec};
use cdsac::tabular::probes;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Stream of the evaluation RNG, shared with training so checkpoints are
/// evaluated the same way during and after a run.
const EVAL_STREAM: u64 = 4;

#[derive(Debug, Serialize)]
struct Summary {
    algo: &'static str,
    env: &'static str,
    seed: u64,
    total_steps: u64,
    grad_steps: u64,
    evaluations: usize,
    best_eval_mean: Option<f64>,
    best_eval_std: Option<f64>,
    best_step: Option<u64>,
    final_eval_mean: Option<f64>,
    final_eval_std: Option<f64>,
    clipped_actions: u64,
    overestimation_bias: Option<f64>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text).map_err(CliError::io(path.display()))
}

fn resolve_run_config(args: &TrainArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(name) = &args.env {
        cfg.select_env(name)?;
    }
    if let Some(algo) = &args.algo {
        cfg.agent.algo = algo
            .parse()
            .map_err(|e: cdsac::agent::AgentError| CliError::Usage(e.to_string()))?;
    }
    if let Some(seed) = args.seed {
        cfg.agent.seed = seed;
    }
    if let Some(steps) = args.steps {
        cfg.agent.total_steps = steps;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    let cfg = cfg.with_overrides(&args.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(args: &TrainArgs) -> Result<u8, CliError> {
    let cfg = resolve_run_config(args)?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(CliError::io(out.display()))?;
    fs::write(out.join("config.json"), cfg.to_json()).map_err(CliError::io("config.json"))?;
    let runtime = |e: cdsac::agent::AgentError| CliError::Runtime(e.to_string());
    let mut trainer = Trainer::new(cfg.env.clone(), cfg.agent.clone())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let log_path = out.join("log.jsonl");
    let mut log =
        BufWriter::new(File::create(&log_path).map_err(CliError::io(log_path.display()))?);
    let mut evals: Vec<(u64, f64, f64)> = Vec::new();
    while !trainer.is_finished() {
        let records = match trainer.step() {
            Ok(r) => r,
            Err(e) => {
                log.flush().map_err(CliError::io(log_path.display()))?;
                trainer
                    .checkpoint()
                    .save(&out.join("checkpoint_abort.json"))
                    .map_err(runtime)?;
                return Err(runtime(e));
            }
        };
        for r in &records {
            let line = serde_json::to_string(r).expect("log records serialize");
            writeln!(log, "{line}").map_err(CliError::io(log_path.display()))?;
            if let LogRecord::Eval {
                step,
                eval_mean,
                eval_std,
            } = *r
            {
                evals.push((step, eval_mean, eval_std));
                eprintln!("step {step}: eval {eval_mean:.3} ± {eval_std:.3}");
            }
        }
        let step = trainer.env_steps();
        if cfg.checkpoint_interval > 0
            && step % cfg.checkpoint_interval == 0
            && !trainer.is_finished()
        {
            log.flush().map_err(CliError::io(log_path.display()))?;
            trainer
                .checkpoint()
                .save(&out.join(format!("checkpoint_{step}.json")))
                .map_err(runtime)?;
        }
    }
    log.flush().map_err(CliError::io(log_path.display()))?;
    trainer
        .checkpoint()
        .save(&out.join("checkpoint_final.json"))
        .map_err(runtime)?;
    let overestimation_bias = cfg
        .probe
        .as_ref()
        .map(|p| trainer.overestimation_bias(p))
        .transpose()
        .map_err(runtime)?;
    let best = evals.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1));
    let last = evals.last().copied();
    let summary = Summary {
        algo: cfg.agent.algo.name(),
        env: cfg.env.name(),
        seed: cfg.agent.seed,
        total_steps: trainer.env_steps(),
        grad_steps: trainer.grad_steps(),
        evaluations: evals.len(),
        best_eval_mean: best.map(|b| b.1),
        best_eval_std: best.map(|b| b.2),
        best_step: best.map(|b| b.0),
        final_eval_mean: last.map(|b| b.1),
        final_eval_std: last.map(|b| b.2),
        clipped_actions: trainer.clipped_actions(),
        overestimation_bias,
    };
    write_json(&out.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string(&summary).expect("serializable"));
    Ok(0)
}

#[derive(Debug, Serialize)]
struct EvalReport {
    checkpoint: PathBuf,
    env: &'static str,
    step: u64,
    episodes: usize,
    seed: u64,
    eval_mean: f64,
    eval_std: f64,
}

pub fn eval(args: &EvalArgs) -> Result<u8, CliError> {
    if args.episodes == 0 {
        return Err(CliError::Usage("--episodes must be >= 1".into()));
    }
    let ck = Checkpoint::load(&args.checkpoint).map_err(|e| CliError::Runtime(e.to_string()))?;
    let env = ck
        .env
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    rng.set_stream(EVAL_STREAM);
    let (mean, std) = evaluate(&ck.actor, &env, args.episodes, &mut rng)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let report = EvalReport {
        checkpoint: args.checkpoint.clone(),
        env: ck.env.name(),
        step: ck.step,
        episodes: args.episodes,
        seed: args.seed,
        eval_mean: mean,
        eval_std: std,
    };
    let out = args.out.clone().unwrap_or_else(|| {
        args.checkpoint
            .parent()
            .map(|p| p.join("eval.json"))
            .unwrap_or_else(|| PathBuf::from("eval.json"))
    });
    write_json(&out, &report)?;
    println!("{mean} ± {std} over {} episodes", args.episodes);
    Ok(0)
}

#[derive(Debug, Serialize)]
struct VerifyEntry {
    name: String,
    claim: String,
    instances: usize,
    worst_ratio_or_error: f64,
    tolerance: f64,
    pass: bool,
}

fn verifier_threads() -> Result<Option<usize>, CliError> {
    match std::env::var("CRAMER_RL_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "CRAMER_RL_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}

pub fn verify(args: &VerifyArgs) -> Result<u8, CliError> {
    if args.instances == 0 {
        return Err(CliError::Usage("--instances must be >= 1".into()));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = verifier_threads()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    let (seed, instances) = (args.seed, args.instances);
    // catalog order is by name; collect keeps it
    let results: Vec<_> = pool.install(|| {
        probes::catalog()
            .into_par_iter()
            .map(|(name, probe)| (name, probe(seed, instances)))
            .collect()
    });
    let mut entries = Vec::with_capacity(results.len());
    for (name, r) in results {
        let r = r.map_err(|e| CliError::Runtime(format!("probe {name}: {e}")))?;
        entries.push(VerifyEntry {
            name: r.name,
            claim: r.claim,
            instances: r.instances,
            worst_ratio_or_error: r.worst,
            tolerance: r.tolerance,
            pass: r.pass,
        });
    }
    let all_pass = entries.iter().all(|e| e.pass);
    let text = serde_json::to_string_pretty(&entries).expect("serializable");
    println!("{text}");
    if let Some(out) = &args.out {
        write_json(out, &entries)?;
    }
    Ok(if all_pass { 0 } else { 1 })
}

pub fn analyze_gradients(args: &AnalyzeArgs) -> Result<u8, CliError> {
    let spec = GradientCurveSpec {
        q_current: args.q_current,
        q_target: args.q_target,
        sigma_target: args.sigma_target,
        q_noisy: args.q_noisy,
        sigma_min: args.sigma_min,
        sigma_max: args.sigma_max,
        points: args.points,
    };
    let curve = gradient_curve(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut w = csv::Writer::from_path(&args.out)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", args.out.display())))?;
    for p in &curve {
        w.serialize(p)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush().map_err(CliError::io(args.out.display()))?;
    let violations = curve
        .iter()
        .filter(|p| p.psi.abs() > p.psi_envelope)
        .count();
    eprintln!(
        "{} rows written to {}; {violations} exceed 2/sigma",
        curve.len(),
        args.out.display()
    );
    Ok(0)
}
