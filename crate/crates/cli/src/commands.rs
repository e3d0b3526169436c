use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use neuro_attitude::dataset::{list_csv, read_sequence_file, write_estimates, write_sequence_file};
use neuro_attitude::domain::{NormalizationSpec, Sequence};
use neuro_attitude::eval::{evaluate, manipulate, mean_error, spike_activity, Estimator, InputMode, SnnEstimator};
use neuro_attitude::filters::{FilterKind, FilterParams, InitialState};
use neuro_attitude::pso::{filter_cost, tune_filter, write_pso_report};
use neuro_attitude::sim::{generate_dataset, mirror_augment, split_70_20_10, DataSource, DatasetSpec};
use neuro_attitude::snn::{prune as prune_network, Checkpoint};
use neuro_attitude::train::{initial_network, train_with_observer, write_train_log, Example};
use neuro_attitude::Error;

use crate::config::{FileConfig, Provenance};
use crate::error::{CliError, CliResult};
use crate::{EvalArgs, PruneArgs, SimulateArgs, Source, TrainArgs, TuneArgs};

pub struct Context {
    pub seed: u64,
    pub force: bool,
    pub file: FileConfig,
}

fn require(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

/// Creates `dir` and checks that none of `files` would be clobbered.
fn prepare_out(ctx: &Context, dir: &Path, files: &[String]) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    if !ctx.force {
        if let Some(f) = files.iter().map(|f| dir.join(f)).find(|p| p.exists()) {
            return Err(CliError::Exists(f));
        }
    }
    Ok(())
}

/// Every dataset CSV under `path`, with its file stem.
fn load_data(path: &Path) -> CliResult<Vec<(String, Sequence)>> {
    require(path)?;
    let files = list_csv(path)?;
    if files.is_empty() {
        return Err(CliError::MissingInput(path.join("*.csv")));
    }
    files
        .iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            match read_sequence_file(p) {
                Ok(s) => Ok((name, s)),
                Err(Error::Io(e)) => Err(CliError::Core(Error::Io(e))),
                Err(e) => Err(CliError::Schema(format!("{}: {e}", p.display()))),
            }
        })
        .collect()
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(Error::from)?))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(path, text).map_err(Error::from)?;
    Ok(())
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Validation(format!("--{name} must be positive, got {v}")))
    }
}

pub fn simulate(ctx: &Context, a: SimulateArgs) -> CliResult<()> {
    let n = a.n.or(ctx.file.n).unwrap_or(5);
    if n == 0 {
        return Err(CliError::Validation("--n must be positive".into()));
    }
    let seconds = positive("seconds", a.seconds.or(ctx.file.seconds).unwrap_or(100.0))?;
    let rate = positive("rate", a.rate.or(ctx.file.rate).unwrap_or(200.0))?;
    let source = match a.source {
        Source::Sim => DataSource::Sim,
        Source::Px4 => DataSource::Px4Like,
    };
    let mut spec = DatasetSpec::preset(source, n, seconds);
    spec.trajectory.rate = rate;
    spec.trajectory.validate()?;

    let (seqs, manifest) = generate_dataset(&spec, ctx.seed)?;
    let mut files: Vec<String> = manifest.sequences.iter().map(|e| e.file.clone()).collect();
    files.extend(["manifest.json".to_string(), "provenance.json".to_string()]);
    prepare_out(ctx, &a.out, &files)?;
    for (seq, e) in seqs.iter().zip(&manifest.sequences) {
        write_sequence_file(&a.out.join(&e.file), seq)?;
    }
    manifest.save(&a.out.join("manifest.json"))?;
    Provenance::new("simulate", ctx.seed, &spec, files)?.save(&a.out)?;
    println!("wrote {n} sequences of {} samples to {}", seqs[0].len(), a.out.display());
    Ok(())
}

pub fn train(ctx: &Context, a: TrainArgs) -> CliResult<()> {
    let data = load_data(&a.data)?;
    let split = split_70_20_10(data.len(), ctx.seed);
    if split.train.is_empty() || split.val.is_empty() {
        return Err(CliError::Validation(format!(
            "{} sequences are too few for a train/validation split",
            data.len()
        )));
    }
    let (tr, va, te) = split.pick(&data);
    let seqs = |v: &[&(String, Sequence)]| v.iter().map(|(_, s)| s.clone()).collect::<Vec<_>>();
    let (tr, va, te) = (seqs(&tr), seqs(&va), seqs(&te));

    let mut cfg = ctx.file.train.clone().unwrap_or_default();
    cfg.seed = ctx.seed;
    if let Some(e) = a.epochs {
        cfg.max_epochs = e;
        cfg.min_epochs = cfg.min_epochs.min(e);
    }
    if a.window.is_some() {
        cfg.window = a.window;
    }
    if a.float {
        cfg.quantize_in_loop = false;
    }
    cfg.validate()?;
    let opt = ctx.file.optimizer.unwrap_or_default();
    let n_enc = a.n_enc.or(ctx.file.n_enc).unwrap_or(100);
    let n_hid = a.n_hid.or(ctx.file.n_hid).unwrap_or(100);
    if n_enc == 0 || n_hid == 0 {
        return Err(CliError::Validation("layer sizes must be positive".into()));
    }

    let files: Vec<String> = ["checkpoint.json", "train_log.csv", "split.json", "provenance.json"]
        .map(String::from)
        .to_vec();
    prepare_out(ctx, &a.out, &files)?;

    let tr = if a.no_mirror { tr } else { mirror_augment(&tr)? };
    let norm = NormalizationSpec::fit(&tr, 0.05)?;
    let examples = |s: &[Sequence]| -> CliResult<Vec<Example>> {
        Ok(s.iter().map(|q| Example::from_sequence(q, &norm)).collect::<Result<_, _>>()?)
    };
    let init = initial_network(n_enc, n_hid, ctx.seed);
    let outcome = train_with_observer(&init, &examples(&tr)?, &examples(&va)?, &cfg, &opt, |r| {
        eprintln!("epoch {:4}  train {:.6}  val {:.6}", r.epoch, r.train_loss, r.val_loss)
    })?;

    let ck = Checkpoint::new(outcome.params, norm, cfg.quantize_in_loop);
    ck.save(&a.out.join("checkpoint.json"))?;
    write_train_log(&outcome.history, create(&a.out.join("train_log.csv"))?)?;
    let names = |ix: &[usize]| ix.iter().map(|&i| data[i].0.clone()).collect::<Vec<_>>();
    write_json(
        &a.out.join("split.json"),
        &json!({"train": names(&split.train), "val": names(&split.val), "test": names(&split.test)}),
    )?;
    let resolved = json!({"train": cfg, "optimizer": opt, "n_enc": n_enc, "n_hid": n_hid, "mirror": !a.no_mirror, "data": a.data});
    Provenance::new("train", ctx.seed, &resolved, files)?.save(&a.out)?;

    println!("best epoch {} with validation MSE {:.6}", outcome.best_epoch, outcome.best_val_loss);
    if !te.is_empty() {
        let err = mean_error(&SnnEstimator::from_checkpoint(&ck), &te, InitialState::Uninformed)?;
        println!("test mean angle error {err:.3} deg over {} sequences", te.len());
    }
    Ok(())
}

fn parse_kind(name: &str) -> CliResult<FilterKind> {
    name.parse().map_err(|_| CliError::Validation(format!("unknown filter `{name}`")))
}

pub fn tune(ctx: &Context, a: TuneArgs) -> CliResult<()> {
    let kind = parse_kind(&a.filter)?;
    let mut cfg = ctx.file.pso.unwrap_or_default();
    if let Some(p) = a.particles {
        cfg.n_particles = p;
    }
    if let Some(i) = a.iters {
        cfg.max_iters = i;
    }
    cfg.validate()?;
    let data: Vec<Sequence> = load_data(&a.data)?.into_iter().map(|(_, s)| s).collect();
    let params_file = format!("{}.txt", kind.name());
    let files = vec![params_file.clone(), "pso_report.csv".into(), "provenance.json".into()];
    prepare_out(ctx, &a.out, &files)?;

    let tuned = tune_filter(kind, &data, &cfg, ctx.seed)?;
    let default_cost = filter_cost(&FilterParams::default_for(kind), &data)?;
    tuned.params.save(&a.out.join(&params_file))?;
    write_pso_report(&tuned.swarm.history, create(&a.out.join("pso_report.csv"))?)?;
    let resolved = json!({"filter": kind.name(), "pso": cfg, "data": a.data});
    Provenance::new("tune", ctx.seed, &resolved, files)?.save(&a.out)?;
    println!("tuned {kind}: cost {:.6e} (defaults {default_cost:.6e})", tuned.cost);
    print!("{}", tuned.params.to_text());
    Ok(())
}

fn load_estimator(name: &str, params: Option<&Path>) -> CliResult<Box<dyn Estimator>> {
    if name == "snn" {
        let path = params.ok_or_else(|| CliError::Validation("snn needs --params <checkpoint>".into()))?;
        require(path)?;
        let ck = Checkpoint::load(path).map_err(|e| CliError::params(path, e))?;
        println!("network: {} encoding + {} recurrent neurons", ck.n_enc, ck.n_hid);
        return Ok(Box::new(SnnEstimator::from_checkpoint(&ck)));
    }
    let (kind, adaptive) = match name {
        "complementary_adaptive" => (FilterKind::Complementary, true),
        n => (parse_kind(n)?, false),
    };
    let mut p = match params {
        Some(path) => {
            require(path)?;
            FilterParams::load(path, Some(kind)).map_err(|e| CliError::params(path, e))?
        }
        None => FilterParams::default_for(kind),
    };
    if let FilterParams::Complementary(c) = &mut p {
        c.adaptive |= adaptive;
    }
    Ok(Box::new(p))
}

pub fn eval(ctx: &Context, a: EvalArgs) -> CliResult<()> {
    let mode: InputMode = a
        .input_mode
        .parse()
        .map_err(|e: Error| CliError::Validation(e.to_string()))?;
    let est = load_estimator(&a.estimator, a.params.as_deref())?;
    let data: Vec<(String, Sequence)> = load_data(&a.data)?
        .into_iter()
        .map(|(n, s)| Ok((n, manipulate(&s, mode)?)))
        .collect::<Result<_, Error>>()?;
    let mut files = vec!["eval.csv".to_string(), "provenance.json".to_string()];
    if a.traces {
        files.extend(data.iter().map(|(n, _)| format!("traces/{n}.csv")));
    }
    prepare_out(ctx, &a.out, &files)?;

    let init = if a.known_initial {
        InitialState::Truth
    } else {
        InitialState::Uninformed
    };
    let (report, all) = evaluate(est.as_ref(), &data, init)?;
    report.write_csv(create(&a.out.join("eval.csv"))?)?;
    if a.traces {
        let dir = a.out.join("traces");
        std::fs::create_dir_all(&dir).map_err(Error::from)?;
        for (n, s) in &data {
            write_estimates(create(&dir.join(format!("{n}.csv")))?, s, &est.estimate(s, init)?)?;
        }
    }
    let resolved = json!({
        "estimator": a.estimator,
        "params": a.params,
        "data": a.data,
        "known_initial": a.known_initial,
        "input_mode": mode,
    });
    Provenance::new("eval", ctx.seed, &resolved, files)?.save(&a.out)?;
    println!(
        "{}: mean {:.3} deg, median {:.3} deg, sd {:.3} deg",
        est.name(),
        all.mean,
        all.median,
        all.sd
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct PruneReport {
    threshold: f64,
    enc_before: usize,
    hid_before: usize,
    enc_after: usize,
    hid_after: usize,
    pruned_fraction: f64,
    error_before: Option<f64>,
    error_after: Option<f64>,
}

pub fn prune(ctx: &Context, a: PruneArgs) -> CliResult<()> {
    let threshold = a.threshold.or(ctx.file.threshold).unwrap_or(0.005);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Validation(format!("--threshold {threshold} is not a fraction in [0, 1]")));
    }
    require(&a.params)?;
    let ck = Checkpoint::load(&a.params).map_err(|e| CliError::params(&a.params, e))?;
    let calib: Vec<Sequence> = load_data(&a.data)?.into_iter().map(|(_, s)| s).collect();
    let held_out: Option<Vec<Sequence>> = a
        .eval_data
        .as_deref()
        .map(|p| Ok::<_, CliError>(load_data(p)?.into_iter().map(|(_, s)| s).collect()))
        .transpose()?;
    let files: Vec<String> = ["checkpoint.json", "activity.csv", "prune_report.json", "provenance.json"]
        .map(String::from)
        .to_vec();
    prepare_out(ctx, &a.out, &files)?;

    let before = SnnEstimator::from_checkpoint(&ck);
    let activity = spike_activity(&before, &calib)?;
    let (pruned, outcome) = prune_network(&ck.params, &activity.activity(), threshold)?;
    let out_ck = Checkpoint::new(pruned, ck.normalization, ck.quantized);
    let after = SnnEstimator::from_checkpoint(&out_ck);
    let err = |e: &SnnEstimator| -> CliResult<Option<f64>> {
        held_out
            .as_deref()
            .map(|s| mean_error(e, s, InitialState::Uninformed))
            .transpose()
            .map_err(CliError::from)
    };
    let report = PruneReport {
        threshold,
        enc_before: ck.n_enc,
        hid_before: ck.n_hid,
        enc_after: outcome.kept_enc.len(),
        hid_after: outcome.kept_hid.len(),
        pruned_fraction: outcome.removed(&ck.params) as f64 / (ck.n_enc + ck.n_hid) as f64,
        error_before: err(&before)?,
        error_after: err(&after)?,
    };

    out_ck.save(&a.out.join("checkpoint.json"))?;
    activity.write_csv(create(&a.out.join("activity.csv"))?)?;
    write_json(&a.out.join("prune_report.json"), &report)?;
    let resolved = json!({"params": a.params, "data": a.data, "eval_data": a.eval_data, "threshold": threshold});
    Provenance::new("prune", ctx.seed, &resolved, files)?.save(&a.out)?;
    println!(
        "kept {}/{} encoding and {}/{} recurrent neurons ({:.1}% pruned)",
        report.enc_after,
        report.enc_before,
        report.hid_after,
        report.hid_before,
        100.0 * report.pruned_fraction
    );
    if let (Some(b), Some(p)) = (report.error_before, report.error_after) {
        println!("held-out mean error {b:.3} deg -> {p:.3} deg");
    }
    Ok(())
}
