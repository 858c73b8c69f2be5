use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use sqsim::augment::{augment_all, read_pair_rows, read_pairs_tsv, write_pair_rows, write_pairs_tsv, PairRow, Stages};
use sqsim::embed::{stub_embed, EmbeddingStore};
use sqsim::model::{load_params, save_params, tiny_gradient_check, SiameseModel, TINY_CHECK_TOLERANCE};
use sqsim::preproc::{preprocess, tokenize, PunctuationSet, RawQuestion};
use sqsim::train::{evaluate_models, seeds_from_base, train_replicas, Examples, TrainConfig};

use crate::error::{CliError, CliResult, Kind};
use crate::manifest::{beside, read_json, write_json, Recorder, RunManifest};
use crate::{Command, EmbArgs};

const SUMMARY_FILE: &str = "train_summary.json";
const MANIFEST_FILE: &str = "manifest.json";

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Preprocess {
            input,
            out,
            punct_file,
            lines,
        } => preprocess_cmd(&input, &out, punct_file.as_deref(), lines),
        Command::Augment {
            input,
            out,
            stages,
            summary,
            conflicts,
        } => augment_cmd(&input, &out, &stages, &summary, conflicts.as_deref()),
        Command::EmbedStub {
            input,
            dim,
            seed,
            out,
            lines,
        } => embed_stub_cmd(&input, dim, seed, &out, lines),
        Command::Train {
            config,
            train,
            emb,
            out_dir,
            seed,
            epochs,
        } => train_cmd(config.as_deref(), &train, &emb, &out_dir, seed, epochs),
        Command::Evaluate {
            models,
            test,
            emb,
            report,
        } => evaluate_cmd(&models, &test, &emb, &report),
        Command::Predict {
            model,
            pairs,
            emb,
            out,
            threshold,
        } => predict_cmd(&model, &pairs, &emb, &out, threshold),
        Command::ExportReprs {
            model,
            questions,
            emb,
            out,
        } => export_cmd(&model, &questions, &emb, &out),
        Command::Gradcheck {
            tiny: _,
            seed,
            eps,
            report,
        } => gradcheck_cmd(seed, eps, report.as_deref()),
    }
}

fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

fn write_lines(path: &Path, lines: &[String]) -> CliResult<()> {
    let io = |e| CliError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for l in lines {
        writeln!(w, "{l}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Distinct questions in first-seen order.
fn questions_of(path: &Path, lines: bool) -> CliResult<Vec<String>> {
    let all: IndexSet<String> = if lines {
        read_lines(path)?.into_iter().collect()
    } else {
        read_pair_rows(path)?.into_iter().flat_map(|r| [r.q1, r.q2]).collect()
    };
    Ok(all.into_iter().collect())
}

fn load_store(args: &EmbArgs, rec: &mut Recorder) -> CliResult<EmbeddingStore> {
    rec.input(&args.emb)?;
    Ok(EmbeddingStore::load(&args.emb, args.layer_combine.into())?)
}

fn load_model(path: &Path, rec: &mut Recorder) -> CliResult<SiameseModel> {
    rec.input(path)?;
    Ok(load_params(path)?)
}

fn preprocess_cmd(input: &Path, out: &Path, punct_file: Option<&Path>, lines: bool) -> CliResult<()> {
    let mut rec = Recorder::start("preprocess");
    rec.input(input)?;
    let punct = match punct_file {
        Some(p) => {
            rec.input(p)?;
            PunctuationSet::from_file(p)?
        }
        None => PunctuationSet::default(),
    };
    let chars: String = punct.chars().collect();
    rec.config(&serde_json::json!({ "punctuation": chars, "lines": lines }));
    if lines {
        let done = read_lines(input)?
            .iter()
            .map(|q| preprocess(q, &punct))
            .collect::<sqsim::Result<Vec<_>>>()?;
        write_lines(out, &done)?;
    } else {
        let rows = read_pair_rows(input)?
            .into_iter()
            .map(|r| {
                Ok(PairRow {
                    q1: preprocess(&r.q1, &punct)?,
                    q2: preprocess(&r.q2, &punct)?,
                    ..r
                })
            })
            .collect::<sqsim::Result<Vec<_>>>()?;
        write_pair_rows(out, &rows)?;
    }
    rec.output(out);
    rec.finish(&beside(out))
}

#[derive(Serialize)]
struct ConflictRecord<'a> {
    q1: &'a str,
    q2: &'a str,
    existing: Option<u8>,
    derivations: Vec<(&'a str, u8)>,
}

fn augment_cmd(input: &Path, out: &Path, stages: &str, summary: &Path, conflicts: Option<&Path>) -> CliResult<()> {
    let mut rec = Recorder::start("augment");
    rec.input(input)?;
    let stages = Stages::parse(stages)?;
    rec.config(&stages);
    let ds = read_pairs_tsv(input)?;
    let aug = augment_all(&ds, stages)?;
    write_pairs_tsv(out, &aug.dataset)?;
    write_json(summary, &aug.summary())?;
    rec.output(out);
    rec.output(summary);
    if let Some(path) = conflicts {
        let q = |id| aug.dataset.questions.text(id);
        let records: Vec<ConflictRecord> = aug
            .conflicts
            .iter()
            .map(|c| ConflictRecord {
                q1: q(c.q1),
                q2: q(c.q2),
                existing: c.existing.map(|l| l.as_u8()),
                derivations: c.derivations.iter().map(|(via, l)| (q(*via), l.as_u8())).collect(),
            })
            .collect();
        write_json(path, &records)?;
        rec.output(path);
    }
    let counts = aug.stage_counts.totals();
    println!(
        "stage counts {} -> {} -> {} -> {}, {} conflicts",
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        aug.conflicts.len()
    );
    rec.finish(&beside(out))
}

fn embed_stub_cmd(input: &Path, dim: usize, seed: u64, out: &Path, lines: bool) -> CliResult<()> {
    let mut rec = Recorder::start("embed-stub");
    rec.input(input)?;
    rec.config(&serde_json::json!({ "dim": dim, "lines": lines }));
    rec.seeds(&[seed]);
    let mut store = EmbeddingStore::new(dim);
    for q in questions_of(input, lines)? {
        let tokens = tokenize(&RawQuestion::new(q.as_str())?)?;
        let emb = stub_embed(&tokens, dim, seed)?;
        store.insert(q, emb)?;
    }
    store.save(out)?;
    rec.output(out);
    rec.finish(&beside(out))
}

#[derive(Debug, Serialize, Deserialize)]
struct ReplicaEntry {
    seed: u64,
    model: String,
    history: String,
    param_count: usize,
    steps: u64,
    final_loss: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainSummary {
    config: TrainConfig,
    replicas: Vec<ReplicaEntry>,
}

fn train_cmd(
    config: Option<&Path>,
    train: &Path,
    emb: &EmbArgs,
    out_dir: &Path,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> CliResult<()> {
    let mut rec = Recorder::start("train");
    let mut cfg: TrainConfig = match config {
        Some(p) => {
            rec.input(p)?;
            read_json(p)?
        }
        None => TrainConfig::default(),
    };
    if let Some(base) = seed {
        cfg.seeds = seeds_from_base(base);
    }
    if let Some(n) = epochs {
        cfg.epochs = n;
    }
    cfg.validate()?;
    rec.config(&cfg);
    rec.seeds(&cfg.seeds);
    rec.input(train)?;
    let ds = read_pairs_tsv(train)?;
    let store = load_store(emb, &mut rec)?;
    if store.dim() != cfg.model.input_dim {
        return Err(CliError::new(
            Kind::Invalid,
            format!(
                "embeddings have width {} but model.input_dim is {}",
                store.dim(),
                cfg.model.input_dim
            ),
        ));
    }
    // Fail on missing embeddings before any training starts.
    Examples::resolve(&ds, &store)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let replicas = train_replicas(&cfg, &ds, &store)?;
    let mut entries = Vec::with_capacity(replicas.len());
    for (i, r) in replicas.iter().enumerate() {
        let model_name = format!("replica_{i}.sqsim");
        let history_name = format!("history_{i}.json");
        let saved = save_params(&r.model, out_dir.join(&model_name))?;
        write_json(&out_dir.join(&history_name), &r.history)?;
        rec.output(&out_dir.join(&model_name));
        rec.output(&out_dir.join(&history_name));
        println!(
            "replica {i} (seed {}): final loss {:.6}, {} steps, {:.1}s",
            r.seed,
            r.history.epochs.last().copied().unwrap_or(r.history.initial),
            r.history.steps,
            r.duration_sec
        );
        entries.push(ReplicaEntry {
            seed: r.seed,
            model: model_name,
            history: history_name,
            param_count: saved.param_count,
            steps: r.history.steps,
            final_loss: r.history.epochs.last().copied(),
        });
    }
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_json(
        &summary_path,
        &TrainSummary {
            config: cfg,
            replicas: entries,
        },
    )?;
    rec.output(&summary_path);
    rec.replica_durations(replicas.iter().map(|r| r.duration_sec).collect());
    rec.finish(&out_dir.join(MANIFEST_FILE))
}

fn evaluate_cmd(models_dir: &Path, test: &Path, emb: &EmbArgs, report_path: &Path) -> CliResult<()> {
    let mut rec = Recorder::start("evaluate");
    let summary_path = models_dir.join(SUMMARY_FILE);
    rec.input(&summary_path)?;
    let summary: TrainSummary = read_json(&summary_path)?;
    rec.config(&summary.config);
    rec.seeds(&summary.config.seeds);
    let models = summary
        .replicas
        .iter()
        .map(|r| load_model(&models_dir.join(&r.model), &mut rec))
        .collect::<CliResult<Vec<_>>>()?;
    // Training times live in the training manifest so that every other
    // training output is reproducible byte for byte.
    let durations = match read_json::<RunManifest>(&models_dir.join(MANIFEST_FILE)) {
        Ok(m) => m.replica_durations_sec.unwrap_or_default(),
        Err(e) => {
            log::warn!("no replica durations: {e}");
            Vec::new()
        }
    };
    rec.input(test)?;
    let ds = read_pairs_tsv(test)?;
    let store = load_store(emb, &mut rec)?;
    let refs: Vec<&SiameseModel> = models.iter().collect();
    let report = evaluate_models(&refs, &summary.config, durations, &ds, &store)?;
    write_json(report_path, &report)?;
    println!(
        "F1 min {:.5} max {:.5} avg {:.5} vote {:.5}",
        report.min, report.max, report.avg, report.vote
    );
    rec.output(report_path);
    rec.finish(&beside(report_path))
}

fn predict_cmd(model_path: &Path, pairs: &Path, emb: &EmbArgs, out: &Path, threshold: f64) -> CliResult<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CliError::new(Kind::Usage, format!("threshold {threshold} outside (0, 1)")));
    }
    let mut rec = Recorder::start("predict");
    rec.config(&serde_json::json!({ "threshold": threshold }));
    let model = load_model(model_path, &mut rec)?;
    rec.input(pairs)?;
    let rows = read_pair_rows(pairs)?;
    let store = load_store(emb, &mut rec)?;
    let mut w = csv::Writer::from_path(out).map_err(|e| csv_error(out, e))?;
    w.write_record(["question1", "question2", "probability", "label"])
        .map_err(|e| csv_error(out, e))?;
    for r in &rows {
        let p = model.predict(store.get(&r.q1)?, store.get(&r.q2)?)?;
        let label = u8::from(p >= threshold);
        w.write_record([r.q1.as_str(), r.q2.as_str(), &p.to_string(), &label.to_string()])
            .map_err(|e| csv_error(out, e))?;
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    rec.output(out);
    rec.finish(&beside(out))
}

fn csv_error(path: &Path, err: csv::Error) -> CliError {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => CliError::io(path, e),
        other => CliError::new(Kind::Io, format!("{}: {other:?}", path.display())),
    }
}

#[derive(Serialize)]
struct ReprRecord<'a> {
    q: &'a str,
    repr: Vec<f64>,
    attention: Vec<f64>,
}

fn export_cmd(model_path: &Path, questions: &Path, emb: &EmbArgs, out: &Path) -> CliResult<()> {
    let mut rec = Recorder::start("export-reprs");
    let model = load_model(model_path, &mut rec)?;
    rec.input(questions)?;
    let qs = read_lines(questions)?;
    let store = load_store(emb, &mut rec)?;
    let io = |e| CliError::io(out, e);
    let mut w = BufWriter::new(File::create(out).map_err(io)?);
    for q in &qs {
        let e = store.get(q)?;
        let record = ReprRecord {
            q,
            repr: model.represent(e)?,
            attention: model.attention_weights(e)?,
        };
        serde_json::to_writer(&mut w, &record).map_err(|e| CliError::io(out, e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)?;
    rec.output(out);
    rec.finish(&beside(out))
}

fn gradcheck_cmd(seed: u64, eps: f64, report: Option<&Path>) -> CliResult<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::new(Kind::Usage, format!("eps {eps} must be positive")));
    }
    let mut rec = Recorder::start("gradcheck");
    rec.config(&serde_json::json!({ "tiny": true, "eps": eps }));
    rec.seeds(&[seed]);
    let r = tiny_gradient_check(seed, eps)?;
    let worst = r
        .worst
        .as_ref()
        .map(|(name, i, a, n)| format!(" (worst {name}[{i}]: analytic {a:.6e}, numeric {n:.6e})"))
        .unwrap_or_default();
    println!(
        "max relative error {:.3e} over {} coordinates in {} tensors{worst}",
        r.max_rel_error,
        r.coords_checked,
        r.per_param.len()
    );
    if let Some(path) = report {
        write_json(path, &r)?;
        rec.output(path);
        rec.finish(&beside(path))?;
    }
    if r.max_rel_error < TINY_CHECK_TOLERANCE {
        println!("PASS (tolerance {TINY_CHECK_TOLERANCE:e})");
        Ok(())
    } else {
        Err(CliError::new(
            Kind::Numeric,
            format!(
                "gradient check failed: {:.3e} ≥ {TINY_CHECK_TOLERANCE:e}",
                r.max_rel_error
            ),
        ))
    }
}

