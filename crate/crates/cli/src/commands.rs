use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::json;

use spigot::bench::{
    end_from_instances, eval_from_instances, evaluate, generate_dataset,
    intermediate_from_instances, partition_by_agreement, predict_all, run_experiment, EvalExample,
    ExperimentConfig, SyntheticDataset, SyntheticTaskSpec,
};
use spigot::decode::{eisner_decode, sdp_decode, ArcScores, SdpScores};
use spigot::learn::{
    check_blocks, train_joint, EndExample, GradBlock, IntermediateExample, KeyValues, ModelConfig,
    PipelineModel, TrainConfig,
};
use spigot::marginals::inside_outside;
use spigot::project::{project_dep_values, project_sdp_values};
use spigot::proxy::ProxyKind;
use spigot::structures::io::{
    read_jsonl, write_conll, write_jsonl, ConllSentence, SentenceRecord, Vocabulary,
};
use spigot::structures::{ArcIndexer, LabeledArcIndexer, SentenceInstance};

use crate::{DecodeFormat, PolytopeArg};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(spigot::Error::from)
        .with_context(|| format!("malformed {what}"))
}

#[derive(Deserialize)]
struct ScoreLine {
    #[serde(default)]
    id: Option<usize>,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    /// `(n+1) × (n+1)` matrix indexed `[head][modifier]`.
    scores: Option<Vec<Vec<f64>>>,
    unlabeled: Option<Vec<Vec<f64>>>,
    /// `(n+1) × (n+1) × labels`.
    labeled: Option<Vec<Vec<Vec<f64>>>>,
}

fn forms(tokens: Option<Vec<String>>, n: usize) -> Result<Vec<String>> {
    let forms = tokens.unwrap_or_else(|| (1..=n).map(|j| format!("w{j}")).collect());
    if forms.len() != n {
        return Err(spigot::Error::DimensionMismatch {
            expected: n,
            got: forms.len(),
        })
        .context("token list does not match the score matrix");
    }
    Ok(forms)
}

pub fn decode(format: DecodeFormat, path: &Path) -> Result<ExitCode> {
    let text = read_text(path)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let rec: ScoreLine = serde_json::from_str(line)
            .map_err(|e| spigot::Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
            .context("malformed score file")?;
        match format {
            DecodeFormat::Conll => {
                let matrix = rec
                    .scores
                    .context("tree decoding needs a `scores` matrix")?;
                let scores = ArcScores::from_matrix(&matrix, true)?;
                let tree = eisner_decode(&scores)?;
                let sentence = ConllSentence {
                    id: rec.id,
                    forms: forms(rec.tokens, tree.n())?,
                    tree,
                };
                write_conll(&mut out, &[sentence])?;
            }
            DecodeFormat::Json => {
                let unlabeled = rec
                    .unlabeled
                    .context("graph decoding needs an `unlabeled` matrix")?;
                let labeled = rec
                    .labeled
                    .context("graph decoding needs a `labeled` tensor")?;
                let base = ArcScores::from_matrix(&unlabeled, false)?;
                let ix = *base.indexer();
                let labels = labeled.first().and_then(|r| r.first()).map_or(0, Vec::len);
                let lix = LabeledArcIndexer::new(ix, labels)?;
                let mut flat = Vec::with_capacity(lix.len());
                for (_, h, m) in ix.arcs() {
                    let cell = labeled
                        .get(h)
                        .and_then(|r| r.get(m))
                        .filter(|c| c.len() == labels)
                        .context("labeled tensor has the wrong shape")?;
                    flat.extend(cell);
                }
                let scores = SdpScores::new(lix, base.values().to_vec(), flat, None)?;
                let graph = sdp_decode(&scores);
                let record = SentenceRecord {
                    id: rec.id.unwrap_or(i),
                    tokens: forms(rec.tokens, ix.n())?,
                    heads: None,
                    arcs: Some(graph.triples().collect()),
                    label: None,
                };
                write_jsonl(&mut out, &[record])?;
            }
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
struct ProjectInput {
    n: usize,
    values: Vec<f64>,
    #[serde(default)]
    labels: Option<usize>,
}

pub fn project(polytope: PolytopeArg, path: &Path) -> Result<ExitCode> {
    let input: ProjectInput = parse_json(&read_text(path)?, "projection input")?;
    let projected = match polytope {
        PolytopeArg::Dep => project_dep_values(&input.values, &ArcIndexer::new(input.n, true)?)?,
        PolytopeArg::Sdp => {
            let labels = input.labels.context("sdp projection needs `labels`")?;
            let ix = LabeledArcIndexer::new(ArcIndexer::new(input.n, false)?, labels)?;
            project_sdp_values(&input.values, &ix)?
        }
    };
    println!("{}", serde_json::to_string(&projected)?);
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
struct MarginalInput {
    /// Dense `(n+1) × (n+1)` matrix indexed `[head][modifier]`.
    scores: Option<Vec<Vec<f64>>>,
    n: Option<usize>,
    /// Flat arc scores in indexer order.
    values: Option<Vec<f64>>,
}

pub fn marginals(path: &Path) -> Result<ExitCode> {
    let input: MarginalInput = parse_json(&read_text(path)?, "marginal input")?;
    let scores = match (input.scores, input.n, input.values) {
        (Some(matrix), _, _) => ArcScores::from_matrix(&matrix, true)?,
        (None, Some(n), Some(values)) => ArcScores::new(ArcIndexer::new(n, true)?, values)?,
        _ => bail!(spigot::Error::Invalid(
            "expected `scores` or both `n` and `values`".into()
        )),
    };
    let result = inside_outside(&scores)?;
    let ix = scores.indexer();
    let mut matrix = vec![vec![0.0; ix.n() + 1]; ix.n() + 1];
    for (k, h, m) in ix.arcs() {
        matrix[h][m] = result.arc_marginals.values()[k];
    }
    let out = json!({
        "log_partition": result.log_partition,
        "marginals": result.arc_marginals.values(),
        "matrix": matrix,
    });
    println!("{}", serde_json::to_string(&out)?);
    Ok(ExitCode::SUCCESS)
}

pub fn gradcheck(module: &str, instances: usize, seed: u64) -> Result<ExitCode> {
    let blocks = GradBlock::select(module)?;
    let results = check_blocks(&blocks, instances, seed)?;
    let mut failed = false;
    for r in &results {
        println!(
            "{:<16} instances={:<3} max_rel_error={:.3e} tolerance={:.0e} {}",
            r.block.name(),
            r.instances,
            r.max_rel_error,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
        failed |= !r.passed;
    }
    Ok(if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

/// Training inputs, either generated from task keys or read from a
/// directory written by `gen`.
struct Data {
    spec: SyntheticTaskSpec,
    intermediate: Vec<IntermediateExample>,
    end: Vec<EndExample>,
    eval: Vec<EvalExample>,
}

fn read_split(dir: &Path, name: &str, vocab: &Vocabulary) -> Result<Vec<SentenceInstance>> {
    let path = dir.join(name);
    let file = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    let records =
        read_jsonl(BufReader::new(file)).with_context(|| format!("in {}", path.display()))?;
    records
        .iter()
        .map(|r| r.to_instance(vocab))
        .collect::<spigot::Result<_>>()
        .with_context(|| format!("in {}", path.display()))
}

fn load_dir(dir: &Path) -> Result<Data> {
    #[derive(Deserialize)]
    struct Meta {
        spec: SyntheticTaskSpec,
    }
    let meta: Meta = parse_json(&read_text(&dir.join("meta.json"))?, "meta.json")?;
    let spec = meta.spec;
    let vocab = Vocabulary::synthetic(spec.vocab_size);
    Ok(Data {
        intermediate: intermediate_from_instances(
            &read_split(dir, "intermediate.jsonl", &vocab)?,
            spec.structure,
        )?,
        end: end_from_instances(&read_split(dir, "end.jsonl", &vocab)?, spec.end)?,
        eval: eval_from_instances(
            &read_split(dir, "eval.jsonl", &vocab)?,
            spec.structure,
            spec.end,
        )?,
        spec,
    })
}

fn from_dataset(d: SyntheticDataset) -> Data {
    Data {
        spec: d.spec,
        intermediate: d.intermediate,
        end: d.end,
        eval: d.eval,
    }
}

pub fn train(config: &Path, proxy: &str, seed: u64, out: Option<&Path>) -> Result<ExitCode> {
    let mut kv = KeyValues::parse(&read_text(config)?)?;
    let data_dir: Option<String> = kv.take("data")?;
    let data = match data_dir {
        Some(dir) => {
            let dir = config.parent().unwrap_or(Path::new(".")).join(dir);
            load_dir(&dir)?
        }
        None => from_dataset(generate_dataset(&SyntheticTaskSpec::from_kv(&mut kv)?)?),
    };
    let model_cfg = ModelConfig::from_kv(&mut kv)?;
    let mut train_cfg = TrainConfig::from_kv(&mut kv)?;
    kv.finish()?;
    train_cfg.seed = seed;
    let kind = train_cfg.resolve_proxy(proxy.parse::<ProxyKind>()?, data.spec.structure)?;

    let mut init = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let mut model = PipelineModel::new(
        data.spec.structure,
        data.spec.end,
        data.spec.vocab_size,
        &model_cfg,
        kind,
        &mut init,
    )?;
    let stdout = io::stdout();
    train_joint(
        &mut model,
        &data.intermediate,
        &data.end,
        &train_cfg,
        |report, model| {
            let eval = evaluate(model, &data.eval)?;
            let mut lock = stdout.lock();
            let lines = [
                json!({
                    "epoch": report.epoch,
                    "task": "intermediate",
                    "loss": report.intermediate_loss,
                    "uas": eval.intermediate.uas,
                    "lf1": eval.intermediate.lf,
                    "acc": null,
                }),
                json!({
                    "epoch": report.epoch,
                    "task": "end",
                    "loss": report.end_loss,
                    "uas": null,
                    "lf1": eval.end.lf,
                    "acc": eval.end.accuracy,
                }),
            ];
            for line in lines {
                writeln!(lock, "{line}")?;
            }
            Ok(())
        },
    )?;
    if let Some(path) = out {
        let file =
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        serde_json::to_writer(BufWriter::new(file), &model)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn load_model(path: &Path) -> Result<PipelineModel> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(spigot::Error::from)
        .with_context(|| format!("malformed model {}", path.display()))
}

pub fn analyze(a: &Path, b: &Path, data: &Path) -> Result<ExitCode> {
    let (ma, mb) = (load_model(a)?, load_model(b)?);
    if ma.intermediate.task != mb.intermediate.task || ma.end.task != mb.end.task {
        bail!(spigot::Error::Invalid(
            "the two models solve different tasks".into()
        ));
    }
    let vocab = Vocabulary::synthetic(ma.intermediate.encoder.spec.vocab_size);
    let file = File::open(data).with_context(|| format!("cannot open {}", data.display()))?;
    let instances = read_jsonl(BufReader::new(file))?
        .iter()
        .map(|r| r.to_instance(&vocab))
        .collect::<spigot::Result<Vec<_>>>()?;
    let eval = eval_from_instances(&instances, ma.intermediate.task, ma.end.task)?;
    let report =
        partition_by_agreement(&predict_all(&ma, &eval)?, &predict_all(&mb, &eval)?, &eval)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn write_records(path: &Path, instances: &[SentenceInstance], vocab: &Vocabulary) -> Result<()> {
    let records: Vec<SentenceRecord> = instances
        .iter()
        .map(|i| SentenceRecord::from_instance(i, vocab))
        .collect();
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_jsonl(&mut w, &records)?;
    w.flush()?;
    Ok(())
}

pub fn generate(spec_path: &Path, out: &Path) -> Result<ExitCode> {
    let mut kv = KeyValues::parse(&read_text(spec_path)?)?;
    let spec = SyntheticTaskSpec::from_kv(&mut kv)?;
    kv.finish()?;
    let d = generate_dataset(&spec)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let vocab = Vocabulary::synthetic(spec.vocab_size);
    let intermediate = d.intermediate_instances()?;
    write_records(&out.join("intermediate.jsonl"), &intermediate, &vocab)?;
    write_records(&out.join("end.jsonl"), &d.end_instances()?, &vocab)?;
    write_records(&out.join("eval.jsonl"), &d.eval_instances()?, &vocab)?;
    let trees: Vec<ConllSentence> = intermediate
        .iter()
        .filter_map(|i| {
            i.gold_tree.clone().map(|tree| ConllSentence {
                id: Some(i.id),
                forms: i
                    .tokens
                    .iter()
                    .map(|&t| vocab.form(t).to_string())
                    .collect(),
                tree,
            })
        })
        .collect();
    if !trees.is_empty() {
        let mut w = BufWriter::new(File::create(out.join("intermediate.conll"))?);
        write_conll(&mut w, &trees)?;
        w.flush()?;
    }
    let meta = json!({
        "spec": d.spec,
        "truth": d.truth,
        "stats": d.stats,
        "corruption_rate": d.stats.corruption_rate(),
    });
    fs::write(out.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    eprintln!(
        "wrote {} intermediate, {} end and {} evaluation sentences to {} (corruption rate {:.3})",
        d.intermediate.len(),
        d.end.len(),
        d.eval.len(),
        out.display(),
        d.stats.corruption_rate()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn experiment(config: &Path, out: &Path) -> Result<ExitCode> {
    let cfg = ExperimentConfig::parse(&read_text(config)?)
        .with_context(|| format!("in {}", config.display()))?;
    let start = Instant::now();
    let result = run_experiment(&cfg)?;
    result.write_bundle(out)?;
    let cmp = result.comparison();
    println!("{}", serde_json::to_string_pretty(&cmp)?);
    eprintln!(
        "{} runs in {:.1}s; results in {}",
        result.runs.len(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}
