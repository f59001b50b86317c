//! Multi-seed comparison of gradient proxies on a synthetic task.
//!
//! Each `(seed, proxy)` run generates the seed's dataset, initializes the
//! models from the seed, trains, and evaluates on the held-out split. Runs
//! are independent and execute in parallel; each run is single-threaded,
//! so results do not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::{partition_by_agreement, AgreementReport};
use super::eval::{predict_all, score_predictions, EvalReport};
use super::synth::{generate_dataset, SyntheticDataset, SyntheticTaskSpec};
use crate::learn::{
    train_joint, EpochReport, IntermediateTask, KeyValues, ModelConfig, Phase, PipelineModel,
    Prediction, TrainConfig,
};
use crate::proxy::ProxyKind;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: SyntheticTaskSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub proxies: Vec<ProxyKind>,
}

impl ExperimentConfig {
    /// Parses a flat `key = value` file. `seeds` and `proxies` take
    /// comma-separated lists; every other key belongs to the task, model
    /// or training configuration.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let proxies_line = kv.line_of("proxies");
        let seeds = kv
            .take_list::<u64>("seeds")?
            .unwrap_or_else(|| (1..=10).collect());
        let names = kv.take_list::<String>("proxies")?.unwrap_or_else(|| {
            ["pipeline", "ste", "spigot", "sa"]
                .map(String::from)
                .to_vec()
        });
        let task = SyntheticTaskSpec::from_kv(&mut kv)?;
        let model = ModelConfig::from_kv(&mut kv)?;
        let train = TrainConfig::from_kv(&mut kv)?;
        kv.finish()?;
        let proxies = names
            .iter()
            .map(|name| {
                let kind: ProxyKind = name.parse().map_err(|e: Error| match proxies_line {
                    Some(line) => Error::Parse {
                        line,
                        msg: e.to_string(),
                    },
                    None => e,
                })?;
                train.resolve_proxy(kind, task.structure)
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = ExperimentConfig {
            task,
            model,
            train,
            seeds,
            proxies,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() || self.proxies.is_empty() {
            return Err(Error::invalid(
                "an experiment needs at least one seed and one proxy",
            ));
        }
        let mut names: Vec<&str> = self.proxies.iter().map(|p| p.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("each proxy may be listed once"));
        }
        if self.proxies.contains(&ProxyKind::Sa)
            && matches!(self.task.structure, IntermediateTask::Graph { .. })
        {
            return Err(Error::Unsupported(
                "structured attention is not available for semantic-graph intermediates: it needs marginal \
                 inference over the graph polytope, which has no tractable counterpart here; remove 'sa' \
                 from proxies"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Dataset seed of experiment seed `seed`.
    pub fn data_seed(&self, seed: u64) -> u64 {
        self.task.seed.wrapping_mul(1_000_003).wrapping_add(seed)
    }

    pub fn dataset(&self, seed: u64) -> Result<SyntheticDataset> {
        generate_dataset(&SyntheticTaskSpec {
            seed: self.data_seed(seed),
            ..self.task.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub proxy: ProxyKind,
    pub eval: EvalReport,
    pub epochs: Vec<EpochReport>,
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
}

impl RunResult {
    /// Metrics written to the long-format table, in a fixed order.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        let mut out = self.eval.named();
        let joint: Vec<f64> = self
            .epochs
            .iter()
            .filter(|e| e.phase == Phase::Joint)
            .filter_map(|e| e.end_loss)
            .collect();
        if let (Some(first), Some(last)) = (joint.first(), joint.last()) {
            out.push(("end_train_loss_first", *first));
            out.push(("end_train_loss_last", *last));
        }
        out
    }
}

/// Trains and evaluates one `(seed, proxy)` pair on `data`.
pub fn run_single(
    cfg: &ExperimentConfig,
    data: &SyntheticDataset,
    seed: u64,
    proxy: ProxyKind,
) -> Result<RunResult> {
    let mut init = ChaCha8Rng::seed_from_u64(seed);
    let mut model = PipelineModel::new(
        cfg.task.structure,
        cfg.task.end,
        cfg.task.vocab_size,
        &cfg.model,
        proxy,
        &mut init,
    )?;
    let train = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let epochs = train_joint(&mut model, &data.intermediate, &data.end, &train, |_, _| {
        Ok(())
    })?;
    let predictions = predict_all(&model, &data.eval)?;
    let eval = score_predictions(&predictions, &data.eval)?;
    Ok(RunResult {
        seed,
        proxy,
        eval,
        epochs,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAnalysis {
    pub seed: u64,
    pub baseline: String,
    pub system: String,
    pub report: AgreementReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Ordered by seed, then by the configured proxy order.
    pub runs: Vec<RunResult>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[k]
    } else {
        0.5 * (values[k - 1] + values[k])
    })
}

/// Runs every `(seed, proxy)` pair of the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let datasets: Vec<SyntheticDataset> = cfg
        .seeds
        .par_iter()
        .map(|&s| cfg.dataset(s))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, ProxyKind)> = (0..cfg.seeds.len())
        .flat_map(|i| cfg.proxies.iter().map(move |&p| (i, p)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, p)| run_single(cfg, &datasets[i], cfg.seeds[i], p))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        runs,
    })
}

/// Median comparisons across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Median end-task metric per proxy.
    pub end_metric: BTreeMap<String, f64>,
    /// Median over seeds of `UAS(pipeline) − UAS(proxy)`, for tree
    /// intermediates with a pipeline baseline.
    pub uas_drop: BTreeMap<String, f64>,
}

impl ExperimentResult {
    fn values(
        &self,
        proxy: ProxyKind,
        metric: impl Fn(&RunResult) -> Option<f64>,
    ) -> Vec<(u64, f64)> {
        self.runs
            .iter()
            .filter(|r| r.proxy == proxy)
            .filter_map(|r| metric(r).map(|v| (r.seed, v)))
            .collect()
    }

    pub fn comparison(&self) -> Comparison {
        let mut end_metric = BTreeMap::new();
        let mut uas_drop = BTreeMap::new();
        let baseline: BTreeMap<u64, f64> = self
            .values(ProxyKind::Pipeline, |r| r.eval.intermediate.uas)
            .into_iter()
            .collect();
        for &p in &self.config.proxies {
            let mut end: Vec<f64> = self
                .values(p, |r| r.eval.end_metric())
                .into_iter()
                .map(|x| x.1)
                .collect();
            if let Some(m) = median(&mut end) {
                end_metric.insert(p.name().to_string(), m);
            }
            let mut drops: Vec<f64> = self
                .values(p, |r| r.eval.intermediate.uas)
                .into_iter()
                .filter_map(|(seed, uas)| baseline.get(&seed).map(|b| b - uas))
                .collect();
            if let Some(m) = median(&mut drops) {
                uas_drop.insert(p.name().to_string(), m);
            }
        }
        Comparison {
            end_metric,
            uas_drop,
        }
    }

    /// Long-format table `seed,proxy,metric,value`, one row per seed,
    /// proxy and metric.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("seed,proxy,metric,value\n");
        for r in &self.runs {
            for (name, v) in r.metrics() {
                writeln!(out, "{},{},{},{:.6}", r.seed, r.proxy.name(), name, v)
                    .expect("writing to a string");
            }
        }
        out
    }

    /// Per-proxy medians, minima and maxima of every metric.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("proxy,metric,median,min,max,seeds\n");
        for &p in &self.config.proxies {
            let mut by_metric: Vec<(&'static str, Vec<f64>)> = Vec::new();
            for r in self.runs.iter().filter(|r| r.proxy == p) {
                for (name, v) in r.metrics() {
                    match by_metric.iter_mut().find(|(n, _)| *n == name) {
                        Some((_, vs)) => vs.push(v),
                        None => by_metric.push((name, vec![v])),
                    }
                }
            }
            for (name, mut vs) in by_metric {
                let m = median(&mut vs).expect("nonempty");
                writeln!(
                    out,
                    "{},{},{:.6},{:.6},{:.6},{}",
                    p.name(),
                    name,
                    m,
                    vs[0],
                    vs[vs.len() - 1],
                    vs.len()
                )
                .expect("writing to a string");
            }
        }
        out
    }

    /// Agreement analysis of each backpropagating proxy against the
    /// pipeline baseline, per seed.
    pub fn analysis(&self) -> Result<Vec<SeedAnalysis>> {
        let mut out = Vec::new();
        for &seed in &self.config.seeds {
            let find = |p: ProxyKind| self.runs.iter().find(|r| r.seed == seed && r.proxy == p);
            let Some(base) = find(ProxyKind::Pipeline) else {
                continue;
            };
            let data = self.config.dataset(seed)?;
            for &p in self.config.proxies.iter().filter(|p| p.backpropagates()) {
                if let Some(run) = find(p) {
                    out.push(SeedAnalysis {
                        seed,
                        baseline: ProxyKind::Pipeline.name().to_string(),
                        system: p.name().to_string(),
                        report: partition_by_agreement(
                            &base.predictions,
                            &run.predictions,
                            &data.eval,
                        )?,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Writes `runs.csv`, `summary.csv`, `comparison.json`, `analysis.json`
    /// and `config.json` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("runs.csv"), self.runs_csv())?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        std::fs::write(
            dir.join("comparison.json"),
            serde_json::to_string_pretty(&self.comparison())?,
        )?;
        std::fs::write(
            dir.join("analysis.json"),
            serde_json::to_string_pretty(&self.analysis()?)?,
        )?;
        std::fs::write(
            dir.join("config.json"),
            serde_json::to_string_pretty(&self.config)?,
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
seeds = 1, 2
proxies = pipeline, spigot
vocab_size = 12
intermediate_size = 12
end_size = 12
eval_size = 8
max_len = 5
epochs = 1
embedding_dim = 4
hidden_dim = 4
scorer_hidden = 4
classifier_token_dim = 4
classifier_hidden = 4
";

    #[test]
    fn parses_lists_and_resolves_eta() {
        let cfg = ExperimentConfig::parse(SMALL).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(
            cfg.proxies,
            vec![ProxyKind::Pipeline, ProxyKind::Spigot { eta: 1.0 }]
        );
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = ExperimentConfig::parse("seeds = 1\nbogus = 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let err = ExperimentConfig::parse("proxies = spigot, nope\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn refuses_sa_for_graph_intermediates() {
        let err = ExperimentConfig::parse("structure = graph\nproxies = spigot, sa\n").unwrap_err();
        assert!(matches!(err, Error::Unsupported(ref m) if m.contains("structured attention")));
    }

    #[test]
    fn table_shape_and_determinism() {
        let cfg = ExperimentConfig::parse(SMALL).unwrap();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.runs_csv(), b.runs_csv());
        let metrics = a.runs[0].metrics().len();
        assert_eq!(a.runs_csv().lines().count(), 1 + 2 * 2 * metrics);
        let analysis = a.analysis().unwrap();
        assert_eq!(analysis.len(), 2);
        for s in &analysis {
            assert_eq!(s.report.same.size + s.report.diff.size, 8);
        }
        let cmp = a.comparison();
        assert_eq!(cmp.uas_drop["pipeline"], 0.0);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
