//! Synthetic pipeline tasks.
//!
//! Every token id belongs to a hidden class. A seeded ground-truth scorer
//! over class pairs and signed distances defines the true dependency tree
//! of a sentence (its Eisner argmax). The end task is computed from the
//! true structure: either a semantic graph obtained by rewriting tree arcs,
//! or a binary label saying whether the structure contains at least `t`
//! arcs between designated class pairs. Intermediate supervision is
//! corrupted at rate `ρ`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decode::{eisner_decode, ArcScores};
use crate::learn::{
    EndExample, EndLabel, EndTask, IntermediateExample, IntermediateGold, IntermediateTask,
    KeyValues,
};
use crate::structures::{ArcIndexer, DepTree, SemGraph, SentenceInstance};
use crate::{Error, Result};

const PILOT_SENTENCES: usize = 500;
const DISTANCE_BUCKETS: i64 = 4;
const KEY_PAIRS: usize = 2;
const KEY_PAIR_CANDIDATES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTaskSpec {
    pub vocab_size: usize,
    /// Number of hidden token classes.
    pub classes: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub structure: IntermediateTask,
    pub end: EndTask,
    /// Corruption rate `ρ` of the intermediate supervision.
    pub noise: f64,
    pub intermediate_size: usize,
    pub end_size: usize,
    pub eval_size: usize,
    pub seed: u64,
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        SyntheticTaskSpec {
            vocab_size: 30,
            classes: 4,
            min_len: 4,
            max_len: 9,
            structure: IntermediateTask::Tree,
            end: EndTask::Classify { classes: 2 },
            noise: 0.3,
            intermediate_size: 200,
            end_size: 200,
            eval_size: 200,
            seed: 1,
        }
    }
}

fn parse_structure(kind: &str, labels: usize) -> Result<IntermediateTask> {
    match kind {
        "tree" => Ok(IntermediateTask::Tree),
        "graph" => Ok(IntermediateTask::Graph { labels }),
        other => Err(Error::invalid(format!(
            "unknown structure '{other}' (expected tree or graph)"
        ))),
    }
}

fn parse_end(kind: &str, labels: usize) -> Result<EndTask> {
    match kind {
        "classify" => Ok(EndTask::Classify { classes: 2 }),
        "graph" => Ok(EndTask::Graph { labels }),
        other => Err(Error::invalid(format!(
            "unknown end task '{other}' (expected classify or graph)"
        ))),
    }
}

impl SyntheticTaskSpec {
    /// Reads the task keys out of `kv`, leaving the rest.
    pub fn from_kv(kv: &mut KeyValues) -> Result<Self> {
        let d = SyntheticTaskSpec::default();
        let labels = kv.take_or("labels", 3usize)?;
        let structure = parse_structure(&kv.take_or("structure", "tree".to_string())?, labels)?;
        let end = parse_end(&kv.take_or("end_task", "classify".to_string())?, labels)?;
        let spec = SyntheticTaskSpec {
            vocab_size: kv.take_or("vocab_size", d.vocab_size)?,
            classes: kv.take_or("token_classes", d.classes)?,
            min_len: kv.take_or("min_len", d.min_len)?,
            max_len: kv.take_or("max_len", d.max_len)?,
            structure,
            end,
            noise: kv.take_or("noise", d.noise)?,
            intermediate_size: kv.take_or("intermediate_size", d.intermediate_size)?,
            end_size: kv.take_or("end_size", d.end_size)?,
            eval_size: kv.take_or("eval_size", d.eval_size)?,
            seed: kv.take_or("data_seed", d.seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.classes < 2 || self.classes > self.vocab_size {
            return Err(Error::invalid(
                "need at least two token classes and no more classes than words",
            ));
        }
        if self.min_len < 2 || self.min_len > self.max_len {
            return Err(Error::invalid(
                "sentence lengths need 2 <= min_len <= max_len",
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::invalid(format!(
                "noise must lie in [0, 1], got {}",
                self.noise
            )));
        }
        match (self.structure, self.end) {
            (IntermediateTask::Graph { .. }, EndTask::Graph { .. }) => {
                return Err(Error::Unsupported(
                    "graph end tasks are derived from trees".into(),
                ))
            }
            (IntermediateTask::Graph { labels }, _) | (_, EndTask::Graph { labels })
                if labels == 0 =>
            {
                return Err(Error::invalid("graphs need at least one label"))
            }
            _ => {}
        }
        if self.end_size == 0 || self.eval_size == 0 {
            return Err(Error::invalid("end and evaluation splits must be nonempty"));
        }
        Ok(())
    }
}

/// The hidden generative model of a synthetic task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub class_of: Vec<usize>,
    /// `pair[c_head][c_modifier]`.
    pub pair: Vec<Vec<f64>>,
    pub root: Vec<f64>,
    /// Indexed by signed distance `modifier − head` clipped to ±4.
    pub distance: Vec<f64>,
    /// Class pairs counted by the classification rule.
    pub key_pairs: Vec<(usize, usize)>,
    /// Minimum count of key arcs for the positive label.
    pub threshold: usize,
}

impl GroundTruth {
    fn sample(spec: &SyntheticTaskSpec, rng: &mut ChaCha8Rng) -> Self {
        let c = spec.classes;
        let mut class_of: Vec<usize> = (0..spec.vocab_size).map(|w| w % c).collect();
        class_of.shuffle(rng);
        // argmax structures are invariant to a global scale of the scores
        let s = 2.0;
        let pair = (0..c)
            .map(|_| (0..c).map(|_| rng.gen_range(-s..s)).collect())
            .collect();
        let root = (0..c).map(|_| rng.gen_range(-s..s) - 0.5 * s).collect();
        let distance = (-DISTANCE_BUCKETS..=DISTANCE_BUCKETS)
            .map(|d| -0.3 * s * (d.abs() as f64 - 1.0).max(0.0) + rng.gen_range(-0.2 * s..0.2 * s))
            .collect();
        GroundTruth {
            class_of,
            pair,
            root,
            distance,
            key_pairs: Vec::new(),
            threshold: 1,
        }
    }

    pub fn class(&self, token: usize) -> usize {
        self.class_of[token]
    }

    pub fn arc_scores(&self, tokens: &[usize]) -> Result<ArcScores> {
        let ix = ArcIndexer::new(tokens.len(), true)?;
        let values = ix
            .arcs()
            .map(|(_, h, m)| {
                let cm = self.class(tokens[m - 1]);
                if h == 0 {
                    self.root[cm]
                } else {
                    let d = (m as i64 - h as i64).clamp(-DISTANCE_BUCKETS, DISTANCE_BUCKETS);
                    self.pair[self.class(tokens[h - 1])][cm]
                        + self.distance[(d + DISTANCE_BUCKETS) as usize]
                }
            })
            .collect();
        ArcScores::new(ix, values)
    }

    pub fn tree(&self, tokens: &[usize]) -> Result<DepTree> {
        eisner_decode(&self.arc_scores(tokens)?)
    }

    /// Semantic graph derived from a tree: word-to-word arcs keep their
    /// direction when the modifier class is even and flip otherwise; arcs
    /// below a class-0 head also attach to the grandparent.
    pub fn semantic_graph(
        &self,
        tokens: &[usize],
        tree: &DepTree,
        labels: usize,
    ) -> Result<SemGraph> {
        let n = tree.n();
        let mut g = SemGraph::empty(n);
        let add = |h: usize, m: usize, l: usize, g: &mut SemGraph| -> Result<()> {
            if g.contains(h, m) {
                return Ok(());
            }
            g.insert(h, m, l)
        };
        for m in 1..=n {
            let h = tree.head(m);
            if h == 0 {
                continue;
            }
            let (ch, cm) = (self.class(tokens[h - 1]), self.class(tokens[m - 1]));
            if cm % 2 == 0 {
                add(h, m, ch % labels, &mut g)?;
            } else {
                add(m, h, cm % labels, &mut g)?;
            }
            let grand = tree.head(h);
            if ch == 0 && grand != 0 && grand != m {
                add(grand, m, labels - 1, &mut g)?;
            }
        }
        Ok(g)
    }

    fn key_arc_count(&self, tokens: &[usize], arcs: impl Iterator<Item = (usize, usize)>) -> usize {
        arcs.filter(|&(h, m)| {
            h > 0
                && self
                    .key_pairs
                    .contains(&(self.class(tokens[h - 1]), self.class(tokens[m - 1])))
        })
        .count()
    }

    /// Ordered token pairs whose classes form a key pair, attached or not.
    fn surface_key_count(&self, tokens: &[usize]) -> usize {
        let n = tokens.len();
        (1..=n)
            .flat_map(|h| (1..=n).map(move |m| (h, m)))
            .filter(|&(h, m)| h != m)
            .filter(|&(h, m)| {
                self.key_pairs
                    .contains(&(self.class(tokens[h - 1]), self.class(tokens[m - 1])))
            })
            .count()
    }

    fn surface_accuracy(&self, train: &[EndExample], eval: &[EvalExample]) -> f64 {
        let mut votes: BTreeMap<usize, [usize; 2]> = BTreeMap::new();
        let mut overall = [0usize; 2];
        for ex in train {
            if let EndLabel::Class(y) = ex.gold {
                votes.entry(self.surface_key_count(&ex.tokens)).or_default()[y.min(1)] += 1;
                overall[y.min(1)] += 1;
            }
        }
        let majority = |v: &[usize; 2]| usize::from(v[1] > v[0]);
        let correct = eval
            .iter()
            .filter(|ex| {
                let guess = votes
                    .get(&self.surface_key_count(&ex.tokens))
                    .map_or(majority(&overall), majority);
                ex.end == EndLabel::Class(guess)
            })
            .count();
        correct as f64 / eval.len().max(1) as f64
    }

    fn structure(
        &self,
        spec: &SyntheticTaskSpec,
        tokens: &[usize],
    ) -> Result<(DepTree, IntermediateGold)> {
        let tree = self.tree(tokens)?;
        let gold = match spec.structure {
            IntermediateTask::Tree => IntermediateGold::Tree(tree.clone()),
            IntermediateTask::Graph { labels } => {
                IntermediateGold::Graph(self.semantic_graph(tokens, &tree, labels)?)
            }
        };
        Ok((tree, gold))
    }

    fn structure_key_count(&self, tokens: &[usize], gold: &IntermediateGold) -> usize {
        match gold {
            IntermediateGold::Tree(t) => self.key_arc_count(tokens, t.arcs()),
            IntermediateGold::Graph(g) => self.key_arc_count(tokens, g.unlabeled()),
        }
    }

    /// End-task supervision computed from the true structure.
    pub fn end_label(
        &self,
        spec: &SyntheticTaskSpec,
        tokens: &[usize],
        tree: &DepTree,
        gold: &IntermediateGold,
    ) -> Result<EndLabel> {
        Ok(match spec.end {
            EndTask::Graph { labels } => {
                EndLabel::Graph(self.semantic_graph(tokens, tree, labels)?)
            }
            EndTask::Classify { .. } => EndLabel::Class(usize::from(
                self.structure_key_count(tokens, gold) >= self.threshold,
            )),
        })
    }
}

/// Held-out instance with its true intermediate structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalExample {
    pub id: usize,
    pub tokens: Vec<usize>,
    pub intermediate: IntermediateGold,
    pub end: EndLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    /// Units that could be corrupted: modifiers with an alternative valid
    /// head, or graph arcs.
    pub eligible: usize,
    pub corrupted: usize,
    /// Fraction of positive labels on the evaluation split, for
    /// classification tasks.
    pub positive_rate: Option<f64>,
    /// Evaluation accuracy of a structure-blind baseline for classification
    /// tasks: the majority end-split label for each count of token pairs
    /// whose classes form a key pair, ignoring whether they are attached.
    #[serde(default)]
    pub surface_accuracy: Option<f64>,
}

impl GenerationStats {
    pub fn corruption_rate(&self) -> f64 {
        if self.eligible == 0 {
            0.0
        } else {
            self.corrupted as f64 / self.eligible as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub spec: SyntheticTaskSpec,
    pub truth: GroundTruth,
    pub intermediate: Vec<IntermediateExample>,
    pub end: Vec<EndExample>,
    pub eval: Vec<EvalExample>,
    pub stats: GenerationStats,
}

fn sentence(spec: &SyntheticTaskSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = rng.gen_range(spec.min_len..=spec.max_len);
    (0..n).map(|_| rng.gen_range(0..spec.vocab_size)).collect()
}

/// Rewires each modifier, with probability `rate`, to a uniformly chosen
/// alternative head that keeps the tree valid and projective. Returns the
/// corrupted tree with the numbers of eligible and rewired modifiers.
pub fn corrupt_tree(tree: &DepTree, rate: f64, rng: &mut impl Rng) -> (DepTree, usize, usize) {
    let mut heads = tree.heads().to_vec();
    let n = heads.len();
    let (mut eligible, mut corrupted) = (0, 0);
    for m in 1..=n {
        let current = heads[m - 1];
        let options: Vec<usize> = (0..=n)
            .filter(|&h| h != m && h != current)
            .filter(|&h| {
                let mut trial = heads.clone();
                trial[m - 1] = h;
                DepTree::new(trial).is_ok_and(|t| t.is_projective())
            })
            .collect();
        if options.is_empty() {
            continue;
        }
        eligible += 1;
        if rng.gen_bool(rate) {
            heads[m - 1] = options[rng.gen_range(0..options.len())];
            corrupted += 1;
        }
    }
    (
        DepTree::new(heads).expect("every rewiring was validated"),
        eligible,
        corrupted,
    )
}

/// Corrupts each arc with probability `rate`, by relabeling it or by moving
/// it to another head. Returns the graph with eligible and corrupted counts.
pub fn corrupt_graph(
    graph: &SemGraph,
    labels: usize,
    rate: f64,
    rng: &mut impl Rng,
) -> (SemGraph, usize, usize) {
    let n = graph.n();
    let mut out = SemGraph::empty(n);
    let (mut eligible, mut corrupted) = (0, 0);
    let arcs: Vec<(usize, usize, usize)> = graph.triples().collect();
    for &(h, m, l) in &arcs {
        eligible += 1;
        let mut target = (h, m, l);
        if rng.gen_bool(rate) {
            let heads: Vec<usize> = (1..=n)
                .filter(|&x| x != m && x != h && !graph.contains(x, m) && !out.contains(x, m))
                .collect();
            let relabel = labels > 1 && (heads.is_empty() || rng.gen_bool(0.5));
            if relabel {
                let other = rng.gen_range(0..labels - 1);
                target.2 = if other >= l { other + 1 } else { other };
                corrupted += 1;
            } else if !heads.is_empty() {
                target.0 = heads[rng.gen_range(0..heads.len())];
                corrupted += 1;
            }
        }
        if !out.contains(target.0, target.1) {
            out.insert(target.0, target.1, target.2)
                .expect("arc in range");
        }
    }
    (out, eligible, corrupted)
}

/// Generates the three disjoint splits of a synthetic task.
pub fn generate_dataset(spec: &SyntheticTaskSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut model_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut truth = GroundTruth::sample(spec, &mut model_rng);
    if matches!(spec.end, EndTask::Classify { .. }) {
        choose_classification_rule(spec, &mut truth, &mut model_rng)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(2);
    let mut next_id = 0;
    let mut stats = GenerationStats {
        eligible: 0,
        corrupted: 0,
        positive_rate: None,
        surface_accuracy: None,
    };

    let mut intermediate = Vec::with_capacity(spec.intermediate_size);
    for _ in 0..spec.intermediate_size {
        let tokens = sentence(spec, &mut rng);
        let (_, gold) = truth.structure(spec, &tokens)?;
        let (gold, eligible, corrupted) = match gold {
            IntermediateGold::Tree(t) => {
                let (t, e, c) = corrupt_tree(&t, spec.noise, &mut noise_rng);
                (IntermediateGold::Tree(t), e, c)
            }
            IntermediateGold::Graph(g) => {
                let labels = match spec.structure {
                    IntermediateTask::Graph { labels } => labels,
                    IntermediateTask::Tree => unreachable!("graph gold implies graph structure"),
                };
                let (g, e, c) = corrupt_graph(&g, labels, spec.noise, &mut noise_rng);
                (IntermediateGold::Graph(g), e, c)
            }
        };
        stats.eligible += eligible;
        stats.corrupted += corrupted;
        intermediate.push(IntermediateExample {
            id: next_id,
            tokens,
            gold,
        });
        next_id += 1;
    }

    let mut end = Vec::with_capacity(spec.end_size);
    for _ in 0..spec.end_size {
        let tokens = sentence(spec, &mut rng);
        let (tree, gold) = truth.structure(spec, &tokens)?;
        let label = truth.end_label(spec, &tokens, &tree, &gold)?;
        end.push(EndExample {
            id: next_id,
            tokens,
            gold: label,
        });
        next_id += 1;
    }

    let mut eval = Vec::with_capacity(spec.eval_size);
    for _ in 0..spec.eval_size {
        let tokens = sentence(spec, &mut rng);
        let (tree, gold) = truth.structure(spec, &tokens)?;
        let label = truth.end_label(spec, &tokens, &tree, &gold)?;
        eval.push(EvalExample {
            id: next_id,
            tokens,
            intermediate: gold,
            end: label,
        });
        next_id += 1;
    }
    if matches!(spec.end, EndTask::Classify { .. }) {
        let positive = eval.iter().filter(|e| e.end == EndLabel::Class(1)).count();
        stats.positive_rate = Some(positive as f64 / eval.len() as f64);
        stats.surface_accuracy = Some(truth.surface_accuracy(&end, &eval));
    }
    Ok(SyntheticDataset {
        spec: spec.clone(),
        truth,
        intermediate,
        end,
        eval,
        stats,
    })
}

/// Picks the key class pairs and threshold of the classification rule.
/// Candidate pair sets are tried in random order; the first whose best
/// threshold labels pilot sentences within 10 points of balance wins,
/// otherwise the most balanced candidate.
/// Key pairs, threshold and label imbalance of a classification rule.
type RuleCandidate = (Vec<(usize, usize)>, usize, f64);

fn choose_classification_rule(
    spec: &SyntheticTaskSpec,
    truth: &mut GroundTruth,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut pilot = Vec::with_capacity(PILOT_SENTENCES);
    for _ in 0..PILOT_SENTENCES {
        let tokens = sentence(spec, rng);
        let (_, gold) = truth.structure(spec, &tokens)?;
        pilot.push((tokens, gold));
    }
    let c = spec.classes;
    let mut pairs: Vec<(usize, usize)> = (0..c).flat_map(|a| (0..c).map(move |b| (a, b))).collect();
    let mut best: Option<RuleCandidate> = None;
    for _ in 0..KEY_PAIR_CANDIDATES {
        pairs.shuffle(rng);
        let mut key: Vec<(usize, usize)> = pairs[..KEY_PAIRS.min(pairs.len())].to_vec();
        key.sort_unstable();
        truth.key_pairs = key.clone();
        let counts: Vec<usize> = pilot
            .iter()
            .map(|(tokens, gold)| truth.structure_key_count(tokens, gold))
            .collect();
        let max = counts.iter().copied().max().unwrap_or(0);
        for t in 1..=max.max(1) {
            let positive = counts.iter().filter(|&&x| x >= t).count() as f64 / counts.len() as f64;
            let imbalance = (positive - 0.5).abs();
            if best.as_ref().is_none_or(|b| imbalance < b.2) {
                best = Some((key.clone(), t, imbalance));
            }
        }
        if best.as_ref().is_some_and(|b| b.2 <= 0.1) {
            break;
        }
    }
    let (key, threshold, _) = best.expect("at least one candidate");
    truth.key_pairs = key;
    truth.threshold = threshold;
    Ok(())
}

impl SyntheticDataset {
    /// Token-level records of a split, in the JSON-lines format.
    pub fn intermediate_instances(&self) -> Result<Vec<SentenceInstance>> {
        self.intermediate
            .iter()
            .map(|ex| {
                let (tree, graph) = split_gold(&ex.gold);
                SentenceInstance::new(
                    ex.id,
                    ex.tokens.clone(),
                    self.spec.vocab_size + 1,
                    tree,
                    graph,
                    None,
                )
            })
            .collect()
    }

    pub fn end_instances(&self) -> Result<Vec<SentenceInstance>> {
        self.end
            .iter()
            .map(|ex| {
                let (graph, label) = split_end(&ex.gold);
                SentenceInstance::new(
                    ex.id,
                    ex.tokens.clone(),
                    self.spec.vocab_size + 1,
                    None,
                    graph,
                    label,
                )
            })
            .collect()
    }

    /// Evaluation records carry the true intermediate structure and the end
    /// supervision. A tree intermediate uses `heads`; a graph end task uses
    /// `arcs`.
    pub fn eval_instances(&self) -> Result<Vec<SentenceInstance>> {
        self.eval
            .iter()
            .map(|ex| {
                let (tree, inter_graph) = split_gold(&ex.intermediate);
                let (end_graph, label) = split_end(&ex.end);
                SentenceInstance::new(
                    ex.id,
                    ex.tokens.clone(),
                    self.spec.vocab_size + 1,
                    tree,
                    inter_graph.or(end_graph),
                    label,
                )
            })
            .collect()
    }
}

fn split_gold(gold: &IntermediateGold) -> (Option<DepTree>, Option<SemGraph>) {
    match gold {
        IntermediateGold::Tree(t) => (Some(t.clone()), None),
        IntermediateGold::Graph(g) => (None, Some(g.clone())),
    }
}

fn split_end(gold: &EndLabel) -> (Option<SemGraph>, Option<usize>) {
    match gold {
        EndLabel::Graph(g) => (Some(g.clone()), None),
        EndLabel::Class(c) => (None, Some(*c)),
    }
}

/// Reads training examples back from records, given the task shapes.
pub fn intermediate_from_instances(
    instances: &[SentenceInstance],
    structure: IntermediateTask,
) -> Result<Vec<IntermediateExample>> {
    instances
        .iter()
        .map(|inst| {
            let gold = match structure {
                IntermediateTask::Tree => inst.gold_tree.clone().map(IntermediateGold::Tree),
                IntermediateTask::Graph { .. } => {
                    inst.gold_graph.clone().map(IntermediateGold::Graph)
                }
            }
            .ok_or_else(|| {
                Error::invalid(format!(
                    "instance {} lacks an intermediate structure",
                    inst.id
                ))
            })?;
            Ok(IntermediateExample {
                id: inst.id,
                tokens: inst.tokens.clone(),
                gold,
            })
        })
        .collect()
}

pub fn end_label_of(inst: &SentenceInstance, task: EndTask) -> Result<EndLabel> {
    match task {
        EndTask::Graph { .. } => inst.gold_graph.clone().map(EndLabel::Graph),
        EndTask::Classify { .. } => inst.end_label.map(EndLabel::Class),
    }
    .ok_or_else(|| Error::invalid(format!("instance {} lacks end-task supervision", inst.id)))
}

pub fn end_from_instances(
    instances: &[SentenceInstance],
    task: EndTask,
) -> Result<Vec<EndExample>> {
    instances
        .iter()
        .map(|inst| {
            Ok(EndExample {
                id: inst.id,
                tokens: inst.tokens.clone(),
                gold: end_label_of(inst, task)?,
            })
        })
        .collect()
}

pub fn eval_from_instances(
    instances: &[SentenceInstance],
    structure: IntermediateTask,
    task: EndTask,
) -> Result<Vec<EvalExample>> {
    let inter = intermediate_from_instances(instances, structure)?;
    inter
        .into_iter()
        .zip(instances)
        .map(|(ex, inst)| {
            Ok(EvalExample {
                id: ex.id,
                tokens: ex.tokens,
                intermediate: ex.gold,
                end: end_label_of(inst, task)?,
            })
        })
        .collect()
}
