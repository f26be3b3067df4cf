//! The dual-encoder QE network.
//!
//! An MR encoder and a text encoder (both bidirectional GRUs over a shared
//! embedding table) feed dense layers and a final linear scorer. Ranking
//! instances score a second text through the same parameters: there is one
//! copy of every weight and the second branch is simply a second pass.

use crate::config::TrainConfig;
use crate::data::{MeaningRepresentation, QeInstance, TextOutput, Vocabulary, RATING_MAX, RATING_MIN};
use crate::delex::{delexicalize, RuleSet};
use crate::error::Result;
use crate::nn::{
    bidir_encode, dense, dropout, embed, glorot, non_empty, uniform, Gradients, GruParams, GruVars, ParamId,
    ParamStore, Tape, Tensor, Var,
};
use crate::rng::{derived_rng, Rng};

pub const EMBEDDING_INIT_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub embedding: ParamId,
    pub mr_fwd: GruParams,
    pub mr_bwd: GruParams,
    pub text_fwd: GruParams,
    pub text_bwd: GruParams,
    pub dense: Vec<(ParamId, ParamId)>,
    pub out_w: ParamId,
    pub out_b: ParamId,
}

impl Layout {
    /// Declares every parameter in a fixed order.
    fn build(store: &mut ParamStore, vocab_size: usize, config: &TrainConfig, rng: &mut Rng) -> Self {
        let w = config.width;
        let embedding = store.add("embedding", uniform(vocab_size, w, EMBEDDING_INIT_LIMIT, rng));
        let mr_fwd = GruParams::init(store, "mr_fwd", w, w, rng);
        let mr_bwd = GruParams::init(store, "mr_bwd", w, w, rng);
        let text_fwd = GruParams::init(store, "text_fwd", w, w, rng);
        let text_bwd = GruParams::init(store, "text_bwd", w, w, rng);
        let mut dense = Vec::with_capacity(config.dense_layers);
        let mut input = 4 * w;
        for i in 0..config.dense_layers {
            let wt = store.add(format!("dense{i}.w"), glorot(w, input, rng));
            let b = store.add(format!("dense{i}.b"), Tensor::zeros(&[w]));
            dense.push((wt, b));
            input = w;
        }
        let out_w = store.add("out.w", glorot(1, w, rng));
        let out_b = store.add("out.b", Tensor::zeros(&[1]));
        Self {
            embedding,
            mr_fwd,
            mr_bwd,
            text_fwd,
            text_bwd,
            dense,
            out_w,
            out_b,
        }
    }
}

struct ModelVars {
    embedding: Var,
    mr_fwd: GruVars,
    mr_bwd: GruVars,
    text_fwd: GruVars,
    text_bwd: GruVars,
    dense: Vec<(Var, Var)>,
    out_w: Var,
    out_b: Var,
}

/// Token ids of one instance, ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedInstance {
    pub mr: Vec<usize>,
    pub text_a: Vec<usize>,
    pub text_b: Option<Vec<usize>>,
    pub rating: Option<f64>,
    pub is_ranking: bool,
    pub is_synthetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePair {
    pub score_a: f64,
    pub score_b: Option<f64>,
}

impl ScorePair {
    pub fn margin(&self) -> Option<f64> {
        self.score_b.map(|b| self.score_a - b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    ABetter,
    BBetter,
    Tie,
}

impl Decision {
    pub fn from_margin(margin: f64) -> Self {
        if margin > 0.0 {
            Decision::ABetter
        } else if margin < 0.0 {
            Decision::BBetter
        } else {
            Decision::Tie
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::ABetter => "a_better",
            Decision::BBetter => "b_better",
            Decision::Tie => "tie",
        }
    }
}

impl std::str::FromStr for Decision {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a_better" => Ok(Decision::ABetter),
            "b_better" => Ok(Decision::BBetter),
            "tie" => Ok(Decision::Tie),
            other => Err(crate::error::Error::Data(format!("unknown decision {other:?}"))),
        }
    }
}

/// Loss node plus the scores that produced it.
pub struct InstanceLoss {
    pub loss: Var,
    pub scores: ScorePair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QeModel {
    pub vocab: Vocabulary,
    pub config: TrainConfig,
    /// Delexicalisation applied to inputs when `config.delex` is set.
    pub rules: RuleSet,
    params: ParamStore,
    pub(crate) layout: Layout,
}

impl QeModel {
    /// Fresh model with randomly initialised weights.
    pub fn new(vocab: Vocabulary, config: TrainConfig, rules: RuleSet, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut rng = derived_rng(seed, "init", 0);
        let layout = Layout::build(&mut params, vocab.len(), &config, &mut rng);
        Ok(Self {
            vocab,
            config,
            rules,
            params,
            layout,
        })
    }

    pub(crate) fn from_parts(vocab: Vocabulary, config: TrainConfig, rules: RuleSet, params: ParamStore, layout: Layout) -> Self {
        Self {
            vocab,
            config,
            rules,
            params,
            layout,
        }
    }

    /// Parameter names and shapes in declaration order for a given setup.
    pub(crate) fn skeleton(vocab_size: usize, config: &TrainConfig) -> (ParamStore, Layout) {
        let mut params = ParamStore::new();
        let layout = Layout::build(&mut params, vocab_size, config, &mut derived_rng(0, "skeleton", 0));
        (params, layout)
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn register(&self, tape: &mut Tape<'_>) -> ModelVars {
        let l = &self.layout;
        ModelVars {
            embedding: tape.param(l.embedding),
            mr_fwd: l.mr_fwd.on_tape(tape),
            mr_bwd: l.mr_bwd.on_tape(tape),
            text_fwd: l.text_fwd.on_tape(tape),
            text_bwd: l.text_bwd.on_tape(tape),
            dense: l.dense.iter().map(|(w, b)| (tape.param(*w), tape.param(*b))).collect(),
            out_w: tape.param(l.out_w),
            out_b: tape.param(l.out_b),
        }
    }

    fn embed_dropped(&self, tape: &mut Tape<'_>, vars: &ModelVars, ids: &[usize], train: bool, rng: &mut Rng) -> Result<Vec<Var>> {
        let rows = embed(tape, vars.embedding, &non_empty(ids))?;
        rows.into_iter()
            .map(|r| dropout(tape, r, self.config.dropout_keep, train, rng))
            .collect()
    }

    fn encode_mr(&self, tape: &mut Tape<'_>, vars: &ModelVars, ids: &[usize], train: bool, rng: &mut Rng) -> Result<Var> {
        let rows = self.embed_dropped(tape, vars, ids, train, rng)?;
        bidir_encode(tape, &rows, &vars.mr_fwd, &vars.mr_bwd)
    }

    /// Score branch: text encoder, dense stack and linear output on top of
    /// an already computed MR encoding.
    fn score_branch(
        &self,
        tape: &mut Tape<'_>,
        vars: &ModelVars,
        mr_enc: Var,
        ids: &[usize],
        train: bool,
        rng: &mut Rng,
    ) -> Result<Var> {
        let rows = self.embed_dropped(tape, vars, ids, train, rng)?;
        let text_enc = bidir_encode(tape, &rows, &vars.text_fwd, &vars.text_bwd)?;
        let mut h = tape.concat(&[mr_enc, text_enc]);
        for (w, b) in &vars.dense {
            h = dense(tape, h, *w, *b, self.config.dense_activation)?;
        }
        let out = tape.matvec(vars.out_w, h)?;
        tape.add(out, vars.out_b)
    }

    pub fn prepare_text(&self, mr: &MeaningRepresentation, text: &TextOutput) -> (Vec<usize>, Vec<usize>) {
        if self.config.delex {
            let d = delexicalize(mr, text, &self.rules);
            (self.vocab.ids(&d.mr.linearize()), self.vocab.ids(d.text.tokens()))
        } else {
            (self.vocab.ids(&mr.linearize()), self.vocab.ids(text.tokens()))
        }
    }

    pub fn prepare(&self, inst: &QeInstance) -> PreparedInstance {
        let (mr, text_a) = self.prepare_text(&inst.mr, &inst.text_a);
        let text_b = inst.text_b.as_ref().map(|b| self.prepare_text(&inst.mr, b).1);
        PreparedInstance {
            mr,
            text_a,
            text_b,
            rating: inst.rating,
            is_ranking: inst.is_ranking,
            is_synthetic: inst.is_synthetic,
        }
    }

    /// Records the instance loss on `tape`:
    /// squared error `(ŷ − y)²` for rating instances (second branch not
    /// evaluated), hinge `max(0, 1 − (ŷ − ŷ′))` for ranking instances.
    pub fn instance_loss(
        &self,
        tape: &mut Tape<'_>,
        inst: &PreparedInstance,
        train: bool,
        rng: &mut Rng,
    ) -> Result<InstanceLoss> {
        let vars = self.register(tape);
        let mr_enc = self.encode_mr(tape, &vars, &inst.mr, train, rng)?;
        let score_a = self.score_branch(tape, &vars, mr_enc, &inst.text_a, train, rng)?;
        if inst.is_ranking {
            let text_b = inst.text_b.as_deref().ok_or_else(|| {
                crate::error::Error::MalformedInstance("ranking instance without text_b".into())
            })?;
            let score_b = self.score_branch(tape, &vars, mr_enc, text_b, train, rng)?;
            let margin = tape.sub(score_a, score_b)?;
            let slack = tape.one_minus(margin);
            let loss = tape.relu(slack);
            Ok(InstanceLoss {
                loss,
                scores: ScorePair {
                    score_a: tape.scalar(score_a),
                    score_b: Some(tape.scalar(score_b)),
                },
            })
        } else {
            let y = inst.rating.ok_or_else(|| {
                crate::error::Error::MalformedInstance("rating instance without rating".into())
            })?;
            let target = tape.constant(vec![y]);
            let diff = tape.sub(score_a, target)?;
            let loss = tape.square(diff);
            Ok(InstanceLoss {
                loss,
                scores: ScorePair {
                    score_a: tape.scalar(score_a),
                    score_b: None,
                },
            })
        }
    }

    /// Loss value, with `scale · ∇loss` added into `grads`.
    pub fn accumulate_gradient(
        &self,
        inst: &PreparedInstance,
        train: bool,
        rng: &mut Rng,
        scale: f64,
        grads: &mut Gradients,
    ) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let out = self.instance_loss(&mut tape, inst, train, rng)?;
        tape.backward_into(out.loss, None, scale, grads)?;
        Ok(tape.scalar(out.loss))
    }

    /// Loss value without gradients.
    pub fn loss_value(&self, inst: &PreparedInstance, train: bool, rng: &mut Rng) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let out = self.instance_loss(&mut tape, inst, train, rng)?;
        Ok(tape.scalar(out.loss))
    }

    /// Evaluation-mode scores of several texts against one MR encoding.
    pub fn score_ids_many(&self, mr: &[usize], texts: &[&[usize]]) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.params);
        let vars = self.register(&mut tape);
        // evaluation mode never draws from the rng
        let mut rng = derived_rng(0, "eval", 0);
        let mr_enc = self.encode_mr(&mut tape, &vars, mr, false, &mut rng)?;
        texts
            .iter()
            .map(|t| {
                let s = self.score_branch(&mut tape, &vars, mr_enc, t, false, &mut rng)?;
                Ok(tape.scalar(s))
            })
            .collect()
    }

    pub fn score_ids(&self, mr: &[usize], text: &[usize]) -> Result<f64> {
        Ok(self.score_ids_many(mr, &[text])?[0])
    }

    /// Raw evaluation-mode score of one text.
    pub fn score(&self, mr: &MeaningRepresentation, text: &TextOutput) -> Result<f64> {
        let (m, t) = self.prepare_text(mr, text);
        self.score_ids(&m, &t)
    }

    /// Score as reported to users: clamped to the scale if configured.
    pub fn predict(&self, mr: &MeaningRepresentation, text: &TextOutput) -> Result<f64> {
        let s = self.score(mr, text)?;
        Ok(self.postprocess(s))
    }

    pub fn postprocess(&self, score: f64) -> f64 {
        if self.config.clamp {
            score.clamp(RATING_MIN, RATING_MAX)
        } else {
            score
        }
    }

    pub fn score_prepared(&self, inst: &PreparedInstance) -> Result<ScorePair> {
        match &inst.text_b {
            Some(b) => {
                let s = self.score_ids_many(&inst.mr, &[&inst.text_a, b])?;
                Ok(ScorePair {
                    score_a: s[0],
                    score_b: Some(s[1]),
                })
            }
            None => Ok(ScorePair {
                score_a: self.score_ids(&inst.mr, &inst.text_a)?,
                score_b: None,
            }),
        }
    }

    /// Pairwise decision from the score difference `score(a) − score(b)`.
    pub fn rank_pair(&self, mr: &MeaningRepresentation, a: &TextOutput, b: &TextOutput) -> Result<(Decision, f64)> {
        let (m, ta) = self.prepare_text(mr, a);
        let (_, tb) = self.prepare_text(mr, b);
        let s = self.score_ids_many(&m, &[&ta, &tb])?;
        let margin = s[0] - s[1];
        Ok((Decision::from_margin(margin), margin))
    }

    /// Indices of `texts`, best first (stable for equal scores).
    pub fn rank_n(&self, mr: &MeaningRepresentation, texts: &[TextOutput]) -> Result<Vec<usize>> {
        let (m, _) = self.prepare_text(mr, &TextOutput::new(""));
        let ids: Vec<Vec<usize>> = texts.iter().map(|t| self.prepare_text(mr, t).1).collect();
        let refs: Vec<&[usize]> = ids.iter().map(Vec::as_slice).collect();
        let scores = self.score_ids_many(&m, &refs)?;
        Ok(order_by_score(&scores))
    }
}

/// Stable descending argsort.
pub fn order_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    order
}
