use std::collections::HashMap;
use std::sync::Arc as Shared;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::layers::{uniform, Embedding, Linear, LstmCell, LstmState, Mlp};
use crate::repr::{PretrainedTable, ReprConfig, ReprError, Vocab, WordDropout, WordEncoder};
use crate::tensor::{Gradients, ParamId, ParameterStore, Tape, TensorError, Var};
use crate::treebank::{HeadAssignment, Sentence};

use super::parse::{parse_with, ParseOutput, Scorer};
use super::{Action, Direction, ParseError, Pending};

/// Pending items to the left and right of an attachment point that feed its
/// feature vector: `p_{i-2} .. p_{i+3}`.
pub const WINDOW_LEFT: usize = 2;
pub const WINDOW_RIGHT: usize = 3;
pub const WINDOW: usize = WINDOW_LEFT + 1 + WINDOW_RIGHT;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub repr: ReprConfig,
    pub tree_hidden: usize,
    pub rel_dim: usize,
    pub mlp_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            repr: ReprConfig::default(),
            tree_hidden: 100,
            rel_dim: 25,
            mlp_hidden: 100,
        }
    }
}

impl ModelConfig {
    /// Width of a structure encoding; equal to the contextual word vector so
    /// heads and children feed the same LSTM input slot.
    pub fn encoding_dim(&self) -> usize {
        self.repr.context_dim()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error("model metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error("model file is truncated")]
    Truncated,
    #[error("model file has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("vocabulary has no relations")]
    NoRelations,
    #[error("root label {0:?} is not a known relation")]
    UnknownRootLabel(String),
    #[error("configured size {0} exceeds the stored parameters")]
    OversizedConfig(usize),
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    format: u32,
    config: ModelConfig,
    vocab: Vocab,
}

/// Every trainable parameter of the parser, with its configuration and
/// vocabularies.
#[derive(Debug, Clone)]
pub struct ParserModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub store: ParameterStore,
    encoder: WordEncoder,
    tree_left: LstmCell,
    tree_right: LstmCell,
    relation_emb: Embedding,
    null_label: ParamId,
    node: Linear,
    left_pad: ParamId,
    right_pad: ParamId,
    mlp_u: Mlp,
    mlp_r: Mlp,
    root_relation: usize,
    pretrained: Option<Shared<PretrainedTable>>,
}

impl ParserModel {
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Result<Self, ModelError> {
        let relations = vocab.num_relations();
        if relations == 0 {
            return Err(ModelError::NoRelations);
        }
        let root_relation = vocab
            .relation_id(&vocab.root_label)
            .ok_or_else(|| ModelError::UnknownRootLabel(vocab.root_label.clone()))?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        let enc_dim = config.encoding_dim();
        let lstm_input = enc_dim + config.rel_dim;

        let encoder = WordEncoder::new(&mut store, &config.repr, &vocab, &mut rng)?;
        let tree_left = LstmCell::new(&mut store, "tree/left", lstm_input, config.tree_hidden, &mut rng)?;
        let tree_right = LstmCell::new(&mut store, "tree/right", lstm_input, config.tree_hidden, &mut rng)?;
        let relation_emb = Embedding::new(&mut store, "rel_emb", relations, config.rel_dim, &mut rng)?;
        let null_label = store.add("null_label", uniform(&mut rng, config.rel_dim, 1, 0.05))?;
        let node = Linear::new(
            &mut store,
            "tree/enc",
            2 * config.tree_hidden + config.rel_dim,
            enc_dim,
            &mut rng,
        )?;
        let left_pad = store.add("pad/left", uniform(&mut rng, enc_dim, 1, 0.05))?;
        let right_pad = store.add("pad/right", uniform(&mut rng, enc_dim, 1, 0.05))?;
        let features = WINDOW * enc_dim;
        let mlp_u = Mlp::new(&mut store, "mlp_u", &[features, config.mlp_hidden, 2], &mut rng)?;
        let mlp_r = Mlp::new(
            &mut store,
            "mlp_r",
            &[features, config.mlp_hidden, 2 * relations],
            &mut rng,
        )?;

        Ok(ParserModel {
            config,
            vocab,
            store,
            encoder,
            tree_left,
            tree_right,
            relation_emb,
            null_label,
            node,
            left_pad,
            right_pad,
            mlp_u,
            mlp_r,
            root_relation,
            pretrained: None,
        })
    }

    pub fn num_relations(&self) -> usize {
        self.vocab.num_relations()
    }

    pub fn root_relation(&self) -> usize {
        self.root_relation
    }

    pub fn encoder(&self) -> &WordEncoder {
        &self.encoder
    }

    pub fn mlp_u(&self) -> &Mlp {
        &self.mlp_u
    }

    pub fn mlp_r(&self) -> &Mlp {
        &self.mlp_r
    }

    pub fn pretrained(&self) -> Option<&PretrainedTable> {
        self.pretrained.as_deref()
    }

    /// Supplies the frozen pretrained vectors used by the word encoder.
    pub fn attach_pretrained(&mut self, table: Shared<PretrainedTable>) -> Result<(), ModelError> {
        if self.config.repr.use_pretrained && table.dim() != self.config.repr.pretrained_dim {
            return Err(ReprError::PretrainedMismatch {
                expected: self.config.repr.pretrained_dim,
                found: table.dim(),
            }
            .into());
        }
        self.pretrained = Some(table);
        Ok(())
    }

    /// Greedy easy-first parse, returning one attachment per token.
    pub fn parse(&self, sentence: &Sentence) -> Result<Vec<HeadAssignment>, ParseError> {
        let out = self.parse_full(sentence, false)?;
        Ok(out.assignments(sentence.len(), self.vocab.relations.symbols()))
    }

    pub fn parse_full(&self, sentence: &Sentence, trace: bool) -> Result<ParseOutput, ParseError> {
        let mut session = Session::new(self);
        parse_with(&mut session, sentence, trace)
    }

    /// Parameters followed by a length-prefixed JSON block with the
    /// configuration and vocabularies.
    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let mut out = self.store.to_bytes();
        let meta = serde_json::to_vec(&Metadata {
            format: FORMAT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
        })?;
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut cursor = bytes;
        let params_start = cursor;
        let stored = ParameterStore::read_from(&mut cursor)?;
        let params = &params_start[..params_start.len() - cursor.len()];

        if cursor.len() < 8 {
            return Err(ModelError::Truncated);
        }
        let (len, rest) = cursor.split_at(8);
        let len = u64::from_le_bytes(len.try_into().expect("8 bytes"));
        if (rest.len() as u64) < len {
            return Err(ModelError::Truncated);
        }
        let (meta, trailing) = rest.split_at(len as usize);
        if !trailing.is_empty() {
            return Err(ModelError::TrailingBytes(trailing.len()));
        }
        let meta: Metadata = serde_json::from_slice(meta)?;
        if meta.format != FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(meta.format));
        }
        check_stored_shapes(&meta.config, &meta.vocab, &stored)?;
        let mut model = ParserModel::new(meta.config, meta.vocab, 0)?;
        model.store.load_strict(&mut &params[..])?;
        Ok(model)
    }
}

/// Ties every configured size to the shape of a stored parameter, so that
/// building the model never allocates more than the file holds.
fn check_stored_shapes(config: &ModelConfig, vocab: &Vocab, stored: &ParameterStore) -> Result<(), ModelError> {
    let total: usize = stored.ids().map(|id| stored.value(id).len()).sum();
    let repr = &config.repr;
    let sizes = [
        repr.word_dim,
        repr.pos_dim,
        repr.char_dim,
        repr.char_hidden,
        repr.char_layers,
        repr.vprime_dim,
        repr.sent_hidden,
        repr.sent_layers,
        repr.pretrained_dim,
        config.tree_hidden,
        config.rel_dim,
        config.mlp_hidden,
    ];
    if let Some(&d) = sizes.iter().find(|&&d| d > total) {
        return Err(ModelError::OversizedConfig(d));
    }
    let expect = |name: String, shape: (usize, usize)| -> Result<(), ModelError> {
        let id = stored
            .id(&name)
            .ok_or_else(|| TensorError::MissingName(name.clone()))?;
        let found = stored.value(id).shape();
        if found != shape {
            return Err(TensorError::ParamShape {
                name,
                expected: shape,
                found,
            }
            .into());
        }
        Ok(())
    };
    let enc = config.encoding_dim();
    expect("word_emb".into(), (vocab.words.len(), repr.word_dim))?;
    expect("pos_emb".into(), (vocab.pos.len(), repr.pos_dim))?;
    if repr.use_char {
        expect("char_emb".into(), (vocab.chars.len(), repr.char_dim))?;
        expect("char/l0/fwd/input/w_h".into(), (repr.char_hidden, repr.char_hidden))?;
        if repr.char_layers > 1 {
            let last = repr.char_layers - 1;
            expect(format!("char/l{last}/fwd/input/w_x"), (repr.char_hidden, 2 * repr.char_hidden))?;
        }
    }
    expect("vprime/w".into(), (repr.vprime_dim, repr.projection_input()))?;
    expect("sent/l0/fwd/input/w_h".into(), (repr.sent_hidden, repr.sent_hidden))?;
    if repr.sent_layers > 1 {
        let last = repr.sent_layers - 1;
        expect(format!("sent/l{last}/fwd/input/w_x"), (repr.sent_hidden, 2 * repr.sent_hidden))?;
    }
    expect("tree/left/input/w_h".into(), (config.tree_hidden, config.tree_hidden))?;
    expect("rel_emb".into(), (vocab.num_relations(), config.rel_dim))?;
    expect("tree/enc/w".into(), (enc, 2 * config.tree_hidden + config.rel_dim))?;
    expect("mlp_u/l0/w".into(), (config.mlp_hidden, WINDOW * enc))?;
    Ok(())
}

/// Neural state carried by each pending item.
#[derive(Debug, Clone, Copy)]
pub struct NodeState {
    pub left: LstmState,
    pub right: LstmState,
    pub label: Var,
    pub encoding: Var,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    LeftPad,
    RightPad,
    Item { head: usize, version: u32 },
}

/// Per-sentence computation state: one tape plus a cache of scorer outputs
/// keyed by the identities of the window's items.
pub struct Session<'m> {
    model: &'m ParserModel,
    tape: Tape<'m>,
    cache: HashMap<[Slot; WINDOW], (Var, Var)>,
    use_cache: bool,
    dropout: Option<(f64, ChaCha8Rng)>,
    losses: Vec<Var>,
}

impl<'m> Session<'m> {
    pub fn new(model: &'m ParserModel) -> Self {
        Session {
            model,
            tape: Tape::new(&model.store),
            cache: HashMap::new(),
            use_cache: true,
            dropout: None,
            losses: Vec::new(),
        }
    }

    /// Rescores every attachment point on every call.
    pub fn exhaustive(model: &'m ParserModel) -> Self {
        Session {
            use_cache: false,
            ..Session::new(model)
        }
    }

    pub fn with_word_dropout(mut self, alpha: f64, seed: u64) -> Self {
        self.dropout = Some((alpha, ChaCha8Rng::seed_from_u64(seed)));
        self
    }

    pub fn tape(&mut self) -> &mut Tape<'m> {
        &mut self.tape
    }

    pub fn losses(&self) -> &[Var] {
        &self.losses
    }

    fn leaf(&mut self, v: Var) -> Result<NodeState, ParseError> {
        let m = self.model;
        let tape = &mut self.tape;
        let null = tape.param(m.null_label);
        let input = tape.concat(&[v, null])?;
        let left = m.tree_left.step(tape, None, input)?;
        let right = m.tree_right.step(tape, None, input)?;
        let mut state = NodeState {
            left,
            right,
            label: null,
            encoding: v,
        };
        state.encoding = self.encode(&state)?;
        Ok(state)
    }

    /// `tanh(W^e [h_L ; h_R ; label] + b^e)`.
    fn encode(&mut self, state: &NodeState) -> Result<Var, ParseError> {
        let tape = &mut self.tape;
        let x = tape.concat(&[state.left.h, state.right.h, state.label])?;
        let y = self.model.node.apply(tape, x)?;
        Ok(tape.tanh(y)?)
    }

    fn window(pending: &Pending<NodeState>, i: usize) -> [Slot; WINDOW] {
        let n = pending.len() as isize;
        let mut slots = [Slot::LeftPad; WINDOW];
        for (k, slot) in slots.iter_mut().enumerate() {
            let p = i as isize - WINDOW_LEFT as isize + k as isize;
            *slot = if p < 1 {
                Slot::LeftPad
            } else if p > n {
                Slot::RightPad
            } else {
                let item = pending.item(p as usize);
                Slot::Item {
                    head: item.head,
                    version: item.version,
                }
            };
        }
        slots
    }

    /// `(MLP_U(x_i), MLP_R(x_i))` for attachment point `i`.
    fn outputs(&mut self, pending: &Pending<NodeState>, i: usize) -> Result<(Var, Var), ParseError> {
        let key = Self::window(pending, i);
        if self.use_cache {
            if let Some(&hit) = self.cache.get(&key) {
                return Ok(hit);
            }
        }
        let m = self.model;
        let n = pending.len() as isize;
        let mut parts = Vec::with_capacity(WINDOW);
        for k in 0..WINDOW {
            let p = i as isize - WINDOW_LEFT as isize + k as isize;
            parts.push(if p < 1 {
                self.tape.param(m.left_pad)
            } else if p > n {
                self.tape.param(m.right_pad)
            } else {
                pending.item(p as usize).payload.encoding
            });
        }
        let x = self.tape.concat(&parts)?;
        let u = m.mlp_u.apply(&mut self.tape, x)?;
        let r = m.mlp_r.apply(&mut self.tape, x)?;
        if self.use_cache {
            self.cache.insert(key, (u, r));
        }
        Ok((u, r))
    }

    /// Tape node holding `Score_U(i, a) + Score_R(i, a, r)`.
    pub fn score_var(&mut self, pending: &Pending<NodeState>, action: &Action) -> Result<Var, ParseError> {
        let (u, r) = self.outputs(pending, action.position)?;
        let a = action.direction.index();
        let su = self.tape.pick_row(u, a)?;
        let sr = self.tape.pick_row(r, action.relation * 2 + a)?;
        Ok(self.tape.add(su, sr)?)
    }

    /// Sum of the recorded hinge terms and its gradients; `None` when nothing
    /// was recorded.
    pub fn backward_losses(&mut self) -> Result<Option<(f64, Gradients)>, ParseError> {
        let Some((&first, rest)) = self.losses.split_first() else {
            return Ok(None);
        };
        let mut total = first;
        for &l in rest {
            total = self.tape.add(total, l)?;
        }
        let value = self.tape.scalar(total);
        let grads = self.tape.backward(total)?;
        Ok(Some((value, grads)))
    }
}

impl Scorer for Session<'_> {
    type State = NodeState;

    fn relations(&self) -> &[String] {
        self.model.vocab.relations.symbols()
    }

    fn root_relation(&self) -> usize {
        self.model.root_relation
    }

    fn init(&mut self, sentence: &Sentence) -> Result<Vec<NodeState>, ParseError> {
        let m = self.model;
        let dropout = self
            .dropout
            .as_mut()
            .map(|(alpha, rng)| WordDropout { alpha: *alpha, rng });
        let vectors = m
            .encoder
            .encode_sentence(&mut self.tape, &m.vocab, m.pretrained(), sentence, dropout)?;
        vectors.into_iter().map(|v| self.leaf(v)).collect()
    }

    fn score(&mut self, pending: &Pending<NodeState>) -> Result<Vec<f64>, ParseError> {
        let relations = self.model.num_relations();
        let mut scores = Vec::with_capacity(2 * relations * (pending.len() - 1));
        for i in 1..pending.len() {
            let (u, r) = self.outputs(pending, i)?;
            let u = self.tape.value(u).data();
            let r = self.tape.value(r).data();
            for a in 0..2 {
                for rel in 0..relations {
                    scores.push(u[a] + r[rel * 2 + a]);
                }
            }
        }
        Ok(scores)
    }

    fn attach(
        &mut self,
        receiver: &mut NodeState,
        child: NodeState,
        direction: Direction,
        relation: usize,
    ) -> Result<(), ParseError> {
        let m = self.model;
        let tape = &mut self.tape;
        let label = m.relation_emb.lookup(tape, relation)?;
        let input = tape.concat(&[child.encoding, label])?;
        match direction {
            Direction::Left => receiver.left = m.tree_left.step(tape, Some(&receiver.left), input)?,
            Direction::Right => receiver.right = m.tree_right.step(tape, Some(&receiver.right), input)?,
        }
        receiver.label = label;
        receiver.encoding = self.encode(receiver)?;
        Ok(())
    }

    fn record_loss(
        &mut self,
        pending: &Pending<NodeState>,
        valid: &Action,
        invalid: &Action,
    ) -> Result<(), ParseError> {
        let good = self.score_var(pending, valid)?;
        let bad = self.score_var(pending, invalid)?;
        let diff = self.tape.sub(bad, good)?;
        let loss = self.tape.add_scalar(diff, 1.0)?;
        self.losses.push(loss);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::easyfirst::{argmax, enumerate_actions, parse_with};
    use crate::repr::build_vocab;
    use crate::treebank::heads_projective;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            repr: ReprConfig {
                word_dim: 5,
                pos_dim: 3,
                char_dim: 4,
                char_hidden: 3,
                char_layers: 1,
                vprime_dim: 6,
                sent_hidden: 4,
                sent_layers: 1,
                use_char: true,
                use_pretrained: false,
                pretrained_dim: 0,
            },
            tree_hidden: 5,
            rel_dim: 3,
            mlp_hidden: 7,
        }
    }

    fn cat_sentence() -> Sentence {
        Sentence::from_parts([
            ("Tôi", "P", 2, "nsubj"),
            ("có", "V", 0, "root"),
            ("một", "L", 4, "det"),
            ("con", "Nc", 5, "nmod"),
            ("mèo", "N", 2, "dobj"),
        ])
    }

    fn model(seed: u64) -> ParserModel {
        let vocab = build_vocab(&[cat_sentence()], 1).unwrap();
        ParserModel::new(tiny_config(), vocab, seed).unwrap()
    }

    fn rel(m: &ParserModel, label: &str) -> usize {
        m.vocab.relation_id(label).unwrap()
    }

    fn values(s: &Session, v: Var) -> Vec<f64> {
        s.tape.value(v).data().to_vec()
    }

    #[test]
    fn init_gives_one_leaf_per_word() {
        let m = model(1);
        let mut s = Session::new(&m);
        let states = s.init(&cat_sentence()).unwrap();
        let p = Pending::new(states).unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.items().iter().all(|i| i.left_children.is_empty() && i.right_children.is_empty()));
        for item in p.items() {
            assert_eq!(s.tape.shape(item.payload.encoding), (m.config.encoding_dim(), 1));
        }
        assert!(matches!(s.init(&Sentence::default()), Err(ParseError::Repr(ReprError::EmptySentence))));
    }

    #[test]
    fn leaf_encoding_formula() {
        let m = model(2);
        let mut s = Session::new(&m);
        let v = m
            .encoder
            .encode_sentence(&mut s.tape, &m.vocab, None, &cat_sentence(), None)
            .unwrap();
        let leaf = s.leaf(v[0]).unwrap();

        let tape = &mut s.tape;
        let null = tape.param(m.null_label);
        let input = tape.concat(&[v[0], null]).unwrap();
        let hl = m.tree_left.step(tape, None, input).unwrap().h;
        let hr = m.tree_right.step(tape, None, input).unwrap().h;
        let x: Vec<f64> = [hl, hr, null]
            .iter()
            .flat_map(|&p| tape.value(p).data().to_vec())
            .collect();
        let w = m.store.value(m.node.weight);
        let b = m.store.value(m.node.bias);
        let got = tape.value(leaf.encoding).data();
        for i in 0..got.len() {
            let pre: f64 = (0..x.len()).map(|k| w.get(i, k) * x[k]).sum::<f64>() + b.data()[i];
            assert!((got[i] - pre.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_encodings() {
        let m = model(3);
        let run = || {
            let mut s = Session::new(&m);
            let states = s.init(&cat_sentence()).unwrap();
            states.iter().map(|st| values(&s, st.encoding)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn score_layout() {
        let m = model(4);
        let r = m.num_relations();
        assert_eq!(m.mlp_u().output_dim(), 2);
        assert_eq!(m.mlp_r().output_dim(), 2 * r);
        let mut s = Session::new(&m);
        let p = Pending::new(s.init(&cat_sentence()).unwrap()).unwrap();
        let scores = s.score(&p).unwrap();
        assert_eq!(scores.len(), enumerate_actions(5, r).unwrap().len());
        for (k, action) in enumerate_actions(5, r).unwrap().iter().enumerate() {
            let var = s.score_var(&p, action).unwrap();
            assert_eq!(s.tape.scalar(var), scores[k]);
        }
    }

    #[test]
    fn unlabeled_bias_shift() {
        let m = model(5);
        let mut shifted = m.clone();
        let bias = shifted.mlp_u().layers()[1].bias;
        let c = 0.75;
        shifted.store.value_mut(bias).data_mut().iter_mut().for_each(|b| *b += c);

        let scores = |model: &ParserModel| {
            let mut s = Session::new(model);
            let p = Pending::new(s.init(&cat_sentence()).unwrap()).unwrap();
            s.score(&p).unwrap()
        };
        let a = scores(&m);
        let b = scores(&shifted);
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - c).abs() < 1e-12);
        }
        assert_eq!(argmax(&a), argmax(&b));
    }

    #[test]
    fn attachment_changes_encoding() {
        let m = model(6);
        let mut s = Session::new(&m);
        let mut p = Pending::new(s.init(&cat_sentence()).unwrap()).unwrap();
        let before = values(&s, p.item(5).payload.encoding);
        p.apply(&Action::new(4, Direction::Left, rel(&m, "nmod")), |r, c, d, l| s.attach(r, c, d, l))
            .unwrap();
        assert_ne!(values(&s, p.item(4).payload.encoding), before);
    }

    #[test]
    fn children_feed_tree_lstms_in_order() {
        let m = model(7);
        let mut s = Session::new(&m);
        let leaves = s.init(&cat_sentence()).unwrap();
        let mut p = Pending::new(leaves.clone()).unwrap();
        for (pos, dir, label) in [
            (4, Direction::Left, "nmod"),
            (3, Direction::Left, "det"),
            (2, Direction::Right, "dobj"),
            (1, Direction::Left, "nsubj"),
        ] {
            p.apply(&Action::new(pos, dir, rel(&m, label)), |r, c, d, l| s.attach(r, c, d, l))
                .unwrap();
        }
        assert_eq!(p.item(1).head, 2);
        assert_eq!(p.item(1).left_children, [1]);
        assert_eq!(p.item(1).right_children, [5]);

        // Rebuild "mèo" by hand: seed, then "con" (nearest) and "một".
        let mut cat = leaves[4];
        s.attach(&mut cat, leaves[3], Direction::Left, rel(&m, "nmod")).unwrap();
        s.attach(&mut cat, leaves[2], Direction::Left, rel(&m, "det")).unwrap();
        let mut root = leaves[1];
        s.attach(&mut root, cat, Direction::Right, rel(&m, "dobj")).unwrap();
        s.attach(&mut root, leaves[0], Direction::Left, rel(&m, "nsubj")).unwrap();
        assert_eq!(values(&s, root.encoding), values(&s, p.item(1).payload.encoding));

        let mut swapped = leaves[4];
        s.attach(&mut swapped, leaves[2], Direction::Left, rel(&m, "det")).unwrap();
        s.attach(&mut swapped, leaves[3], Direction::Left, rel(&m, "nmod")).unwrap();
        assert_ne!(values(&s, swapped.encoding), values(&s, cat.encoding));
    }

    #[test]
    fn cached_scores_match_exhaustive() {
        let m = model(8);
        let sentence = cat_sentence();
        let mut cached = Session::new(&m);
        let mut full = Session::exhaustive(&m);
        let mut a = Pending::new(cached.init(&sentence).unwrap()).unwrap();
        let mut b = Pending::new(full.init(&sentence).unwrap()).unwrap();
        let r = m.num_relations();
        let mut k = 0;
        while a.len() > 1 {
            let sa = cached.score(&a).unwrap();
            let sb = full.score(&b).unwrap();
            assert_eq!(sa, sb);
            // Vary positions so both directions and edges are exercised.
            let action = Action::new(1 + k % (a.len() - 1), Direction::ALL[k % 2], k % r);
            a.apply(&action, |x, c, d, l| cached.attach(x, c, d, l)).unwrap();
            b.apply(&action, |x, c, d, l| full.attach(x, c, d, l)).unwrap();
            k += 1;
        }
    }

    #[test]
    fn untrained_parse_is_projective_tree() {
        let m = model(9);
        let out = m.parse_full(&cat_sentence(), true).unwrap();
        assert_eq!(out.arcs.len(), 5);
        assert_eq!(out.trace.len(), 4);
        let heads = out.heads(5);
        crate::treebank::validate_heads(&heads).unwrap();
        assert!(heads_projective(&heads));
        let single = Sentence::from_parts([("mèo", "N", 0, "root")]);
        assert_eq!(m.parse(&single).unwrap(), [HeadAssignment::new(0, "root")]);
    }

    #[test]
    fn model_file_round_trip() {
        let m = model(10);
        let bytes = m.to_bytes().unwrap();
        let back = ParserModel::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.parse(&cat_sentence()).unwrap(), m.parse(&cat_sentence()).unwrap());
        for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(ParserModel::from_bytes(&bytes[..cut]).is_err());
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(ParserModel::from_bytes(&extra), Err(ModelError::TrailingBytes(1))));
    }

    fn with_config(m: &ParserModel, config: ModelConfig) -> Vec<u8> {
        let mut out = m.store.to_bytes();
        let meta = serde_json::to_vec(&Metadata {
            format: FORMAT_VERSION,
            config,
            vocab: m.vocab.clone(),
        })
        .unwrap();
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out
    }

    #[test]
    fn metadata_must_agree_with_stored_shapes() {
        let m = model(12);
        let mut huge = m.config.clone();
        huge.mlp_hidden = 1 << 40;
        assert!(matches!(
            ParserModel::from_bytes(&with_config(&m, huge)),
            Err(ModelError::OversizedConfig(_))
        ));
        let mut off = m.config.clone();
        off.repr.sent_layers += 1;
        assert!(matches!(
            ParserModel::from_bytes(&with_config(&m, off)),
            Err(ModelError::Tensor(TensorError::MissingName(_)))
        ));
        let mut off = m.config.clone();
        off.rel_dim += 1;
        assert!(matches!(
            ParserModel::from_bytes(&with_config(&m, off)),
            Err(ModelError::Tensor(TensorError::ParamShape { .. }))
        ));
        ParserModel::from_bytes(&with_config(&m, m.config.clone())).unwrap();
    }

    #[test]
    fn seeds_change_parameters() {
        assert_eq!(model(1).to_bytes().unwrap(), model(1).to_bytes().unwrap());
        assert_ne!(model(1).to_bytes().unwrap(), model(2).to_bytes().unwrap());
    }

    #[test]
    fn replay_gives_identical_output() {
        let m = model(11);
        let mut s = Session::new(&m);
        let a = parse_with(&mut s, &cat_sentence(), true).unwrap();
        let mut s = Session::new(&m);
        let b = parse_with(&mut s, &cat_sentence(), true).unwrap();
        assert_eq!(a, b);
    }
}
