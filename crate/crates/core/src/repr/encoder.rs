use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::layers::{BiLstm, Embedding, Linear};
use crate::tensor::{ParameterStore, Tape, Tensor, TensorError, Var};
use crate::treebank::{Sentence, Token};

use super::{PretrainedTable, ReprError, Vocab, UNK};

/// Dimensions and feature switches of the word representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprConfig {
    pub word_dim: usize,
    pub pos_dim: usize,
    pub char_dim: usize,
    pub char_hidden: usize,
    pub char_layers: usize,
    pub vprime_dim: usize,
    pub sent_hidden: usize,
    pub sent_layers: usize,
    pub use_char: bool,
    pub use_pretrained: bool,
    /// Width of the pretrained block; zero when pretrained features are off.
    pub pretrained_dim: usize,
}

impl Default for ReprConfig {
    fn default() -> Self {
        ReprConfig {
            word_dim: 100,
            pos_dim: 25,
            char_dim: 100,
            char_hidden: 100,
            char_layers: 2,
            vprime_dim: 150,
            sent_hidden: 125,
            sent_layers: 2,
            use_char: true,
            use_pretrained: false,
            pretrained_dim: 0,
        }
    }
}

impl ReprConfig {
    /// Input width of the `v'` projection for the active blocks.
    pub fn projection_input(&self) -> usize {
        let mut width = self.word_dim + self.pos_dim;
        if self.use_char {
            width += 2 * self.char_hidden;
        }
        if self.use_pretrained {
            width += self.pretrained_dim;
        }
        width
    }

    /// Dimension of contextual vectors `v`.
    pub fn context_dim(&self) -> usize {
        2 * self.sent_hidden
    }
}

/// Replaces a training word with UNK with probability `alpha / (alpha + freq)`.
pub struct WordDropout<'r> {
    pub alpha: f64,
    pub rng: &'r mut dyn RngCore,
}

/// Parameters of the word-level encoder.
#[derive(Debug, Clone)]
pub struct WordEncoder {
    config: ReprConfig,
    words: Embedding,
    pos: Embedding,
    chars: Option<(Embedding, BiLstm)>,
    projection: Linear,
    sentence: BiLstm,
}

impl WordEncoder {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        config: &ReprConfig,
        vocab: &Vocab,
        rng: &mut R,
    ) -> Result<Self, TensorError> {
        let words = Embedding::new(store, "word_emb", vocab.words.len(), config.word_dim, rng)?;
        let pos = Embedding::new(store, "pos_emb", vocab.pos.len(), config.pos_dim, rng)?;
        let chars = if config.use_char {
            let emb = Embedding::new(store, "char_emb", vocab.chars.len(), config.char_dim, rng)?;
            let net = BiLstm::new(
                store,
                "char",
                config.char_dim,
                config.char_hidden,
                config.char_layers,
                rng,
            )?;
            Some((emb, net))
        } else {
            None
        };
        let projection = Linear::new(
            store,
            "vprime",
            config.projection_input(),
            config.vprime_dim,
            rng,
        )?;
        let sentence = BiLstm::new(
            store,
            "sent",
            config.vprime_dim,
            config.sent_hidden,
            config.sent_layers,
            rng,
        )?;
        Ok(WordEncoder {
            config: config.clone(),
            words,
            pos,
            chars,
            projection,
            sentence,
        })
    }

    pub fn config(&self) -> &ReprConfig {
        &self.config
    }

    pub fn char_embedding(&self) -> Option<&Embedding> {
        self.chars.as_ref().map(|(e, _)| e)
    }

    /// Final forward and backward states of the character BiLSTM over `word`.
    pub fn char_compose(
        &self,
        tape: &mut Tape,
        vocab: &Vocab,
        word: &str,
    ) -> Result<Option<Var>, ReprError> {
        let Some((emb, net)) = &self.chars else {
            return Ok(None);
        };
        if word.is_empty() {
            return Err(ReprError::EmptyWord);
        }
        let inputs = word
            .chars()
            .map(|c| emb.lookup(tape, vocab.char_id(c)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some(net.summarize(tape, &inputs)?))
    }

    /// `v' = tanh(W^v [word | pos | char | pretrained] + b^v)` with inactive
    /// blocks left out. `word_id` overrides the vocabulary lookup.
    pub fn word_vector(
        &self,
        tape: &mut Tape,
        vocab: &Vocab,
        pretrained: Option<&PretrainedTable>,
        token: &Token,
        word_id: Option<usize>,
    ) -> Result<Var, ReprError> {
        let id = word_id.unwrap_or_else(|| vocab.word_id(&token.form));
        let mut blocks = vec![
            self.words.lookup(tape, id)?,
            self.pos.lookup(tape, vocab.pos_id(&token.pos))?,
        ];
        if let Some(chars) = self.char_compose(tape, vocab, &token.form)? {
            blocks.push(chars);
        }
        if self.config.use_pretrained {
            let table = pretrained.ok_or(ReprError::MissingPretrained)?;
            if table.dim() != self.config.pretrained_dim {
                return Err(ReprError::PretrainedMismatch {
                    expected: self.config.pretrained_dim,
                    found: table.dim(),
                });
            }
            let ext = tape.constant(Tensor::vector(table.lookup(&token.form).to_vec()))?;
            blocks.push(ext);
        }
        let input = tape.concat(&blocks)?;
        let projected = self.projection.apply(tape, input)?;
        Ok(tape.tanh(projected)?)
    }

    /// Contextual vectors `v_i = [f_i ; b_i]` for every token.
    pub fn encode_sentence(
        &self,
        tape: &mut Tape,
        vocab: &Vocab,
        pretrained: Option<&PretrainedTable>,
        sentence: &Sentence,
        mut dropout: Option<WordDropout<'_>>,
    ) -> Result<Vec<Var>, ReprError> {
        if sentence.is_empty() {
            return Err(ReprError::EmptySentence);
        }
        let mut vprime = Vec::with_capacity(sentence.len());
        for token in &sentence.tokens {
            let mut id = vocab.word_id(&token.form);
            if let Some(d) = dropout.as_mut() {
                let freq = vocab.frequency(id) as f64;
                let p = d.alpha / (d.alpha + freq);
                if id != UNK && d.rng.gen::<f64>() < p {
                    id = UNK;
                }
            }
            vprime.push(self.word_vector(tape, vocab, pretrained, token, Some(id))?);
        }
        Ok(self.sentence.run(tape, &vprime)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::{build_vocab, parse_pretrained};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> ReprConfig {
        ReprConfig {
            word_dim: 6,
            pos_dim: 3,
            char_dim: 4,
            char_hidden: 3,
            char_layers: 2,
            vprime_dim: 5,
            sent_hidden: 4,
            sent_layers: 2,
            use_char: true,
            use_pretrained: false,
            pretrained_dim: 0,
        }
    }

    fn corpus() -> Vec<Sentence> {
        vec![Sentence::from_parts([
            ("Tôi", "P", 2, "nsubj"),
            ("có", "V", 0, "root"),
            ("một", "L", 4, "det"),
            ("con", "Nc", 5, "nmod"),
            ("mèo", "N", 2, "dobj"),
        ])]
    }

    fn setup(config: &ReprConfig, seed: u64) -> (ParameterStore, WordEncoder, Vocab) {
        let vocab = build_vocab(&corpus(), 1).unwrap();
        let mut store = ParameterStore::new();
        let enc = WordEncoder::new(&mut store, config, &vocab, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        (store, enc, vocab)
    }

    fn values(tape: &Tape, v: Var) -> Vec<f64> {
        tape.value(v).data().to_vec()
    }

    #[test]
    fn char_compose_dims_and_identity() {
        let config = ReprConfig {
            char_dim: 100,
            char_hidden: 100,
            ..small_config()
        };
        let (store, enc, vocab) = setup(&config, 1);
        let mut tape = Tape::new(&store);
        let a = enc.char_compose(&mut tape, &vocab, "aa").unwrap().unwrap();
        let b = enc.char_compose(&mut tape, &vocab, "aa").unwrap().unwrap();
        assert_eq!(tape.shape(a), (200, 1));
        assert_eq!(values(&tape, a), values(&tape, b));

        let mut vocab = build_vocab(&corpus(), 1).unwrap();
        vocab.chars.insert("a");
        vocab.chars.insert("b");
        let mut store2 = ParameterStore::new();
        let enc2 = WordEncoder::new(&mut store2, &small_config(), &vocab, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mut tape = Tape::new(&store2);
        let ab = enc2.char_compose(&mut tape, &vocab, "ab").unwrap().unwrap();
        let ba = enc2.char_compose(&mut tape, &vocab, "ba").unwrap().unwrap();
        assert_ne!(values(&tape, ab), values(&tape, ba));
    }

    #[test]
    fn single_character_and_unseen_characters() {
        let (store, enc, vocab) = setup(&small_config(), 3);
        let mut tape = Tape::new(&store);
        let v = enc.char_compose(&mut tape, &vocab, "ñ").unwrap().unwrap();
        assert_eq!(tape.shape(v), (6, 1));
        assert!(matches!(enc.char_compose(&mut tape, &vocab, ""), Err(ReprError::EmptyWord)));
    }

    #[test]
    fn output_dim_independent_of_flags() {
        let table = parse_pretrained("mèo 1 2 3 4\ncon 0 1 0 1\n").unwrap();
        for use_char in [false, true] {
            for use_pretrained in [false, true] {
                let config = ReprConfig {
                    use_char,
                    use_pretrained,
                    pretrained_dim: if use_pretrained { 4 } else { 0 },
                    ..small_config()
                };
                let (store, enc, vocab) = setup(&config, 4);
                let mut tape = Tape::new(&store);
                let token = &corpus()[0].tokens[4];
                let v = enc.word_vector(&mut tape, &vocab, Some(&table), token, None).unwrap();
                assert_eq!(tape.shape(v), (5, 1));
            }
        }
    }

    #[test]
    fn base_flags_match_explicit_formula() {
        let config = ReprConfig {
            use_char: false,
            ..small_config()
        };
        let (store, enc, vocab) = setup(&config, 5);
        let token = &corpus()[0].tokens[1];
        let mut tape = Tape::new(&store);
        let v = enc.word_vector(&mut tape, &vocab, None, token, None).unwrap();

        let w = store.value(enc.words.table).row(vocab.word_id("có")).to_vec();
        let p = store.value(enc.pos.table).row(vocab.pos_id("V")).to_vec();
        let x: Vec<f64> = w.iter().chain(&p).copied().collect();
        let wv = store.value(enc.projection.weight);
        let bv = store.value(enc.projection.bias);
        for i in 0..5 {
            let pre: f64 = (0..x.len()).map(|k| wv.get(i, k) * x[k]).sum::<f64>() + bv.data()[i];
            assert!((tape.value(v).data()[i] - pre.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_pretrained_is_unknown_vector() {
        let table = parse_pretrained("mèo 1 2\n").unwrap();
        let config = ReprConfig {
            use_char: false,
            use_pretrained: true,
            pretrained_dim: 2,
            ..small_config()
        };
        let (store, enc, vocab) = setup(&config, 6);
        let unknown_table = parse_pretrained("zzz 9 9\n").unwrap();
        let token = &corpus()[0].tokens[0];
        let mut tape = Tape::new(&store);
        let a = enc.word_vector(&mut tape, &vocab, Some(&table), token, None).unwrap();
        let b = enc.word_vector(&mut tape, &vocab, Some(&unknown_table), token, None).unwrap();
        assert_eq!(values(&tape, a), values(&tape, b));
        assert!(matches!(
            enc.word_vector(&mut tape, &vocab, None, token, None),
            Err(ReprError::MissingPretrained)
        ));
    }

    #[test]
    fn equal_tokens_equal_vectors() {
        let (store, enc, vocab) = setup(&small_config(), 7);
        let a = Token::new(1, "mèo", "N", 0, "x");
        let b = Token::new(4, "mèo", "N", 2, "y");
        let mut tape = Tape::new(&store);
        let va = enc.word_vector(&mut tape, &vocab, None, &a, None).unwrap();
        let vb = enc.word_vector(&mut tape, &vocab, None, &b, None).unwrap();
        assert_eq!(values(&tape, va), values(&tape, vb));
    }

    #[test]
    fn sentence_context_reaches_every_position() {
        let (store, enc, vocab) = setup(&small_config(), 8);
        let sentence = corpus().remove(0);
        let mut tape = Tape::new(&store);
        let base = enc.encode_sentence(&mut tape, &vocab, None, &sentence, None).unwrap();
        assert_eq!(base.len(), 5);
        assert!(base.iter().all(|&v| tape.shape(v) == (8, 1)));
        for j in [0, 2, 4] {
            let mut changed = sentence.clone();
            changed.tokens[j].form = "khác".into();
            let out = enc.encode_sentence(&mut tape, &vocab, None, &changed, None).unwrap();
            for i in 0..5 {
                assert_ne!(values(&tape, base[i]), values(&tape, out[i]), "token {j} vs {i}");
            }
        }
        let single = Sentence::from_parts([("mèo", "N", 0, "root")]);
        assert_eq!(enc.encode_sentence(&mut tape, &vocab, None, &single, None).unwrap().len(), 1);
    }

    #[test]
    fn seeded_initialization_is_deterministic() {
        let (a, _, _) = setup(&small_config(), 11);
        let (b, _, _) = setup(&small_config(), 11);
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn char_embeddings_receive_gradient() {
        let (store, enc, vocab) = setup(&small_config(), 12);
        let sentence = corpus().remove(0);
        let mut tape = Tape::new(&store);
        let out = enc.encode_sentence(&mut tape, &vocab, None, &sentence, None).unwrap();
        let all = tape.concat(&out).unwrap();
        let loss = tape.sum(all).unwrap();
        let grads = tape.backward(loss).unwrap();
        let table = enc.char_embedding().unwrap().table;
        let g = grads.dense(table);
        let row = vocab.char_id('è');
        let width = small_config().char_dim;
        assert!(g[row * width..(row + 1) * width].iter().any(|&x| x != 0.0));
        let unused = vocab.char_id('ñ');
        assert!(g[unused * width..(unused + 1) * width].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dropout_always_fires_for_tiny_frequency_limit() {
        let (store, enc, vocab) = setup(&small_config(), 13);
        let sentence = corpus().remove(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut tape = Tape::new(&store);
        let dropped = enc
            .encode_sentence(
                &mut tape,
                &vocab,
                None,
                &sentence,
                Some(WordDropout { alpha: 1e12, rng: &mut rng }),
            )
            .unwrap();
        let mut tape2 = Tape::new(&store);
        let mut expected = Vec::new();
        for token in &sentence.tokens {
            expected.push(enc.word_vector(&mut tape2, &vocab, None, token, Some(UNK)).unwrap());
        }
        let expected = enc.sentence.run(&mut tape2, &expected).unwrap();
        for (a, b) in dropped.iter().zip(&expected) {
            assert_eq!(values(&tape, *a), values(&tape2, *b));
        }
    }
}
