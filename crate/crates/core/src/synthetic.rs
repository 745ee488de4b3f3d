//! Generated corpora and random trees for tests and smoke runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::treebank::{Sentence, Token};

/// Heads of a uniformly shaped random projective tree over `n` tokens
/// (`heads[i]` for token `i + 1`).
pub fn random_projective_heads<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut heads = vec![0; n];
    if n > 0 {
        attach_span(rng, &mut heads, 0, n, 0);
    }
    heads
}

// Every token in [lo, hi) ends up in a subtree hanging from `parent`, and
// every subtree covers a contiguous span.
fn attach_span<R: Rng>(rng: &mut R, heads: &mut [usize], lo: usize, hi: usize, parent: usize) {
    if lo >= hi {
        return;
    }
    let k = rng.gen_range(lo..hi);
    heads[k] = parent;
    if parent == 0 {
        attach_span(rng, heads, lo, k, k + 1);
        attach_span(rng, heads, k + 1, hi, k + 1);
        return;
    }
    let a = rng.gen_range(lo..=k);
    let b = rng.gen_range(k + 1..=hi);
    attach_span(rng, heads, a, k, k + 1);
    attach_span(rng, heads, k + 1, b, k + 1);
    attach_span(rng, heads, lo, a, parent);
    attach_span(rng, heads, b, hi, parent);
}

/// A random projective sentence with `relations` labels named `r0`, `r1`,
/// ...; the root arc uses `root`.
pub fn random_sentence<R: Rng>(rng: &mut R, n: usize, relations: usize, vocab: usize) -> Sentence {
    let heads = random_projective_heads(rng, n);
    let tokens = heads
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let form = format!("w{}", rng.gen_range(0..vocab.max(1)));
            let pos = format!("T{}", rng.gen_range(0..4));
            let deprel = if h == 0 {
                "root".to_owned()
            } else {
                format!("r{}", rng.gen_range(0..relations.max(1)))
            };
            Token::new(i + 1, form, pos, h, deprel)
        })
        .collect();
    Sentence::new(tokens)
}

const NOUNS: [&str; 8] = ["mèo", "chó", "nhà", "sách", "cá", "bàn", "xe", "cây"];
const VERBS: [&str; 6] = ["có", "thấy", "ăn", "đọc", "mua", "cầm"];
const DETS: [&str; 4] = ["một", "những", "các", "mỗi"];
const ADJS: [&str; 5] = ["đen", "to", "nhỏ", "mới", "đẹp"];
const PREPS: [&str; 4] = ["trên", "trong", "của", "với"];
const ADVS: [&str; 3] = ["đã", "sẽ", "không"];

/// Vocabulary size of [`toy_corpus`].
pub const TOY_VOCAB: usize = NOUNS.len() + VERBS.len() + DETS.len() + ADJS.len() + PREPS.len() + ADVS.len();

struct Builder<'r> {
    rng: &'r mut ChaCha8Rng,
    // (form, pos, relation, parent slot); parent slot indexes this vector.
    nodes: Vec<(String, &'static str, &'static str, Option<usize>)>,
    // Children per node, in surface order relative to the head.
    left: Vec<Vec<usize>>,
    right: Vec<Vec<usize>>,
}

impl Builder<'_> {
    fn node(&mut self, words: &[&str], pos: &'static str, rel: &'static str, parent: Option<usize>) -> usize {
        let form = (*words.choose(self.rng).expect("non-empty")).to_owned();
        self.nodes.push((form, pos, rel, parent));
        self.left.push(Vec::new());
        self.right.push(Vec::new());
        self.nodes.len() - 1
    }

    fn noun_phrase(&mut self, rel: &'static str, parent: usize, depth: usize) -> usize {
        let n = self.node(&NOUNS, "N", rel, Some(parent));
        if self.rng.gen_bool(0.5) {
            let d = self.node(&DETS, "D", "det", Some(n));
            self.left[n].push(d);
        }
        if self.rng.gen_bool(0.4) {
            let a = self.node(&ADJS, "A", "amod", Some(n));
            self.right[n].push(a);
        }
        if depth < 2 && self.rng.gen_bool(0.3) {
            let p = self.node(&PREPS, "P", "prep", Some(n));
            self.right[n].push(p);
            let obj = self.noun_phrase("pobj", p, depth + 1);
            self.right[p].push(obj);
        }
        n
    }

    fn clause(&mut self) {
        let v = self.node(&VERBS, "V", "root", None);
        let subj = self.noun_phrase("nsubj", v, 0);
        self.left[v].push(subj);
        if self.rng.gen_bool(0.4) {
            let r = self.node(&ADVS, "R", "advmod", Some(v));
            self.left[v].insert(0, r);
        }
        if self.rng.gen_bool(0.8) {
            let obj = self.noun_phrase("dobj", v, 0);
            self.right[v].push(obj);
        }
        if self.rng.gen_bool(0.3) {
            let p = self.node(&PREPS, "P", "prep", Some(v));
            self.right[v].push(p);
            let obj = self.noun_phrase("pobj", p, 1);
            self.right[p].push(obj);
        }
    }

    // Child lists are kept in surface order.
    fn linearize(&self, node: usize, out: &mut Vec<usize>) {
        for &c in self.left[node].iter() {
            self.linearize(c, out);
        }
        out.push(node);
        for &c in &self.right[node] {
            self.linearize(c, out);
        }
    }
}

/// `count` sentences of 3 to 12 words from a small head-initial grammar over
/// 30 word types, with relations nsubj, dobj, det, amod, prep, pobj, advmod
/// and root.
pub fn toy_corpus(seed: u64, count: usize) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut b = Builder {
            rng: &mut rng,
            nodes: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
        };
        b.clause();
        let mut order = Vec::new();
        b.linearize(0, &mut order);
        if !(3..=12).contains(&order.len()) {
            continue;
        }
        let mut position = vec![0; order.len()];
        for (k, &node) in order.iter().enumerate() {
            position[node] = k + 1;
        }
        let tokens = order
            .iter()
            .enumerate()
            .map(|(k, &node)| {
                let (form, pos, rel, parent) = &b.nodes[node];
                Token::new(k + 1, form.clone(), *pos, parent.map_or(0, |p| position[p]), *rel)
            })
            .collect();
        out.push(Sentence::new(tokens));
    }
    out
}
