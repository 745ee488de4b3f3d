use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::treebank::Sentence;

use super::ReprError;

/// Id of the unknown symbol in word, POS and character tables.
pub const UNK: usize = 0;
/// Id of the padding symbol in word, POS and character tables.
pub const PAD: usize = 1;

const UNK_SYMBOL: &str = "<unk>";
const PAD_SYMBOL: &str = "<pad>";

/// Dense symbol-to-id table in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct SymbolTable {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for SymbolTable {
    fn from(symbols: Vec<String>) -> Self {
        let mut table = SymbolTable::default();
        for s in symbols {
            table.insert(&s);
        }
        table
    }
}

impl From<SymbolTable> for Vec<String> {
    fn from(table: SymbolTable) -> Self {
        table.symbols
    }
}

impl SymbolTable {
    fn with_reserved() -> Self {
        SymbolTable::from(vec![UNK_SYMBOL.to_owned(), PAD_SYMBOL.to_owned()])
    }

    /// Returns the id of `symbol`, adding it when absent.
    pub fn insert(&mut self, symbol: &str) -> usize {
        if let Some(&id) = self.index.get(symbol) {
            return id;
        }
        let id = self.symbols.len();
        self.symbols.push(symbol.to_owned());
        self.index.insert(symbol.to_owned(), id);
        id
    }

    pub fn get(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    /// Id of `symbol`, or [`UNK`] when absent.
    pub fn id_or_unk(&self, symbol: &str) -> usize {
        self.get(symbol).unwrap_or(UNK)
    }

    pub fn symbol(&self, id: usize) -> &str {
        &self.symbols[id]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Vocabularies derived from a training corpus.
///
/// Word, POS and character tables reserve [`UNK`] and [`PAD`]. The relation
/// table reserves nothing: its ids index the labeled action space directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    pub words: SymbolTable,
    /// Training frequency per word id.
    pub word_freq: Vec<u32>,
    pub pos: SymbolTable,
    pub chars: SymbolTable,
    pub relations: SymbolTable,
    /// Label of the arc from the artificial root.
    pub root_label: String,
}

impl Vocab {
    pub fn word_id(&self, form: &str) -> usize {
        self.words.id_or_unk(form)
    }

    pub fn pos_id(&self, pos: &str) -> usize {
        self.pos.id_or_unk(pos)
    }

    pub fn char_id(&self, c: char) -> usize {
        let mut buf = [0u8; 4];
        self.chars.id_or_unk(c.encode_utf8(&mut buf))
    }

    pub fn relation_id(&self, label: &str) -> Option<usize> {
        self.relations.get(label)
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn frequency(&self, word_id: usize) -> u32 {
        self.word_freq.get(word_id).copied().unwrap_or(0)
    }
}

/// Builds vocabularies from `train`. Words seen fewer than `min_word_freq`
/// times are left out and map to [`UNK`].
pub fn build_vocab(train: &[Sentence], min_word_freq: u32) -> Result<Vocab, ReprError> {
    if train.iter().all(Sentence::is_empty) {
        return Err(ReprError::EmptyCorpus);
    }

    let mut counts: Vec<(String, u32)> = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut pos = SymbolTable::with_reserved();
    let mut chars = SymbolTable::with_reserved();
    let mut relations = SymbolTable::default();
    let mut root_counts: Vec<(String, u32)> = Vec::new();

    for token in train.iter().flat_map(|s| &s.tokens) {
        match seen.get(token.form.as_str()) {
            Some(&k) => counts[k].1 += 1,
            None => {
                seen.insert(&token.form, counts.len());
                counts.push((token.form.clone(), 1));
            }
        }
        pos.insert(&token.pos);
        let mut buf = [0u8; 4];
        for c in token.form.chars() {
            chars.insert(c.encode_utf8(&mut buf));
        }
        relations.insert(&token.deprel);
        if token.head == 0 {
            match root_counts.iter_mut().find(|(l, _)| *l == token.deprel) {
                Some(entry) => entry.1 += 1,
                None => root_counts.push((token.deprel.clone(), 1)),
            }
        }
    }

    let mut words = SymbolTable::with_reserved();
    let mut word_freq = vec![0, 0];
    for (form, count) in counts {
        if count >= min_word_freq.max(1) && words.get(&form).is_none() {
            words.insert(&form);
            word_freq.push(count);
        }
    }

    // First most frequent label wins.
    let root_label = root_counts
        .iter()
        .fold(None::<&(String, u32)>, |best, entry| match best {
            Some(b) if b.1 >= entry.1 => Some(b),
            _ => Some(entry),
        })
        .map(|(l, _)| l.clone())
        .unwrap_or_else(|| "root".to_owned());

    Ok(Vocab {
        words,
        word_freq,
        pos,
        chars,
        relations,
        root_label,
    })
}
