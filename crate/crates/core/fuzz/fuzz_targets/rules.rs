#![no_main]

use easyfirst::easyfirst::{parse_with, LexicalScorer};
use easyfirst::treebank::Sentence;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(mut scorer) = LexicalScorer::parse_rules(text, "root") else {
        return;
    };
    let sentence = Sentence::from_parts(["Tôi", "có", "một", "con", "mèo"].into_iter().map(|w| (w, "X", 0, "_")));
    if let Ok(out) = parse_with(&mut scorer, &sentence, true) {
        assert_eq!(out.arcs.len(), sentence.len());
    }
});
