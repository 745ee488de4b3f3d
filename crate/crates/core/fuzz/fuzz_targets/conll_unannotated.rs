#![no_main]

use easyfirst::treebank::parse_conll_unannotated;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(sentences) = parse_conll_unannotated(text) {
            assert!(sentences.iter().all(|s| !s.is_empty()));
        }
    }
});
