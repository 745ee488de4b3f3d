#![no_main]

use easyfirst::treebank::{parse_conll, write_conll};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sentences) = parse_conll(text) {
        // Accepted input survives a write/read cycle unchanged.
        let written = write_conll(&sentences, None).unwrap();
        assert_eq!(parse_conll(&written).unwrap(), sentences);
    }
});
