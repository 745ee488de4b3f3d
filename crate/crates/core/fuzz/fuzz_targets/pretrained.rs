#![no_main]

use easyfirst::repr::parse_pretrained;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = parse_pretrained(text) {
        assert!(table.dim() > 0);
        assert_eq!(table.unknown().len(), table.dim());
    }
});
