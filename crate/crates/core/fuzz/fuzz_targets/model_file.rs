#![no_main]

use easyfirst::easyfirst::ParserModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = ParserModel::from_bytes(data);
});
