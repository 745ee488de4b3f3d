#![no_main]

use easyfirst::tensor::ParameterStore;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(store) = ParameterStore::from_bytes(data) {
        let bytes = store.to_bytes();
        let again = ParameterStore::from_bytes(&bytes).unwrap();
        assert_eq!(again.to_bytes(), bytes);
    }
});
