#![no_main]

use libfuzzer_sys::fuzz_target;
use prolonet::compile::{compile_tree, tree_from_json, tree_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = tree_from_json(text) {
        compile_tree(&spec, spec.feature_names.len(), spec.action_names.len()).unwrap();
        let again = tree_from_json(&tree_to_json(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
    }
});
