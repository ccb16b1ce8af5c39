#![no_main]

use libfuzzer_sys::fuzz_target;
use prolonet::compile::{compile_tree, parse_tree, parse_tree_with};
use prolonet::Domain;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_tree(text) {
        // anything the parser accepts must compile and print back to itself
        compile_tree(&spec, spec.feature_names.len(), spec.action_names.len()).unwrap();
        assert_eq!(parse_tree(&spec.to_dsl()).unwrap(), spec);
    }
    let d = Domain::Cartpole;
    if let Ok(spec) = parse_tree_with(text, &d.feature_names(), &d.action_names()) {
        compile_tree(&spec, d.observation_dim(), d.action_dim()).unwrap();
    }
});
