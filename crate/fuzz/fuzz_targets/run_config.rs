#![no_main]

use libfuzzer_sys::fuzz_target;
use prolonet::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_text(text) {
        let _ = cfg.validate();
        // only inline trees; a path would make the target read arbitrary files
        if cfg.tree.is_none() {
            let _ = cfg.resolve_tree();
        }
    }
});
