#![no_main]

use libfuzzer_sys::fuzz_target;
use prolonet::Network;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(net) = Network::from_json(text) {
        // a loaded model must run on an input of its declared width
        let x = vec![0.5; net.input_dim()];
        let _ = net.forward_raw(&x);
        let again = Network::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(again.params().len(), net.params().len());
    }
});
