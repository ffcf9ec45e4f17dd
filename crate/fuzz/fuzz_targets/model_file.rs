#![no_main]

use hierstab_core::grid::MAX_CELLS;
use hierstab_core::ModelSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = ModelSpec::from_toml(text) {
        let n = model.grid().n();
        assert!(n >= 8 && n % 2 == 0 && n <= MAX_CELLS);
        assert!((0.0..=1.0).contains(&model.alpha()));
    }
});
