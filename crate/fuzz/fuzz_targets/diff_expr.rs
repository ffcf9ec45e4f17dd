#![no_main]

use hierstab_core::expr::{parse, GridExpr, Var};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let Ok(e) = parse(src) else { return };
    if e.node_count() > 2_000 {
        return;
    }
    let nodes = [0.0, 0.25, 0.5, 1.0];
    for var in [Var::S, Var::Q] {
        let d = e.diff(var);
        if d.node_count() > 200_000 {
            continue;
        }
        let _ = d.eval(0.3, 0.7);
        let _ = GridExpr::new(&d, &nodes).eval(&[0.0, 0.5, 1.0, 1.5]);
        if !e.depends_on(var) {
            assert!(d.is_zero());
        }
    }
});
