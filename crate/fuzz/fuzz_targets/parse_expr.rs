#![no_main]

use hierstab_core::expr::parse;
use libfuzzer_sys::fuzz_target;

// Anything that parses must print to text that parses back and evaluates
// the same.
fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let Ok(e) = parse(src) else { return };
    let printed = e.to_string();
    let back = parse(&printed).unwrap_or_else(|err| panic!("`{printed}` does not reparse: {err}"));
    for (s, q) in [(0.0, 0.0), (0.5, 0.25), (1.0, 2.0)] {
        match (e.eval(s, q), back.eval(s, q)) {
            (Ok(a), Ok(b)) => assert!(a == b || (a.is_nan() && b.is_nan()), "`{src}` vs `{printed}`"),
            (a, b) => assert_eq!(a.is_ok(), b.is_ok(), "`{src}` vs `{printed}`"),
        }
    }
});
