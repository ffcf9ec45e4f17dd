//! Holds the `acceptance` test target, which checks the numerical exit
//! criteria end to end: `cargo test -p hierstab-validation --test acceptance`.
