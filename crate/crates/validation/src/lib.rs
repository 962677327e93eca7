//! Acceptance suite for the snow filter. Everything lives in
//! `tests/acceptance.rs`; run it with `cargo test -p snowdwell-validation`.
