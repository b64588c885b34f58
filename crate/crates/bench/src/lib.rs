//! Benchmark-only crate; the content lives in the benches directory.
