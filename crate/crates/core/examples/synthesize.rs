//! Writes the six synthetic sources used by the end-to-end tests.
//!
//! `cargo run --example synthesize -- <out_dir> [seed]`

use std::path::PathBuf;

use scenmine::synthetic::{generate, write_dir, SyntheticParams};

fn main() {
    let mut args = std::env::args().skip(1);
    let Some(out) = args.next().map(PathBuf::from) else {
        eprintln!("usage: synthesize <out_dir> [seed]");
        std::process::exit(2);
    };
    let mut params = SyntheticParams::default();
    if let Some(seed) = args.next() {
        params.seed = seed.parse().expect("seed must be an integer");
    }
    let datasets = generate(&params).expect("valid parameters");
    write_dir(&datasets, &out).expect("writable output directory");
    eprintln!("wrote {} sources to {}", datasets.len(), out.display());
}
