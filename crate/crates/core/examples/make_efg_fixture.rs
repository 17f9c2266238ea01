//! Regenerates `fixtures/efg_pair` from the forward model.
//!
//! ```text
//! cargo run -p cavloss --example make_efg_fixture [DIR]
//! ```

use std::path::PathBuf;

fn main() {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/efg_pair"));
    if let Err(e) = cavloss::synth::write_efg_pair_fixture(&dir) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
    println!("wrote {}", dir.display());
}
