//! Re-renders every SVG from the CSVs of an existing output directory.
//!
//! Usage: `cargo run --example render_plots -- <dir>`

use std::path::PathBuf;

fn main() -> rechain::Result<()> {
    let Some(dir) = std::env::args().nth(1).map(PathBuf::from) else {
        eprintln!("usage: render_plots <dir>");
        std::process::exit(2);
    };
    let written = rechain::harness::export::render_plots(&dir)?;
    println!("{} plots written to {}", written.len(), dir.display());
    Ok(())
}
