//! The three commands on a small hierarchy: ingest, generate with the
//! synthetic provider, analyze. Artifacts land in a temporary directory.
//!
//! ```bash
//! cargo run --release -p regional-defaults --example end_to_end
//! ```

use regional_defaults::cli::{cmd_analyze, cmd_generate, cmd_ingest, RunArgs, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let args = RunArgs {
        hierarchy: Some(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/toy_regions.csv").into()),
        seed: Some(7),
        image_size: Some(96),
        store_dir: Some(dir.path().join("images")),
        output_dir: Some(dir.path().join("out")),
        ..Default::default()
    };
    let cfg = RunConfig::resolve(&args)?;

    for line in cmd_ingest(&cfg)?.lines() {
        println!("ingest: {line}");
    }
    for line in cmd_generate(&cfg)?.lines() {
        println!("generate: {line}");
    }
    for line in cmd_analyze(&cfg)?.lines() {
        println!("analyze: {line}");
    }

    let mut files: Vec<_> = std::fs::read_dir(&cfg.output_dir)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    files.sort();
    println!("wrote {}", files.join(", "));
    println!("\n{}", std::fs::read_to_string(cfg.output_dir.join("report.md"))?);
    Ok(())
}
