//! The command-line workflow driven in-process: generate, dimest, train, eval, track.
//! Files land in a temporary directory; pass a path to keep them.
//!
//! cargo run --release --example cli_workflow [-- out_dir]

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let keep = std::env::args().nth(1).map(PathBuf::from);
    let tmp = tempfile::tempdir()?;
    let dir = keep.unwrap_or_else(|| tmp.path().to_path_buf());
    let sets = [
        format!("dataset=\"{}\"", dir.join("dataset").display()),
        format!("model=\"{}\"", dir.join("model.bin").display()),
        format!("out=\"{}\"", dir.display()),
        "dimest_method=\"local\"".to_string(),
    ];
    for cmd in ["generate", "dimest", "train", "eval", "track"] {
        let mut args = vec!["appearloc".to_string(), cmd.to_string()];
        for s in &sets {
            args.extend(["--set".to_string(), s.clone()]);
        }
        println!("$ appearloc {cmd}");
        let code = appearloc::cli::run(args);
        if code != 0 {
            return Err(format!("{cmd} exited with {code}").into());
        }
    }
    let mut files: Vec<_> = std::fs::read_dir(&dir)?.filter_map(|e| e.ok()).map(|e| e.file_name()).collect();
    files.sort();
    println!("wrote {files:?}");
    Ok(())
}
