// Writes an election as a CSV bundle and reads it back.
//
// `cargo run --example csv_roundtrip [OUT_DIR]` keeps the files in OUT_DIR.

use std::error::Error;
use std::path::{Path, PathBuf};

use marrop_audit::fixtures;
use marrop_audit::io::{load_election_dir, write_election_dir};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = std::env::temp_dir().join(format!("marrop-csv-{}", std::process::id()));
    run(&dir)?;
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn run(dir: &Path) -> Result<(), Box<dyn Error>> {
    let election = fixtures::desk();
    write_election_dir(&election, dir)?;
    let back = load_election_dir(dir)?;
    assert_eq!(back, election);
    assert_eq!(back.digest(), election.digest());
    for f in std::fs::read_dir(dir)? {
        let f = f?;
        println!("{:20} {} bytes", f.file_name().to_string_lossy(), f.metadata()?.len());
    }
    println!("reloaded election matches, digest {}", &back.digest()[..16]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let result = match std::env::args().nth(1) {
        Some(dir) => run(&PathBuf::from(dir)),
        None => run_example(),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
