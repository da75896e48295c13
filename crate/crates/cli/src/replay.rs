//! `pgc replay`: offline transcript verification.

use std::path::PathBuf;

use pgc_core::frame::DEFAULT_MAX_FRAME;
use pgc_core::transcript::verify_transcript;

use crate::CliError;

/// Prints a report per transcript. Exit code 2 when any check fails.
pub fn cmd_replay(paths: &[PathBuf]) -> Result<u8, CliError> {
    let mut code = 0;
    for p in paths {
        let buf = std::fs::read(p)?;
        let r = verify_transcript(&buf, DEFAULT_MAX_FRAME);
        let execs: Vec<String> = r.executions.iter().map(|(id, b)| format!("{id}:{b}")).collect();
        println!(
            "{}: {} frames, {} bytes, executions [{}]",
            p.display(),
            r.frames,
            r.bytes,
            execs.join(" ")
        );
        for issue in &r.issues {
            println!("  FAIL {issue}");
        }
        if r.ok() {
            println!("  PASS frame order, phase order, message types");
        } else {
            code = crate::EXIT_ABORT;
        }
    }
    Ok(code)
}
