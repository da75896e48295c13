//! `pgc bench-saveload`: per-bit cost of saving and loading wire labels.

use std::fs::File;
use std::io::{BufWriter, Write};

use pgc_core::bench::save_load;
use pgc_core::label::Security;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::{parse_seed, usage, BenchArgs, CliError};

pub const HEADER: [&str; 7] = [
    "wires",
    "circuits",
    "save_ms",
    "load_ms",
    "save_ns_per_bit",
    "load_ns_per_bit",
    "load_gt_save",
];

/// Writes one row per wire count. Fails with exit code 1 when loading is
/// not slower than saving at some nonzero count.
pub fn cmd_bench_saveload(a: &BenchArgs) -> Result<u8, CliError> {
    let sec = Security::new(a.security).map_err(|e| usage(e.to_string()))?;
    if a.circuits == 0 {
        return Err(usage("--circuits must be positive"));
    }
    let mut rng = match &a.seed {
        Some(s) => ChaCha20Rng::seed_from_u64(parse_seed(s)?),
        None => ChaCha20Rng::from_entropy(),
    };
    let tmp;
    let dir = match &a.state_dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            d.clone()
        }
        None => {
            tmp = std::env::temp_dir().join(format!("pgc-bench-{}", std::process::id()));
            std::fs::create_dir_all(&tmp)?;
            tmp
        }
    };
    let sink: Box<dyn Write> = match &a.csv {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout()),
    };
    let mut out = csv::Writer::from_writer(sink);
    out.write_record(HEADER)?;
    let mut trend_ok = true;
    for &w in &a.wires {
        let s = save_load(sec, a.circuits, w, a.reps, &dir, &mut rng)?;
        let gt = w == 0 || s.load > s.save;
        trend_ok &= gt;
        out.write_record([
            w.to_string(),
            a.circuits.to_string(),
            format!("{:.4}", s.save.as_secs_f64() * 1e3),
            format!("{:.4}", s.load.as_secs_f64() * 1e3),
            format!("{:.1}", s.save_ns_per_bit()),
            format!("{:.1}", s.load_ns_per_bit()),
            gt.to_string(),
        ])?;
    }
    out.flush()?;
    if a.state_dir.is_none() {
        let _ = std::fs::remove_dir_all(&dir);
    }
    if !trend_ok {
        eprintln!("pgc: loading was not slower than saving at every wire count");
        return Ok(1);
    }
    Ok(0)
}
