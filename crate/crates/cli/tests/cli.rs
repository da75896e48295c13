use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use pgc_core::circuit::programs::build_program;
use pgc_core::circuit::simulate_plaintext;
use pgc_core::frame::PartyMessage;
use pgc_core::util::bits_of;

const HEADER: &str = "trial,program,role,mode,circuits,security,encoding,tag_bits,exec_id,status,abort_phase,abort_origin,abort_detail,wall_ms,gen_sent,evl_sent,cloud_sent,and_gates,gates,gen_output,evl_output";

fn pgc() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pgc"));
    c.env_remove("PGC_STATE_DIR");
    c
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Rows keyed by header column.
fn rows(csv_text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = r.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>().join(","), HEADER);
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn free_addr() -> String {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .to_string()
}

#[test]
fn local_millionaires_three_trials() {
    let o = pgc()
        .args([
            "run",
            "--role",
            "local",
            "--program",
            "millionaires:16",
            "--circuits",
            "16",
        ])
        .args([
            "--trials",
            "3",
            "--seed",
            "1f",
            "--gen-input",
            "40000",
            "--evl-input",
            "39999",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r["trial"], i.to_string());
        assert_eq!(r["status"], "ok");
        assert_eq!(r["gen_output"], "1");
        assert_eq!(r["evl_output"], "1");
        for col in ["gen_sent", "evl_sent", "cloud_sent"] {
            assert!(r[col].parse::<u64>().unwrap() > 0);
        }
    }
}

#[test]
fn tamper_exit_code_signals_cheat() {
    let o = pgc()
        .args([
            "run",
            "--role",
            "local",
            "--program",
            "millionaires:4",
            "--circuits",
            "5",
        ])
        .args(["--trials", "2", "--tamper", "gate-row:first-check", "--seed", "2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let rows = rows(&stdout(&o));
    assert_eq!(rows.len(), 1, "the chain stops at the first abort");
    assert_eq!(rows[0]["status"], "check_circuit_failed");
    assert_eq!(rows[0]["abort_phase"], "5");
    assert_eq!(rows[0]["abort_origin"], "cloud");
}

#[test]
fn chain_resumes_from_state_dir() {
    let dir = tempfile::tempdir().unwrap();
    let run = |program: &str, input: &str| {
        pgc()
            .env("PGC_STATE_DIR", dir.path())
            .args(["run", "--role", "local", "--program", program, "--circuits", "5"])
            .args(["--evl-input", input, "--seed", "3"])
            .output()
            .unwrap()
    };
    assert!(run("counter_init:4", "5").status.success());
    assert!(dir.path().join("gen.pgcs").exists() && dir.path().join("cloud.pgcs").exists());
    let o = run("counter:4", "3");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&stdout(&o))[0]["evl_output"], bit_string(&bits_of(8, 4)));
}

#[test]
fn missing_state_is_an_abort() {
    let o = pgc()
        .args(["run", "--role", "local", "--program", "counter:4", "--circuits", "5"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(rows(&stdout(&o))[0]["status"], "missing_state");
}

#[test]
fn bad_arguments_exit_with_setup_error() {
    for args in [
        vec!["run", "--role", "local", "--program", "nope:3"],
        vec![
            "run",
            "--role",
            "local",
            "--program",
            "millionaires:4",
            "--circuits",
            "2",
        ],
        vec!["run", "--role", "gen", "--program", "millionaires:4", "--ot", "dealer"],
        vec![
            "run",
            "--role",
            "local",
            "--program",
            "millionaires:4",
            "--gen-input",
            "99",
        ],
    ] {
        let o = pgc().args(&args).output().unwrap();
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
}

fn spawn_party(role: &str, extra: &[&str], dir: &Path) -> std::process::Child {
    pgc()
        .args(["run", "--role", role, "--circuits", "5", "--timeout-secs", "60"])
        .args(["--csv", dir.join(format!("{role}.csv")).to_str().unwrap()])
        .args(extra)
        .spawn()
        .unwrap()
}

/// Runs three `pgc` processes over TCP and returns the CSV text per role.
fn tcp_run(dir: &Path, program: &str, trials: &str, inputs: [&str; 2], record: bool) -> [(i32, String); 3] {
    let (cloud, gen) = (free_addr(), free_addr());
    let rec = dir.join("transcripts");
    let rec = rec.to_str().unwrap();
    let mut common = vec!["--program", program, "--trials", trials];
    if record {
        common.extend(["--record", rec]);
    }
    let gen_state = dir.join("gen.pgcs");
    let cloud_state = dir.join("cloud.pgcs");
    let c = spawn_party(
        "cloud",
        &[
            &common[..],
            &["--listen", &cloud, "--state", cloud_state.to_str().unwrap()],
        ]
        .concat(),
        dir,
    );
    let g = spawn_party(
        "gen",
        &[
            &common[..],
            &[
                "--listen",
                &gen,
                "--input",
                inputs[0],
                "--state",
                gen_state.to_str().unwrap(),
            ],
            &["--connect", &format!("cloud={cloud}")],
        ]
        .concat(),
        dir,
    );
    let e = spawn_party(
        "evl",
        &[
            &common[..],
            &["--input", inputs[1]],
            &[
                "--connect",
                &format!("cloud={cloud}"),
                "--connect",
                &format!("gen={gen}"),
            ],
        ]
        .concat(),
        dir,
    );
    let mut out = Vec::new();
    for (role, mut child) in [("gen", g), ("evl", e), ("cloud", c)] {
        let status = child.wait().unwrap();
        let text = std::fs::read_to_string(dir.join(format!("{role}.csv"))).unwrap();
        out.push((status.code().unwrap(), text));
    }
    out.try_into().unwrap()
}

#[test]
fn three_processes_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let program = "millionaires:8";
    let [g, e, c] = tcp_run(dir.path(), program, "2", ["200", "100"], true);
    for (code, text) in [&g, &e, &c] {
        assert_eq!(*code, 0, "{text}");
    }
    let expect = simulate_plaintext(
        &build_program(program).unwrap(),
        &bits_of(200, 8),
        &bits_of(100, 8),
        &[],
    )
    .unwrap();
    let (gr, er, cr) = (rows(&g.1), rows(&e.1), rows(&c.1));
    assert_eq!((gr.len(), er.len(), cr.len()), (2, 2, 2));
    for i in 0..2 {
        assert_eq!(gr[i]["gen_output"], bit_string(&expect.gen));
        assert_eq!(er[i]["evl_output"], bit_string(&expect.evl));
        assert_eq!(cr[i]["status"], "ok");
        assert_eq!(gr[i]["exec_id"], (1 + i).to_string());
    }

    // Transcript byte totals match the per-party counters.
    let rec = dir.path().join("transcripts");
    for (role, peers, rows) in [
        ("gen", ["evl", "cloud"], &gr),
        ("evl", ["gen", "cloud"], &er),
        ("cloud", ["gen", "evl"], &cr),
    ] {
        let col = format!("{role}_sent");
        let counted: u64 = rows.iter().map(|r| r[&col].parse::<u64>().unwrap()).sum();
        let files: Vec<String> = peers
            .iter()
            .map(|p| rec.join(format!("{role}-{p}.pgct")).display().to_string())
            .collect();
        let recorded: u64 = files.iter().map(|f| std::fs::metadata(f).unwrap().len()).sum();
        assert_eq!(counted, recorded, "{role}");
        let o = pgc().arg("replay").args(&files).output().unwrap();
        assert!(o.status.success(), "{}", stdout(&o));
        assert!(stdout(&o).contains("PASS"));
        assert!(stdout(&o).contains("executions [1:"));
    }
}

#[test]
fn tcp_chain_uses_state_files() {
    let dir = tempfile::tempdir().unwrap();
    let [g, e, c] = tcp_run(dir.path(), "counter_init:4", "1", ["0", "6"], false);
    assert!(g.0 == 0 && e.0 == 0 && c.0 == 0, "{}\n{}\n{}", g.1, e.1, c.1);
    let [g, e, c] = tcp_run(dir.path(), "counter:4", "2", ["0", "5"], false);
    assert!(g.0 == 0 && e.0 == 0 && c.0 == 0, "{}\n{}\n{}", g.1, e.1, c.1);
    let er = rows(&e.1);
    assert_eq!(er[0]["evl_output"], bit_string(&bits_of(11, 4)));
    assert_eq!(er[1]["evl_output"], bit_string(&bits_of(0, 4)));
}

#[test]
fn bench_saveload_rows() {
    let o = pgc()
        .args([
            "bench-saveload",
            "--wires",
            "0,64,256,1024",
            "--circuits",
            "8",
            "--reps",
            "3",
            "--seed",
            "4",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let recs: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 4);
    assert_eq!(&recs[0][2], "0.0000");
    assert_eq!(&recs[0][3], "0.0000");
    let totals: Vec<f64> = recs[1..]
        .iter()
        .map(|r| r[2].parse::<f64>().unwrap() + r[3].parse::<f64>().unwrap())
        .collect();
    assert!(totals.windows(2).all(|w| w[0] < w[1]), "{totals:?}");
    assert!(recs[1..].iter().all(|r| &r[6] == "true"));
}

#[test]
fn replay_reports_regressions_and_failed_checks() {
    let dir = tempfile::tempdir().unwrap();
    let frame = |phase, t| {
        PartyMessage {
            phase,
            msg_type: t,
            exec_id: 1,
            payload: vec![],
        }
        .encode()
    };
    let bad = dir.path().join("bad.pgct");
    std::fs::write(&bad, [frame(1, 1), frame(5, 50), frame(3, 30)].concat()).unwrap();
    let o = pgc().args(["replay", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stdout(&o).contains("frame 2: phase regression 3 after 5"),
        "{}",
        stdout(&o)
    );

    let rec = dir.path().join("rec");
    let o = pgc()
        .args([
            "run",
            "--role",
            "local",
            "--program",
            "millionaires:4",
            "--circuits",
            "5",
            "--seed",
            "5",
        ])
        .args(["--tamper", "gate-row:first-check", "--record", rec.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = pgc()
        .args(["replay", rec.join("cloud-gen.pgct").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("check_circuit_failed"), "{}", stdout(&o));
}
