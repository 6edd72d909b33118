use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_convex");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/fixtures")
        .join(name)
}

fn convex(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .env_remove("CONVEX_STORE")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sessions(store: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(store.join("sessions"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    dirs.sort();
    dirs
}

fn artifact_names(session_dir: &Path) -> BTreeSet<String> {
    std::fs::read_dir(session_dir.join("artifacts"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect()
}

#[test]
fn describe_prints_the_profile_and_saves_it() {
    let dir = TempDir::new().unwrap();
    let store = dir.path().join("store");
    let data = fixture("countries.csv");
    let o = convex(
        &[
            "repl",
            "--store",
            store.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
        ],
        "describe my data\n/quit\n",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("column"), "{out}");
    assert!(out.contains("gdp_per_capita"));
    let saved: Vec<&str> = out.lines().filter(|l| l.contains("saved to")).collect();
    assert!(saved.iter().any(|l| l.contains("description of countries")), "{out}");
    let path = saved.last().unwrap().rsplit("saved to ").next().unwrap().trim();
    assert!(Path::new(path).is_file(), "{path}");
    let session = &sessions(&store)[0];
    assert!(artifact_names(session).iter().any(|n| n.ends_with(".json")));
}

#[test]
fn unknown_slash_command_prints_help_and_continues() {
    let dir = TempDir::new().unwrap();
    let o = convex(
        &["repl", "--store", dir.path().to_str().unwrap()],
        "/frobnicate\nHelp me to analyse my data\n",
    );
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("unknown command `/frobnicate`"));
    assert!(out.contains("/resume ID"));
    assert!(out.contains("Please upload your data collection."));
}

#[test]
fn pause_then_resume_in_a_new_process() {
    let dir = TempDir::new().unwrap();
    let store = dir.path().to_str().unwrap();
    let data = fixture("countries.csv");
    let o = convex(
        &["repl", "--store", store, "--data", data.to_str().unwrap()],
        "statistical\n/pause\nanalyse the correlation\n",
    );
    let out = stdout(&o);
    let id = out
        .lines()
        .find_map(|l| l.strip_prefix("paused; snapshot id "))
        .and_then(|rest| rest.split_whitespace().next())
        .unwrap_or_else(|| panic!("no snapshot id in {out}"))
        .to_string();
    assert!(out.contains("error: the session is Paused"));
    assert!(dir.path().join("sessions").join(&id).join("snapshot.json").is_file());

    let o = convex(
        &["repl", "--store", store],
        &format!("/resume {id}\nanalyse the correlation\n"),
    );
    let out = stdout(&o);
    assert!(out.contains(&format!("resumed session {id}")), "{out}");
    assert!(out.contains("Pearson correlation matrix"));
    assert!(out.contains("Are these results what you expected?"));
    assert_eq!(sessions(dir.path()).len(), 1);
}

#[test]
fn transcript_replays_to_identical_artifacts() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    let data = fixture("countries.csv");
    let o = convex(
        &[
            "repl",
            "--store",
            first.to_str().unwrap(),
            "--seed",
            "5",
            "--data",
            data.to_str().unwrap(),
        ],
        "statistical\nanalyse the correlation\nyes\ncluster the data\nno\n/story\n",
    );
    assert!(o.status.success());
    assert!(stdout(&o).contains("## Conclusions"));
    let original = &sessions(&first)[0];
    let transcript = original.join("transcript.txt");

    let second = dir.path().join("second");
    let o = convex(
        &[
            "repl",
            "--store",
            second.to_str().unwrap(),
            "--seed",
            "5",
            "--script",
            transcript.to_str().unwrap(),
        ],
        "",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let replayed = &sessions(&second)[0];
    let names = artifact_names(original);
    assert!(names.len() >= 8);
    assert_eq!(names, artifact_names(replayed));
    for name in &names {
        let a = std::fs::read(original.join("artifacts").join(name)).unwrap();
        let b = std::fs::read(replayed.join("artifacts").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn delimiter_flag_reads_semicolon_files() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("shops.csv");
    std::fs::write(&data, "shop;sales;staff\na;10;2\nb;20;4\nc;31;5\nd;38;8\n").unwrap();
    let o = convex(
        &[
            "repl",
            "--store",
            dir.path().join("s").to_str().unwrap(),
            "--delimiter",
            ";",
            "--data",
            data.to_str().unwrap(),
        ],
        "statistical\n",
    );
    let out = stdout(&o);
    assert!(out.contains("4 rows and 3 attributes"), "{out}");
    assert!(out.contains("staff"));
}

#[test]
fn store_defaults_to_the_environment() {
    let dir = TempDir::new().unwrap();
    let store = dir.path().join("from-env");
    let o = Command::new(BIN)
        .args(["repl"])
        .env("CONVEX_STORE", &store)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .and_then(|mut c| {
            c.stdin.take().unwrap().write_all(b"hello there, analyse my data\n")?;
            c.wait_with_output()
        })
        .unwrap();
    assert!(o.status.success());
    assert_eq!(sessions(&store).len(), 1);
}

fn eval_report(args: &[&str]) -> Value {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.json");
    let mut all = vec!["eval", "--out", out.to_str().unwrap()];
    all.extend_from_slice(args);
    let o = convex(&all, "");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("M2 node precision"));
    serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap()
}

#[test]
fn eval_of_the_shipped_corpus_succeeds() {
    let base = eval_report(&[]);
    assert_eq!(base["failed_cases"], 0);
    assert_eq!(base["metrics"]["m2"]["node_precision"], 1.0);
    assert_eq!(base["metrics"]["m2"]["edge_recall"], 1.0);

    let reseeded = eval_report(&["--seed", "7"]);
    assert_eq!(reseeded["metrics"]["m2"], base["metrics"]["m2"]);
    assert_eq!(reseeded["metrics"]["m2_counts"], base["metrics"]["m2_counts"]);
    let utterances = |r: &Value| {
        r["case_reports"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["utterances"].clone())
            .collect::<Vec<_>>()
    };
    assert_ne!(utterances(&reseeded), utterances(&base));
}

#[test]
fn eval_of_a_malformed_corpus_exits_2() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("bad.json");
    std::fs::write(
        &corpus,
        r#"{"schema_version": 1, "corpus_id": "x", "seed": 1, "cases": [{"id": 3}]}"#,
    )
    .unwrap();
    let o = convex(&["eval", "--corpus", corpus.to_str().unwrap()], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cases[0]"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_2() {
    let o = convex(&["repl", "--seed", "minus-one"], "");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn serve_reports_a_busy_port_and_creates_the_store() {
    let busy = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    let dir = TempDir::new().unwrap();
    let store = dir.path().join("new").join("store");
    let o = convex(&["serve", "--port", &port, "--store", store.to_str().unwrap()], "");
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains(&format!("cannot listen on 127.0.0.1:{port}")),
        "{}",
        stderr(&o)
    );
    assert!(store.is_dir());
}

#[test]
fn serve_answers_on_loopback() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let dir = TempDir::new().unwrap();
    let mut child = Command::new(BIN)
        .args([
            "serve",
            "--port",
            &port.to_string(),
            "--store",
            dir.path().to_str().unwrap(),
        ])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let reply = loop {
        if let Ok(mut s) = TcpStream::connect(("127.0.0.1", port)) {
            s.write_all(b"GET /metrics HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
                .unwrap();
            let mut text = String::new();
            s.read_to_string(&mut text).unwrap();
            break text;
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"sessions\":0"));
}
