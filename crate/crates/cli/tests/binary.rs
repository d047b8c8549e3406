use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::process::{Child, Command, Stdio};
use std::sync::Arc;

use serde_json::Value;
use susrate_core::store::save_ontology;
use susrate_core::{seed_ontology, Product, RatingConfig, RatingEngine};

fn susrate() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_susrate"));
    c.env("SUSRATE_LOG", "warn");
    c
}

fn http(addr: SocketAddr, method: &str, path: &str) -> (u16, Value) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(stream, "{method} {path} HTTP/1.1\r\nhost: localhost\r\ncontent-length: 0\r\nconnection: close\r\n\r\n")
        .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    let status = response[9..12].parse().unwrap();
    let body = response.split("\r\n\r\n").nth(1).unwrap();
    (status, serde_json::from_str(body).unwrap())
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
    }
}

fn start(ontology: &std::path::Path) -> (Server, SocketAddr) {
    let mut child = susrate()
        .args(["serve", "--listen", "127.0.0.1:0"])
        .env("SUSRATE_ONTOLOGY", ontology)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap().parse().unwrap();
    (Server(child), addr)
}

#[test]
fn env_vars_mirror_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seed.json");
    save_ontology(&seed_ontology(), &path).unwrap();
    let out = susrate().arg("validate").env("SUSRATE_ONTOLOGY", &path).env("SUSRATE_FORMAT", "csv").output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "severity,kind,message\n");

    let scores = dir.path().join("scores.json");
    std::fs::write(&scores, r#"{"E.1": 10}"#).unwrap();
    let out = susrate()
        .args(["rate", "--products", "p.apples"])
        .env("SUSRATE_ONTOLOGY", &path)
        .env("SUSRATE_SCORES", &scores)
        .env("SUSRATE_ALPHA", "2")
        .env("SUSRATE_STRATEGY", "existing_best")
        .output()
        .unwrap();
    assert!(out.status.success());
    let body: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["config"]["alpha"], 2.0);
    assert_eq!(body["config"]["reference_strategy"], "existing_best");

    let out = susrate().arg("validate").env_remove("SUSRATE_ONTOLOGY").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn serve_health_indices_reload_and_shutdown() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seed.json");
    save_ontology(&seed_ontology(), &path).unwrap();
    let (mut server, addr) = start(&path);

    let (status, health) = http(addr, "GET", "/v1/health");
    assert_eq!(status, 200);
    assert_eq!(health["status"], "ok");
    assert_eq!(health["cache"], "ready");

    let engine = RatingEngine::new(Arc::new(seed_ontology()), RatingConfig::default()).unwrap();
    let (status, body) = http(addr, "GET", "/v1/products/p.apples/indices");
    assert_eq!(status, 200);
    let row = engine.index_row("p.apples").unwrap();
    for (pref, expected) in engine.preference_ids().iter().zip(row) {
        let served = body["indices"][pref].as_f64().unwrap();
        assert!((served - expected).abs() <= 1e-12, "{pref}");
    }

    let mut o = seed_ontology();
    o.products.insert("t.new".into(), Product::new("t.new", "test", ["z.organic"]));
    save_ontology(&o, &path).unwrap();
    let (status, reload) = http(addr, "POST", "/v1/admin/reload");
    assert_eq!(status, 200);
    assert_eq!(reload["previous_version"], health["ontology_version"]);
    let (_, after) = http(addr, "GET", "/v1/health");
    assert_eq!(after["ontology_version"], reload["ontology_version"]);
    assert_ne!(after["ontology_version"], health["ontology_version"]);

    let killed = Command::new("kill").args(["-TERM", &server.0.id().to_string()]).status().unwrap();
    assert!(killed.success());
    let status = server.0.wait().unwrap();
    assert!(status.success(), "{status:?}");
}

#[test]
fn bind_failure_exits_3() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seed.json");
    save_ontology(&seed_ontology(), &path).unwrap();
    let out = susrate().args(["serve", "--listen", &addr]).env("SUSRATE_ONTOLOGY", &path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot bind"));
}
