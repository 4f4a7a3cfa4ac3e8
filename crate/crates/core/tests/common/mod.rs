#![allow(dead_code)]

pub mod oracles;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};
use std::thread;

use specrag_core::config::EngineConfig;
use specrag_core::embedding::{MockEmbedder, DEFAULT_MOCK_DIM};
use specrag_core::store::{build_databases, Databases};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn mock() -> MockEmbedder {
    MockEmbedder::new(DEFAULT_MOCK_DIM).unwrap()
}

/// The bundled corpus and CRs, built once per test binary.
pub fn fixture_dbs() -> &'static Databases {
    static DBS: OnceLock<Databases> = OnceLock::new();
    DBS.get_or_init(|| {
        let (dbs, _) = build_databases(
            &fixture("corpus"),
            Some(&fixture("tdocs")),
            &mock(),
            &EngineConfig::default(),
        )
        .unwrap();
        dbs
    })
}

pub fn planted_dbs() -> &'static Databases {
    static DBS: OnceLock<Databases> = OnceLock::new();
    DBS.get_or_init(|| build_databases(&fixture("planted/corpus"), None, &mock(), &EngineConfig::default()).unwrap().0)
}

/// One scripted HTTP exchange: status and JSON body.
pub type Reply = (u16, String);

/// A loopback HTTP server answering requests from a script and recording
/// `(path, body)` of each request. Closes after the script runs out.
pub struct ScriptedServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<(String, String)>>>,
}

impl ScriptedServer {
    pub fn start(script: Vec<Reply>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        thread::spawn(move || {
            for (status, body) in script {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream);
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                let path = request_line.split_whitespace().nth(1).unwrap_or_default().to_string();
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line.trim().is_empty() {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                log.lock().unwrap().push((path, String::from_utf8(buf).unwrap()));
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let mut stream = reader.into_inner();
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        ScriptedServer { url, requests }
    }
}
