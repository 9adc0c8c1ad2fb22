#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geoicl::synth::{self, Synth, SynthConfig};
use tempfile::TempDir;

pub fn repo_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/geomath.jsonl")
}

/// A synthetic dataset written to a fresh temp dir.
pub struct Fixture {
    pub dir: TempDir,
    pub data: PathBuf,
    pub synth: Synth,
}

pub fn fixture(cfg: &SynthConfig) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let synth = synth::generate(cfg);
    let data = synth::write(dir.path(), &synth).unwrap();
    Fixture { dir, data, synth }
}

pub fn small() -> Fixture {
    fixture(&SynthConfig { train_per_family: 4, test_per_family: 2, ..SynthConfig::default() })
}

pub fn geoicl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoicl")).args(args).env_remove("GEOICL_BACKEND_URL").output().unwrap()
}

pub fn json_stdout(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

/// Small, fast training settings for CLI runs.
pub const FAST_CONFIG: &str = r#"
[trainer]
epochs = 10
batch_size = 8
hidden = [32, 32]
shared_dim = 16
seed = 3

[augment]
variants = 2
"#;

pub mod server {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::{Arc, Mutex};
    use std::thread;

    #[derive(Debug, Clone)]
    pub struct Request {
        pub path: String,
        pub body: serde_json::Value,
    }

    pub type Handler = dyn Fn(usize, &Request) -> (u16, String) + Send + Sync;

    /// Minimal HTTP/1.1 JSON server on a random local port. `handler` gets the
    /// zero-based request number and the request; every connection is closed
    /// after one response.
    pub struct MockServer {
        pub url: String,
        pub requests: Arc<Mutex<Vec<Request>>>,
    }

    impl MockServer {
        pub fn start(handler: impl Fn(usize, &Request) -> (u16, String) + Send + Sync + 'static) -> Self {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let url = format!("http://{}", listener.local_addr().unwrap());
            let requests = Arc::new(Mutex::new(Vec::new()));
            let log = Arc::clone(&requests);
            let handler: Arc<Handler> = Arc::new(handler);
            thread::spawn(move || {
                for stream in listener.incoming() {
                    let Ok(stream) = stream else { break };
                    let (log, handler) = (Arc::clone(&log), Arc::clone(&handler));
                    thread::spawn(move || serve(stream, &log, handler.as_ref()));
                }
            });
            Self { url, requests }
        }

        pub fn count(&self) -> usize {
            self.requests.lock().unwrap().len()
        }
    }

    fn serve(stream: TcpStream, log: &Mutex<Vec<Request>>, handler: &Handler) {
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
        let mut length = 0usize;
        loop {
            let mut h = String::new();
            reader.read_line(&mut h).unwrap();
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    length = v.trim().parse().unwrap();
                }
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        let request = Request { path, body: serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null) };
        let n = {
            let mut log = log.lock().unwrap();
            log.push(request.clone());
            log.len() - 1
        };
        let (status, reply) = handler(n, &request);
        let mut stream = stream;
        let _ = write!(
            stream,
            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
            reply.len()
        );
        let _ = stream.flush();
    }
}
