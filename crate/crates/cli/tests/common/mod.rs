#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::thread;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn trig<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    trig_env(args, &[])
}

pub fn trig_env<I, S>(args: I, env: &[(&str, Option<&str>)]) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_trig"));
    cmd.args(args);
    for (k, v) in env {
        match v {
            Some(v) => cmd.env(k, v),
            None => cmd.env_remove(k),
        };
    }
    let out = cmd.output().expect("run trig");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Compares against a stored snapshot; `UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(path: &Path, actual: &str) {
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{} differs from its snapshot", path.display());
}

/// Canned reply or failure status for one request.
#[derive(Clone, Debug)]
pub enum Reply {
    Text(String),
    Status(u16),
}

/// A chat-completion endpoint on localhost. Replies are scripted per
/// question, so concurrent samples do not interfere.
pub struct MockEndpoint {
    pub url: String,
    pub requests: Arc<Mutex<Vec<serde_json::Value>>>,
    pub auth: Arc<Mutex<Vec<Option<String>>>>,
}

impl MockEndpoint {
    pub fn start(scripts: HashMap<String, Vec<Reply>>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let scripts: Arc<Mutex<HashMap<String, VecDeque<Reply>>>> =
            Arc::new(Mutex::new(scripts.into_iter().map(|(k, v)| (k, v.into())).collect()));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let auth = Arc::new(Mutex::new(Vec::new()));
        let (r2, a2) = (requests.clone(), auth.clone());
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let (scripts, r, a) = (scripts.clone(), r2.clone(), a2.clone());
                thread::spawn(move || serve(stream, &scripts, &r, &a));
            }
        });
        Self { url, requests, auth }
    }
}

fn question_of(body: &serde_json::Value) -> String {
    let user = &body["messages"][1]["content"];
    let text = user
        .as_str()
        .map(str::to_string)
        .unwrap_or_else(|| user[0]["text"].as_str().unwrap_or("").to_string());
    text.lines()
        .next()
        .unwrap_or("")
        .trim_start_matches("Question: ")
        .to_string()
}

fn serve(
    stream: TcpStream,
    scripts: &Mutex<HashMap<String, VecDeque<Reply>>>,
    requests: &Mutex<Vec<serde_json::Value>>,
    auth: &Mutex<Vec<Option<String>>>,
) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0;
    let mut bearer = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
        if lower.starts_with("authorization:") {
            bearer = Some(line["authorization:".len()..].trim().to_string());
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    let body: serde_json::Value = serde_json::from_slice(&body).unwrap();
    let reply = scripts
        .lock()
        .unwrap()
        .get_mut(&question_of(&body))
        .and_then(VecDeque::pop_front)
        .unwrap_or(Reply::Status(404));
    requests.lock().unwrap().push(body);
    auth.lock().unwrap().push(bearer);
    let (status, payload) = match reply {
        Reply::Text(t) => (
            200,
            serde_json::json!({"choices": [{"message": {"role": "assistant", "content": t}}]}).to_string(),
        ),
        Reply::Status(s) => (s, "{\"error\": \"scripted\"}".to_string()),
    };
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
}
