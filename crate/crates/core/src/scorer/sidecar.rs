use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ScoreMap, Scorer};
use crate::error::{Error, Result};

/// One line sent to the sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: String,
    #[serde(default)]
    pub payload: Value,
}

/// One line received from the sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub ok: bool,
    #[serde(default)]
    pub result: Value,
    #[serde(default)]
    pub error: Option<String>,
}

type Pending = Arc<Mutex<HashMap<u64, mpsc::Sender<Response>>>>;

/// Client for the newline-delimited JSON scoring protocol. Requests from
/// several threads are pipelined over one connection; responses may come
/// back in any order and are matched by id.
pub struct SidecarClient {
    writer: Mutex<Box<dyn Write + Send>>,
    pending: Pending,
    closed: Arc<AtomicBool>,
    next_id: AtomicU64,
    timeout: Duration,
    child: Option<Mutex<Child>>,
}

impl SidecarClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(Self::from_halves(reader, stream, None))
    }

    /// Starts `program args...` and talks to it over stdin/stdout.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self::from_halves(stdout, stdin, Some(child)))
    }

    pub fn from_halves<R, W>(reader: R, writer: W, child: Option<Child>) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let pending: Pending = Arc::default();
        let closed = Arc::new(AtomicBool::new(false));
        {
            let pending = pending.clone();
            let closed = closed.clone();
            std::thread::spawn(move || {
                let mut lines = BufReader::new(reader).lines();
                while let Some(Ok(line)) = lines.next() {
                    let Ok(resp) = serde_json::from_str::<Response>(&line) else {
                        log::warn!("sidecar sent an unparsable line: {line:?}");
                        continue;
                    };
                    if let Some(tx) = pending.lock().unwrap().remove(&resp.id) {
                        let _ = tx.send(resp);
                    }
                }
                closed.store(true, Ordering::SeqCst);
                // Dropping the senders wakes every waiter with an error.
                pending.lock().unwrap().clear();
            });
        }
        SidecarClient {
            writer: Mutex::new(Box::new(writer)),
            pending,
            closed,
            next_id: AtomicU64::new(1),
            timeout: Duration::from_secs(60),
            child: child.map(Mutex::new),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Sends one request and waits for its response.
    pub fn call(&self, op: &str, payload: Value) -> Result<Value> {
        if self.closed.load(Ordering::SeqCst) {
            return Err(Error::Scorer("sidecar connection closed".into()));
        }
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::channel();
        self.pending.lock().unwrap().insert(id, tx);
        let req = Request {
            id,
            op: op.to_string(),
            payload,
        };
        let mut line = serde_json::to_string(&req)?;
        line.push('\n');
        let sent = {
            let mut w = self.writer.lock().unwrap();
            w.write_all(line.as_bytes()).and_then(|_| w.flush())
        };
        if let Err(e) = sent {
            self.pending.lock().unwrap().remove(&id);
            return Err(Error::Scorer(format!("sidecar write failed: {e}")));
        }
        let resp = rx.recv_timeout(self.timeout).map_err(|e| {
            self.pending.lock().unwrap().remove(&id);
            Error::Scorer(format!("no response for request {id}: {e}"))
        })?;
        if resp.ok {
            Ok(resp.result)
        } else {
            Err(Error::Scorer(
                resp.error.unwrap_or_else(|| "unspecified sidecar error".into()),
            ))
        }
    }

    pub fn ping(&self) -> Result<()> {
        match self.call("ping", json!({}))? {
            Value::String(s) if s == "pong" => Ok(()),
            other => Err(Error::Scorer(format!("unexpected ping result {other}"))),
        }
    }

    fn path_payload(path: &Path) -> Value {
        json!({ "path": path.to_string_lossy() })
    }
}

impl Drop for SidecarClient {
    fn drop(&mut self) {
        if let Some(child) = &self.child {
            let mut child = child.lock().unwrap();
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn parse_vector(v: Value) -> Result<Vec<f32>> {
    let arr: Vec<f64> =
        serde_json::from_value(v).map_err(|e| Error::Scorer(format!("bad embedding: {e}")))?;
    Ok(arr.into_iter().map(|x| x as f32).collect())
}

fn parse_scores(v: Value) -> Result<ScoreMap> {
    serde_json::from_value(v).map_err(|e| Error::Scorer(format!("bad score map: {e}")))
}

impl Scorer for SidecarClient {
    fn lid(&self, text: &str) -> Result<Vec<(String, f64)>> {
        let v = self.call("lid", json!({ "text": text }))?;
        serde_json::from_value(v).map_err(|e| Error::Scorer(format!("bad lid result: {e}")))
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f32>> {
        parse_vector(self.call("embed_text", json!({ "text": text }))?)
    }

    fn embed_image(&self, path: &Path) -> Result<Vec<f32>> {
        parse_vector(self.call("embed_image", Self::path_payload(path))?)
    }

    fn nsfw_image(&self, path: &Path) -> Result<ScoreMap> {
        parse_scores(self.call("nsfw_image", Self::path_payload(path))?)
    }

    fn csam_image(&self, path: &Path) -> Result<ScoreMap> {
        parse_scores(self.call("csam_image", Self::path_payload(path))?)
    }
}
