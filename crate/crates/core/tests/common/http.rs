//! Tiny instrumented HTTP/1.1 server: one request per connection, every
//! arrival logged, in-flight requests counted.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpListener;

#[derive(Clone)]
pub struct Route {
    pub status: u16,
    pub body: Vec<u8>,
    pub content_type: &'static str,
}

#[derive(Default)]
pub struct Log {
    pub arrivals: Mutex<Vec<(String, Instant)>>,
    in_flight: AtomicUsize,
    pub peak: AtomicUsize,
}

pub struct Server {
    pub addr: SocketAddr,
    pub log: Arc<Log>,
    _thread: std::thread::JoinHandle<()>,
}

impl Server {
    pub fn base(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn paths(&self) -> Vec<String> {
        self.log.arrivals.lock().unwrap().iter().map(|(p, _)| p.clone()).collect()
    }
}

/// Serves `routes` (path → response); unknown paths are 404. Image
/// responses are held for `latency` before being written.
pub fn serve(routes: HashMap<String, Route>, latency: Duration) -> Server {
    let log = Arc::new(Log::default());
    let (tx, rx) = std::sync::mpsc::channel();
    let thread_log = log.clone();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let routes = Arc::new(routes);
            loop {
                let Ok((mut sock, _)) = listener.accept().await else { break };
                let routes = routes.clone();
                let log = thread_log.clone();
                tokio::spawn(async move {
                    let mut buf = Vec::new();
                    let mut chunk = [0u8; 1024];
                    while !buf.windows(4).any(|w| w == b"\r\n\r\n") {
                        match sock.read(&mut chunk).await {
                            Ok(0) | Err(_) => return,
                            Ok(n) => buf.extend_from_slice(&chunk[..n]),
                        }
                    }
                    let head = String::from_utf8_lossy(&buf);
                    let path = head.split_whitespace().nth(1).unwrap_or("/").to_string();
                    log.arrivals.lock().unwrap().push((path.clone(), Instant::now()));
                    let now = log.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    log.peak.fetch_max(now, Ordering::SeqCst);
                    let route = routes.get(&path).cloned().unwrap_or(Route {
                        status: 404,
                        body: b"not found".to_vec(),
                        content_type: "text/plain",
                    });
                    if path != "/robots.txt" {
                        tokio::time::sleep(latency).await;
                    }
                    // counted down before the reply starts, so a client that has
                    // its answer can never observe itself still in flight
                    log.in_flight.fetch_sub(1, Ordering::SeqCst);
                    let head = format!(
                        "HTTP/1.1 {} X\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                        route.status,
                        route.content_type,
                        route.body.len()
                    );
                    let _ = sock.write_all(head.as_bytes()).await;
                    let _ = sock.write_all(&route.body).await;
                    let _ = sock.shutdown().await;
                });
            }
        });
    });
    let addr = rx.recv().unwrap();
    Server {
        addr,
        log,
        _thread: thread,
    }
}
