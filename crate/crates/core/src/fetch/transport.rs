use std::future::Future;
use std::path::PathBuf;
use std::pin::Pin;
use std::time::Duration;

use url::Url;

/// What came back from one GET, before any image validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reply {
    Body {
        status: u16,
        location: Option<String>,
        bytes: Vec<u8>,
    },
    TooLarge,
    Timeout,
    Network(String),
}

pub type ReplyFuture<'a> = Pin<Box<dyn Future<Output = Reply> + Send + 'a>>;

/// One GET without redirect following. Implementations must stop reading
/// once more than `max_bytes` of body have arrived.
pub trait Transport: Send + Sync {
    fn get<'a>(&'a self, url: &'a Url, max_bytes: usize, timeout: Duration) -> ReplyFuture<'a>;
}

/// Plain HTTP(S) via reqwest, redirects disabled.
pub struct HttpTransport {
    client: reqwest::Client,
}

impl HttpTransport {
    pub fn new(user_agent: &str) -> crate::Result<Self> {
        let client = reqwest::Client::builder()
            .user_agent(user_agent)
            .redirect(reqwest::redirect::Policy::none())
            .build()
            .map_err(|e| crate::Error::Config(format!("http client: {e}")))?;
        Ok(HttpTransport { client })
    }

    async fn fetch(&self, url: &Url, max_bytes: usize) -> Reply {
        let mut resp = match self.client.get(url.clone()).send().await {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Reply::Timeout,
            Err(e) => return Reply::Network(e.to_string()),
        };
        let status = resp.status().as_u16();
        let location = resp
            .headers()
            .get(reqwest::header::LOCATION)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        if resp.content_length().is_some_and(|n| n > max_bytes as u64) {
            return Reply::TooLarge;
        }
        let mut bytes = Vec::new();
        loop {
            match resp.chunk().await {
                Ok(Some(chunk)) => {
                    if bytes.len() + chunk.len() > max_bytes {
                        // dropping `resp` closes the connection
                        return Reply::TooLarge;
                    }
                    bytes.extend_from_slice(&chunk);
                }
                Ok(None) => break,
                Err(e) if e.is_timeout() => return Reply::Timeout,
                Err(e) => return Reply::Network(e.to_string()),
            }
        }
        Reply::Body {
            status,
            location,
            bytes,
        }
    }
}

impl Transport for HttpTransport {
    fn get<'a>(&'a self, url: &'a Url, max_bytes: usize, timeout: Duration) -> ReplyFuture<'a> {
        Box::pin(async move {
            tokio::time::timeout(timeout, self.fetch(url, max_bytes))
                .await
                .unwrap_or(Reply::Timeout)
        })
    }
}

/// Serves URLs from a local directory laid out as `<root>/<host>/<path>`,
/// for offline runs and tests. Missing files are 404s.
pub struct MirrorTransport {
    root: PathBuf,
}

impl MirrorTransport {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        MirrorTransport { root: root.into() }
    }

    pub fn path_for(&self, url: &Url) -> Option<PathBuf> {
        let host = url.host_str()?;
        let mut path = self.root.join(host);
        for seg in url.path_segments()? {
            if seg.is_empty() || seg == "." || seg == ".." {
                continue;
            }
            path.push(seg);
        }
        Some(path)
    }
}

impl Transport for MirrorTransport {
    fn get<'a>(&'a self, url: &'a Url, max_bytes: usize, _timeout: Duration) -> ReplyFuture<'a> {
        Box::pin(async move {
            let Some(path) = self.path_for(url) else {
                return Reply::Network(format!("unmappable url {url}"));
            };
            // local disk reads are short; not worth a blocking-pool hop
            match std::fs::read(&path) {
                Ok(bytes) if bytes.len() > max_bytes => Reply::TooLarge,
                Ok(bytes) => Reply::Body {
                    status: 200,
                    location: None,
                    bytes,
                },
                Err(_) => Reply::Body {
                    status: 404,
                    location: None,
                    bytes: Vec::new(),
                },
            }
        })
    }
}
