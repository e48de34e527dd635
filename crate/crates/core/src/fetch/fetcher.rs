use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use sha2::{Digest, Sha512};
use tokio::sync::Semaphore;
use tokio::time::Instant;
use url::Url;

use super::robots::RobotsTxt;
use super::transport::{Reply, Transport};
use crate::images::phash_image;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FetchPolicy {
    pub user_agent: String,
    pub per_host_concurrency: usize,
    /// Minimum gap between the starts of two requests to the same host.
    pub per_host_delay_ms: u64,
    pub timeout_ms: u64,
    pub max_bytes: usize,
    pub respect_robots: bool,
    /// Extra attempts after a network error; never used for other outcomes.
    pub retries: u32,
    pub backoff_ms: u64,
    pub max_redirects: usize,
    pub robots_ttl_s: u64,
    /// Requests in flight across all hosts.
    pub max_in_flight: usize,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        FetchPolicy {
            user_agent: concat!("mmcorpus/", env!("CARGO_PKG_VERSION")).to_string(),
            per_host_concurrency: 2,
            per_host_delay_ms: 250,
            timeout_ms: 30_000,
            max_bytes: 20 * 1024 * 1024,
            respect_robots: true,
            retries: 2,
            backoff_ms: 200,
            max_redirects: 5,
            robots_ttl_s: 3600,
            max_in_flight: 64,
        }
    }
}

/// A successfully fetched and decoded image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageRecord {
    pub url: String,
    /// Digest of the bytes exactly as received.
    pub sha512: [u8; 64],
    pub phash: u64,
    pub width: u32,
    pub height: u32,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FetchOutcome {
    Ok(ImageRecord),
    DeniedRobots,
    Timeout,
    TooLarge,
    NotImage,
    HttpError(u16),
    NetworkError(String),
}

impl FetchOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            FetchOutcome::Ok(_) => "ok",
            FetchOutcome::DeniedRobots => "denied_robots",
            FetchOutcome::Timeout => "timeout",
            FetchOutcome::TooLarge => "too_large",
            FetchOutcome::NotImage => "not_image",
            FetchOutcome::HttpError(_) => "http_error",
            FetchOutcome::NetworkError(_) => "network_error",
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, FetchOutcome::Ok(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FetchResult {
    /// Position of the URL in the request batch.
    pub id: usize,
    pub url: String,
    pub outcome: FetchOutcome,
}

#[derive(Debug, Default)]
pub struct FetchCounters {
    pub requests: AtomicU64,
    pub retries: AtomicU64,
    pub robots_fetched: AtomicU64,
    /// robots.txt fetches that failed for reasons other than 4xx; the host
    /// is then treated as allowing everything.
    pub robots_unavailable: AtomicU64,
}

struct HostState {
    permits: Semaphore,
    next_start: tokio::sync::Mutex<Instant>,
    robots: tokio::sync::Mutex<Option<(Instant, Arc<RobotsTxt>)>>,
}

/// Polite concurrent downloader. Every request to a host, robots.txt
/// included, passes that host's concurrency cap and start-gap delay.
pub struct Fetcher {
    transport: Arc<dyn Transport>,
    policy: FetchPolicy,
    hosts: Mutex<HashMap<String, Arc<HostState>>>,
    pub counters: FetchCounters,
}

const ROBOTS_MAX_BYTES: usize = 512 * 1024;

impl Fetcher {
    pub fn new(transport: Arc<dyn Transport>, policy: FetchPolicy) -> Self {
        Fetcher {
            transport,
            policy,
            hosts: Mutex::new(HashMap::new()),
            counters: FetchCounters::default(),
        }
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    fn host(&self, url: &Url) -> Arc<HostState> {
        let key = url.origin().ascii_serialization();
        let mut hosts = self.hosts.lock().expect("host map poisoned");
        hosts
            .entry(key)
            .or_insert_with(|| {
                Arc::new(HostState {
                    permits: Semaphore::new(self.policy.per_host_concurrency.max(1)),
                    next_start: tokio::sync::Mutex::new(Instant::now()),
                    robots: tokio::sync::Mutex::new(None),
                })
            })
            .clone()
    }

    async fn request(&self, host: &HostState, url: &Url, max_bytes: usize) -> Reply {
        let _permit = host.permits.acquire().await.expect("semaphore closed");
        {
            let mut next = host.next_start.lock().await;
            tokio::time::sleep_until(*next).await;
            *next = Instant::now() + Duration::from_millis(self.policy.per_host_delay_ms);
        }
        self.counters.requests.fetch_add(1, Ordering::Relaxed);
        self.transport
            .get(url, max_bytes, Duration::from_millis(self.policy.timeout_ms))
            .await
    }

    async fn robots(&self, host: &HostState, url: &Url) -> Arc<RobotsTxt> {
        let mut slot = host.robots.lock().await;
        let ttl = Duration::from_secs(self.policy.robots_ttl_s);
        if let Some((at, rules)) = slot.as_ref() {
            if at.elapsed() < ttl {
                return rules.clone();
            }
        }
        let mut robots_url = url.clone();
        robots_url.set_path("/robots.txt");
        robots_url.set_query(None);
        robots_url.set_fragment(None);
        self.counters.robots_fetched.fetch_add(1, Ordering::Relaxed);
        let rules = match self.request(host, &robots_url, ROBOTS_MAX_BYTES).await {
            Reply::Body { status, bytes, .. } if (200..300).contains(&status) => {
                RobotsTxt::parse(&String::from_utf8_lossy(&bytes))
            }
            Reply::Body { status, .. } if (400..500).contains(&status) => RobotsTxt::allow_all(),
            other => {
                log::debug!("robots.txt for {robots_url} unavailable: {other:?}");
                self.counters.robots_unavailable.fetch_add(1, Ordering::Relaxed);
                RobotsTxt::allow_all()
            }
        };
        let rules = Arc::new(rules);
        *slot = Some((Instant::now(), rules.clone()));
        rules
    }

    async fn get_with_retries(&self, host: &HostState, url: &Url) -> Reply {
        let mut attempt = 0;
        loop {
            let reply = self.request(host, url, self.policy.max_bytes).await;
            match reply {
                Reply::Network(_) if attempt < self.policy.retries => {
                    self.counters.retries.fetch_add(1, Ordering::Relaxed);
                    let wait = self.policy.backoff_ms.saturating_mul(1 << attempt.min(16));
                    tokio::time::sleep(Duration::from_millis(wait)).await;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    pub async fn fetch(&self, url: &str) -> FetchOutcome {
        let mut current = match Url::parse(url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") => u,
            Ok(u) => return FetchOutcome::NetworkError(format!("unsupported scheme {}", u.scheme())),
            Err(e) => return FetchOutcome::NetworkError(format!("invalid url: {e}")),
        };
        for _hop in 0..=self.policy.max_redirects {
            let host = self.host(&current);
            if self.policy.respect_robots {
                let rules = self.robots(&host, &current).await;
                let mut target = current.path().to_string();
                if let Some(q) = current.query() {
                    target.push('?');
                    target.push_str(q);
                }
                if !rules.allows(&self.policy.user_agent, &target) {
                    return FetchOutcome::DeniedRobots;
                }
            }
            match self.get_with_retries(&host, &current).await {
                Reply::Timeout => return FetchOutcome::Timeout,
                Reply::TooLarge => return FetchOutcome::TooLarge,
                Reply::Network(e) => return FetchOutcome::NetworkError(e),
                Reply::Body {
                    status,
                    location,
                    bytes,
                } => {
                    if (300..400).contains(&status) {
                        let Some(next) = location.and_then(|l| current.join(&l).ok()) else {
                            return FetchOutcome::HttpError(status);
                        };
                        current = next;
                        continue;
                    }
                    if !(200..300).contains(&status) {
                        return FetchOutcome::HttpError(status);
                    }
                    return decode(url, bytes);
                }
            }
        }
        FetchOutcome::NetworkError("too many redirects".into())
    }

    /// Fetches a batch concurrently. Results come back sorted by `id`.
    pub async fn fetch_many(self: &Arc<Self>, urls: Vec<String>) -> Vec<FetchResult> {
        let gate = Arc::new(Semaphore::new(self.policy.max_in_flight.max(1)));
        let mut set = tokio::task::JoinSet::new();
        for (id, url) in urls.into_iter().enumerate() {
            let this = self.clone();
            let gate = gate.clone();
            set.spawn(async move {
                let _p = gate.acquire_owned().await.expect("semaphore closed");
                let outcome = this.fetch(&url).await;
                FetchResult { id, url, outcome }
            });
        }
        let mut out = Vec::new();
        while let Some(r) = set.join_next().await {
            out.push(r.expect("fetch task panicked"));
        }
        out.sort_by_key(|r| r.id);
        out
    }
}

/// Decoding decides whether the payload is an image; the content type is
/// never consulted.
fn decode(url: &str, bytes: Vec<u8>) -> FetchOutcome {
    let Ok(img) = image::load_from_memory(&bytes) else {
        return FetchOutcome::NotImage;
    };
    let sha512: [u8; 64] = Sha512::digest(&bytes).into();
    FetchOutcome::Ok(ImageRecord {
        url: url.to_string(),
        sha512,
        phash: phash_image(&img),
        width: img.width(),
        height: img.height(),
        bytes,
    })
}

/// Runs [`Fetcher::fetch_many`] on a private multi-threaded runtime.
pub fn fetch_all_blocking(
    transport: Arc<dyn Transport>,
    policy: FetchPolicy,
    urls: Vec<String>,
) -> crate::Result<(Vec<FetchResult>, Arc<Fetcher>)> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(crate::Error::RawIo)?;
    let fetcher = Arc::new(Fetcher::new(transport, policy));
    let results = rt.block_on(fetcher.fetch_many(urls));
    Ok((results, fetcher))
}
