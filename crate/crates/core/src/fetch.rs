//! HTTP access abstraction: response types, MIME handling, politeness pacing
//! and the live/record/replay/semi-online mode switch over a [`PageStore`].

use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use url::Url;

use crate::store::PageStore;

/// Result of a GET.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FetchResponse {
    /// HTTP status; 0 means the request failed before any response.
    pub status: u16,
    /// Bare, lowercased MIME type.
    pub mime: Option<String>,
    /// Raw `Location` header value.
    pub location: Option<String>,
    pub body: Vec<u8>,
    /// Body bytes actually received.
    pub body_size: u64,
    pub header_size: u64,
    /// Download interrupted because of a blocklisted MIME type.
    pub aborted: bool,
}

impl FetchResponse {
    /// Network failure marker.
    pub fn failed() -> Self {
        Self::default()
    }

    /// Answer used when replay finds nothing in the store.
    pub fn miss() -> Self {
        Self {
            status: 404,
            ..Self::default()
        }
    }

    pub fn ok(mime: &str, body: Vec<u8>, header_size: u64) -> Self {
        Self {
            status: 200,
            mime: normalize_mime(mime),
            location: None,
            body_size: body.len() as u64,
            body,
            header_size,
            aborted: false,
        }
    }

    pub fn redirect(status: u16, location: &str, header_size: u64) -> Self {
        Self {
            status,
            location: Some(location.to_string()),
            header_size,
            ..Self::default()
        }
    }

    pub fn bytes_in(&self) -> u64 {
        self.header_size + self.body_size
    }

    pub fn class(&self) -> StatusClass {
        StatusClass::of(self.status)
    }
}

/// Result of a HEAD.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HeadResponse {
    pub status: u16,
    pub mime: Option<String>,
    pub header_size: u64,
}

impl HeadResponse {
    pub fn miss() -> Self {
        Self {
            status: 404,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusClass {
    Success,
    Redirect,
    /// 4xx, 5xx, failed requests and anything unexpected.
    Error,
}

impl StatusClass {
    pub fn of(status: u16) -> Self {
        match status {
            200..=299 => Self::Success,
            300..=399 => Self::Redirect,
            _ => Self::Error,
        }
    }
}

/// Strips parameters and lowercases; empty types become `None`.
pub fn normalize_mime(raw: &str) -> Option<String> {
    let bare = raw.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    (!bare.is_empty()).then_some(bare)
}

pub fn is_html_mime(mime: &str) -> bool {
    mime.contains("html")
}

/// MIME patterns such as `image/*` or exact types.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MimeBlocklist {
    patterns: Vec<String>,
}

impl MimeBlocklist {
    pub fn new<I, S>(patterns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            patterns: patterns.into_iter().map(|p| p.as_ref().trim().to_ascii_lowercase()).collect(),
        }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn matches(&self, mime: &str) -> bool {
        let mime = mime.to_ascii_lowercase();
        self.patterns.iter().any(|p| match p.strip_suffix("/*") {
            Some(kind) => mime.split('/').next() == Some(kind),
            None => *p == mime,
        })
    }
}

/// Anything that can answer GET and HEAD for a URL.
pub trait Fetcher {
    /// GET that interrupts the download once the Content-Type is known to
    /// match `blocklist`.
    fn get(&mut self, url: &Url, blocklist: &MimeBlocklist) -> FetchResponse;
    fn head(&mut self, url: &Url) -> HeadResponse;
    /// Live requests actually sent over the network.
    fn network_requests(&self) -> u64 {
        0
    }
}

impl<T: Fetcher + ?Sized> Fetcher for Box<T> {
    fn get(&mut self, url: &Url, blocklist: &MimeBlocklist) -> FetchResponse {
        (**self).get(url, blocklist)
    }

    fn head(&mut self, url: &Url) -> HeadResponse {
        (**self).head(url)
    }

    fn network_requests(&self) -> u64 {
        (**self).network_requests()
    }
}

/// Monotonic time source, swappable for tests.
pub trait Clock {
    fn now(&self) -> Duration;
    fn sleep(&mut self, d: Duration);
}

#[derive(Debug, Clone)]
pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { start: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&mut self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Clock that only advances when slept on or explicitly moved.
#[derive(Debug, Clone, Default)]
pub struct MockClock {
    pub now: Duration,
    pub slept: Vec<Duration>,
}

impl MockClock {
    pub fn advance(&mut self, d: Duration) {
        self.now += d;
    }
}

impl Clock for MockClock {
    fn now(&self) -> Duration {
        self.now
    }

    fn sleep(&mut self, d: Duration) {
        self.slept.push(d);
        self.now += d;
    }
}

/// Enforces a minimum gap between consecutive requests.
pub struct Pacer {
    delay: Duration,
    last: Option<Duration>,
    clock: Box<dyn Clock + Send>,
    stamps: Vec<Duration>,
}

impl std::fmt::Debug for Pacer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pacer")
            .field("delay", &self.delay)
            .field("requests", &self.stamps.len())
            .finish()
    }
}

impl Pacer {
    pub fn new(delay: Duration) -> Self {
        Self::with_clock(delay, Box::new(SystemClock::default()))
    }

    pub fn with_clock(delay: Duration, clock: Box<dyn Clock + Send>) -> Self {
        Self {
            delay,
            last: None,
            clock,
            stamps: Vec::new(),
        }
    }

    pub fn delay(&self) -> Duration {
        self.delay
    }

    /// Blocks until the gap since the previous request is at least the
    /// delay, then stamps the new request.
    pub fn wait(&mut self) {
        if let Some(last) = self.last {
            let elapsed = self.clock.now().saturating_sub(last);
            if elapsed < self.delay {
                self.clock.sleep(self.delay - elapsed);
            }
        }
        let now = self.clock.now();
        self.last = Some(now);
        self.stamps.push(now);
    }

    /// Lets the clock move without a request (mock clocks only honour this
    /// through [`Clock::sleep`]).
    pub fn idle(&mut self, d: Duration) {
        self.clock.sleep(d);
    }

    /// Start time of every paced request.
    pub fn stamps(&self) -> &[Duration] {
        &self.stamps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FetchMode {
    /// Network only.
    Live,
    /// Network, every answer written to the store.
    Record,
    /// Store only; misses answer 404.
    Replay,
    /// Store first, network and record on a miss.
    #[default]
    SemiOnline,
}

impl std::str::FromStr for FetchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "live" => Ok(Self::Live),
            "record" => Ok(Self::Record),
            "replay" => Ok(Self::Replay),
            "semi_online" => Ok(Self::SemiOnline),
            _ => Err(format!("unknown fetch mode `{s}`")),
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Routes requests between a live fetcher and the page store according to
/// the mode. Live requests go through the pacer.
pub struct ModeFetcher {
    mode: FetchMode,
    store: Option<PageStore>,
    live: Option<Box<dyn Fetcher + Send>>,
    pacer: Pacer,
    network: u64,
    store_errors: u64,
}

impl ModeFetcher {
    pub fn new(mode: FetchMode, store: Option<PageStore>, live: Option<Box<dyn Fetcher + Send>>, pacer: Pacer) -> Self {
        Self {
            mode,
            store,
            live,
            pacer,
            network: 0,
            store_errors: 0,
        }
    }

    pub fn mode(&self) -> FetchMode {
        self.mode
    }

    pub fn store(&self) -> Option<&PageStore> {
        self.store.as_ref()
    }

    pub fn into_store(self) -> Option<PageStore> {
        self.store
    }

    pub fn pacer(&self) -> &Pacer {
        &self.pacer
    }

    /// Failed journal writes (the response is still returned).
    pub fn store_errors(&self) -> u64 {
        self.store_errors
    }

    fn uses_store_first(&self) -> bool {
        matches!(self.mode, FetchMode::Replay | FetchMode::SemiOnline)
    }

    fn records(&self) -> bool {
        matches!(self.mode, FetchMode::Record | FetchMode::SemiOnline)
    }

    fn can_go_live(&self) -> bool {
        self.mode != FetchMode::Replay && self.live.is_some()
    }
}

impl Fetcher for ModeFetcher {
    fn get(&mut self, url: &Url, blocklist: &MimeBlocklist) -> FetchResponse {
        if self.uses_store_first() {
            if let Some(hit) = self.store.as_ref().and_then(|s| s.get(url.as_str())) {
                return hit;
            }
        }
        if !self.can_go_live() {
            return FetchResponse::miss();
        }
        self.pacer.wait();
        self.network += 1;
        let resp = self.live.as_mut().map(|l| l.get(url, blocklist)).unwrap_or_default();
        if self.records() && resp.status != 0 {
            if let Some(store) = self.store.as_mut() {
                if store.put_get(url.as_str(), &resp, unix_now()).is_err() {
                    self.store_errors += 1;
                }
            }
        }
        resp
    }

    fn head(&mut self, url: &Url) -> HeadResponse {
        if self.uses_store_first() {
            if let Some(hit) = self.store.as_ref().and_then(|s| s.head(url.as_str())) {
                return hit;
            }
        }
        if !self.can_go_live() {
            return HeadResponse::miss();
        }
        self.pacer.wait();
        self.network += 1;
        let resp = self.live.as_mut().map(|l| l.head(url)).unwrap_or_default();
        if self.records() && resp.status != 0 {
            if let Some(store) = self.store.as_mut() {
                if store.put_head(url.as_str(), &resp, unix_now()).is_err() {
                    self.store_errors += 1;
                }
            }
        }
        resp
    }

    fn network_requests(&self) -> u64 {
        self.network
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mime_normalization() {
        assert_eq!(normalize_mime("Text/HTML; charset=UTF-8").as_deref(), Some("text/html"));
        assert_eq!(normalize_mime("  ; x=1"), None);
        assert_eq!(normalize_mime("text/csv").as_deref(), Some("text/csv"));
    }

    #[test]
    fn blocklist_patterns() {
        let b = MimeBlocklist::new(["image/*", "video/*", "application/x-shockwave-flash"]);
        assert!(b.matches("video/mp4"));
        assert!(b.matches("IMAGE/png"));
        assert!(b.matches("application/x-shockwave-flash"));
        assert!(!b.matches("application/pdf"));
        assert!(!b.matches("imagery/x"));
        assert!(!MimeBlocklist::none().matches("video/mp4"));
    }

    #[test]
    fn status_classes() {
        assert_eq!(StatusClass::of(204), StatusClass::Success);
        assert_eq!(StatusClass::of(301), StatusClass::Redirect);
        assert_eq!(StatusClass::of(404), StatusClass::Error);
        assert_eq!(StatusClass::of(0), StatusClass::Error);
    }

    #[test]
    fn pacer_enforces_gap() {
        let mut p = Pacer::with_clock(Duration::from_millis(1000), Box::new(MockClock::default()));
        p.wait();
        p.idle(Duration::from_millis(300));
        p.wait();
        p.idle(Duration::from_millis(1500));
        p.wait();
        p.wait();
        let s = p.stamps();
        assert_eq!(s.len(), 4);
        for w in s.windows(2) {
            assert!(w[1] - w[0] >= Duration::from_millis(1000));
        }
        assert_eq!(s[2] - s[1], Duration::from_millis(1500));
    }
}
