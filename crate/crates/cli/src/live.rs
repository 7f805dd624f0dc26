//! HTTP fetcher for live crawls.

use std::io::Read;
use std::time::Duration;

use sbcrawl::fetch::{normalize_mime, FetchResponse, Fetcher, HeadResponse, MimeBlocklist};
use url::Url;

/// Largest body kept in memory; longer downloads are cut.
const MAX_BODY: u64 = 64 * 1024 * 1024;

/// Blocking HTTP client. Redirects are not followed (the engine decides),
/// and a GET stops reading as soon as the Content-Type is known to be
/// blocklisted.
pub struct HttpFetcher {
    agent: ureq::Agent,
    requests: u64,
}

impl HttpFetcher {
    pub fn new(user_agent: &str, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new()
            .redirects(0)
            .timeout(timeout)
            .user_agent(user_agent)
            .build();
        Self { agent, requests: 0 }
    }
}

fn header_size(resp: &ureq::Response) -> u64 {
    let status_line = format!("{} {} {}\r\n", resp.http_version(), resp.status(), resp.status_text()).len();
    let fields: usize = resp
        .headers_names()
        .iter()
        .map(|n| n.len() + 2 + resp.header(n).map_or(0, str::len) + 2)
        .sum();
    (status_line + fields + 2) as u64
}

fn answer(result: Result<ureq::Response, ureq::Error>) -> Option<ureq::Response> {
    match result {
        Ok(r) | Err(ureq::Error::Status(_, r)) => Some(r),
        Err(ureq::Error::Transport(_)) => None,
    }
}

impl Fetcher for HttpFetcher {
    fn get(&mut self, url: &Url, blocklist: &MimeBlocklist) -> FetchResponse {
        self.requests += 1;
        let Some(resp) = answer(self.agent.get(url.as_str()).call()) else {
            return FetchResponse::failed();
        };
        let status = resp.status();
        let mime = resp.header("content-type").and_then(normalize_mime);
        let location = resp.header("location").map(str::to_string);
        let header_size = header_size(&resp);
        if mime.as_deref().is_some_and(|m| blocklist.matches(m)) {
            // Dropping the reader closes the connection mid-body.
            return FetchResponse {
                status,
                mime,
                location,
                body: Vec::new(),
                body_size: 0,
                header_size,
                aborted: true,
            };
        }
        let mut body = Vec::new();
        if resp.into_reader().take(MAX_BODY).read_to_end(&mut body).is_err() {
            return FetchResponse::failed();
        }
        FetchResponse {
            status,
            mime,
            location,
            body_size: body.len() as u64,
            body,
            header_size,
            aborted: false,
        }
    }

    fn head(&mut self, url: &Url) -> HeadResponse {
        self.requests += 1;
        match answer(self.agent.head(url.as_str()).call()) {
            Some(resp) => HeadResponse {
                status: resp.status(),
                mime: resp.header("content-type").and_then(normalize_mime),
                header_size: header_size(&resp),
            },
            None => HeadResponse::default(),
        }
    }

    fn network_requests(&self) -> u64 {
        self.requests
    }
}
