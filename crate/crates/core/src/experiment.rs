//! Running any [`PolicyKind`] against a fetcher, wiring in the oracles the
//! policy needs.

use thiserror::Error;
use url::Url;

use crate::baselines::{BenefitOracle, FocusedPolicy, OmniscientPolicy, PolicyKind, QueuePolicy, TpOffPolicy};
use crate::classifier::MimeClass;
use crate::config::CrawlConfig;
use crate::engine::{crawl, CrawlTrace, EngineError, LinkLabeler, SbPolicy};
use crate::fetch::Fetcher;
use crate::scalar::Scalar;
use crate::sim::{ServeOptions, Site, SiteFetcher};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("policy `{policy}` needs {what}")]
    MissingOracle { policy: PolicyKind, what: &'static str },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// True MIME class of a URL.
pub type MimeOracle<'a> = Box<dyn Fn(&Url) -> MimeClass + 'a>;

/// Ground truth some policies rely on.
#[derive(Default)]
pub struct Oracles<'a> {
    /// True MIME class of a URL (SB-ORACLE).
    pub mime: Option<MimeOracle<'a>>,
    /// Target-link count of a page (TP-OFF).
    pub benefit: Option<BenefitOracle<'a>>,
    /// Every target URL (OMNISCIENT).
    pub targets: Option<Vec<Url>>,
}

impl<'a> Oracles<'a> {
    pub fn of_site(site: &'a Site) -> Self {
        Self {
            mime: Some(Box::new(move |u: &Url| site.mime_class(u))),
            benefit: Some(Box::new(move |u: &Url| site.benefit(u))),
            targets: Some(site.target_urls()),
        }
    }
}

/// One crawl of `kind` from `root`.
pub fn run_policy<F: Scalar>(
    kind: PolicyKind,
    root: &Url,
    cfg: &CrawlConfig,
    fetcher: &mut dyn Fetcher,
    oracles: Oracles<'_>,
) -> Result<CrawlTrace, RunError> {
    let missing = |what| RunError::MissingOracle { policy: kind, what };
    let classifier = || LinkLabeler::<F>::classifier(cfg);
    let trace = match kind {
        PolicyKind::Sb => crawl(root, cfg, fetcher, classifier(), &mut SbPolicy::<F>::new(cfg))?,
        PolicyKind::SbOracle => {
            let mime = oracles.mime.ok_or_else(|| missing("a MIME oracle"))?;
            let labeler = LinkLabeler::<F>::oracle(move |u: &Url| mime(u));
            crawl(root, cfg, fetcher, labeler, &mut SbPolicy::<F>::new(cfg).named("sb-oracle"))?
        }
        PolicyKind::Random => crawl(root, cfg, fetcher, classifier(), &mut QueuePolicy::random())?,
        PolicyKind::Bfs => crawl(root, cfg, fetcher, classifier(), &mut QueuePolicy::bfs())?,
        PolicyKind::Dfs => crawl(root, cfg, fetcher, classifier(), &mut QueuePolicy::dfs())?,
        PolicyKind::Omniscient => {
            let targets = oracles.targets.ok_or_else(|| missing("the target list"))?;
            crawl(root, cfg, fetcher, classifier(), &mut OmniscientPolicy::new(targets))?
        }
        PolicyKind::Focused => crawl(root, cfg, fetcher, classifier(), &mut FocusedPolicy::<F>::new(cfg))?,
        PolicyKind::TpOff => {
            let benefit = oracles.benefit.ok_or_else(|| missing("a benefit oracle"))?;
            crawl(root, cfg, fetcher, classifier(), &mut TpOffPolicy::<F>::new(cfg, benefit))?
        }
    };
    Ok(trace)
}

/// One crawl of `kind` over a simulated site.
pub fn run_on_site<F: Scalar>(
    site: &Site,
    kind: PolicyKind,
    cfg: &CrawlConfig,
    serve: ServeOptions,
) -> Result<CrawlTrace, RunError> {
    let mut fetcher = SiteFetcher::new(site, serve);
    run_policy::<F>(kind, site.root(), cfg, &mut fetcher, Oracles::of_site(site))
}
