//! Deterministic synthetic websites.
//!
//! A [`SiteSpec`] describes regions ("wings") of pages arranged as trees,
//! each with its own link markup, plus target files planted behind
//! distinctive tag paths (or scattered at random, to break the tag-path
//! hypothesis on purpose). [`generate_site`] builds the structure; pages are
//! rendered to real HTML on demand by [`SiteFetcher`].

pub mod reduction;

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use url::Url;

use crate::classifier::MimeClass;
use crate::fetch::{FetchResponse, Fetcher, HeadResponse, MimeBlocklist};
use crate::store::{PageStore, StoreError};
use crate::tagpath::TagStep;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("infeasible site spec: {0}")]
    Infeasible(String),
    #[error("site spec: {0}")]
    Parse(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// One region of the site: a tree of pages under `/<name>/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub name: String,
    /// Share of the non-root pages.
    pub share: f64,
    /// Children per page; controls depth.
    pub fanout: usize,
    /// Tag path (below `main`) of links between the region's pages.
    pub nav_template: String,
    /// Tag path (below `main`) of links to targets.
    pub target_template: String,
    /// Fraction of the region's pages that link to targets.
    pub target_rate: f64,
    /// Tag path of the page's "related pages" block.
    pub related_template: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiteSpec {
    pub name: String,
    pub seed: u64,
    pub host: String,
    /// HTML pages, root included.
    pub page_count: usize,
    pub target_count: usize,
    pub regions: Vec<RegionSpec>,
    /// "Related" cross-links per page.
    pub sidebar_links: usize,
    /// Probability that a related link stays in the page's own region;
    /// otherwise it points anywhere on the site.
    pub sidebar_locality: f64,
    /// Share of targets served from extension-less `/download/<id>` URLs.
    pub extensionless_share: f64,
    /// Probability that a page carries a media block (an image link and a
    /// video stream link).
    pub media_rate: f64,
    /// Probability that a page carries a dead link (404 or 500).
    pub broken_rate: f64,
    /// Probability that an in-region link goes through a 301 redirect.
    pub redirect_rate: f64,
    /// Body size range of HTML pages, bytes.
    pub page_size: (usize, usize),
    pub target_size: (usize, usize),
    /// Attach targets to random pages under random markup instead of the
    /// regions' target templates.
    pub scatter_targets: bool,
}

impl Default for SiteSpec {
    fn default() -> Self {
        Self::two_wings(0, 5000)
    }
}

impl SiteSpec {
    /// One target-rich wing behind distinctive markup and one barren wing.
    pub fn two_wings(seed: u64, page_count: usize) -> Self {
        Self {
            name: "two-wings".into(),
            seed,
            host: "sim.example".into(),
            page_count,
            target_count: (page_count as f64 * 0.32).round() as usize,
            regions: vec![
                RegionSpec {
                    name: "data".into(),
                    share: 0.2,
                    fanout: 4,
                    nav_template: "div.catalog ul.entries li a.entry".into(),
                    target_template: "div.datasets ul li a.dl".into(),
                    target_rate: 0.8,
                    related_template: "div.related ul li a.dataset".into(),
                },
                RegionSpec {
                    name: "blog".into(),
                    share: 0.8,
                    fanout: 4,
                    nav_template: "div.posts ul li a.post".into(),
                    target_template: "div.attachments a".into(),
                    target_rate: 0.0,
                    related_template: "aside#sidebar ul li a".into(),
                },
            ],
            sidebar_links: 3,
            sidebar_locality: 0.9,
            extensionless_share: 0.2,
            media_rate: 0.1,
            broken_rate: 0.05,
            redirect_rate: 0.03,
            page_size: (1500, 4000),
            target_size: (2000, 40000),
            scatter_targets: false,
        }
    }

    /// Same layout, but targets hang off random pages under random markup.
    pub fn scattered(seed: u64, page_count: usize) -> Self {
        Self {
            name: "scattered".into(),
            scatter_targets: true,
            ..Self::two_wings(seed, page_count)
        }
    }

    /// Small site for fixtures.
    pub fn mini(seed: u64) -> Self {
        Self {
            name: "mini".into(),
            page_count: 60,
            target_count: 20,
            page_size: (600, 1200),
            target_size: (200, 2000),
            ..Self::two_wings(seed, 60)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, SimError> {
        toml::to_string(self).map_err(|e| SimError::Parse(e.to_string()))
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Infeasible(m.to_string()));
        if self.page_count == 0 {
            return bad("page_count must be positive");
        }
        if self.target_count > self.page_count {
            return bad("more targets than pages");
        }
        if self.page_count > 1 && self.regions.is_empty() {
            return bad("pages beyond the root need at least one region");
        }
        if self.regions.iter().any(|r| r.fanout == 0 || !(r.share >= 0.0)) {
            return bad("regions need a positive fanout and a non-negative share");
        }
        if self.regions.iter().any(|r| !(0.0..=1.0).contains(&r.target_rate)) {
            return bad("target_rate must lie in [0, 1]");
        }
        if self.target_count > 0
            && !self.scatter_targets
            && self.regions.iter().all(|r| r.target_rate == 0.0)
        {
            return bad("targets requested but no region links to targets");
        }
        if self.page_size.0 > self.page_size.1 || self.target_size.0 > self.target_size.1 {
            return bad("size ranges must be ordered (min, max)");
        }
        for t in self
            .regions
            .iter()
            .flat_map(|r| [&r.nav_template, &r.target_template, &r.related_template])
        {
            let steps: Option<Vec<_>> = t.split_whitespace().map(TagStep::parse).collect();
            if steps.is_none_or(|s| s.is_empty()) {
                return bad(&format!("template `{t}` is not a tag path"));
            }
        }
        Ok(())
    }
}

const TARGET_KINDS: &[(&str, &str)] = &[
    ("csv", "text/csv"),
    ("xlsx", "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet"),
    ("json", "application/json"),
    ("pdf", "application/pdf"),
    ("zip", "application/zip"),
    ("xml", "application/xml"),
];

const SCATTER_TEMPLATES: &[&str] = &[
    "div.links a",
    "p a",
    "ul.misc li a",
    "div.box span a",
    "section.related ol li a",
    "table tr td a",
];

const HEADER_TEMPLATE: &str = "header nav#menu ul li a";
const SIDEBAR_TEMPLATE: &str = "aside#sidebar ul li a";
const FOOTER_TEMPLATE: &str = "footer a";
const MEDIA_TEMPLATE: &str = "div.gallery a";
const BROKEN_TEMPLATE: &str = "div.text p a";

/// Links rendered under one tag-path template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkBlock {
    pub template: String,
    /// (href, anchor text)
    pub links: Vec<(String, String)>,
    /// Rendered inside `<main>`.
    pub in_main: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimPage {
    pub path: String,
    pub title: String,
    pub region: Option<usize>,
    /// Depth in the region tree (root = 0, hubs = 1).
    pub depth: usize,
    pub blocks: Vec<LinkBlock>,
    pub body_size: usize,
    /// Target links on this page.
    pub target_links: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTarget {
    pub path: String,
    pub mime: &'static str,
    pub size: usize,
    /// Page linking to it.
    pub page: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resource {
    Page(usize),
    Target(usize),
    Media { video: bool },
    Redirect(usize),
    Error(u16),
}

/// A generated site.
#[derive(Debug, Clone)]
pub struct Site {
    pub spec: SiteSpec,
    pub root: Url,
    pub pages: Vec<SimPage>,
    pub targets: Vec<SimTarget>,
    resources: HashMap<String, Resource>,
}

fn slug_title(region: &str, k: usize) -> String {
    let mut c = region.chars();
    let head: String = c.next().map(|h| h.to_uppercase().collect()).unwrap_or_default();
    format!("{head}{} {k}", c.as_str())
}

/// Builds a site from its spec; deterministic in `spec.seed`.
pub fn generate_site(spec: &SiteSpec) -> Result<Site, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let root = Url::parse(&format!("http://{}/", spec.host)).map_err(|e| SimError::Infeasible(e.to_string()))?;
    let mut resources: HashMap<String, Resource> = HashMap::new();
    let mut pages = vec![SimPage {
        path: "/".into(),
        title: "Home".into(),
        region: None,
        depth: 0,
        blocks: Vec::new(),
        body_size: rng.gen_range(spec.page_size.0..=spec.page_size.1),
        target_links: 0,
    }];
    resources.insert("/".into(), Resource::Page(0));

    // Split the non-root pages between regions.
    let rest = spec.page_count - 1;
    let total_share: f64 = spec.regions.iter().map(|r| r.share).sum();
    let mut sizes: Vec<usize> = spec
        .regions
        .iter()
        .map(|r| if total_share > 0.0 { (rest as f64 * r.share / total_share).floor() as usize } else { 0 })
        .collect();
    let assigned: usize = sizes.iter().sum();
    if let Some(last) = sizes.last_mut() {
        *last += rest - assigned;
    }
    let mut region_pages: Vec<Vec<usize>> = Vec::new();
    for (ri, (region, &n)) in spec.regions.iter().zip(&sizes).enumerate() {
        let mut ids: Vec<usize> = Vec::with_capacity(n);
        for k in 0..n {
            let path = if k == 0 { format!("/{}/", region.name) } else { format!("/{}/{k}", region.name) };
            let id = pages.len();
            let parent_depth = if k == 0 { 0 } else { pages[ids[region_parent(k, region.fanout)]].depth };
            resources.insert(path.clone(), Resource::Page(id));
            pages.push(SimPage {
                path,
                title: slug_title(&region.name, k),
                region: Some(ri),
                depth: parent_depth + 1,
                blocks: Vec::new(),
                body_size: rng.gen_range(spec.page_size.0..=spec.page_size.1),
                target_links: 0,
            });
            ids.push(id);
        }
        region_pages.push(ids);
    }

    // Header navigation to every hub, on every page.
    let hubs: Vec<(String, String)> = std::iter::once(("/".to_string(), "Home".to_string()))
        .chain(
            region_pages
                .iter()
                .filter_map(|ids| ids.first())
                .map(|&h| (pages[h].path.clone(), pages[h].title.clone())),
        )
        .collect();

    // In-region tree links, some through redirects.
    let mut redirect_count = 0usize;
    let mut nav_links: Vec<Vec<(String, String)>> = vec![Vec::new(); pages.len()];
    for (ri, ids) in region_pages.iter().enumerate() {
        let fanout = spec.regions[ri].fanout;
        for k in 1..ids.len() {
            let parent = ids[region_parent(k, fanout)];
            let child = ids[k];
            let href = if rng.gen_bool(spec.redirect_rate.clamp(0.0, 1.0)) {
                let p = format!("/go/{redirect_count}");
                redirect_count += 1;
                resources.insert(p.clone(), Resource::Redirect(child));
                p
            } else {
                pages[child].path.clone()
            };
            nav_links[parent].push((href, pages[child].title.clone()));
        }
    }

    // Targets.
    let mut targets: Vec<SimTarget> = Vec::new();
    let mut target_blocks: Vec<Vec<(String, String, String)>> = vec![Vec::new(); pages.len()];
    if spec.target_count > 0 {
        let hosts: Vec<(usize, String)> = if spec.scatter_targets {
            (0..spec.target_count)
                .map(|_| {
                    let page = rng.gen_range(0..pages.len());
                    let tpl = SCATTER_TEMPLATES[rng.gen_range(0..SCATTER_TEMPLATES.len())].to_string();
                    (page, tpl)
                })
                .collect()
        } else {
            let mut carriers: Vec<(usize, String)> = Vec::new();
            for (ri, ids) in region_pages.iter().enumerate() {
                let r = &spec.regions[ri];
                let n = ((ids.len() as f64) * r.target_rate).round() as usize;
                let mut chosen: Vec<usize> = ids.choose_multiple(&mut rng, n.min(ids.len())).copied().collect();
                chosen.sort_unstable();
                carriers.extend(chosen.into_iter().map(|p| (p, r.target_template.clone())));
            }
            if carriers.is_empty() {
                return Err(SimError::Infeasible("no page can carry targets".into()));
            }
            carriers.shuffle(&mut rng);
            (0..spec.target_count).map(|i| carriers[i % carriers.len()].clone()).collect()
        };
        for (i, (page, template)) in hosts.into_iter().enumerate() {
            let (ext, mime) = TARGET_KINDS[rng.gen_range(0..TARGET_KINDS.len())];
            let path = if rng.gen_bool(spec.extensionless_share.clamp(0.0, 1.0)) {
                format!("/download/{i}")
            } else {
                format!("/files/{i}.{ext}")
            };
            let size = rng.gen_range(spec.target_size.0..=spec.target_size.1);
            resources.insert(path.clone(), Resource::Target(targets.len()));
            target_blocks[page].push((template, path.clone(), format!("Dataset {i} ({ext})")));
            pages[page].target_links += 1;
            targets.push(SimTarget { path, mime, size, page });
        }
    }

    // Assemble link blocks.
    let n_pages = pages.len();
    let mut media_count = 0usize;
    let mut broken_count = 0usize;
    for id in 0..n_pages {
        let mut blocks = vec![LinkBlock {
            template: HEADER_TEMPLATE.into(),
            links: hubs.clone(),
            in_main: false,
        }];
        if let Some(ri) = pages[id].region {
            let links = std::mem::take(&mut nav_links[id]);
            if !links.is_empty() {
                blocks.push(LinkBlock {
                    template: spec.regions[ri].nav_template.clone(),
                    links,
                    in_main: true,
                });
            }
        }
        let mut by_template: Vec<(String, Vec<(String, String)>)> = Vec::new();
        for (tpl, href, anchor) in std::mem::take(&mut target_blocks[id]) {
            match by_template.iter_mut().find(|(t, _)| *t == tpl) {
                Some((_, v)) => v.push((href, anchor)),
                None => by_template.push((tpl, vec![(href, anchor)])),
            }
        }
        blocks.extend(by_template.into_iter().map(|(template, links)| LinkBlock {
            template,
            links,
            in_main: true,
        }));
        if rng.gen_bool(spec.media_rate.clamp(0.0, 1.0)) {
            let img = format!("/media/{media_count}.jpg");
            let vid = format!("/stream/{media_count}");
            media_count += 1;
            resources.insert(img.clone(), Resource::Media { video: false });
            resources.insert(vid.clone(), Resource::Media { video: true });
            blocks.push(LinkBlock {
                template: MEDIA_TEMPLATE.into(),
                links: vec![(img, "Photo".into()), (vid, "Video".into())],
                in_main: true,
            });
        }
        if rng.gen_bool(spec.broken_rate.clamp(0.0, 1.0)) {
            let (path, status) = if broken_count.is_multiple_of(2) {
                (format!("/old/{broken_count}"), 404)
            } else {
                (format!("/err/{broken_count}"), 500)
            };
            broken_count += 1;
            resources.insert(path.clone(), Resource::Error(status));
            blocks.push(LinkBlock {
                template: BROKEN_TEMPLATE.into(),
                links: vec![(path, "archive".into())],
                in_main: true,
            });
        }
        if spec.sidebar_links > 0 && n_pages > 1 {
            let own = pages[id].region.map(|r| &region_pages[r]).filter(|ids| !ids.is_empty());
            let links = (0..spec.sidebar_links)
                .map(|_| {
                    let p = match own {
                        Some(ids) if rng.gen_bool(spec.sidebar_locality.clamp(0.0, 1.0)) => {
                            ids[rng.gen_range(0..ids.len())]
                        }
                        _ => rng.gen_range(0..n_pages),
                    };
                    (pages[p].path.clone(), pages[p].title.clone())
                })
                .collect();
            let template = pages[id]
                .region
                .map_or(SIDEBAR_TEMPLATE.to_string(), |r| spec.regions[r].related_template.clone());
            let in_main = !template.starts_with("aside");
            blocks.push(LinkBlock {
                template,
                links,
                in_main,
            });
        }
        blocks.push(LinkBlock {
            template: FOOTER_TEMPLATE.into(),
            links: vec![("/".into(), "Home".into())],
            in_main: false,
        });
        pages[id].blocks = blocks;
    }

    Ok(Site {
        spec: spec.clone(),
        root,
        pages,
        targets,
        resources,
    })
}

/// Index (within a region) of the tree parent of region page `k >= 1`.
fn region_parent(k: usize, fanout: usize) -> usize {
    (k - 1) / fanout
}

fn open_tag(out: &mut String, step: &TagStep) {
    out.push('<');
    out.push_str(&step.name);
    if let Some(id) = &step.id {
        let _ = write!(out, " id=\"{id}\"");
    }
    if !step.classes.is_empty() {
        let _ = write!(out, " class=\"{}\"", step.classes.join(" "));
    }
    out.push('>');
}

fn close_tag(out: &mut String, step: &TagStep) {
    let _ = write!(out, "</{}>", step.name);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders links so that each one's tag path (below the insertion point)
/// equals `template`. A `li` step repeats per link.
fn render_block(out: &mut String, template: &str, links: &[(String, String)]) {
    let steps: Vec<TagStep> = template.split_whitespace().filter_map(TagStep::parse).collect();
    let Some((anchor, containers)) = steps.split_last() else { return };
    let split = containers.iter().position(|s| s.name == "li" || s.name == "tr").unwrap_or(containers.len());
    let (outer, inner) = containers.split_at(split);
    for s in outer {
        open_tag(out, s);
    }
    for (href, text) in links {
        for s in inner {
            open_tag(out, s);
        }
        let mut open = String::new();
        open_tag(&mut open, anchor);
        open.pop();
        let _ = write!(out, "{open} href=\"{}\">{}", escape(href), escape(text));
        close_tag(out, anchor);
        for s in inner.iter().rev() {
            close_tag(out, s);
        }
    }
    for s in outer.iter().rev() {
        close_tag(out, s);
    }
}

const WORDS: &[&str] = &[
    "data", "report", "annual", "public", "survey", "region", "budget", "health", "open", "record", "index", "series",
    "statistics", "council", "table", "release", "update", "service", "monthly", "figures",
];

fn seeded(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

impl Site {
    pub fn root(&self) -> &Url {
        &self.root
    }

    pub fn resource(&self, url: &Url) -> Option<Resource> {
        if url.host_str() != Some(self.spec.host.as_str()) {
            return None;
        }
        let key = &url[url::Position::BeforePath..url::Position::AfterQuery];
        self.resources.get(key).copied()
    }

    pub fn url_of(&self, path: &str) -> Url {
        self.root.join(path).expect("site paths are valid")
    }

    pub fn target_urls(&self) -> Vec<Url> {
        self.targets.iter().map(|t| self.url_of(&t.path)).collect()
    }

    pub fn total_target_bytes(&self) -> u64 {
        self.targets.iter().map(|t| t.size as u64).sum()
    }

    /// Every addressable resource, sorted by path.
    pub fn paths(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.resources.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    /// Real HTML of page `id`.
    pub fn render_page(&self, id: usize) -> String {
        let page = &self.pages[id];
        let mut out = String::with_capacity(page.body_size + 512);
        let _ = write!(
            out,
            "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><title>{}</title></head>\n<body>",
            escape(&page.title)
        );
        for b in page.blocks.iter().filter(|b| !b.in_main && b.template.starts_with("header")) {
            render_block(&mut out, &b.template, &b.links);
        }
        let _ = write!(out, "\n<main id=\"content\"><h1>{}</h1>", escape(&page.title));
        for b in page.blocks.iter().filter(|b| b.in_main) {
            render_block(&mut out, &b.template, &b.links);
            out.push('\n');
        }
        let mut rng = seeded(self.spec.seed, id as u64 + 1);
        let budget = page.body_size.saturating_sub(out.len() + 200);
        let mut filler = String::new();
        while filler.len() < budget {
            filler.push_str("<p>");
            for _ in 0..rng.gen_range(8..20) {
                filler.push_str(WORDS[rng.gen_range(0..WORDS.len())]);
                filler.push(' ');
            }
            filler.push_str("</p>");
        }
        let _ = writeln!(out, "<div class=\"prose\">{filler}</div></main>");
        for b in page.blocks.iter().filter(|b| !b.in_main && !b.template.starts_with("header")) {
            render_block(&mut out, &b.template, &b.links);
        }
        out.push_str("\n</body></html>\n");
        out
    }

    /// Deterministic body of target `id`.
    pub fn render_target(&self, id: usize) -> Vec<u8> {
        let t = &self.targets[id];
        let mut body = Vec::with_capacity(t.size);
        let mut hasher = Sha256::new();
        hasher.update(self.spec.seed.to_le_bytes());
        hasher.update((id as u64).to_le_bytes());
        let mut block = hasher.finalize().to_vec();
        body.extend_from_slice(b"id,value,checksum\n");
        let mut row = 0u64;
        while body.len() < t.size {
            let line = format!("{row},{},{}\n", block[(row % 32) as usize], hex::encode(&block[..4]));
            body.extend_from_slice(line.as_bytes());
            row += 1;
            if row.is_multiple_of(32) {
                block = Sha256::digest(&block).to_vec();
            }
        }
        body.truncate(t.size);
        body
    }

    /// True MIME class of a URL, redirects followed.
    pub fn mime_class(&self, url: &Url) -> MimeClass {
        match self.resource(url) {
            Some(Resource::Page(_) | Resource::Redirect(_)) => MimeClass::Html,
            Some(Resource::Target(_)) => MimeClass::Target,
            _ => MimeClass::Neither,
        }
    }

    /// Number of target links on the page behind a URL.
    pub fn benefit(&self, url: &Url) -> u32 {
        match self.resource(url) {
            Some(Resource::Page(p)) | Some(Resource::Redirect(p)) => self.pages[p].target_links,
            _ => 0,
        }
    }

    pub fn serve(&self) -> SiteFetcher<'_> {
        SiteFetcher::new(self, ServeOptions::default())
    }

    /// Writes every resource (GET and HEAD) into a page store, as a record
    /// run with `blocklist` active would have.
    pub fn export(&self, store: &mut PageStore, blocklist: &MimeBlocklist) -> Result<usize, SimError> {
        let mut f = self.serve();
        let mut n = 0;
        for path in self.paths() {
            let url = self.url_of(path);
            let get = f.get(&url, blocklist);
            let head = f.head(&url);
            n += usize::from(store.put_get(url.as_str(), &get, 0)?);
            n += usize::from(store.put_head(url.as_str(), &head, 0)?);
        }
        Ok(n)
    }
}

/// Serving knobs on top of the site structure.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ServeOptions {
    /// Extra share of URLs answered with 500, chosen by hashing.
    pub error_rate: f64,
    pub error_seed: u64,
}

/// In-memory [`Fetcher`] over a [`Site`]; no delay.
#[derive(Debug, Clone)]
pub struct SiteFetcher<'s> {
    site: &'s Site,
    options: ServeOptions,
    gets: u64,
    heads: u64,
}

fn header_block(status: u16, mime: Option<&str>, len: usize, location: Option<&str>) -> u64 {
    let mut h = format!("HTTP/1.1 {status}\r\nServer: sim\r\nContent-Length: {len}\r\n");
    if let Some(m) = mime {
        let _ = write!(h, "Content-Type: {m}\r\n");
    }
    if let Some(l) = location {
        let _ = write!(h, "Location: {l}\r\n");
    }
    h.push_str("\r\n");
    h.len() as u64
}

impl<'s> SiteFetcher<'s> {
    pub fn new(site: &'s Site, options: ServeOptions) -> Self {
        Self {
            site,
            options,
            gets: 0,
            heads: 0,
        }
    }

    pub fn gets(&self) -> u64 {
        self.gets
    }

    pub fn heads(&self) -> u64 {
        self.heads
    }

    /// Whether the hashed error injection hits this URL.
    pub fn injected_error(&self, url: &Url) -> bool {
        if self.options.error_rate <= 0.0 {
            return false;
        }
        let mut h = Sha256::new();
        h.update(self.options.error_seed.to_le_bytes());
        h.update(url.as_str().as_bytes());
        let d = h.finalize();
        let x = u64::from_le_bytes(d[..8].try_into().expect("8 bytes")) as f64 / u64::MAX as f64;
        x < self.options.error_rate
    }

    fn answer(&self, url: &Url) -> (u16, Option<&'static str>, Option<String>, Option<Resource>) {
        if self.injected_error(url) {
            return (500, Some("text/html"), None, None);
        }
        match self.site.resource(url) {
            None => (404, Some("text/html"), None, None),
            Some(r @ Resource::Page(_)) => (200, Some("text/html"), None, Some(r)),
            Some(r @ Resource::Target(t)) => (200, Some(self.site.targets[t].mime), None, Some(r)),
            Some(r @ Resource::Media { video }) => (200, Some(if video { "video/mp4" } else { "image/jpeg" }), None, Some(r)),
            Some(Resource::Redirect(p)) => (301, None, Some(self.site.pages[p].path.clone()), None),
            Some(Resource::Error(s)) => (s, Some("text/html"), None, None),
        }
    }
}

impl Fetcher for SiteFetcher<'_> {
    fn get(&mut self, url: &Url, blocklist: &MimeBlocklist) -> FetchResponse {
        self.gets += 1;
        let (status, mime, location, res) = self.answer(url);
        if let Some(loc) = location {
            return FetchResponse::redirect(status, &loc, header_block(status, None, 0, Some(&loc)));
        }
        let body: Vec<u8> = match res {
            Some(Resource::Page(p)) => self.site.render_page(p).into_bytes(),
            Some(Resource::Target(t)) => self.site.render_target(t),
            Some(Resource::Media { video }) => vec![0u8; if video { 50_000 } else { 8_000 }],
            _ => format!("<html><body><p>{status}</p></body></html>").into_bytes(),
        };
        let header_size = header_block(status, mime, body.len(), None);
        if mime.is_some_and(|m| blocklist.matches(m)) {
            return FetchResponse {
                status,
                mime: mime.map(str::to_string),
                location: None,
                body: Vec::new(),
                body_size: 0,
                header_size,
                aborted: true,
            };
        }
        FetchResponse {
            status,
            mime: mime.map(str::to_string),
            location: None,
            body_size: body.len() as u64,
            body,
            header_size,
            aborted: false,
        }
    }

    fn network_requests(&self) -> u64 {
        self.gets + self.heads
    }

    fn head(&mut self, url: &Url) -> HeadResponse {
        self.heads += 1;
        let (status, mime, location, _) = self.answer(url);
        HeadResponse {
            status,
            mime: mime.map(str::to_string),
            header_size: header_block(status, mime, 0, location.as_deref()),
        }
    }
}
