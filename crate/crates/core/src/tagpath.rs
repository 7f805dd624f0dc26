//! Tag paths: extraction from HTML, n-gram bag-of-words over a vocabulary that
//! grows during the crawl, and multiplicative-hash projection to a fixed
//! dimension `D = 2^m`.

use std::collections::HashMap;
use std::fmt;

use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::graph::resolve;
use crate::scalar::Scalar;

/// Elements whose href/src makes them hyperlinks.
pub const DEFAULT_LINK_TAGS: &[&str] = &["a", "area", "iframe", "frame", "embed"];

pub const BOS: &str = "<BOS>";
pub const EOS: &str = "<EOS>";

/// One DOM element on a tag path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TagStep {
    pub name: String,
    pub id: Option<String>,
    pub classes: Vec<String>,
}

impl TagStep {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_ascii_lowercase(),
            id: None,
            classes: Vec::new(),
        }
    }

    pub fn with_id(mut self, id: &str) -> Self {
        self.id = Some(id.to_string());
        self
    }

    pub fn with_class(mut self, class: &str) -> Self {
        self.classes.push(class.to_string());
        self
    }

    /// `name#id.class1.class2`, classes in document order.
    pub fn render(&self) -> String {
        let mut s = self.name.clone();
        if let Some(id) = &self.id {
            s.push('#');
            s.push_str(id);
        }
        for c in &self.classes {
            s.push('.');
            s.push_str(c);
        }
        s
    }

    /// Inverse of [`TagStep::render`] for ids and classes without `#`/`.`.
    pub fn parse(token: &str) -> Option<Self> {
        let mut parts = token.split('.');
        let head = parts.next()?;
        let (name, id) = match head.split_once('#') {
            Some((n, i)) => (n, Some(i.to_string())),
            None => (head, None),
        };
        if name.is_empty() {
            return None;
        }
        Some(Self {
            name: name.to_ascii_lowercase(),
            id,
            classes: parts.filter(|c| !c.is_empty()).map(str::to_string).collect(),
        })
    }
}

/// Root-to-link sequence of DOM elements; never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TagPath {
    steps: Vec<TagStep>,
}

impl TagPath {
    pub fn new(steps: Vec<TagStep>) -> Option<Self> {
        (!steps.is_empty()).then_some(Self { steps })
    }

    /// Parses the space-separated rendering, e.g. `"html body div#main a"`.
    pub fn parse(rendered: &str) -> Option<Self> {
        let steps = rendered
            .split_whitespace()
            .map(TagStep::parse)
            .collect::<Option<Vec<_>>>()?;
        Self::new(steps)
    }

    pub fn steps(&self) -> &[TagStep] {
        &self.steps
    }

    pub fn last(&self) -> &TagStep {
        self.steps.last().expect("non-empty tag path")
    }

    pub fn tokens(&self) -> Vec<String> {
        self.steps.iter().map(TagStep::render).collect()
    }

    pub fn reversed(&self) -> Self {
        let mut steps = self.steps.clone();
        steps.reverse();
        Self { steps }
    }
}

impl fmt::Display for TagPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(&s.render())?;
        }
        Ok(())
    }
}

/// A hyperlink found in a page.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedLink {
    pub url: Url,
    pub path: TagPath,
    pub anchor_text: String,
}

fn step_of(el: &ElementRef<'_>) -> TagStep {
    let v = el.value();
    TagStep {
        name: v.name().to_ascii_lowercase(),
        id: v.attr("id").map(str::trim).filter(|s| !s.is_empty()).map(str::to_string),
        classes: v
            .attr("class")
            .map(|c| c.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default(),
    }
}

/// Extracts every hyperlink-bearing element with a resolvable target.
///
/// Parsing is lenient (html5ever error recovery); garbage input yields an
/// empty list. `<base href>` is honoured when present.
pub fn extract_links(html: &[u8], base: &Url, link_tags: &[&str]) -> Vec<ExtractedLink> {
    let text = String::from_utf8_lossy(html);
    let doc = Html::parse_document(&text);
    let base = Selector::parse("base[href]")
        .ok()
        .and_then(|sel| doc.select(&sel).next())
        .and_then(|b| b.value().attr("href"))
        .and_then(|h| resolve(base, h))
        .unwrap_or_else(|| base.clone());

    let selector = match Selector::parse(&link_tags.join(", ")) {
        Ok(s) => s,
        Err(_) => return Vec::new(),
    };
    let mut out = Vec::new();
    for el in doc.select(&selector) {
        let v = el.value();
        let href = match v.name() {
            "a" | "area" => v.attr("href"),
            _ => v.attr("src").or_else(|| v.attr("href")),
        };
        let Some(url) = href.and_then(|h| resolve(&base, h)) else {
            continue;
        };
        let mut steps: Vec<TagStep> = el
            .ancestors()
            .filter_map(ElementRef::wrap)
            .map(|a| step_of(&a))
            .collect();
        steps.reverse();
        steps.push(step_of(&el));
        let anchor_text = el.text().collect::<Vec<_>>().join(" ");
        let anchor_text = anchor_text.split_whitespace().collect::<Vec<_>>().join(" ");
        out.push(ExtractedLink {
            url,
            path: TagPath { steps },
            anchor_text,
        });
    }
    out
}

/// Sparse count vector over vocabulary ids, sorted by id.
pub type SparseCounts = Vec<(u32, u32)>;

/// Append-only n-gram vocabulary; ids are dense and assigned in first-seen
/// order.
#[derive(Debug, Clone)]
pub struct NgramVocabulary {
    n: usize,
    ids: HashMap<String, u32>,
    entries: Vec<String>,
}

const NGRAM_SEP: char = '\u{1f}';

impl NgramVocabulary {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "n-gram order must be positive");
        Self {
            n,
            ids: HashMap::new(),
            entries: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Current size `d`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id_of(&self, ngram: &[&str]) -> Option<u32> {
        self.ids.get(&ngram.join(&NGRAM_SEP.to_string())).copied()
    }

    /// Tokens of the n-gram with this id.
    pub fn ngram(&self, id: u32) -> Option<Vec<&str>> {
        self.entries
            .get(id as usize)
            .map(|e| e.split(NGRAM_SEP).collect())
    }

    fn windows(&self, path: &TagPath) -> Vec<String> {
        let mut tokens = Vec::with_capacity(path.steps().len() + 2);
        tokens.push(BOS.to_string());
        tokens.extend(path.tokens());
        tokens.push(EOS.to_string());
        let sep = NGRAM_SEP.to_string();
        if tokens.len() < self.n {
            return vec![tokens.join(&sep)];
        }
        tokens.windows(self.n).map(|w| w.join(&sep)).collect()
    }

    fn intern(&mut self, key: String) -> u32 {
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let id = u32::try_from(self.entries.len()).expect("vocabulary fits in u32");
        self.ids.insert(key.clone(), id);
        self.entries.push(key);
        id
    }

    /// Bag-of-words of the path's n-grams (BOS/EOS framed), extending the
    /// vocabulary with unseen n-grams.
    pub fn bow(&mut self, path: &TagPath) -> SparseCounts {
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for key in self.windows(path) {
            let id = self.intern(key);
            *counts.entry(id).or_default() += 1;
        }
        let mut v: SparseCounts = counts.into_iter().collect();
        v.sort_unstable_by_key(|&(id, _)| id);
        v
    }

    /// Bag-of-words without extending the vocabulary; unseen n-grams dropped.
    pub fn bow_frozen(&self, path: &TagPath) -> SparseCounts {
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for key in self.windows(path) {
            if let Some(&id) = self.ids.get(&key) {
                *counts.entry(id).or_default() += 1;
            }
        }
        let mut v: SparseCounts = counts.into_iter().collect();
        v.sort_unstable_by_key(|&(id, _)| id);
        v
    }
}

/// Parameters of `h(x) = floor(((prime * x) mod 2^w) / 2^(w-m))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashParams {
    pub prime: u64,
    pub w: u32,
    pub m: u32,
}

/// Prime used in the small illustrative projection (`w = 11`, `m = 2`).
pub const ILLUSTRATION_PRIME: u64 = 766_245_317;
/// Default production prime, 31 bits. Its low 15 bits (20251) sit next to
/// 2^15/φ, so consecutive n-gram ids spread over the buckets at the default
/// `w = 15`. A Mersenne prime would be a poor choice: (2^31 - 1)·x mod 2^15
/// is just -x, which sends runs of 2^(w-m) consecutive ids to one bucket.
pub const DEFAULT_PRIME: u64 = 1_310_805_787;

impl Default for HashParams {
    fn default() -> Self {
        Self {
            prime: DEFAULT_PRIME,
            w: 15,
            m: 12,
        }
    }
}

impl HashParams {
    pub fn new(prime: u64, w: u32, m: u32) -> Result<Self, String> {
        let p = Self { prime, w, m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.m == 0 {
            return Err("m must be positive".into());
        }
        if self.w <= self.m {
            return Err(format!("w ({}) must exceed m ({})", self.w, self.m));
        }
        if self.w > 64 {
            return Err(format!("w ({}) must be at most 64", self.w));
        }
        if self.prime.is_multiple_of(2) {
            return Err(format!("prime ({}) must be odd", self.prime));
        }
        Ok(())
    }

    /// Output dimension `D = 2^m`.
    pub fn dim(&self) -> usize {
        1usize << self.m
    }
}

/// Exact integer evaluation of the multiplicative hash.
pub fn hash_index(i: u64, params: &HashParams) -> u32 {
    let product = params.prime as u128 * i as u128;
    let reduced = if params.w >= 128 {
        product
    } else {
        product & ((1u128 << params.w) - 1)
    };
    (reduced >> (params.w - params.m)) as u32
}

/// Sparse vector of fixed dimension `D`; absent positions are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedVector<F> {
    dim: usize,
    entries: Vec<(u32, F)>,
}

impl<F: Scalar> ProjectedVector<F> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds from (position, value) pairs; zeros dropped, positions sorted.
    pub fn from_entries(dim: usize, mut entries: Vec<(u32, F)>) -> Self {
        entries.retain(|&(j, v)| v != F::zero() && (j as usize) < dim);
        entries.sort_unstable_by_key(|&(j, _)| j);
        entries.dedup_by_key(|&mut (j, _)| j);
        Self { dim, entries }
    }

    pub fn from_dense(values: &[F]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != F::zero())
            .map(|(j, v)| (j as u32, *v))
            .collect();
        Self {
            dim: values.len(),
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, F)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, j: usize) -> F {
        self.entries
            .binary_search_by_key(&(j as u32), |&(k, _)| k)
            .map(|i| self.entries[i].1)
            .unwrap_or_else(|_| F::zero())
    }

    pub fn to_dense(&self) -> Vec<F> {
        let mut v = vec![F::zero(); self.dim];
        for &(j, x) in &self.entries {
            v[j as usize] = x;
        }
        v
    }

    pub fn dot(&self, other: &Self) -> F {
        let (mut i, mut k) = (0, 0);
        let mut acc = F::zero();
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && k < b.len() {
            match a[i].0.cmp(&b[k].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => k += 1,
                std::cmp::Ordering::Equal => {
                    acc = acc + a[i].1 * b[k].1;
                    i += 1;
                    k += 1;
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> F {
        self.entries.iter().map(|&(_, v)| v * v).sum::<F>().sqrt()
    }

    /// `self * keep + other * add`, merged over the union of supports.
    pub fn axpby(&self, keep: F, other: &Self, add: F) -> Self {
        let (a, b) = (&self.entries, &other.entries);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut k) = (0, 0);
        while i < a.len() || k < b.len() {
            let next = match (a.get(i), b.get(k)) {
                (Some(x), Some(y)) if x.0 == y.0 => {
                    i += 1;
                    k += 1;
                    (x.0, x.1 * keep + y.1 * add)
                }
                (Some(x), Some(y)) if x.0 < y.0 => {
                    i += 1;
                    (x.0, x.1 * keep)
                }
                (Some(x), None) => {
                    i += 1;
                    (x.0, x.1 * keep)
                }
                (_, Some(y)) => {
                    k += 1;
                    (y.0, y.1 * add)
                }
                (None, None) => unreachable!(),
            };
            if next.1 != F::zero() {
                out.push(next);
            }
        }
        Self {
            dim: self.dim,
            entries: out,
        }
    }
}

/// Projects a bag-of-words over `d` vocabulary ids to `D = 2^m` positions:
/// each hit position gets the mean of the bow values of every id `i < d`
/// hashing to it (zero counts included); unhit positions stay zero.
///
/// This walks all `d` ids; [`TagPathVectorizer`] caches the bucket sizes.
pub fn project<F: Scalar>(bow: &[(u32, u32)], d: usize, params: &HashParams) -> ProjectedVector<F> {
    assert!(d >= 1, "projection needs a non-empty vocabulary");
    let mut sizes = vec![0u32; params.dim()];
    for i in 0..d {
        sizes[hash_index(i as u64, params) as usize] += 1;
    }
    project_with_sizes(bow, d, params, &sizes)
}

fn project_with_sizes<F: Scalar>(
    bow: &[(u32, u32)],
    d: usize,
    params: &HashParams,
    sizes: &[u32],
) -> ProjectedVector<F> {
    let mut sums: HashMap<u32, u64> = HashMap::new();
    for &(i, c) in bow {
        if (i as usize) < d && c > 0 {
            *sums.entry(hash_index(i as u64, params)).or_default() += c as u64;
        }
    }
    let entries = sums
        .into_iter()
        .map(|(j, s)| (j, F::count(s) / F::count(sizes[j as usize] as u64)))
        .collect();
    ProjectedVector::from_entries(params.dim(), entries)
}

/// Vocabulary plus hash parameters with incrementally maintained bucket sizes.
#[derive(Debug, Clone)]
pub struct TagPathVectorizer {
    vocab: NgramVocabulary,
    params: HashParams,
    bucket_sizes: Vec<u32>,
    hashed: usize,
}

impl TagPathVectorizer {
    pub fn new(n: usize, params: HashParams) -> Self {
        Self {
            vocab: NgramVocabulary::new(n),
            bucket_sizes: vec![0; params.dim()],
            params,
            hashed: 0,
        }
    }

    pub fn vocab(&self) -> &NgramVocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &HashParams {
        &self.params
    }

    fn sync_buckets(&mut self) {
        while self.hashed < self.vocab.len() {
            let j = hash_index(self.hashed as u64, &self.params) as usize;
            self.bucket_sizes[j] += 1;
            self.hashed += 1;
        }
    }

    /// BoW (extending the vocabulary) followed by projection.
    pub fn vectorize<F: Scalar>(&mut self, path: &TagPath) -> ProjectedVector<F> {
        let bow = self.vocab.bow(path);
        self.sync_buckets();
        project_with_sizes(&bow, self.vocab.len(), &self.params, &self.bucket_sizes)
    }

    /// Projection against the current vocabulary without growing it.
    pub fn vectorize_frozen<F: Scalar>(&self, path: &TagPath) -> ProjectedVector<F> {
        let bow = self.vocab.bow_frozen(path);
        if self.vocab.is_empty() {
            return ProjectedVector::zeros(self.params.dim());
        }
        project_with_sizes(&bow, self.vocab.len(), &self.params, &self.bucket_sizes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_url;

    fn fig_params() -> HashParams {
        HashParams::new(ILLUSTRATION_PRIME, 11, 2).unwrap()
    }

    #[test]
    fn hash_worked_example() {
        let p = fig_params();
        assert_eq!(hash_index(2, &p), 1);
        assert_eq!(hash_index(4, &p), 3);
        assert_eq!(hash_index(8, &p), 3);
        assert_eq!(hash_index(9, &p), 3);
        assert_eq!(hash_index(0, &p), 0);
        assert_eq!(hash_index(0, &HashParams::default()), 0);
    }

    #[test]
    fn hash_params_validation() {
        assert!(HashParams::new(7, 4, 4).is_err());
        assert!(HashParams::new(8, 11, 2).is_err());
        assert!(HashParams::new(7, 65, 2).is_err());
        assert!(HashParams::new(7, 64, 2).is_ok());
    }

    #[test]
    fn extracts_paths_with_ids_and_classes() {
        let html = br#"<html><body><div id="main"><ul class="datasets">
            <li><a href="/data/file.csv">Data</a></li>
            <li><a href="report.pdf">Report</a></li>
            </ul></div><p>no link</p></body></html>"#;
        let base = parse_url("https://www.a.com/dir/index.html").unwrap();
        let links = extract_links(html, &base, DEFAULT_LINK_TAGS);
        assert_eq!(links.len(), 2);
        assert_eq!(links[0].path.to_string(), "html body div#main ul.datasets li a");
        assert_eq!(links[0].url.as_str(), "https://www.a.com/data/file.csv");
        assert_eq!(links[1].url.as_str(), "https://www.a.com/dir/report.pdf");
        assert_eq!(links[0].path, links[1].path);
        assert_eq!(links[0].anchor_text, "Data");
    }

    #[test]
    fn extraction_edge_cases() {
        let base = parse_url("http://x.org/").unwrap();
        assert!(extract_links(b"<html><body><p>hi</p></body></html>", &base, DEFAULT_LINK_TAGS).is_empty());
        assert!(extract_links(&[0xff, 0xfe, 0x00, 0x3c], &base, DEFAULT_LINK_TAGS).is_empty());
        let html = br#"<head><base href="http://x.org/sub/"></head><body>
            <iframe src="frame.html"></iframe><a>no href</a>
            <a href="mailto:x@x.org">m</a><area href="map.html"></body>"#;
        let links = extract_links(html, &base, DEFAULT_LINK_TAGS);
        let urls: Vec<_> = links.iter().map(|l| l.url.as_str()).collect();
        assert_eq!(urls, ["http://x.org/sub/frame.html", "http://x.org/sub/map.html"]);
        assert_eq!(links[0].path.last().name, "iframe");
    }

    #[test]
    fn class_order_is_document_order() {
        let base = parse_url("http://x.org/").unwrap();
        let links = extract_links(br#"<body><a class="z a" href="/q">q</a></body>"#, &base, &["a"]);
        assert_eq!(links[0].path.last().render(), "a.z.a");
    }

    #[test]
    fn rendering_round_trips() {
        let p = TagPath::parse("html body div#main ul.datasets.big li a").unwrap();
        assert_eq!(p.steps()[3].classes, ["datasets", "big"]);
        assert_eq!(p.to_string(), "html body div#main ul.datasets.big li a");
        assert!(TagPath::parse("").is_none());
    }

    #[test]
    fn fresh_vocabulary_growth() {
        let mut v = NgramVocabulary::new(2);
        let p = TagPath::parse("html body div a").unwrap();
        let bow = v.bow(&p);
        assert_eq!(v.len(), 5);
        assert!(bow.iter().all(|&(_, c)| c == 1));
        let again = v.bow(&p);
        assert_eq!(bow, again);
        assert_eq!(v.len(), 5);
        assert_eq!(v.ngram(0).unwrap(), [BOS, "html"]);
        assert_eq!(v.id_of(&["a", EOS]), Some(4));
    }

    #[test]
    fn repeated_bigrams_are_counted() {
        let mut v = NgramVocabulary::new(2);
        let bow = v.bow(&TagPath::parse("div div div a").unwrap());
        let dd = v.id_of(&["div", "div"]).unwrap();
        assert_eq!(bow.iter().find(|e| e.0 == dd).unwrap().1, 2);
    }

    /// Vocabulary of 5 entries grows to 11 with a second path; projecting
    /// the new path reproduces the illustrated collision at position 3.
    #[test]
    fn illustrated_projection() {
        let params = fig_params();
        let mut vec = TagPathVectorizer::new(2, params);
        let first = TagPath::parse("html body div a").unwrap();
        let _: ProjectedVector<f64> = vec.vectorize(&first);
        assert_eq!(vec.vocab().len(), 5);
        let second = TagPath::parse("html body div a div#main ul.datasets li a.dl iframe").unwrap();
        let mut vocab = vec.vocab().clone();
        let bow = vocab.bow(&second);
        assert_eq!(vocab.len(), 11);
        assert_eq!(bow.len(), 10);
        let pd: ProjectedVector<f64> = vec.vectorize(&second);
        assert_eq!(pd.dim(), 4);
        let dense = pd.to_dense();
        assert_eq!(&dense[..3], &[1.0, 1.0, 1.0]);
        assert!((dense[3] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn projection_trivial_cases() {
        let p = fig_params();
        let v: ProjectedVector<f64> = project(&[(0, 3)], 1, &p);
        assert_eq!(v.to_dense(), [3.0, 0.0, 0.0, 0.0]);
        let z: ProjectedVector<f64> = project(&[], 7, &p);
        assert!(z.is_zero());
        assert_eq!(z.to_dense().len(), 4);
    }

    #[test]
    fn reversal_changes_bow() {
        let mut v = NgramVocabulary::new(2);
        let p = TagPath::parse("html body ul li a").unwrap();
        let a = v.bow(&p);
        let b = v.bow(&p.reversed());
        assert_ne!(a, b);
    }

    #[test]
    fn sparse_algebra() {
        let a = ProjectedVector::from_dense(&[1.0f64, 0.0, 2.0, 0.0]);
        let b = ProjectedVector::from_dense(&[0.0f64, 3.0, 4.0, 0.0]);
        assert_eq!(a.dot(&b), 8.0);
        assert_eq!(a.axpby(0.5, &b, 0.5).to_dense(), [0.5, 1.5, 3.0, 0.0]);
        assert_eq!(a.get(2), 2.0);
        assert_eq!(a.get(3), 0.0);
        assert!((b.norm() - 5.0).abs() < 1e-12);
    }
}
