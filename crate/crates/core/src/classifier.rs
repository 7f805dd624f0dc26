//! Online two-class URL classifier ("HTML" vs "Target").
//!
//! URLs are encoded as a bag of character bigrams over printable ASCII
//! (plus one bucket for everything else) and scored by a logistic
//! regression trained with mini-batch SGD. The first batch is labelled with
//! HEAD requests; afterwards every GET contributes a free label.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::scalar::Scalar;

/// 95 printable ASCII characters plus an OTHER bucket.
pub const ALPHABET: usize = 96;
/// Number of character-pair features.
pub const URL_FEATURE_DIM: usize = ALPHABET * ALPHABET;
const OTHER: usize = ALPHABET - 1;

/// Sparse real-valued feature vector, sorted by index.
pub type SparseFeatures<F> = Vec<(u32, F)>;

fn symbol(c: char) -> usize {
    match c {
        ' '..='~' => c as usize - ' ' as usize,
        _ => OTHER,
    }
}

/// Feature id of an ordered character pair.
pub fn pair_id(a: char, b: char) -> u32 {
    (symbol(a) * ALPHABET + symbol(b)) as u32
}

/// Counts every consecutive character pair of the URL string.
pub fn url_features<F: Scalar>(url: &str) -> SparseFeatures<F> {
    let chars: Vec<char> = url.chars().collect();
    let mut ids: Vec<u32> = chars.windows(2).map(|w| pair_id(w[0], w[1])).collect();
    ids.sort_unstable();
    let mut out: SparseFeatures<F> = Vec::new();
    for id in ids {
        match out.last_mut() {
            Some((last, c)) if *last == id => *c = *c + F::one(),
            _ => out.push((id, F::one())),
        }
    }
    out
}

/// Class of a URL as used by the crawler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UrlClass {
    #[serde(rename = "HTML")]
    Html,
    Target,
}

/// Class of a MIME type; "Neither" never leaves the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MimeClass {
    Html,
    Target,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub learning_rate: f64,
    /// Rate at batch k is `learning_rate / (1 + decay * k)`.
    pub decay: f64,
    pub l2: f64,
    pub epochs_per_batch: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            decay: 0.001,
            l2: 1e-6,
            epochs_per_batch: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model dump line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Binary logistic regression over sparse features.
#[derive(Debug, Clone)]
pub struct LogisticModel<F> {
    weights: Vec<F>,
    bias: F,
    trained_batches: u64,
    config: SgdConfig,
    rng: ChaCha8Rng,
}

fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

impl<F: Scalar> LogisticModel<F> {
    pub fn new(dim: usize, config: SgdConfig) -> Self {
        Self {
            weights: vec![F::zero(); dim],
            bias: F::zero(),
            trained_batches: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn bias(&self) -> F {
        self.bias
    }

    pub fn trained_batches(&self) -> u64 {
        self.trained_batches
    }

    pub fn decision(&self, x: &[(u32, F)]) -> F {
        x.iter()
            .filter(|(j, _)| (*j as usize) < self.weights.len())
            .fold(self.bias, |acc, &(j, v)| acc + self.weights[j as usize] * v)
    }

    /// Probability of the positive class.
    pub fn probability(&self, x: &[(u32, F)]) -> F {
        sigmoid(self.decision(x))
    }

    pub fn predict(&self, x: &[(u32, F)]) -> bool {
        self.decision(x) > F::zero()
    }

    pub fn learning_rate(&self) -> F {
        F::lit(self.config.learning_rate / (1.0 + self.config.decay * self.trained_batches as f64))
    }

    /// One SGD pass (per configured epoch) over the batch in seeded order.
    pub fn train_batch(&mut self, batch: &[(SparseFeatures<F>, bool)]) {
        if batch.is_empty() {
            return;
        }
        let lr = self.learning_rate();
        let shrink = F::one() - lr * F::lit(self.config.l2);
        let mut order: Vec<usize> = (0..batch.len()).collect();
        for _ in 0..self.config.epochs_per_batch.max(1) {
            order.shuffle(&mut self.rng);
            for &i in &order {
                let (x, y) = &batch[i];
                let target = if *y { F::one() } else { F::zero() };
                let grad = self.probability(x) - target;
                if shrink != F::one() {
                    for w in &mut self.weights {
                        *w = *w * shrink;
                    }
                }
                for &(j, v) in x {
                    if let Some(w) = self.weights.get_mut(j as usize) {
                        *w = *w - lr * grad * v;
                    }
                }
                self.bias = self.bias - lr * grad;
            }
        }
        self.trained_batches += 1;
    }

    /// Flat text dump: header lines then one `id weight` line per non-zero
    /// weight.
    pub fn dump(&self) -> String {
        let mut s = String::from("# sbcrawl logistic model v1\n");
        let _ = writeln!(s, "dim {}", self.weights.len());
        let _ = writeln!(s, "bias {:e}", self.bias.to_f64().unwrap_or(0.0));
        let _ = writeln!(s, "trained_batches {}", self.trained_batches);
        for (j, w) in self.weights.iter().enumerate() {
            if *w != F::zero() {
                let _ = writeln!(s, "{} {:e}", j, w.to_f64().unwrap_or(0.0));
            }
        }
        s
    }

    pub fn load(text: &str, config: SgdConfig) -> Result<Self, ModelError> {
        let err = |line: usize, reason: &str| ModelError::Parse {
            line: line + 1,
            reason: reason.to_string(),
        };
        let mut model: Option<Self> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(' ').ok_or_else(|| err(n, "expected two fields"))?;
            let value = value.trim();
            match (key, model.as_mut()) {
                ("dim", None) => {
                    let dim = usize::from_str(value).map_err(|_| err(n, "bad dim"))?;
                    model = Some(Self::new(dim, config));
                }
                ("bias", Some(m)) => {
                    m.bias = F::lit(f64::from_str(value).map_err(|_| err(n, "bad bias"))?);
                }
                ("trained_batches", Some(m)) => {
                    m.trained_batches = u64::from_str(value).map_err(|_| err(n, "bad count"))?;
                }
                (id, Some(m)) => {
                    let j = usize::from_str(id).map_err(|_| err(n, "bad feature id"))?;
                    let w = f64::from_str(value).map_err(|_| err(n, "bad weight"))?;
                    *m.weights.get_mut(j).ok_or_else(|| err(n, "feature id out of range"))? = F::lit(w);
                }
                (_, None) => return Err(err(n, "`dim` must come first")),
            }
        }
        model.ok_or_else(|| err(0, "empty dump"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Mini-batch size `b`.
    pub batch_size: usize,
    pub sgd: SgdConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            sgd: SgdConfig::default(),
        }
    }
}

/// Labelled URLs waiting for the next training step.
#[derive(Debug, Clone, Default)]
pub struct TrainingBuffer {
    pub urls: Vec<String>,
    pub labels: Vec<UrlClass>,
}

impl TrainingBuffer {
    pub fn len(&self) -> usize {
        self.urls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.urls.is_empty()
    }

    fn push(&mut self, url: &str, label: UrlClass) {
        self.urls.push(url.to_string());
        self.labels.push(label);
    }
}

/// Outcome of [`UrlClassifier::classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub label: UrlClass,
    /// A HEAD request was issued to obtain the label.
    pub probed: bool,
}

/// Online classifier with its HEAD-labelled bootstrap phase.
#[derive(Debug, Clone)]
pub struct UrlClassifier<F> {
    model: LogisticModel<F>,
    buffer: TrainingBuffer,
    batch_size: usize,
    initial_phase: bool,
    labels_seen: u64,
}

impl<F: Scalar> UrlClassifier<F> {
    pub fn new(config: ClassifierConfig) -> Self {
        Self {
            model: LogisticModel::new(URL_FEATURE_DIM, config.sgd),
            buffer: TrainingBuffer::default(),
            batch_size: config.batch_size.max(1),
            initial_phase: true,
            labels_seen: 0,
        }
    }

    pub fn model(&self) -> &LogisticModel<F> {
        &self.model
    }

    pub fn buffer(&self) -> &TrainingBuffer {
        &self.buffer
    }

    pub fn in_initial_phase(&self) -> bool {
        self.initial_phase
    }

    /// Total labelled pairs ever buffered.
    pub fn labels_seen(&self) -> u64 {
        self.labels_seen
    }

    /// Trains on the buffer once it holds `b` pairs; returns whether it did.
    pub fn maybe_train(&mut self) -> bool {
        if self.buffer.len() < self.batch_size {
            return false;
        }
        let buf = std::mem::take(&mut self.buffer);
        let batch: Vec<_> = buf
            .urls
            .iter()
            .zip(&buf.labels)
            .map(|(u, l)| (url_features(u), *l == UrlClass::Target))
            .collect();
        self.model.train_batch(&batch);
        self.initial_phase = false;
        true
    }

    /// Buffers a label obtained from a GET.
    pub fn record(&mut self, url: &Url, label: UrlClass) {
        self.buffer.push(url.as_str(), label);
        self.labels_seen += 1;
    }

    pub fn predict(&self, url: &Url) -> UrlClass {
        if self.model.predict(&url_features(url.as_str())) {
            UrlClass::Target
        } else {
            UrlClass::Html
        }
    }

    pub fn probability_target(&self, url: &Url) -> F {
        self.model.probability(&url_features(url.as_str()))
    }

    /// Classifies a URL. During the bootstrap phase `head` supplies the
    /// MIME class; `None` (failed HEAD) and "Neither" both label HTML.
    pub fn classify(&mut self, url: &Url, head: impl FnOnce(&Url) -> Option<MimeClass>) -> Classification {
        self.maybe_train();
        if self.initial_phase {
            let label = match head(url) {
                Some(MimeClass::Target) => UrlClass::Target,
                _ => UrlClass::Html,
            };
            self.record(url, label);
            return Classification { label, probed: true };
        }
        Classification {
            label: self.predict(url),
            probed: false,
        }
    }
}
