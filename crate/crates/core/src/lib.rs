//! Focused crawling of a single website for target documents, driven by a
//! sleeping bandit over clustered DOM tag-path actions.

pub mod action;
pub mod bandit;
pub mod baselines;
pub mod classifier;
pub mod config;
pub mod defaults;
pub mod engine;
pub mod experiment;
pub mod fetch;
pub mod fixtures;
pub mod graph;
pub mod metrics;
pub mod robots;
pub mod scalar;
pub mod sim;
pub mod store;
pub mod tagpath;

pub use action::{ActionId, ActionSpace, IndexBackend};
pub use bandit::{BanditConfig, BanditState};
pub use classifier::{UrlClass, UrlClassifier};
pub use config::CrawlConfig;
pub use engine::{crawl, CrawlTrace, LinkLabeler, Policy, SbPolicy};
pub use fetch::{FetchMode, FetchResponse, Fetcher, HeadResponse};
pub use graph::{CrawlTree, Frontier, Scope, WeightMode};
pub use scalar::Scalar;
pub use store::PageStore;
pub use tagpath::{HashParams, TagPath, TagPathVectorizer};

pub type ProjectedVectorF64 = tagpath::ProjectedVector<f64>;
pub type ProjectedVectorF32 = tagpath::ProjectedVector<f32>;
pub type ActionSpaceF64 = action::ActionSpace<f64>;
pub type ActionSpaceF32 = action::ActionSpace<f32>;
pub type BanditStateF64 = bandit::BanditState<f64>;
pub type BanditStateF32 = bandit::BanditState<f32>;
pub type UrlClassifierF64 = classifier::UrlClassifier<f64>;
pub type UrlClassifierF32 = classifier::UrlClassifier<f32>;
pub type SbPolicyF64 = engine::SbPolicy<f64>;
pub type SbPolicyF32 = engine::SbPolicy<f32>;
