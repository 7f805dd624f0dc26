mod common;

use sbcrawl::config::ConfigError;
use sbcrawl::CrawlConfig;

#[test]
fn shipped_default_toml_is_the_default() {
    let cfg = CrawlConfig::load(common::workspace_root().join("config/default.toml")).unwrap();
    assert_eq!(cfg, CrawlConfig::default());
    assert_eq!(cfg.target_mimes.len(), 38);
    for mime in ["text/csv", "application/pdf", "application/vnd.ms-excel", "application/json", "application/zip"] {
        assert!(cfg.target_mimes.iter().any(|m| m == mime), "{mime}");
    }
    assert_eq!(cfg.mime_blocklist, ["image/*", "audio/*", "video/*"]);
    assert!(cfg.extension_blocklist.iter().any(|e| e == ".mp4"));
}

#[test]
fn documented_defaults() {
    let c = CrawlConfig::default();
    assert_eq!((c.n, c.m, c.w, c.b), (2, 12, 15, 10));
    assert_eq!(c.theta, 0.75);
    assert_eq!(c.alpha, 2.0 * 2f64.sqrt());
    assert_eq!((c.nu, c.epsilon_stop, c.gamma, c.kappa), (1000, 0.2, 0.05, 15));
    assert_eq!(c.politeness_delay, 1.0);
}

#[test]
fn errors_name_the_key() {
    for (text, key) in [("theta = 1.5", "theta"), ("m = 20\nw = 15", "w"), ("nu = 0", "nu")] {
        match CrawlConfig::from_toml_str(text) {
            Err(e @ ConfigError::Invalid { .. }) => assert!(e.to_string().contains(key), "{e}"),
            other => panic!("{text}: {other:?}"),
        }
    }
    assert!(CrawlConfig::from_toml_str("thetta = 0.5").is_err());
}

#[test]
fn toml_round_trip() {
    let c = CrawlConfig {
        seed: 99,
        budget: Some(1234.0),
        ..CrawlConfig::default()
    };
    assert_eq!(CrawlConfig::from_toml_str(&c.to_toml()).unwrap(), c);
}
