//! Minimal robots.txt support: `User-agent`, `Allow` and `Disallow` lines
//! with `*` wildcards and `$` anchors; the longest matching rule wins and
//! `Allow` wins ties.

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Robots {
    rules: Vec<(bool, String)>,
}

fn glob(p: &[u8], s: &[u8], anchored: bool) -> bool {
    match p.split_first() {
        None => !anchored || s.is_empty(),
        Some((b'*', rest)) => (0..=s.len()).any(|i| glob(rest, &s[i..], anchored)),
        Some((c, rest)) => s.first() == Some(c) && glob(rest, &s[1..], anchored),
    }
}

fn pattern_matches(pattern: &str, path: &str) -> bool {
    match pattern.strip_suffix('$') {
        Some(p) => glob(p.as_bytes(), path.as_bytes(), true),
        None => glob(pattern.as_bytes(), path.as_bytes(), false),
    }
}

impl Robots {
    /// Allows everything.
    pub fn permissive() -> Self {
        Self::default()
    }

    /// Keeps the group naming `agent` (case-insensitive substring) if there
    /// is one, else the `*` group.
    pub fn parse(text: &str, agent: &str) -> Self {
        let agent = agent.to_ascii_lowercase();
        let mut specific: Vec<(bool, String)> = Vec::new();
        let mut generic: Vec<(bool, String)> = Vec::new();
        let mut found_specific = false;
        let mut current: Vec<String> = Vec::new();
        let mut in_rules = false;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let Some((key, value)) = line.split_once(':') else { continue };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            match key.as_str() {
                "user-agent" => {
                    if in_rules {
                        current.clear();
                        in_rules = false;
                    }
                    current.push(value.to_ascii_lowercase());
                }
                "allow" | "disallow" => {
                    in_rules = true;
                    if value.is_empty() {
                        continue;
                    }
                    let rule = (key == "allow", value.to_string());
                    if current.iter().any(|a| a != "*" && agent.contains(a.as_str())) {
                        found_specific = true;
                        specific.push(rule.clone());
                    }
                    if current.iter().any(|a| a == "*") {
                        generic.push(rule);
                    }
                }
                _ => {}
            }
        }
        Self {
            rules: if found_specific { specific } else { generic },
        }
    }

    /// `path` should include the query string, as in the request line.
    pub fn allowed(&self, path: &str) -> bool {
        let mut best: Option<(usize, bool)> = None;
        for (allow, pattern) in &self.rules {
            if pattern_matches(pattern, path) {
                let len = pattern.len();
                best = match best {
                    Some((l, a)) if l > len || (l == len && a) => Some((l, a)),
                    _ => Some((len, *allow)),
                };
            }
        }
        best.is_none_or(|(_, allow)| allow)
    }
}
