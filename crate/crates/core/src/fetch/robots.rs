//! Robots Exclusion Protocol: group selection by user-agent and
//! longest-match Allow/Disallow evaluation.

#[derive(Clone, Debug, PartialEq, Eq)]
struct Rule {
    allow: bool,
    pattern: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Group {
    agents: Vec<String>,
    rules: Vec<Rule>,
}

/// Parsed robots.txt. An empty or missing file allows everything.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RobotsTxt {
    groups: Vec<Group>,
}

impl RobotsTxt {
    pub fn allow_all() -> Self {
        RobotsTxt::default()
    }

    pub fn parse(text: &str) -> Self {
        let mut groups: Vec<Group> = Vec::new();
        let mut current: Option<Group> = None;
        let mut in_agents = false;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            match key.as_str() {
                "user-agent" => {
                    if !in_agents {
                        if let Some(g) = current.take() {
                            groups.push(g);
                        }
                        current = Some(Group::default());
                    }
                    in_agents = true;
                    if let Some(g) = current.as_mut() {
                        g.agents.push(value.to_ascii_lowercase());
                    }
                }
                "allow" | "disallow" => {
                    in_agents = false;
                    let Some(g) = current.as_mut() else { continue };
                    // "Disallow:" with no path means nothing is disallowed.
                    if value.is_empty() {
                        continue;
                    }
                    g.rules.push(Rule {
                        allow: key == "allow",
                        pattern: value.to_string(),
                    });
                }
                _ => {
                    // sitemap, crawl-delay, ... do not end an agent run
                }
            }
        }
        if let Some(g) = current {
            groups.push(g);
        }
        RobotsTxt { groups }
    }

    /// Picks the group whose agent token is the longest one contained in
    /// the product token of `user_agent`, falling back to `*`.
    fn group_for(&self, user_agent: &str) -> Vec<&Group> {
        let product = user_agent
            .split(['/', ' '])
            .next()
            .unwrap_or("")
            .to_ascii_lowercase();
        let mut best: Option<usize> = None;
        for g in &self.groups {
            for a in &g.agents {
                if a != "*" && !a.is_empty() && product.contains(a.as_str()) {
                    best = best.max(Some(a.len()));
                }
            }
        }
        match best {
            Some(len) => self
                .groups
                .iter()
                .filter(|g| {
                    g.agents
                        .iter()
                        .any(|a| a != "*" && a.len() == len && product.contains(a.as_str()))
                })
                .collect(),
            None => self
                .groups
                .iter()
                .filter(|g| g.agents.iter().any(|a| a == "*"))
                .collect(),
        }
    }

    /// `path` is the URL path plus `?query` if any. The longest matching
    /// pattern decides; on equal length Allow wins.
    pub fn allows(&self, user_agent: &str, path: &str) -> bool {
        let mut best: Option<(usize, bool)> = None;
        for g in self.group_for(user_agent) {
            for r in &g.rules {
                if pattern_matches(&r.pattern, path) {
                    let len = r.pattern.len();
                    best = match best {
                        Some((l, a)) if l > len || (l == len && a) => Some((l, a)),
                        _ => Some((len, r.allow)),
                    };
                }
            }
        }
        best.is_none_or(|(_, allow)| allow)
    }
}

/// Prefix match with `*` wildcards and an optional trailing `$` anchor.
fn pattern_matches(pattern: &str, path: &str) -> bool {
    let (pattern, anchored) = match pattern.strip_suffix('$') {
        Some(p) => (p, true),
        None => (pattern, false),
    };
    let parts: Vec<&str> = pattern.split('*').collect();
    let mut pos = 0usize;
    for (i, part) in parts.iter().enumerate() {
        if i == 0 {
            if !path.starts_with(part) {
                return false;
            }
            pos = part.len();
            continue;
        }
        let is_last = i == parts.len() - 1;
        if is_last && anchored {
            return path.len() >= pos + part.len() && path.ends_with(part);
        }
        match path[pos..].find(part) {
            Some(off) => pos += off + part.len(),
            None => return false,
        }
    }
    !anchored || pos == path.len()
}
