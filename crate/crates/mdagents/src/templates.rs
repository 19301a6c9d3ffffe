//! Prompt template loading and `{placeholder}` rendering.
//!
//! Nine plain-text templates drive every prompt the pipeline issues. The
//! shipped defaults are compiled in; a template directory can override any
//! subset of them file by file.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::{Captures, Regex};
use thiserror::Error;

/// Template names, each backed by `<name>.txt`.
pub const TEMPLATE_NAMES: [&str; 9] = [
    "moderator",
    "recruiter_mdt",
    "recruiter_ict",
    "solo_cot",
    "mdt_round1",
    "mdt_revise",
    "ict_tier",
    "tier_report",
    "synthesis",
];

const EMBEDDED: [(&str, &str); 9] = [
    ("moderator", include_str!("../templates/moderator.txt")),
    ("recruiter_mdt", include_str!("../templates/recruiter_mdt.txt")),
    ("recruiter_ict", include_str!("../templates/recruiter_ict.txt")),
    ("solo_cot", include_str!("../templates/solo_cot.txt")),
    ("mdt_round1", include_str!("../templates/mdt_round1.txt")),
    ("mdt_revise", include_str!("../templates/mdt_revise.txt")),
    ("ict_tier", include_str!("../templates/ict_tier.txt")),
    ("tier_report", include_str!("../templates/tier_report.txt")),
    ("synthesis", include_str!("../templates/synthesis.txt")),
];

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read template `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
}

impl TemplateSet {
    /// The compiled-in defaults.
    pub fn embedded() -> Self {
        let templates = EMBEDDED
            .iter()
            .map(|(name, text)| (name.to_string(), text.to_string()))
            .collect();
        Self { templates }
    }

    /// Loads `<name>.txt` files from `dir`; any file not present falls back
    /// to the embedded default, so partial overrides are fine.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let dir = dir.as_ref();
        let mut set = Self::embedded();
        for name in TEMPLATE_NAMES {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|source| TemplateError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                set.templates.insert(name.to_string(), text);
            }
        }
        Ok(set)
    }

    /// Renders the named template with the given substitutions. Placeholders
    /// without a provided value are left verbatim.
    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> String {
        let template = self
            .templates
            .get(name)
            .unwrap_or_else(|| panic!("unknown template `{name}`"));
        render(template, vars)
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").unwrap())
}

/// Single-pass `{placeholder}` substitution; values are inserted literally and
/// never re-scanned.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let map: BTreeMap<&str, &str> = vars.iter().copied().collect();
    placeholder_re()
        .replace_all(template, |caps: &Captures<'_>| {
            let key = &caps[1];
            match map.get(key) {
                Some(value) => (*value).to_string(),
                None => caps[0].to_string(),
            }
        })
        .into_owned()
}
