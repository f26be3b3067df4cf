//! Partial delexicalisation: slot values whose rule fires are replaced by
//! `X-<attribute>` placeholders in both the MR and the output text.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use crate::data::{MeaningRepresentation, Slot, TextOutput};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelexLevel {
    Full,
    NamesOnly,
    None,
}

impl fmt::Display for DelexLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DelexLevel::Full => "full",
            DelexLevel::NamesOnly => "names_only",
            DelexLevel::None => "none",
        })
    }
}

impl FromStr for DelexLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(DelexLevel::Full),
            "names_only" => Ok(DelexLevel::NamesOnly),
            "none" | "-" => Ok(DelexLevel::None),
            other => Err(Error::Config(format!("unknown delexicalisation level {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelexRule {
    pub attribute: String,
    pub level: DelexLevel,
    /// Values never replaced (compared case-insensitively).
    pub exceptions: BTreeSet<String>,
}

impl DelexRule {
    fn new(attribute: &str, level: DelexLevel, exceptions: &[&str]) -> Self {
        Self {
            attribute: attribute.to_string(),
            level,
            exceptions: exceptions.iter().map(|e| e.to_lowercase()).collect(),
        }
    }

    pub fn fires_for(&self, value: &str) -> bool {
        match self.level {
            DelexLevel::None => false,
            DelexLevel::Full => !value.trim().is_empty(),
            DelexLevel::NamesOnly => {
                !value.trim().is_empty() && !self.exceptions.contains(&value.trim().to_lowercase())
            }
        }
    }
}

/// The attribute table: full for names and identifiers, names-only for
/// area, none for categorical attributes.
pub fn default_rules() -> Vec<DelexRule> {
    use DelexLevel::*;
    vec![
        DelexRule::new("address", Full, &[]),
        DelexRule::new("nearby venue/monument name", Full, &[]),
        DelexRule::new("phone number", Full, &[]),
        DelexRule::new("postcode", Full, &[]),
        DelexRule::new("price", Full, &[]),
        DelexRule::new("venue count", Full, &[]),
        DelexRule::new("venue name", Full, &[]),
        DelexRule::new("area", NamesOnly, &["city centre", "riverside"]),
        DelexRule::new("customer rating", None, &[]),
        DelexRule::new("food/cuisine", None, &[]),
        DelexRule::new("kids-friendly", None, &[]),
        DelexRule::new("meal type", None, &[]),
        DelexRule::new("price range", None, &[]),
        DelexRule::new("venue type", None, &[]),
    ]
}

/// Corpus attribute identifiers mapped onto the descriptive rule names.
const ALIASES: &[(&str, &str)] = &[
    ("name", "venue name"),
    ("near", "nearby venue/monument name"),
    ("phone", "phone number"),
    ("count", "venue count"),
    ("customerrating", "customer rating"),
    ("food", "food/cuisine"),
    ("familyfriendly", "kids-friendly"),
    ("kidsallowed", "kids-friendly"),
    ("goodformeal", "meal type"),
    ("pricerange", "price range"),
    ("eattype", "venue type"),
    ("type", "venue type"),
];

fn normalize_attribute(attr: &str) -> String {
    attr.trim().to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Placeholder token for an attribute, e.g. `X-name`, `X-venue_name`.
pub fn placeholder(attribute: &str) -> String {
    format!("X-{}", normalize_attribute(attribute).replace(' ', "_"))
}

pub fn is_placeholder(token: &str) -> bool {
    let t = token.to_lowercase();
    t.len() > 2 && t.starts_with("x-")
}

/// A rule table with alias-aware lookup. Attributes without a rule are not
/// delexicalised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<DelexRule>,
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::new(default_rules())
    }
}

impl RuleSet {
    pub fn new(rules: Vec<DelexRule>) -> Self {
        Self { rules }
    }

    pub fn rules(&self) -> &[DelexRule] {
        &self.rules
    }

    pub fn lookup(&self, attribute: &str) -> Option<&DelexRule> {
        let norm = normalize_attribute(attribute);
        let find = |name: &str| self.rules.iter().find(|r| normalize_attribute(&r.attribute) == name);
        find(&norm).or_else(|| {
            let squashed: String = norm.chars().filter(|c| !c.is_whitespace() && *c != '_').collect();
            ALIASES
                .iter()
                .find(|(alias, _)| *alias == squashed)
                .and_then(|(_, target)| find(target))
        })
    }

    /// Parses `attribute<TAB>level<TAB>exceptions` lines. `-` or an empty
    /// third column means no exceptions; `#` starts a comment line.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut rules = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 || cols.len() > 3 {
                return Err(Error::parse(origin, n + 1, "expected attribute<TAB>level<TAB>exceptions"));
            }
            let level: DelexLevel = cols[1].parse().map_err(|e: Error| Error::parse(origin, n + 1, e.to_string()))?;
            let exc = cols.get(2).map(|s| s.trim()).unwrap_or("");
            if level == DelexLevel::NamesOnly && exc.is_empty() {
                return Err(Error::parse(
                    origin,
                    n + 1,
                    "names_only needs exceptions or '-' for an explicitly empty list",
                ));
            }
            let exceptions = if exc == "-" {
                BTreeSet::new()
            } else {
                exc.split(',')
                    .map(|e| e.trim().to_lowercase())
                    .filter(|e| !e.is_empty())
                    .collect()
            };
            rules.push(DelexRule {
                attribute: cols[0].trim().to_string(),
                level,
                exceptions,
            });
        }
        Ok(Self { rules })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            let exc = if r.exceptions.is_empty() {
                "-".to_string()
            } else {
                r.exceptions.iter().cloned().collect::<Vec<_>>().join(",")
            };
            out.push_str(&format!("{}\t{}\t{}\n", r.attribute, r.level, exc));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution {
    pub attribute: String,
    /// The text as it appeared in the output (original casing).
    pub original: String,
    pub placeholder: String,
    /// Byte span in the original text; `None` when the value was not found.
    pub span: Option<Range<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delexicalized {
    pub mr: MeaningRepresentation,
    pub text: TextOutput,
    pub substitutions: Vec<Substitution>,
}

fn is_boundary(text: &str, byte: usize) -> bool {
    let before = text[..byte].chars().next_back();
    let after = text[byte..].chars().next();
    !(before.is_some_and(char::is_alphanumeric) && after.is_some_and(char::is_alphanumeric))
}

/// Case-insensitive whole-word occurrences of `needle` in `haystack`.
fn find_all(haystack: &str, needle: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let needle_chars: Vec<char> = needle.chars().flat_map(char::to_lowercase).collect();
    if needle_chars.is_empty() {
        return out;
    }
    let indices: Vec<(usize, char)> = haystack.char_indices().collect();
    for start in 0..indices.len() {
        let mut hi = start;
        let mut ni = 0;
        // match char-by-char, expanding lowercase forms on the haystack side
        'scan: while ni < needle_chars.len() {
            let Some(&(_, c)) = indices.get(hi) else { break };
            for lc in c.to_lowercase() {
                if needle_chars.get(ni) != Some(&lc) {
                    break 'scan;
                }
                ni += 1;
            }
            hi += 1;
        }
        if ni == needle_chars.len() {
            let s = indices[start].0;
            let e = indices.get(hi).map_or(haystack.len(), |p| p.0);
            if e > s && is_boundary(haystack, s) && is_boundary(haystack, e) {
                out.push(s..e);
            }
        }
    }
    out
}

/// Replaces firing slot values by placeholders in the MR and every
/// case-insensitive whole-word occurrence in the text, longest values
/// first, never overlapping an earlier replacement.
pub fn delexicalize(mr: &MeaningRepresentation, text: &TextOutput, rules: &RuleSet) -> Delexicalized {
    let mut slots: Vec<Slot> = Vec::with_capacity(mr.slots().len());
    let mut targets: Vec<(String, String, String)> = Vec::new();
    for slot in mr.slots() {
        let fires = rules.lookup(&slot.attribute).is_some_and(|r| r.fires_for(&slot.value));
        if fires {
            let ph = placeholder(&slot.attribute);
            targets.push((slot.attribute.clone(), slot.value.trim().to_string(), ph.clone()));
            slots.push(Slot {
                attribute: slot.attribute.clone(),
                value: ph,
            });
        } else {
            slots.push(slot.clone());
        }
    }
    targets.sort_by(|a, b| b.1.chars().count().cmp(&a.1.chars().count()));

    let raw = text.raw();
    let mut accepted: Vec<(Range<usize>, usize)> = Vec::new();
    let mut substitutions = Vec::new();
    for (ti, (attribute, value, ph)) in targets.iter().enumerate() {
        let mut found = false;
        for span in find_all(raw, value) {
            if accepted.iter().any(|(a, _)| a.start < span.end && span.start < a.end) {
                continue;
            }
            found = true;
            accepted.push((span, ti));
        }
        if !found {
            substitutions.push(Substitution {
                attribute: attribute.clone(),
                original: value.clone(),
                placeholder: ph.clone(),
                span: None,
            });
        }
    }
    accepted.sort_by_key(|(s, _)| s.start);

    let mut out = String::with_capacity(raw.len());
    let mut cursor = 0;
    for (span, ti) in &accepted {
        let (attribute, _, ph) = &targets[*ti];
        out.push_str(&raw[cursor..span.start]);
        out.push_str(ph);
        cursor = span.end;
        substitutions.push(Substitution {
            attribute: attribute.clone(),
            original: raw[span.clone()].to_string(),
            placeholder: ph.clone(),
            span: Some(span.clone()),
        });
    }
    out.push_str(&raw[cursor..]);

    Delexicalized {
        mr: mr.with_slots(slots),
        text: TextOutput::new(out),
        substitutions,
    }
}

/// Undoes the text replacements recorded in `substitutions`.
pub fn relexicalize(delexed: &str, substitutions: &[Substitution]) -> String {
    let mut placed: Vec<&Substitution> = substitutions.iter().filter(|s| s.span.is_some()).collect();
    placed.sort_by_key(|s| s.span.as_ref().map(|r| r.start));
    // positions of each placeholder in the delexicalised text
    let mut shift: isize = 0;
    let mut located = Vec::with_capacity(placed.len());
    for s in &placed {
        let span = s.span.as_ref().expect("filtered");
        let start = (span.start as isize + shift) as usize;
        located.push((start..start + s.placeholder.len(), s.original.as_str()));
        shift += s.placeholder.len() as isize - span.len() as isize;
    }
    let mut out = delexed.to_string();
    for (range, original) in located.into_iter().rev() {
        out.replace_range(range, original);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn apply(mr: &str, text: &str) -> Delexicalized {
        delexicalize(&mr.parse().unwrap(), &TextOutput::new(text), &RuleSet::default())
    }

    #[test]
    fn table_levels() {
        let rules = RuleSet::default();
        assert_eq!(rules.lookup("venue name").unwrap().level, DelexLevel::Full);
        assert_eq!(rules.lookup("name").unwrap().level, DelexLevel::Full);
        let area = rules.lookup("area").unwrap();
        assert_eq!(area.level, DelexLevel::NamesOnly);
        assert_eq!(
            area.exceptions.iter().map(String::as_str).collect::<Vec<_>>(),
            ["city centre", "riverside"]
        );
        assert_eq!(rules.lookup("food/cuisine").unwrap().level, DelexLevel::None);
        assert_eq!(rules.lookup("eatType").unwrap().level, DelexLevel::None);
        assert_eq!(rules.lookup("customer rating").unwrap().level, DelexLevel::None);
        assert!(rules.lookup("unheard_of").is_none());
        assert_eq!(default_rules().len(), 14);
    }

    #[test]
    fn replaces_venue_name() {
        let d = apply(
            "inform_only_match(name='hotel drisco', area='pacific heights')",
            "the hotel drisco in the pacific heights area",
        );
        assert_eq!(d.text.raw(), "the X-name in the X-area area");
        assert_eq!(d.mr.to_string(), "inform_only_match(name='X-name', area='X-area')");
        assert_eq!(d.substitutions.len(), 2);
    }

    #[test]
    fn area_exceptions_untouched() {
        let d = apply("inform(area='city centre')", "it is in the City Centre.");
        assert_eq!(d.text.raw(), "it is in the City Centre.");
        assert_eq!(d.mr.to_string(), "inform(area='city centre')");
        assert!(d.substitutions.is_empty());
    }

    #[test]
    fn overlapping_slots_replaced_independently() {
        let d = apply(
            "inform(name='The Cricketers', near='Café Sicilia', eatType='coffee shop')",
            "The Cricketers is a coffee shop near Café Sicilia. the cricketers is cheap.",
        );
        assert_eq!(d.text.raw(), "X-name is a coffee shop near X-near. X-name is cheap.");
        let spans: Vec<_> = d.substitutions.iter().filter_map(|s| s.span.clone()).collect();
        assert_eq!(spans.len(), 3);
        for (i, a) in spans.iter().enumerate() {
            for b in &spans[i + 1..] {
                assert!(a.end <= b.start || b.end <= a.start);
            }
        }
    }

    #[test]
    fn longest_value_wins() {
        let d = apply("inform(name='Blue', near='Blue Spice')", "Blue is near Blue Spice");
        assert_eq!(d.text.raw(), "X-name is near X-near");
    }

    #[test]
    fn whole_words_only() {
        let d = apply("inform(name='Ark')", "The Ark is not a parking lot or Arkansas.");
        assert_eq!(d.text.raw(), "The X-name is not a parking lot or Arkansas.");
    }

    #[test]
    fn absent_value_recorded() {
        let d = apply("inform(name='Zizzi')", "a nice place");
        assert_eq!(d.text.raw(), "a nice place");
        assert_eq!(d.substitutions.len(), 1);
        assert_eq!(d.substitutions[0].span, None);
    }

    #[test]
    fn placeholder_naming() {
        assert_eq!(placeholder("name"), "X-name");
        assert_eq!(placeholder("Venue Name"), "X-venue_name");
        assert!(is_placeholder("x-name"));
        assert!(!is_placeholder("x"));
    }

    #[test]
    fn rule_file_round_trip() {
        let rules = RuleSet::default();
        let text = rules.to_file_string();
        assert_eq!(RuleSet::parse(&text, Path::new("r")).unwrap(), rules);
        assert!(RuleSet::parse("area\tnames_only\n", Path::new("r")).is_err());
        assert!(RuleSet::parse("area\tnames_only\t-\n", Path::new("r")).is_ok());
        let err = RuleSet::parse("x\tfull\n\ny\tbogus\t-\n", Path::new("r")).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    fn word() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("The Eagle".to_string()),
            Just("eagle".to_string()),
            Just("Café Sicilia".to_string()),
            Just("riverside".to_string()),
            Just("near".to_string()),
            Just("is".to_string()),
            Just(".".to_string()),
            "[a-zA-Z]{1,6}",
        ]
    }

    proptest! {
        #[test]
        fn idempotent_and_reversible(
            words in proptest::collection::vec(word(), 0..12),
            name in prop_oneof![Just("The Eagle"), Just("Eagle"), Just("Sicilia")],
            near in prop_oneof![Just("Café Sicilia"), Just("The Eagle"), Just("Ark")],
            area in prop_oneof![Just("riverside"), Just("soma")],
        ) {
            let text = words.join(" ");
            let mr = MeaningRepresentation::from_pairs("inform", [("name", name), ("near", near), ("area", area)]).unwrap();
            let once = delexicalize(&mr, &TextOutput::new(text.clone()), &RuleSet::default());
            let twice = delexicalize(&once.mr, &once.text, &RuleSet::default());
            prop_assert_eq!(&twice.mr, &once.mr);
            prop_assert_eq!(twice.text.raw(), once.text.raw());
            prop_assert_eq!(relexicalize(once.text.raw(), &once.substitutions), text);
        }
    }
}
