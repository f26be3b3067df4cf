use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::tokenize::tokenize;
use crate::error::{Error, Result};

/// Marker emitted before every attribute in a linearised MR.
pub const SLOT_MARKER: &str = "<slot>";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Slot {
    pub attribute: String,
    /// Empty for valueless attributes.
    pub value: String,
}

/// A dialogue act: an intent plus ordered attribute/value slots.
///
/// The canonical text form is `intent(attr='value', flag, other='x')`;
/// quotes and backslashes inside values are backslash-escaped. The E2E
/// style `name[The Eagle], eatType[pub]` is also accepted on input and
/// maps to the `inform` intent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MeaningRepresentation {
    intent: String,
    slots: Vec<Slot>,
}

impl MeaningRepresentation {
    pub fn new(intent: impl Into<String>, slots: Vec<Slot>) -> Result<Self> {
        let intent = intent.into();
        if intent.trim().is_empty() {
            return Err(Error::InvalidMr {
                input: intent,
                message: "empty intent".into(),
            });
        }
        if let Some(bad) = slots.iter().find(|s| s.attribute.trim().is_empty()) {
            return Err(Error::InvalidMr {
                input: format!("{intent}(... '{}' ...)", bad.value),
                message: "empty attribute name".into(),
            });
        }
        Ok(Self { intent, slots })
    }

    pub fn from_pairs<'a>(intent: &str, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let slots = pairs
            .into_iter()
            .map(|(a, v)| Slot {
                attribute: a.to_string(),
                value: v.to_string(),
            })
            .collect();
        Self::new(intent, slots)
    }

    pub fn intent(&self) -> &str {
        &self.intent
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub(crate) fn with_slots(&self, slots: Vec<Slot>) -> Self {
        Self {
            intent: self.intent.clone(),
            slots,
        }
    }

    /// Token sequence fed to the MR encoder:
    /// `[intent, <slot>, attr, value tokens..., <slot>, attr, ...]`.
    pub fn linearize(&self) -> Vec<String> {
        let mut out = vec![self.intent.to_lowercase()];
        for slot in &self.slots {
            out.push(SLOT_MARKER.to_string());
            out.push(slot.attribute.to_lowercase().replace(char::is_whitespace, "_"));
            out.extend(tokenize(&slot.value));
        }
        out
    }

    fn parse_canonical(input: &str) -> Result<Self> {
        let err = |message: &str| Error::InvalidMr {
            input: input.to_string(),
            message: message.to_string(),
        };
        let open = input.find('(').ok_or_else(|| err("missing '('"))?;
        let body = input[open + 1..]
            .trim_end()
            .strip_suffix(')')
            .ok_or_else(|| err("missing closing ')'"))?;
        let intent = input[..open].trim();

        let mut slots = Vec::new();
        let chars: Vec<char> = body.chars().collect();
        let mut i = 0;
        loop {
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            if i >= chars.len() {
                break;
            }
            let start = i;
            while i < chars.len() && !matches!(chars[i], '=' | ',' | ';') {
                i += 1;
            }
            let attribute: String = chars[start..i].iter().collect::<String>().trim().to_string();
            let mut value = String::new();
            if i < chars.len() && chars[i] == '=' {
                i += 1;
                while i < chars.len() && chars[i].is_whitespace() {
                    i += 1;
                }
                match chars.get(i) {
                    Some(&q @ ('\'' | '"')) => {
                        i += 1;
                        let mut closed = false;
                        while i < chars.len() {
                            match chars[i] {
                                '\\' if i + 1 < chars.len() => {
                                    value.push(chars[i + 1]);
                                    i += 2;
                                }
                                c if c == q => {
                                    closed = true;
                                    i += 1;
                                    break;
                                }
                                c => {
                                    value.push(c);
                                    i += 1;
                                }
                            }
                        }
                        if !closed {
                            return Err(err("unterminated quoted value"));
                        }
                    }
                    _ => {
                        let vstart = i;
                        while i < chars.len() && !matches!(chars[i], ',' | ';') {
                            i += 1;
                        }
                        value = chars[vstart..i].iter().collect::<String>().trim().to_string();
                    }
                }
            }
            if attribute.is_empty() {
                return Err(err("empty attribute name"));
            }
            slots.push(Slot { attribute, value });
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            match chars.get(i) {
                None => break,
                Some(',' | ';') => i += 1,
                Some(_) => return Err(err("expected ',' between slots")),
            }
        }
        Self::new(intent, slots)
    }

    fn parse_bracketed(input: &str) -> Result<Self> {
        let err = |message: &str| Error::InvalidMr {
            input: input.to_string(),
            message: message.to_string(),
        };
        let mut slots = Vec::new();
        let mut rest = input.trim();
        while !rest.is_empty() {
            let open = rest.find('[').ok_or_else(|| err("missing '['"))?;
            let close = rest[open..].find(']').ok_or_else(|| err("missing ']'"))? + open;
            let attribute = rest[..open].trim().trim_start_matches(',').trim();
            if attribute.is_empty() {
                return Err(err("empty attribute name"));
            }
            slots.push(Slot {
                attribute: attribute.to_string(),
                value: rest[open + 1..close].trim().to_string(),
            });
            rest = rest[close + 1..].trim_start().trim_start_matches(',').trim_start();
        }
        Self::new("inform", slots)
    }
}

impl FromStr for MeaningRepresentation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let paren = s.find('(');
        let bracket = s.find('[');
        match (paren, bracket) {
            (Some(p), Some(b)) if b < p => Self::parse_bracketed(s),
            (None, Some(_)) => Self::parse_bracketed(s),
            (Some(_), _) => Self::parse_canonical(s),
            (None, None) => Self::new(s, Vec::new()),
        }
    }
}

impl fmt::Display for MeaningRepresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.intent)?;
        for (i, slot) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(&slot.attribute)?;
            if !slot.value.is_empty() {
                f.write_str("='")?;
                for c in slot.value.chars() {
                    if c == '\'' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("'")?;
            }
        }
        f.write_str(")")
    }
}

impl Serialize for MeaningRepresentation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MeaningRepresentation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linearize_with_slots() {
        let mr = MeaningRepresentation::from_pairs("inform", [("name", "X-name"), ("area", "pacific heights")]).unwrap();
        assert_eq!(
            mr.linearize(),
            ["inform", "<slot>", "name", "x-name", "<slot>", "area", "pacific", "heights"]
        );
    }

    #[test]
    fn linearize_intent_only() {
        let mr: MeaningRepresentation = "request()".parse().unwrap();
        assert_eq!(mr.linearize(), ["request"]);
    }

    #[test]
    fn linearize_valueless_slot() {
        let mr: MeaningRepresentation = "request(area, name='x')".parse().unwrap();
        assert_eq!(mr.linearize(), ["request", "<slot>", "area", "<slot>", "name", "x"]);
    }

    #[test]
    fn parses_corpus_style() {
        let mr: MeaningRepresentation = "inform_only_match(name='hotel drisco';area='pacific heights')".parse().unwrap();
        assert_eq!(mr.intent(), "inform_only_match");
        assert_eq!(&mr.linearize()[..4], ["inform_only_match", "<slot>", "name", "hotel"]);
        assert_eq!(mr.slots()[1].value, "pacific heights");
    }

    #[test]
    fn parses_bracketed_style() {
        let mr: MeaningRepresentation = "name[The Cricketers], eatType[coffee shop], near[Café Sicilia]".parse().unwrap();
        assert_eq!(mr.intent(), "inform");
        assert_eq!(mr.slots().len(), 3);
        assert_eq!(mr.slots()[2].attribute, "near");
        assert_eq!(mr.slots()[2].value, "Café Sicilia");
    }

    #[test]
    fn rejects_bad_input() {
        assert!("(name='x')".parse::<MeaningRepresentation>().is_err());
        assert!("inform(name='x'".parse::<MeaningRepresentation>().is_err());
        assert!("inform(name='x)".parse::<MeaningRepresentation>().is_err());
        assert!("inform(='x')".parse::<MeaningRepresentation>().is_err());
        assert!(MeaningRepresentation::new("", vec![]).is_err());
    }

    fn arb_mr() -> impl Strategy<Value = MeaningRepresentation> {
        let slot = ("[a-z][a-zA-Z_]{0,8}", "[a-zA-Z ',\\\\()=;]{0,12}").prop_map(|(a, v)| Slot {
            attribute: a,
            value: v.trim().to_string(),
        });
        ("[a-z][a-z_]{0,10}", proptest::collection::vec(slot, 0..5))
            .prop_map(|(i, s)| MeaningRepresentation::new(i, s).unwrap())
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(mr in arb_mr()) {
            let text = mr.to_string();
            let back: MeaningRepresentation = text.parse().unwrap();
            prop_assert_eq!(back, mr);
        }

        #[test]
        fn linearize_distinguishes_differing_mrs(a in arb_mr(), b in arb_mr()) {
            let norm = |m: &MeaningRepresentation| {
                (m.intent().to_lowercase(), m.slots().iter()
                    .map(|s| (s.attribute.to_lowercase(), tokenize(&s.value)))
                    .collect::<Vec<_>>())
            };
            if norm(&a) != norm(&b) {
                prop_assert_ne!(a.linearize(), b.linearize());
            }
        }
    }
}
