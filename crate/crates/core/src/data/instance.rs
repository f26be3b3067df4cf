use serde::{Deserialize, Serialize};

use super::mr::MeaningRepresentation;
use super::tokenize::tokenize;
use crate::error::{Error, Result};

pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 6.0;

pub fn check_rating(rating: f64) -> Result<f64> {
    if rating.is_finite() && (RATING_MIN..=RATING_MAX).contains(&rating) {
        Ok(rating)
    } else {
        Err(Error::RatingOutOfRange(rating))
    }
}

/// Raw output text plus its lowercase tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextOutput {
    raw: String,
    tokens: Vec<String>,
}

impl TextOutput {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        Self { raw, tokens }
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        Self {
            raw: tokens.join(" "),
            tokens,
        }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl Serialize for TextOutput {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for TextOutput {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d).map(TextOutput::new)
    }
}

/// One training or evaluation unit: either a rating instance (one text with
/// a human score) or a ranking instance (two texts, `text_a` preferred).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRecord", into = "InstanceRecord")]
pub struct QeInstance {
    pub mr: MeaningRepresentation,
    pub text_a: TextOutput,
    pub text_b: Option<TextOutput>,
    pub rating: Option<f64>,
    pub is_ranking: bool,
    pub is_synthetic: bool,
    pub source_tag: String,
}

impl QeInstance {
    pub fn rating(mr: MeaningRepresentation, text: TextOutput, rating: f64, source_tag: impl Into<String>) -> Result<Self> {
        Ok(Self {
            mr,
            text_a: text,
            text_b: None,
            rating: Some(check_rating(rating)?),
            is_ranking: false,
            is_synthetic: false,
            source_tag: source_tag.into(),
        })
    }

    /// `better` becomes `text_a`.
    pub fn ranking(
        mr: MeaningRepresentation,
        better: TextOutput,
        worse: TextOutput,
        source_tag: impl Into<String>,
    ) -> Self {
        Self {
            mr,
            text_a: better,
            text_b: Some(worse),
            rating: None,
            is_ranking: true,
            is_synthetic: false,
            source_tag: source_tag.into(),
        }
    }

    pub fn synthetic(mut self) -> Self {
        self.is_synthetic = true;
        self
    }

    /// Checks the rating-xor-ranking shape.
    pub fn validate(&self) -> Result<()> {
        match (self.is_ranking, &self.text_b, self.rating) {
            (true, Some(_), None) => Ok(()),
            (false, None, Some(r)) => check_rating(r).map(|_| ()),
            (true, _, _) => Err(Error::MalformedInstance(
                "ranking instance needs text_b and no rating".into(),
            )),
            (false, _, _) => Err(Error::MalformedInstance(
                "rating instance needs a rating and no text_b".into(),
            )),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    mr: MeaningRepresentation,
    text_a: TextOutput,
    text_b: Option<TextOutput>,
    rating: Option<f64>,
    is_ranking: bool,
    #[serde(default)]
    is_synthetic: bool,
    #[serde(default)]
    source_tag: String,
}

impl TryFrom<InstanceRecord> for QeInstance {
    type Error = Error;

    fn try_from(r: InstanceRecord) -> Result<Self> {
        let inst = QeInstance {
            mr: r.mr,
            text_a: r.text_a,
            text_b: r.text_b,
            rating: r.rating,
            is_ranking: r.is_ranking,
            is_synthetic: r.is_synthetic,
            source_tag: r.source_tag,
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl From<QeInstance> for InstanceRecord {
    fn from(i: QeInstance) -> Self {
        InstanceRecord {
            mr: i.mr,
            text_a: i.text_a,
            text_b: i.text_b,
            rating: i.rating,
            is_ranking: i.is_ranking,
            is_synthetic: i.is_synthetic,
            source_tag: i.source_tag,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Quality,
    Naturalness,
    Informativeness,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quality" => Ok(Criterion::Quality),
            "naturalness" => Ok(Criterion::Naturalness),
            "informativeness" => Ok(Criterion::Informativeness),
            other => Err(Error::Config(format!("unknown criterion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub instances: Vec<QeInstance>,
    pub criterion: Criterion,
}

impl Dataset {
    pub fn new(instances: Vec<QeInstance>, criterion: Criterion) -> Self {
        Self { instances, criterion }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, QeInstance> {
        self.instances.iter()
    }

    pub fn synthetic_count(&self) -> usize {
        self.instances.iter().filter(|i| i.is_synthetic).count()
    }

    pub fn ranking_count(&self) -> usize {
        self.instances.iter().filter(|i| i.is_ranking).count()
    }

    /// Errors if any instance is synthetic; evaluation data must be real.
    pub fn ensure_no_synthetic(&self, role: &'static str) -> Result<()> {
        if self.instances.iter().any(|i| i.is_synthetic) {
            Err(Error::SyntheticInEvaluation(role))
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mr() -> MeaningRepresentation {
        "inform(name='x')".parse().unwrap()
    }

    #[test]
    fn constructors_satisfy_shape() {
        QeInstance::rating(mr(), TextOutput::new("a b"), 3.0, "t").unwrap().validate().unwrap();
        QeInstance::ranking(mr(), TextOutput::new("a"), TextOutput::new("b"), "t").validate().unwrap();
        assert!(QeInstance::rating(mr(), TextOutput::new("a"), 7.0, "t").is_err());
        assert!(QeInstance::rating(mr(), TextOutput::new("a"), 0.5, "t").is_err());
    }

    #[test]
    fn mixed_shape_rejected() {
        let mut inst = QeInstance::ranking(mr(), TextOutput::new("a"), TextOutput::new("b"), "t");
        inst.rating = Some(3.0);
        assert!(inst.validate().is_err());
        inst.rating = None;
        inst.text_b = None;
        assert!(inst.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let inst = QeInstance::ranking(mr(), TextOutput::new("good ."), TextOutput::new("bad bad ."), "e2e").synthetic();
        let line = serde_json::to_string(&inst).unwrap();
        assert!(line.contains("\"is_ranking\":true"));
        let back: QeInstance = serde_json::from_str(&line).unwrap();
        assert_eq!(back, inst);

        let bad = r#"{"mr":"inform(name='x')","text_a":"a","text_b":"b","rating":3.0,"is_ranking":true}"#;
        assert!(serde_json::from_str::<QeInstance>(bad).is_err());
    }
}
