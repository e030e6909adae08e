//! Topic-name grammar and record patterns.

use std::fmt;

/// True if `name` matches `/[a-z0-9_]+(/[a-z0-9_]+)*`.
pub fn is_valid_topic(name: &str) -> bool {
    let Some(rest) = name.strip_prefix('/') else {
        return false;
    };
    !rest.is_empty() && rest.split('/').all(is_valid_segment)
}

/// True if `seg` is a single non-empty `[a-z0-9_]+` path segment.
pub fn is_valid_segment(seg: &str) -> bool {
    !seg.is_empty()
        && seg
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum PatternSegment {
    Literal(String),
    /// `*`: exactly one segment.
    Any,
    /// `**`: zero or more segments.
    AnyDepth,
}

/// A topic glob such as `/tui/*/accel/sample` or `/a/**`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopicPattern {
    source: String,
    segments: Vec<PatternSegment>,
}

impl TopicPattern {
    pub fn parse(pattern: &str) -> Option<Self> {
        let rest = pattern.strip_prefix('/')?;
        if rest.is_empty() {
            return None;
        }
        let mut segments = Vec::new();
        for seg in rest.split('/') {
            segments.push(match seg {
                "*" => PatternSegment::Any,
                "**" => PatternSegment::AnyDepth,
                s if is_valid_segment(s) => PatternSegment::Literal(s.to_owned()),
                _ => return None,
            });
        }
        Some(Self {
            source: pattern.to_owned(),
            segments,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    pub fn matches(&self, topic: &str) -> bool {
        let Some(rest) = topic.strip_prefix('/') else {
            return false;
        };
        let parts: Vec<&str> = rest.split('/').collect();
        match_from(&self.segments, &parts)
    }
}

fn match_from(pat: &[PatternSegment], parts: &[&str]) -> bool {
    match pat.split_first() {
        None => parts.is_empty(),
        Some((PatternSegment::AnyDepth, tail)) => {
            (0..=parts.len()).any(|skip| match_from(tail, &parts[skip..]))
        }
        Some((seg, tail)) => match parts.split_first() {
            None => false,
            Some((head, rest)) => {
                let ok = match seg {
                    PatternSegment::Any => true,
                    PatternSegment::Literal(lit) => lit == head,
                    PatternSegment::AnyDepth => unreachable!(),
                };
                ok && match_from(tail, rest)
            }
        },
    }
}

impl fmt::Display for TopicPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}
