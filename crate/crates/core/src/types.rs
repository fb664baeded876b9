use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Motor-imagery class. Only the two hand classes are in scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Left,
    Right,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Left, Label::Right];

    pub fn index(self) -> usize {
        match self {
            Label::Left => 0,
            Label::Right => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Left),
            1 => Some(Label::Right),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Left => "left",
            Label::Right => "right",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown class label {0:?} (expected \"left\" or \"right\")")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Label::Left),
            "right" | "r" => Ok(Label::Right),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

/// Recording session: `T` is the competition's training session, `E` its
/// evaluation session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Session {
    T,
    E,
}

impl Session {
    pub fn as_char(self) -> char {
        match self {
            Session::T => 'T',
            Session::E => 'E',
        }
    }

    pub fn from_char(c: char) -> Option<Session> {
        match c.to_ascii_uppercase() {
            'T' => Some(Session::T),
            'E' => Some(Session::E),
            _ => None,
        }
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for Session {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Session::from_char(c).ok_or_else(|| format!("unknown session {s:?}")),
            _ => Err(format!("unknown session {s:?}")),
        }
    }
}

/// Subject identifier such as `A01`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubjectId(pub String);

impl SubjectId {
    pub fn new(id: impl Into<String>) -> Self {
        SubjectId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SubjectId {
    fn from(s: &str) -> Self {
        SubjectId(s.to_string())
    }
}
