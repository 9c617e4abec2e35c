use std::fmt;

use serde::{Deserialize, Serialize};

/// Binary class label, serialized as `1` or `2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    One,
    Two,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::One, Label::Two];

    /// Label from a probability of label 2, thresholded at 0.5.
    pub fn from_proba_label2(p: f64) -> Self {
        if p >= 0.5 {
            Label::Two
        } else {
            Label::One
        }
    }

    pub fn other(self) -> Self {
        match self {
            Label::One => Label::Two,
            Label::Two => Label::One,
        }
    }

    /// +1 for label 1, -1 for label 2.
    pub fn sign(self) -> f64 {
        match self {
            Label::One => 1.0,
            Label::Two => -1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::One => 0,
            Label::Two => 1,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        match l {
            Label::One => 1,
            Label::Two => 2,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Label::One),
            2 => Ok(Label::Two),
            other => Err(format!("label must be 1 or 2, got {other}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}
