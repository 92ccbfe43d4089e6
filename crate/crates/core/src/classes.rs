use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The seven activities plus the empty-room state, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    LieDown,
    Fall,
    Walk,
    PickUp,
    Run,
    SitDown,
    StandUp,
    NoPerson,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 8] = [
        ClassLabel::LieDown,
        ClassLabel::Fall,
        ClassLabel::Walk,
        ClassLabel::PickUp,
        ClassLabel::Run,
        ClassLabel::SitDown,
        ClassLabel::StandUp,
        ClassLabel::NoPerson,
    ];

    pub const ACTIVITIES: usize = 7;

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::LieDown => "lie_down",
            ClassLabel::Fall => "fall",
            ClassLabel::Walk => "walk",
            ClassLabel::PickUp => "pickup",
            ClassLabel::Run => "run",
            ClassLabel::SitDown => "sit_down",
            ClassLabel::StandUp => "stand_up",
            ClassLabel::NoPerson => "no_person",
        }
    }

    /// Activity-head target; `None` for the empty room.
    pub fn activity_index(self) -> Option<usize> {
        (self != ClassLabel::NoPerson).then_some(self.id())
    }

    /// Presence-head target: 0 = nobody, 1 = somebody.
    pub fn presence_index(self) -> usize {
        usize::from(self != ClassLabel::NoPerson)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown class `{s}`"))
    }
}
