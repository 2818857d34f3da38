use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The ten animal classes, in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    Cheetah,
    Chimpanzee,
    Elephant,
    Fox,
    Jaguars,
    Lion,
    Orangutan,
    Panda,
    Panthers,
    Rhino,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 10] = [
        ClassLabel::Cheetah,
        ClassLabel::Chimpanzee,
        ClassLabel::Elephant,
        ClassLabel::Fox,
        ClassLabel::Jaguars,
        ClassLabel::Lion,
        ClassLabel::Orangutan,
        ClassLabel::Panda,
        ClassLabel::Panthers,
        ClassLabel::Rhino,
    ];

    pub const COUNT: usize = Self::ALL.len();

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Cheetah => "Cheetah",
            ClassLabel::Chimpanzee => "Chimpanzee",
            ClassLabel::Elephant => "Elephant",
            ClassLabel::Fox => "Fox",
            ClassLabel::Jaguars => "Jaguars",
            ClassLabel::Lion => "Lion",
            ClassLabel::Orangutan => "Orangutan",
            ClassLabel::Panda => "Panda",
            ClassLabel::Panthers => "Panthers",
            ClassLabel::Rhino => "Rhino",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownClass {
                name: name.to_string(),
                valid: Self::ALL.map(ClassLabel::name).join(", "),
            })
    }
}

/// Case-sensitive lookup of a canonical class name.
pub fn class_index(name: &str) -> Result<usize> {
    name.parse::<ClassLabel>().map(ClassLabel::index)
}
