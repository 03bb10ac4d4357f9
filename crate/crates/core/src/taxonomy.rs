//! The 17 frame labels and compact label-set arithmetic.
//!
//! Index order is frozen: it is the column order of every score vector and
//! prediction file.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub const NUM_LABELS: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Anatomy,
    Pathology,
}

const NAMES: [&str; NUM_LABELS] = [
    "mouth",
    "esophagus",
    "stomach",
    "small_intestine",
    "colon",
    "z_line",
    "pylorus",
    "ileocecal_valve",
    "active_bleeding",
    "angiectasia",
    "blood",
    "erosion",
    "erythema",
    "hematin",
    "lymphangioectasis",
    "polyp",
    "ulcer",
];

const NUM_ANATOMY: usize = 8;

/// One of the 17 labels, identified by its frozen column index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelId(u8);

impl LabelId {
    pub const fn new(index: usize) -> Option<Self> {
        if index < NUM_LABELS {
            Some(LabelId(index as u8))
        } else {
            None
        }
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub const fn canonical_name(self) -> &'static str {
        NAMES[self.0 as usize]
    }

    pub const fn category(self) -> Category {
        if (self.0 as usize) < NUM_ANATOMY {
            Category::Anatomy
        } else {
            Category::Pathology
        }
    }

    pub fn all() -> impl ExactSizeIterator<Item = LabelId> + Clone {
        (0..NUM_LABELS as u8).map(LabelId)
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// Parses a label name. Case is ignored, surrounding whitespace is trimmed and
/// inner spaces or hyphens are read as underscores, so `"Z-Line"` and
/// `"small intestine"` are accepted. No fuzzy matching.
pub fn parse_label(name: &str) -> Result<LabelId> {
    let normalized: String = name
        .trim()
        .chars()
        .map(|c| match c {
            ' ' | '-' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect();
    NAMES
        .iter()
        .position(|n| *n == normalized)
        .map(|i| LabelId(i as u8))
        .ok_or_else(|| Error::UnknownLabel(name.to_string()))
}

impl core::str::FromStr for LabelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_label(s)
    }
}

/// Set of labels as a 17-bit mask; bit `i` is label index `i`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelSet(u32);

impl LabelSet {
    const MASK: u32 = (1 << NUM_LABELS) - 1;

    pub const EMPTY: LabelSet = LabelSet(0);
    pub const FULL: LabelSet = LabelSet(Self::MASK);

    pub const fn from_bits(bits: u32) -> Option<Self> {
        if bits & !Self::MASK == 0 {
            Some(LabelSet(bits))
        } else {
            None
        }
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn cardinality(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains(self, label: LabelId) -> bool {
        self.0 & (1 << label.0) != 0
    }

    pub fn insert(&mut self, label: LabelId) {
        self.0 |= 1 << label.0;
    }

    pub const fn with(self, label: LabelId) -> Self {
        LabelSet(self.0 | (1 << label.0))
    }

    pub const fn union(self, other: LabelSet) -> Self {
        LabelSet(self.0 | other.0)
    }

    /// Labels in ascending index order.
    pub fn iter(self) -> impl Iterator<Item = LabelId> {
        let bits = self.0;
        LabelId::all().filter(move |l| bits & (1 << l.0) != 0)
    }

    /// Canonical names joined with `;`, the manifest's labels field.
    pub fn to_field(self) -> String {
        let names: Vec<&str> = self.iter().map(LabelId::canonical_name).collect();
        names.join(";")
    }
}

impl FromIterator<LabelId> for LabelSet {
    fn from_iter<I: IntoIterator<Item = LabelId>>(iter: I) -> Self {
        let mut s = LabelSet::EMPTY;
        for l in iter {
            s.insert(l);
        }
        s
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_field())
    }
}

/// Union of the parsed names; duplicates collapse and an empty list is the
/// empty set.
pub fn labelset_from_names<S: AsRef<str>>(names: &[S]) -> Result<LabelSet> {
    names.iter().map(|n| parse_label(n.as_ref())).collect()
}

pub fn cardinality(set: LabelSet) -> usize {
    set.cardinality()
}
