//! The fixed affect scheme: eleven emotion categories and ten moral
//! categories (five virtue/vice pairs), plus the per-document label vector.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of affect categories tracked by the pipeline.
pub const CATEGORY_COUNT: usize = 21;

/// Whether a category belongs to the emotion or the moral scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Emotion,
    Moral,
}

macro_rules! categories {
    ($(($variant:ident, $name:literal, $kind:ident)),+ $(,)?) => {
        /// One of the 21 affect categories.
        ///
        /// The variant order is the canonical order used everywhere a list of
        /// categories appears: emotions first, then moral virtue/vice pairs.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord,
                 Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum AffectCategory {
            $($variant),+
        }

        impl AffectCategory {
            /// All categories in canonical order.
            pub const ALL: [AffectCategory; CATEGORY_COUNT] =
                [$(AffectCategory::$variant),+];

            /// Lowercase name used in files and reports.
            pub fn name(self) -> &'static str {
                match self {
                    $(AffectCategory::$variant => $name),+
                }
            }

            /// Emotion or moral scheme membership.
            pub fn kind(self) -> Kind {
                match self {
                    $(AffectCategory::$variant => Kind::$kind),+
                }
            }

            /// Parse a lowercase category name.
            pub fn parse(name: &str) -> Result<AffectCategory> {
                match name {
                    $($name => Ok(AffectCategory::$variant),)+
                    other => Err(Error::invalid(format!(
                        "unknown affect category `{other}`"
                    ))),
                }
            }
        }
    };
}

categories![
    (Anticipation, "anticipation", Emotion),
    (Joy, "joy", Emotion),
    (Love, "love", Emotion),
    (Trust, "trust", Emotion),
    (Optimism, "optimism", Emotion),
    (Anger, "anger", Emotion),
    (Disgust, "disgust", Emotion),
    (Fear, "fear", Emotion),
    (Sadness, "sadness", Emotion),
    (Pessimism, "pessimism", Emotion),
    (Surprise, "surprise", Emotion),
    (Care, "care", Moral),
    (Harm, "harm", Moral),
    (Fairness, "fairness", Moral),
    (Cheating, "cheating", Moral),
    (Loyalty, "loyalty", Moral),
    (Betrayal, "betrayal", Moral),
    (Authority, "authority", Moral),
    (Subversion, "subversion", Moral),
    (Purity, "purity", Moral),
    (Degradation, "degradation", Moral),
];

impl AffectCategory {
    /// Position of the category in [`AffectCategory::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AffectCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Multi-hot membership of one document in the 21 categories.
///
/// Categories are independent: a document may activate any subset, including
/// none at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelVector {
    flags: [bool; CATEGORY_COUNT],
}

impl LabelVector {
    /// Vector with every category off.
    pub fn all_off() -> Self {
        Self::default()
    }

    /// Build from a raw flag array in canonical category order.
    pub fn from_flags(flags: [bool; CATEGORY_COUNT]) -> Self {
        LabelVector { flags }
    }

    /// Whether `category` is on.
    pub fn get(&self, category: AffectCategory) -> bool {
        self.flags[category.index()]
    }

    /// Set the flag for `category`.
    pub fn set(&mut self, category: AffectCategory, on: bool) {
        self.flags[category.index()] = on;
    }

    /// Flags in canonical category order.
    pub fn flags(&self) -> &[bool; CATEGORY_COUNT] {
        &self.flags
    }

    /// Number of active categories.
    pub fn count_on(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }

    /// Categories that are on, in canonical order.
    pub fn active(&self) -> impl Iterator<Item = AffectCategory> + '_ {
        AffectCategory::ALL
            .iter()
            .copied()
            .filter(move |c| self.flags[c.index()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_has_21_categories_emotions_first() {
        assert_eq!(AffectCategory::ALL.len(), 21);
        let emotions: Vec<_> = AffectCategory::ALL
            .iter()
            .filter(|c| c.kind() == Kind::Emotion)
            .collect();
        let morals: Vec<_> = AffectCategory::ALL
            .iter()
            .filter(|c| c.kind() == Kind::Moral)
            .collect();
        assert_eq!(emotions.len(), 11);
        assert_eq!(morals.len(), 10);
        // Emotions occupy the first 11 slots.
        assert!(AffectCategory::ALL[..11]
            .iter()
            .all(|c| c.kind() == Kind::Emotion));
    }

    #[test]
    fn names_round_trip() {
        for c in AffectCategory::ALL {
            assert_eq!(AffectCategory::parse(c.name()).unwrap(), c);
            assert_eq!(c.index(), AffectCategory::ALL[c.index()].index());
        }
        assert!(AffectCategory::parse("boredom").is_err());
    }

    #[test]
    fn moral_scheme_is_five_virtue_vice_pairs() {
        let morals: Vec<&str> = AffectCategory::ALL
            .iter()
            .filter(|c| c.kind() == Kind::Moral)
            .map(|c| c.name())
            .collect();
        assert_eq!(
            morals,
            [
                "care",
                "harm",
                "fairness",
                "cheating",
                "loyalty",
                "betrayal",
                "authority",
                "subversion",
                "purity",
                "degradation"
            ]
        );
    }

    #[test]
    fn label_vector_set_get_count() {
        let mut v = LabelVector::all_off();
        assert_eq!(v.count_on(), 0);
        v.set(AffectCategory::Anger, true);
        v.set(AffectCategory::Harm, true);
        assert!(v.get(AffectCategory::Anger));
        assert!(!v.get(AffectCategory::Joy));
        assert_eq!(v.count_on(), 2);
        let active: Vec<_> = v.active().collect();
        assert_eq!(active, vec![AffectCategory::Anger, AffectCategory::Harm]);
    }
}
