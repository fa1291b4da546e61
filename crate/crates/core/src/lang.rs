use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A two-letter lowercase ISO 639-1 language code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lang([u8; 2]);

impl Lang {
    pub const EN: Lang = Lang(*b"en");

    pub fn as_str(&self) -> &str {
        // always two ASCII lowercase letters
        std::str::from_utf8(&self.0).unwrap()
    }

    pub fn code(&self) -> u16 {
        u16::from_be_bytes(self.0)
    }
}

/// The ten pipeline languages: English, Vietnamese, Dutch, German, French,
/// Italian, Spanish, Japanese, Korean and Chinese.
pub const DEFAULT_LANGUAGES: [&str; 10] = ["en", "vi", "nl", "de", "fr", "it", "es", "ja", "ko", "zh"];

pub fn default_languages() -> Vec<Lang> {
    DEFAULT_LANGUAGES.iter().map(|c| c.parse().unwrap()).collect()
}

impl FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        if b.len() == 2 && b.iter().all(u8::is_ascii_lowercase) {
            Ok(Lang([b[0], b[1]]))
        } else {
            Err(Error::InvalidLanguage(s.to_string()))
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lang({})", self.as_str())
    }
}

impl Serialize for Lang {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Lang {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated language list such as `fr,de,ja`.
pub fn parse_list(s: &str) -> Result<Vec<Lang>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(str::parse)
        .collect()
}
