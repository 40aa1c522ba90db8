//! Timestamps for generated artifacts.

use chrono::{DateTime, SecondsFormat, Utc};

/// Source of "now". `Fixed` makes generated artifacts reproducible
/// (it is what `SOURCE_DATE_EPOCH` maps to).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Clock {
    #[default]
    System,
    Fixed(i64),
}

impl Clock {
    /// `Fixed` when `SOURCE_DATE_EPOCH` holds a valid integer, `System` otherwise.
    pub fn from_env() -> Clock {
        std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()).map_or(Clock::System, Clock::Fixed)
    }

    pub fn now(self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(secs) => DateTime::from_timestamp(secs, 0).unwrap_or_default(),
        }
    }

    /// RFC 3339, second precision, `Z` suffix.
    pub fn timestamp(self) -> String {
        self.now().to_rfc3339_opts(SecondsFormat::Secs, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_clock_formats() {
        assert_eq!(Clock::Fixed(0).timestamp(), "1970-01-01T00:00:00Z");
        assert_eq!(Clock::Fixed(1_700_000_000).timestamp(), "2023-11-14T22:13:20Z");
    }
}
