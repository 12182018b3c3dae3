use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

/// Calendar decomposition of one bar's timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeStamp {
    /// Years since the earliest year in the dataset.
    pub year_index: u32,
    /// 1..=12
    pub month: u32,
    /// 0 = Monday .. 6 = Sunday
    pub day_of_week: u32,
    /// ISO week, 1..=53
    pub week_of_year: u32,
    /// 0..=23
    pub hour: u32,
    /// 0..=59
    pub minute: u32,
}

/// Which calendar field feeds the "week" embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeekField {
    #[default]
    DayOfWeek,
    WeekOfYear,
}

impl WeekField {
    /// Table size for this field.
    pub fn cardinality(self) -> usize {
        match self {
            WeekField::DayOfWeek => 7,
            WeekField::WeekOfYear => 53,
        }
    }

    /// Zero-based table index.
    pub fn index(self, ts: &TimeStamp) -> usize {
        match self {
            WeekField::DayOfWeek => ts.day_of_week as usize,
            WeekField::WeekOfYear => ts.week_of_year as usize - 1,
        }
    }
}

pub fn extract_time_features(dt: &NaiveDateTime, base_year: i32) -> TimeStamp {
    TimeStamp {
        year_index: (dt.year() - base_year).max(0) as u32,
        month: dt.month(),
        day_of_week: dt.weekday().num_days_from_monday(),
        week_of_year: dt.iso_week().week(),
        hour: dt.hour(),
        minute: dt.minute(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dt(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M").unwrap()
    }

    #[test]
    fn monday_morning() {
        let ts = extract_time_features(&dt("2022-01-03 09:30"), 2022);
        assert_eq!((ts.year_index, ts.month, ts.day_of_week, ts.hour, ts.minute), (0, 1, 0, 9, 30));
        assert_eq!(ts.week_of_year, 1);
    }

    #[test]
    fn midnight() {
        let ts = extract_time_features(&dt("2022-12-12 00:00"), 2020);
        assert_eq!((ts.hour, ts.minute, ts.year_index), (0, 0, 2));
        assert_eq!(ts.day_of_week, 0);
    }

    #[test]
    fn week_field_indices() {
        let ts = extract_time_features(&dt("2021-01-03 10:00"), 2021);
        // 2021-01-03 is a Sunday in ISO week 53 of 2020.
        assert_eq!(WeekField::DayOfWeek.index(&ts), 6);
        assert_eq!(WeekField::WeekOfYear.index(&ts), 52);
    }
}
