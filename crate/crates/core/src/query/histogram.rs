//! Calendar-aligned date histograms with automatic granularity.

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::model::DateRange;

/// Upper bound on the number of bins; the finest granularity that stays
/// under it wins.
pub const MAX_BINS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Day,
    /// ISO weeks, starting Monday.
    Week,
    Month,
    Quarter,
    Year,
}

impl Granularity {
    pub const FINEST_FIRST: [Granularity; 5] = [
        Granularity::Day,
        Granularity::Week,
        Granularity::Month,
        Granularity::Quarter,
        Granularity::Year,
    ];

    /// Start of the calendar unit containing `date`.
    pub fn unit_start(self, date: NaiveDate) -> NaiveDate {
        match self {
            Granularity::Day => date,
            Granularity::Week => date - Duration::days(i64::from(date.weekday().num_days_from_monday())),
            Granularity::Month => first_of_month(date.year(), date.month()),
            Granularity::Quarter => first_of_month(date.year(), (date.month0() / 3) * 3 + 1),
            Granularity::Year => first_of_month(date.year(), 1),
        }
    }

    /// Start of the unit following the one that starts at `start`.
    pub fn next_unit(self, start: NaiveDate) -> NaiveDate {
        match self {
            Granularity::Day => start + Duration::days(1),
            Granularity::Week => start + Duration::days(7),
            Granularity::Month => add_months(start, 1),
            Granularity::Quarter => add_months(start, 3),
            Granularity::Year => add_months(start, 12),
        }
    }

    /// Number of units intersecting `range`.
    pub fn unit_count(self, range: DateRange) -> usize {
        let mut n = 0;
        let mut start = self.unit_start(range.from);
        while start <= range.to {
            n += 1;
            start = self.next_unit(start);
        }
        n
    }
}

fn first_of_month(year: i32, month: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, month, 1).expect("valid month")
}

fn add_months(first: NaiveDate, months: u32) -> NaiveDate {
    let idx = first.year() * 12 + first.month0() as i32 + months as i32;
    first_of_month(idx.div_euclid(12), idx.rem_euclid(12) as u32 + 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub count: u64,
}

/// Finest granularity with at most [`MAX_BINS`] bins over `range`; years
/// when even that is exceeded.
pub fn choose_granularity(range: DateRange) -> Granularity {
    Granularity::FINEST_FIRST
        .into_iter()
        .find(|g| g.unit_count(range) <= MAX_BINS)
        .unwrap_or(Granularity::Year)
}

/// Empty bins covering `range` at granularity `g`, clipped to the range.
pub fn empty_bins(range: DateRange, g: Granularity) -> Vec<HistogramBin> {
    let mut bins = Vec::new();
    let mut start = g.unit_start(range.from);
    while start <= range.to {
        let next = g.next_unit(start);
        bins.push(HistogramBin {
            start: start.max(range.from),
            end: (next - Duration::days(1)).min(range.to),
            count: 0,
        });
        start = next;
    }
    bins
}

/// Counts `dates` into contiguous calendar-aligned bins spanning `range`.
/// Zero-count bins are kept. Dates outside the range are ignored.
pub fn build_histogram<I>(dates: I, range: DateRange) -> Vec<HistogramBin>
where
    I: IntoIterator<Item = NaiveDate>,
{
    let mut bins = empty_bins(range, choose_granularity(range));
    for date in dates {
        if !range.contains(date) {
            continue;
        }
        let idx = bins.partition_point(|b| b.end < date);
        bins[idx].count += 1;
    }
    bins
}
