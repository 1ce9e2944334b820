use chrono::{Datelike, Days, NaiveDate, Weekday};

/// First date of generated panels, a Monday.
pub const START_DATE: NaiveDate = match NaiveDate::from_ymd_opt(2000, 1, 3) {
    Some(d) => d,
    None => panic!("invalid start date"),
};

/// `n` consecutive weekdays from `start` (rolled forward off a weekend),
/// formatted `YYYY-MM-DD`.
pub fn weekday_dates_from(start: NaiveDate, n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let mut day = start;
    while out.len() < n {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day.format("%Y-%m-%d").to_string());
        }
        day = day + Days::new(1);
    }
    out
}

pub fn weekday_dates(n: usize) -> Vec<String> {
    weekday_dates_from(START_DATE, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_weekends() {
        let d = weekday_dates(7);
        assert_eq!(d[0], "2000-01-03");
        assert_eq!(d[4], "2000-01-07");
        assert_eq!(d[5], "2000-01-10");
        assert_eq!(d[6], "2000-01-11");
        let sat = NaiveDate::from_ymd_opt(2000, 1, 8).unwrap();
        assert_eq!(weekday_dates_from(sat, 1), ["2000-01-10"]);
    }
}
