use std::collections::BTreeSet;

/// Records containing paced beats.
pub const PACED_RECORDS: [&str; 4] = ["102", "104", "107", "217"];
/// Records whose second signal is not V1.
pub const NON_V1_RECORDS: [&str; 6] = ["100", "103", "114", "117", "123", "124"];

pub const DS1: [&str; 14] = [
    "101", "105", "106", "108", "109", "111", "112", "113", "115", "116", "118", "119", "121", "122",
];

pub const DS2: [&str; 24] = [
    "200", "201", "202", "203", "205", "207", "208", "209", "210", "212", "213", "214", "215", "219", "220", "221",
    "222", "223", "228", "230", "231", "232", "233", "234",
];

/// DS2 records used for VEB scoring.
pub const DS2V: [&str; 11] = ["200", "202", "210", "213", "214", "219", "221", "228", "231", "233", "234"];

/// DS2 records used for SVEB scoring.
pub const DS2S: [&str; 14] = [
    "200", "202", "210", "212", "213", "214", "219", "221", "222", "228", "231", "232", "233", "234",
];

/// Drops paced and non-V1 records.
pub fn exclude_records<'a, I>(all_ids: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a str>,
{
    all_ids
        .into_iter()
        .filter(|id| !PACED_RECORDS.contains(id) && !NON_V1_RECORDS.contains(id))
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfdb::fetch::MITDB_RECORDS;

    #[test]
    fn retains_38_records() {
        let kept = exclude_records(MITDB_RECORDS);
        assert_eq!(kept.len(), 38);
        assert!(!kept.contains("107"));
        assert!(kept.contains("101") && DS1.contains(&"101"));
        let both: BTreeSet<String> = DS1.iter().chain(DS2.iter()).map(|s| s.to_string()).collect();
        assert_eq!(kept, both);
    }

    #[test]
    fn subsets_are_nested() {
        assert!(DS2V.iter().all(|r| DS2.contains(r)));
        assert!(DS2S.iter().all(|r| DS2.contains(r)));
        assert!(DS1.iter().all(|r| !DS2.contains(r)));
    }
}
