//! Rating-log parsing, deduplication and train/test splitting.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use flate2::read::GzDecoder;
use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Interaction, ItemId, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// `UserID::MovieID::Rating::Timestamp`
    Ml10m,
    /// `user<TAB>item<TAB>rating<TAB>timestamp`
    Ml100k,
}

impl Format {
    fn separator(self) -> &'static str {
        match self {
            Format::Ml10m => "::",
            Format::Ml100k => "\t",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Ml10m => "ml10m",
            Format::Ml100k => "ml100k",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml10m" => Ok(Format::Ml10m),
            "ml100k" => Ok(Format::Ml100k),
            other => Err(Error::InvalidArgument(format!(
                "unknown format '{other}' (expected ml10m or ml100k)"
            ))),
        }
    }
}

/// A deduplicated rating log, interactions ordered by (user, item).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dataset {
    pub interactions: Vec<Interaction>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub min_timestamp: Option<i64>,
    pub max_timestamp: Option<i64>,
}

impl Dataset {
    /// Deduplicates by (user, item), keeping the latest event. On equal
    /// timestamps the later record in input order wins.
    pub fn from_interactions(mut interactions: Vec<Interaction>) -> Self {
        // Stable sort keeps input order among equal keys.
        interactions.sort_by_key(|it| (it.user, it.item, it.timestamp));
        let mut out: Vec<Interaction> = Vec::with_capacity(interactions.len());
        for it in interactions {
            match out.last_mut() {
                Some(last) if last.user == it.user && last.item == it.item => *last = it,
                _ => out.push(it),
            }
        }
        Dataset { interactions: out }
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn n_users(&self) -> usize {
        let mut users: Vec<UserId> = self.interactions.iter().map(|it| it.user).collect();
        users.dedup();
        users.len()
    }

    pub fn n_items(&self) -> usize {
        let mut items: Vec<ItemId> = self.interactions.iter().map(|it| it.item).collect();
        items.sort_unstable();
        items.dedup();
        items.len()
    }

    pub fn time_range(&self) -> Option<(i64, i64)> {
        let min = self.interactions.iter().map(|it| it.timestamp).min()?;
        let max = self.interactions.iter().map(|it| it.timestamp).max()?;
        Some((min, max))
    }

    pub fn summary(&self) -> DatasetSummary {
        let range = self.time_range();
        DatasetSummary {
            users: self.n_users(),
            items: self.n_items(),
            ratings: self.len(),
            min_timestamp: range.map(|r| r.0),
            max_timestamp: range.map(|r| r.1),
        }
    }

    fn by_user(&self) -> Vec<&[Interaction]> {
        self.interactions
            .chunk_by(|a, b| a.user == b.user)
            .collect()
    }
}

/// Parses a rating log in the declared format.
pub fn parse_ratings<R: Read>(source: R, format: Format) -> Result<Dataset> {
    let reader = BufReader::new(source);
    let sep = format.separator();
    let mut interactions = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let text = line.trim_end_matches('\r');
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(sep).collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 4 fields separated by {sep:?}, found {}", fields.len()),
            });
        }
        let user: u32 = parse_field(fields[0], "user id", lineno)?;
        let item: u32 = parse_field(fields[1], "item id", lineno)?;
        let rating: f64 = parse_field(fields[2], "rating", lineno)?;
        let timestamp: i64 = parse_field(fields[3], "timestamp", lineno)?;
        let it = Interaction::new(user, item, rating, timestamp);
        it.validate().map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        interactions.push(it);
    }
    if interactions.is_empty() {
        warn!("rating log is empty");
    }
    Ok(Dataset::from_interactions(interactions))
}

fn parse_field<T: FromStr>(raw: &str, what: &str, line: usize) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("non-numeric {what} '{raw}'"),
    })
}

/// Reads a rating file, decompressing when the name ends in `.gz`.
pub fn read_ratings_file(path: &Path, format: Format) -> Result<Dataset> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        parse_ratings(GzDecoder::new(file), format)
    } else {
        parse_ratings(file, format)
    }
}

/// Writes interactions in the given format, one per line.
pub fn write_ratings<W: Write>(mut out: W, dataset: &Dataset, format: Format) -> Result<()> {
    let sep = format.separator();
    for it in &dataset.interactions {
        writeln!(
            out,
            "{}{sep}{}{sep}{}{sep}{}",
            it.user.0, it.item.0, it.rating, it.timestamp
        )?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitMode {
    Holdout,
    KFold,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "holdout" => Ok(SplitMode::Holdout),
            "kfold" => Ok(SplitMode::KFold),
            other => Err(Error::InvalidArgument(format!(
                "unknown split mode '{other}' (expected holdout or kfold)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_fraction: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            mode: SplitMode::Holdout,
            train_fraction: 0.8,
            folds: 5,
            seed: 42,
        }
    }
}

/// Per-user temporal holdout: each user's earliest `ceil(f * n)` interactions
/// train, the rest test.
pub fn split_holdout(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction must lie in (0, 1), got {f}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for events in d.by_user() {
        let mut events = events.to_vec();
        events.sort_by_key(|it| (it.timestamp, it.item));
        let n = events.len();
        // The epsilon keeps exact products such as 0.8 * 10 from rounding up.
        let n_train = ((f * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
        test.extend_from_slice(&events[n_train..]);
        events.truncate(n_train);
        train.extend(events);
    }
    Ok((Dataset::from_interactions(train), Dataset::from_interactions(test)))
}

/// Per-user seeded random partition into `folds` groups; fold `k` tests on
/// group `k`. Users with fewer interactions than folds only ever train.
pub fn split_kfold(d: &Dataset, spec: &SplitSpec) -> Result<Vec<(Dataset, Dataset)>> {
    let k = spec.folds;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("folds must be >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut assignment: HashMap<(UserId, ItemId), usize> = HashMap::new();
    for events in d.by_user() {
        if events.len() < k {
            continue;
        }
        // Shuffle then deal round-robin so group sizes differ by at most one.
        let mut order: Vec<usize> = (0..events.len()).collect();
        order.shuffle(&mut rng);
        for (slot, &idx) in order.iter().enumerate() {
            let it = &events[idx];
            assignment.insert((it.user, it.item), slot % k);
        }
    }
    Ok((0..k)
        .map(|fold| {
            let (test, train): (Vec<Interaction>, Vec<Interaction>) = d
                .interactions
                .iter()
                .partition(|it| assignment.get(&(it.user, it.item)) == Some(&fold));
            (Dataset::from_interactions(train), Dataset::from_interactions(test))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn user_events(user: u32, n: u32) -> Vec<Interaction> {
        (0..n)
            .map(|k| Interaction::new(user, 100 + k, 1.0 + (k % 5) as f64, 1000 + 10 * k as i64))
            .collect()
    }

    #[test]
    fn parse_ml10m_line() {
        let d = parse_ratings("1::1193::5::978300760\n".as_bytes(), Format::Ml10m).unwrap();
        assert_eq!(d.interactions, vec![Interaction::new(1, 1193, 5.0, 978300760)]);
    }

    #[test]
    fn parse_ml100k_and_dedup_latest() {
        let src = "1\t2\t3\t200\n1\t2\t5\t100\n";
        let d = parse_ratings(src.as_bytes(), Format::Ml100k).unwrap();
        assert_eq!(d.interactions, vec![Interaction::new(1, 2, 3.0, 200)]);
    }

    #[test]
    fn parse_error_names_line() {
        let err = parse_ratings("1\t2\tx\t3".as_bytes(), Format::Ml100k).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("rating"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_ratings("1::2::3::4\n1::2::3\n".as_bytes(), Format::Ml10m).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn parse_empty() {
        let d = parse_ratings("".as_bytes(), Format::Ml10m).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.summary().ratings, 0);
    }

    #[test]
    fn gzip_by_extension() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.dat.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::fast());
        enc.write_all(b"4::5::2.5::10\n").unwrap();
        enc.finish().unwrap();
        let d = read_ratings_file(&path, Format::Ml10m).unwrap();
        assert_eq!(d.interactions, vec![Interaction::new(4, 5, 2.5, 10)]);
    }

    #[test]
    fn holdout_ten_events() {
        let d = Dataset::from_interactions(user_events(1, 10));
        let (train, test) = split_holdout(&d, &SplitSpec::default()).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let last_train = train.interactions.iter().map(|i| i.timestamp).max().unwrap();
        assert!(test.interactions.iter().all(|i| i.timestamp >= last_train));
    }

    #[test]
    fn holdout_single_event_user() {
        let d = Dataset::from_interactions(user_events(1, 1));
        let (train, test) = split_holdout(&d, &SplitSpec::default()).unwrap();
        assert_eq!((train.len(), test.len()), (1, 0));
    }

    #[test]
    fn holdout_three_by_five() {
        let mut all = Vec::new();
        for u in 1..=3 {
            all.extend(user_events(u, 5));
        }
        let d = Dataset::from_interactions(all);
        let (train, test) = split_holdout(&d, &SplitSpec::default()).unwrap();
        assert_eq!((train.len(), test.len()), (12, 3));
    }

    #[test]
    fn holdout_rejects_bad_fraction() {
        let d = Dataset::from_interactions(user_events(1, 3));
        for f in [0.0, 1.0, -0.5, 1.5] {
            let spec = SplitSpec { train_fraction: f, ..SplitSpec::default() };
            assert!(split_holdout(&d, &spec).is_err());
        }
    }

    #[test]
    fn kfold_partition() {
        let d = Dataset::from_interactions(user_events(7, 10));
        let spec = SplitSpec { mode: SplitMode::KFold, ..SplitSpec::default() };
        let folds = split_kfold(&d, &spec).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = HashSet::new();
        for (train, test) in &folds {
            assert_eq!(test.len(), 2);
            assert_eq!(train.len() + test.len(), 10);
            for it in &test.interactions {
                assert!(seen.insert((it.user, it.item)), "test sets overlap");
            }
        }
        assert_eq!(seen.len(), 10);
        assert_eq!(folds, split_kfold(&d, &spec).unwrap());
    }

    #[test]
    fn kfold_small_user_only_trains() {
        let mut all = user_events(1, 3);
        all.extend(user_events(2, 10));
        let d = Dataset::from_interactions(all);
        let spec = SplitSpec { mode: SplitMode::KFold, ..SplitSpec::default() };
        for (train, test) in split_kfold(&d, &spec).unwrap() {
            assert!(test.interactions.iter().all(|it| it.user == UserId(2)));
            assert_eq!(train.interactions.iter().filter(|it| it.user == UserId(1)).count(), 3);
        }
        let spec = SplitSpec { folds: 1, ..spec };
        assert!(split_kfold(&d, &spec).is_err());
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        prop::collection::vec((0u32..8, 0u32..12, 1u32..=5, 0i64..1000), 0..60).prop_map(|v| {
            Dataset::from_interactions(
                v.into_iter()
                    .map(|(u, i, r, t)| Interaction::new(u, i, r as f64, t))
                    .collect(),
            )
        })
    }

    fn pairs(d: &Dataset) -> HashSet<(UserId, ItemId)> {
        d.interactions.iter().map(|it| (it.user, it.item)).collect()
    }

    proptest! {
        #[test]
        fn roundtrip_serialization(d in arb_dataset(), tab in any::<bool>()) {
            let format = if tab { Format::Ml100k } else { Format::Ml10m };
            let mut buf = Vec::new();
            write_ratings(&mut buf, &d, format).unwrap();
            let back = parse_ratings(buf.as_slice(), format).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn splits_partition_dataset(d in arb_dataset(), seed in any::<u64>()) {
            let all = pairs(&d);
            let (train, test) = split_holdout(&d, &SplitSpec::default()).unwrap();
            let (a, b) = (pairs(&train), pairs(&test));
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(a.union(&b).cloned().collect::<HashSet<_>>(), all.clone());

            let spec = SplitSpec { mode: SplitMode::KFold, seed, ..SplitSpec::default() };
            for (train, test) in split_kfold(&d, &spec).unwrap() {
                let (a, b) = (pairs(&train), pairs(&test));
                prop_assert!(a.is_disjoint(&b));
                prop_assert_eq!(a.union(&b).cloned().collect::<HashSet<_>>(), all.clone());
            }
        }
    }
}
