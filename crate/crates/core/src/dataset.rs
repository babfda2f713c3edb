//! Rating tables, delimited-file loading and k-fold plans.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Closed interval of valid rating values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidArgument(format!(
                "rating scale needs min < max, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }

    pub fn clip(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }
}

impl FromStr for RatingScale {
    type Err = Error;

    /// Parses `min,max` or `min:max`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("scale `{s}` is not `min,max`"));
        let (lo, hi) = s.split_once(',').or_else(|| s.split_once(':')).ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        RatingScale::new(lo, hi)
    }
}

/// Role of one field in a delimited line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    User,
    Item,
    Rating,
    /// Any other field (timestamps and the like).
    Skip,
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "user" | "u" => Ok(Column::User),
            "item" | "i" => Ok(Column::Item),
            "rating" | "r" => Ok(Column::Rating),
            "timestamp" | "skip" | "_" | "-" => Ok(Column::Skip),
            other => Err(Error::InvalidArgument(format!("unknown column `{other}`"))),
        }
    }
}

/// How to split a line into fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    /// Runs of spaces and tabs.
    Whitespace,
    Text(String),
}

impl Delimiter {
    fn split<'a>(&'a self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Text(sep) => line.split(sep.as_str()).collect(),
        }
    }
}

impl FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" => Err(Error::InvalidArgument("empty delimiter".into())),
            "whitespace" | "ws" => Ok(Delimiter::Whitespace),
            "\\t" | "tab" => Ok(Delimiter::Text("\t".into())),
            other => Ok(Delimiter::Text(other.to_string())),
        }
    }
}

/// Layout of a ratings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatSpec {
    pub delimiter: Delimiter,
    pub columns: Vec<Column>,
    pub header: bool,
    pub scale: RatingScale,
}

impl FormatSpec {
    pub fn new(
        delimiter: Delimiter,
        columns: Vec<Column>,
        header: bool,
        scale: RatingScale,
    ) -> Result<Self> {
        for role in [Column::User, Column::Item, Column::Rating] {
            let n = columns.iter().filter(|c| **c == role).count();
            if n != 1 {
                return Err(Error::InvalidArgument(format!(
                    "columns must name exactly one {role:?} field, found {n}"
                )));
            }
        }
        Ok(Self {
            delimiter,
            columns,
            header,
            scale,
        })
    }

    fn position(&self, role: Column) -> usize {
        self.columns
            .iter()
            .position(|c| *c == role)
            .expect("validated in FormatSpec::new")
    }
}

/// Built-in dataset layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// MovieLens-100k `u.data`: tab separated user, item, rating, timestamp.
    Ml100k,
    /// Jester: whitespace separated user, joke, rating in [-10, 10].
    Jester,
    /// Book-Crossing `BX-Book-Ratings.csv`: quoted, `;` separated, header line.
    BookCrossing,
}

impl Preset {
    pub fn format(self) -> FormatSpec {
        use Column::*;
        let (delimiter, columns, header, min, max) = match self {
            Preset::Ml100k => (
                Delimiter::Text("\t".into()),
                vec![User, Item, Rating, Skip],
                false,
                1.0,
                5.0,
            ),
            Preset::Jester => (Delimiter::Whitespace, vec![User, Item, Rating], false, -10.0, 10.0),
            Preset::BookCrossing => (
                Delimiter::Text(";".into()),
                vec![User, Item, Rating],
                true,
                1.0,
                10.0,
            ),
        };
        FormatSpec {
            delimiter,
            columns,
            header,
            scale: RatingScale { min, max },
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ml100k" | "ml-100k" => Ok(Preset::Ml100k),
            "jester" => Ok(Preset::Jester),
            "bookcrossing" | "book-crossing" => Ok(Preset::BookCrossing),
            other => Err(Error::InvalidArgument(format!(
                "unknown preset `{other}` (expected ml100k, jester or bookcrossing)"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Ml100k => "ml100k",
            Preset::Jester => "jester",
            Preset::BookCrossing => "bookcrossing",
        })
    }
}

/// One observed rating, in inner ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

/// An immutable set of ratings with contiguous inner ids.
///
/// Inner ids are assigned in order of first appearance. A `(user, item)` pair
/// appears at most once; later duplicates overwrite the earlier value in place.
#[derive(Debug, Clone)]
pub struct RatingsTable {
    users: Vec<String>,
    items: Vec<String>,
    user_ids: HashMap<String, usize>,
    item_ids: HashMap<String, usize>,
    ratings: Vec<Rating>,
    scale: RatingScale,
}

#[derive(Default)]
struct TableBuilder {
    users: Vec<String>,
    items: Vec<String>,
    user_ids: HashMap<String, usize>,
    item_ids: HashMap<String, usize>,
    ratings: Vec<Rating>,
    seen: HashMap<(usize, usize), usize>,
}

fn intern(ids: &mut HashMap<String, usize>, raws: &mut Vec<String>, raw: &str) -> usize {
    if let Some(&id) = ids.get(raw) {
        return id;
    }
    let id = raws.len();
    raws.push(raw.to_string());
    ids.insert(raw.to_string(), id);
    id
}

impl TableBuilder {
    fn push(&mut self, user: &str, item: &str, value: f64) {
        let user = intern(&mut self.user_ids, &mut self.users, user);
        let item = intern(&mut self.item_ids, &mut self.items, item);
        match self.seen.get(&(user, item)) {
            Some(&at) => self.ratings[at].value = value,
            None => {
                self.seen.insert((user, item), self.ratings.len());
                self.ratings.push(Rating { user, item, value });
            }
        }
    }

    fn finish(self, scale: RatingScale) -> Result<RatingsTable> {
        if self.ratings.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(RatingsTable {
            users: self.users,
            items: self.items,
            user_ids: self.user_ids,
            item_ids: self.item_ids,
            ratings: self.ratings,
            scale,
        })
    }
}

impl RatingsTable {
    /// Builds a table from raw `(user, item, rating)` triples.
    pub fn from_triples<U, I>(
        triples: impl IntoIterator<Item = (U, I, f64)>,
        scale: RatingScale,
    ) -> Result<Self>
    where
        U: AsRef<str>,
        I: AsRef<str>,
    {
        let mut builder = TableBuilder::default();
        for (n, (user, item, value)) in triples.into_iter().enumerate() {
            if !scale.contains(value) {
                return Err(Error::ScaleViolation {
                    line: n + 1,
                    value,
                    min: scale.min,
                    max: scale.max,
                });
            }
            builder.push(user.as_ref(), item.as_ref(), value);
        }
        builder.finish(scale)
    }

    /// Parses delimited text. Line numbers in errors are 1-based and count the
    /// header line.
    pub fn parse(text: &str, format: &FormatSpec) -> Result<Self> {
        let (pu, pi, pr) = (
            format.position(Column::User),
            format.position(Column::Item),
            format.position(Column::Rating),
        );
        let mut builder = TableBuilder::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if format.header && idx == 0 {
                continue;
            }
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields = format.delimiter.split(line);
            if fields.len() != format.columns.len() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!(
                        "expected {} fields, found {}",
                        format.columns.len(),
                        fields.len()
                    ),
                });
            }
            let raw_rating = unquote(fields[pr]);
            let value: f64 = raw_rating.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("rating `{raw_rating}` is not a number"),
            })?;
            if !value.is_finite() || !format.scale.contains(value) {
                return Err(Error::ScaleViolation {
                    line: line_no,
                    value,
                    min: format.scale.min,
                    max: format.scale.max,
                });
            }
            builder.push(unquote(fields[pu]), unquote(fields[pi]), value);
        }
        builder.finish(format.scale)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_ratings(&self) -> usize {
        self.ratings.len()
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn user_inner(&self, raw: &str) -> Option<usize> {
        self.user_ids.get(raw).copied()
    }

    pub fn item_inner(&self, raw: &str) -> Option<usize> {
        self.item_ids.get(raw).copied()
    }

    pub fn user_raw(&self, inner: usize) -> Option<&str> {
        self.users.get(inner).map(String::as_str)
    }

    pub fn item_raw(&self, inner: usize) -> Option<&str> {
        self.items.get(inner).map(String::as_str)
    }

    /// Keeps only the listed rating indices, preserving ids and scale.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let triples = indices.iter().map(|&k| {
            let r = self.ratings[k];
            (self.users[r.user].as_str(), self.items[r.item].as_str(), r.value)
        });
        RatingsTable::from_triples(triples, self.scale)
    }
}

fn unquote(field: &str) -> &str {
    let field = field.trim();
    field
        .strip_prefix('"')
        .and_then(|f| f.strip_suffix('"'))
        .unwrap_or(field)
}

/// Reads and parses a ratings file.
pub fn load_ratings(path: impl AsRef<Path>, format: &FormatSpec) -> Result<RatingsTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    // Book-Crossing ships as latin-1; ids stay opaque so a lossy decode is fine.
    let text = String::from_utf8_lossy(&bytes);
    RatingsTable::parse(&text, format)
}

/// Fold membership for every rating of a table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

/// Shuffles rating indices with a seeded generator and cuts them into `k`
/// contiguous chunks whose sizes differ by at most one.
pub fn kfold_split(table: &RatingsTable, k: usize, seed: u64) -> Result<FoldPlan> {
    let n = table.n_ratings();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "fold count {k} must lie in [2, {n}]"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, "kfold", k as u64)));
    let mut assignments = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    for fold in 0..k {
        let len = base + usize::from(fold < extra);
        for &idx in &order[start..start + len] {
            assignments[idx] = fold;
        }
        start += len;
    }
    Ok(FoldPlan {
        k,
        seed,
        assignments,
    })
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.indices_where(|f| f == fold)
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.indices_where(|f| f != fold)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    fn indices_where(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| keep(f))
            .map(|(idx, _)| idx)
            .collect()
    }
}

/// Draws `n` data rows uniformly without replacement, keeping their original
/// order and any header line.
pub fn sample_rows(text: &str, n: usize, header: bool, seed: u64) -> Result<String> {
    let mut lines = text.lines();
    let head = if header { lines.next() } else { None };
    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    if n > rows.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {n} rows from {} available",
            rows.len()
        )));
    }
    let mut picked =
        rand::seq::index::sample(&mut seed::rng(seed::derive(seed, "sample", 0)), rows.len(), n)
            .into_vec();
    picked.sort_unstable();
    let mut out = String::new();
    for line in head.into_iter().chain(picked.into_iter().map(|k| rows[k])) {
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ml100k() -> FormatSpec {
        Preset::Ml100k.format()
    }

    #[test]
    fn parses_movielens_line() {
        let table = RatingsTable::parse("196\t242\t3\t881250949\n", &ml100k()).unwrap();
        assert_eq!(table.n_ratings(), 1);
        assert_eq!(table.user_raw(0), Some("196"));
        assert_eq!(table.item_raw(0), Some("242"));
        assert_eq!(table.ratings()[0].value, 3.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            RatingsTable::parse("", &ml100k()),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            RatingsTable::parse("\n\n", &ml100k()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn out_of_scale_rating_reports_line() {
        let err = RatingsTable::parse("1\t1\t4\t0\n1\t2\t9\t0\n", &ml100k()).unwrap_err();
        assert!(matches!(err, Error::ScaleViolation { line: 2, value, .. } if value == 9.0));
    }

    #[test]
    fn non_numeric_rating_reports_line() {
        let err = RatingsTable::parse("1\t1\t4\t0\n1\t2\tfour\t0\n", &ml100k()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn wrong_field_count_is_fatal() {
        let err = RatingsTable::parse("1\t1\t4\n", &ml100k()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicates_keep_last_value() {
        let table =
            RatingsTable::parse("a\tx\t1\t0\nb\tx\t2\t0\na\tx\t5\t0\n", &ml100k()).unwrap();
        assert_eq!(table.n_ratings(), 2);
        assert_eq!(table.ratings()[0].value, 5.0);
        assert_eq!(table.n_users(), 2);
    }

    #[test]
    fn bookcrossing_layout() {
        let text = "\"User-ID\";\"ISBN\";\"Book-Rating\"\n\"276725\";\"034545104X\";\"7\"\n";
        let table = RatingsTable::parse(text, &Preset::BookCrossing.format()).unwrap();
        assert_eq!(table.user_raw(0), Some("276725"));
        assert_eq!(table.item_raw(0), Some("034545104X"));
        assert_eq!(table.ratings()[0].value, 7.0);
    }

    #[test]
    fn jester_layout_accepts_negative_ratings() {
        let table =
            RatingsTable::parse("1\t\t5\t\t-9.281\n2 7 0.5\n", &Preset::Jester.format()).unwrap();
        assert_eq!(table.n_ratings(), 2);
        assert_eq!(table.ratings()[0].value, -9.281);
    }

    #[test]
    fn kfold_sizes_and_partition() {
        let triples: Vec<_> = (0..100_000)
            .map(|k| (format!("u{}", k % 997), format!("i{}", k / 997), 3.0))
            .collect();
        let table = RatingsTable::from_triples(triples, RatingScale::new(1.0, 5.0).unwrap())
            .unwrap();
        let plan = kfold_split(&table, 5, 7).unwrap();
        assert_eq!(plan.fold_sizes(), vec![20_000; 5]);
    }

    #[test]
    fn kfold_rejects_bad_k() {
        let table = RatingsTable::parse("1\t1\t4\t0\n1\t2\t3\t0\n", &ml100k()).unwrap();
        assert!(kfold_split(&table, 1, 0).is_err());
        assert!(kfold_split(&table, 3, 0).is_err());
        assert!(kfold_split(&table, 2, 0).is_ok());
    }

    #[test]
    fn sampling_all_rows_is_a_copy() {
        let text = "h\na\nb\nc\n";
        assert_eq!(sample_rows(text, 3, true, 1).unwrap(), text);
        assert_eq!(sample_rows(text, 2, true, 1).unwrap().lines().count(), 3);
        assert!(sample_rows(text, 4, true, 1).is_err());
    }

    fn arb_table() -> impl Strategy<Value = RatingsTable> {
        prop::collection::vec((0u8..12, 0u8..15, 1u8..=5), 2..120).prop_map(|rows| {
            RatingsTable::from_triples(
                rows.into_iter()
                    .map(|(u, i, r)| (u.to_string(), i.to_string(), f64::from(r))),
                RatingScale::new(1.0, 5.0).unwrap(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn folds_partition_and_are_deterministic(table in arb_table(), k in 2usize..6, seed in any::<u64>()) {
            prop_assume!(k <= table.n_ratings());
            let plan = kfold_split(&table, k, seed).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(sizes.iter().sum::<usize>(), table.n_ratings());
            let mut all: Vec<usize> = (0..k).flat_map(|f| plan.test_indices(f)).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..table.n_ratings()).collect::<Vec<_>>());
            prop_assert_eq!(plan, kfold_split(&table, k, seed).unwrap());
        }

        #[test]
        fn id_maps_round_trip(table in arb_table()) {
            for inner in 0..table.n_users() {
                let raw = table.user_raw(inner).unwrap();
                prop_assert_eq!(table.user_inner(raw), Some(inner));
            }
            for inner in 0..table.n_items() {
                let raw = table.item_raw(inner).unwrap();
                prop_assert_eq!(table.item_inner(raw), Some(inner));
            }
            for r in table.ratings() {
                prop_assert!(table.scale().contains(r.value));
            }
        }
    }
}
