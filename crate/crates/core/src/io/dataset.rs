use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical_triplet, Dataset};

/// Where the user and item columns sit in each record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnOrder {
    /// `user item` and `user1 user2 item`.
    #[default]
    UserFirst,
    /// `item user` and `item user1 user2`.
    ItemFirst,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadOptions {
    /// Add `(u1, j)` and `(u2, j)` to the interactions for every triplet.
    pub derive_interactions_from_triplets: bool,
    /// Drop repeated records instead of rejecting the input.
    pub dedup: bool,
    pub column_order: ColumnOrder,
}

/// Raw ids in dense-id order: `users[k]` is the raw id of dense user `k`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMap {
    pub users: Vec<u64>,
    pub items: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub ids: IdMap,
}

fn parse_records(path: &Path, arity: usize) -> Result<Vec<Vec<u64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: format!("cannot read file: {e}"),
    })?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { path: path.to_path_buf(), line: n + 1, message };
        let fields: Vec<&str> =
            trimmed.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        if fields.len() != arity {
            return Err(err(format!("expected {arity} fields, found {}", fields.len())));
        }
        let record = fields
            .iter()
            .map(|f| f.parse::<u64>().map_err(|_| err(format!("'{f}' is not a non-negative integer"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(record);
    }
    Ok(out)
}

/// Reads `user item` interactions and `user1 user2 item` triplets (tab,
/// comma or space separated; blank lines and `#` comments skipped), then
/// maps raw ids to dense ids in ascending raw-id order.
pub fn load_dataset(interactions: &Path, triplets: &Path, options: &LoadOptions) -> Result<LoadedDataset> {
    let item_first = options.column_order == ColumnOrder::ItemFirst;
    let raw_pairs: Vec<(u64, u64)> = parse_records(interactions, 2)?
        .into_iter()
        .map(|r| if item_first { (r[1], r[0]) } else { (r[0], r[1]) })
        .collect();
    let raw_triplets: Vec<(u64, u64, u64)> = parse_records(triplets, 3)?
        .into_iter()
        .map(|r| if item_first { (r[1], r[2], r[0]) } else { (r[0], r[1], r[2]) })
        .collect();

    let mut users = BTreeSet::new();
    let mut items = BTreeSet::new();
    for &(u, i) in &raw_pairs {
        users.insert(u);
        items.insert(i);
    }
    for &(a, b, i) in &raw_triplets {
        users.insert(a);
        users.insert(b);
        items.insert(i);
    }
    let ids = IdMap { users: users.into_iter().collect(), items: items.into_iter().collect() };
    let user_of: HashMap<u64, usize> = ids.users.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    let item_of: HashMap<u64, usize> = ids.items.iter().enumerate().map(|(k, &r)| (r, k)).collect();

    let mut pairs: Vec<(usize, usize)> = raw_pairs.iter().map(|&(u, i)| (user_of[&u], item_of[&i])).collect();
    let mut trips: Vec<(usize, usize, usize)> =
        raw_triplets.iter().map(|&(a, b, i)| (user_of[&a], user_of[&b], item_of[&i])).collect();

    if options.dedup {
        let mut seen = HashSet::new();
        pairs.retain(|p| seen.insert(*p));
        let mut seen = HashSet::new();
        trips.retain(|&t| seen.insert(canonical_triplet(t)));
    }
    if options.derive_interactions_from_triplets {
        let mut present: HashSet<(usize, usize)> = pairs.iter().copied().collect();
        for &(a, b, i) in &trips {
            for u in [a, b] {
                if present.insert((u, i)) {
                    pairs.push((u, i));
                }
            }
        }
    }

    let dataset = Dataset::new(ids.users.len(), ids.items.len(), pairs, trips)?;
    Ok(LoadedDataset { dataset, ids })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Writes tab-separated `interactions.tsv` and `triplets.tsv` under `dir`
/// and returns their paths.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<(PathBuf, PathBuf)> {
    let inter = dir.join("interactions.tsv");
    let trip = dir.join("triplets.tsv");
    let mut w = create(&inter)?;
    for &(u, i) in &dataset.interactions {
        writeln!(w, "{u}\t{i}")?;
    }
    w.flush()?;
    let mut w = create(&trip)?;
    for &(a, b, i) in &dataset.triplets {
        writeln!(w, "{a}\t{b}\t{i}")?;
    }
    w.flush()?;
    Ok((inter, trip))
}
