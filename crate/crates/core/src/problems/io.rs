use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Observed ratings; indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsData {
    pub users: usize,
    pub items: usize,
    pub train: Vec<(usize, usize, f64)>,
    pub test: Vec<(usize, usize, f64)>,
}

impl RatingsData {
    /// Validates bounds, the rating range and uniqueness of training pairs.
    pub fn new(
        users: usize,
        items: usize,
        train: Vec<(usize, usize, f64)>,
        test: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = HashSet::new();
        for (line, &(u, i, r)) in train.iter().enumerate() {
            check_triple(users, items, u, i, r)?;
            if !seen.insert((u, i)) {
                return Err(Error::DuplicateRating {
                    user: u,
                    item: i,
                    line: line + 1,
                });
            }
        }
        for &(u, i, r) in &test {
            check_triple(users, items, u, i, r)?;
        }
        Ok(RatingsData {
            users,
            items,
            train,
            test,
        })
    }

    /// Random ratings in `{1,...,5}` on a `users x items` grid, each entry
    /// observed with probability `fraction`.
    pub fn random(users: usize, items: usize, fraction: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        // low rank signal so the completion problem has structure
        let a: Vec<f64> = (0..users).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..items).map(|_| rng.random_range(0.0..1.0)).collect();
        for u in 0..users {
            for i in 0..items {
                let r = (1.0 + 4.0 * a[u] * b[i] + rng.random_range(-0.5..0.5)).round().clamp(1.0, 5.0);
                if rng.random_bool(fraction.clamp(0.0, 1.0)) {
                    train.push((u, i, r));
                } else {
                    test.push((u, i, r));
                }
            }
        }
        RatingsData::new(users, items, train, test)
    }

    /// Largest 0-based indices plus one over both splits.
    fn shape_of(train: &[(usize, usize, f64)], test: &[(usize, usize, f64)]) -> (usize, usize) {
        train.iter().chain(test).fold((0, 0), |(u, i), t| (u.max(t.0 + 1), i.max(t.1 + 1)))
    }
}

fn check_triple(users: usize, items: usize, u: usize, i: usize, r: f64) -> Result<()> {
    if u >= users {
        return Err(Error::IndexOutOfRange { index: u, len: users });
    }
    if i >= items {
        return Err(Error::IndexOutOfRange { index: i, len: items });
    }
    if !(1.0..=5.0).contains(&r) {
        return Err(Error::InvalidParameter(format!("rating {r} outside [1, 5]")));
    }
    Ok(())
}

fn parse_ratings(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected at least 3 fields, found {}", fields.len()),
            });
        }
        let idx = |s: &str, what: &str| -> Result<usize> {
            let v: usize = s.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad {what} index '{s}'"),
            })?;
            v.checked_sub(1).ok_or(Error::Parse {
                line: lineno,
                message: format!("{what} index must be 1-based"),
            })
        };
        let u = idx(fields[0], "user")?;
        let i = idx(fields[1], "item")?;
        let r: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad rating '{}'", fields[2]),
        })?;
        if !(1.0..=5.0).contains(&r) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("rating {r} outside [1, 5]"),
            });
        }
        out.push((u, i, r));
    }
    Ok(out)
}

/// Reads a MovieLens `u.data` style file (`user item rating timestamp`,
/// 1-based indices); the timestamp is ignored.
pub fn load_ratings(path: impl AsRef<Path>) -> Result<RatingsData> {
    load_ratings_split(path, None::<&Path>)
}

/// Like [`load_ratings`] with an optional held-out file sharing the index
/// space.
pub fn load_ratings_split(train: impl AsRef<Path>, test: Option<impl AsRef<Path>>) -> Result<RatingsData> {
    let tr = parse_ratings(train.as_ref())?;
    if tr.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let te = match test {
        Some(p) => parse_ratings(p.as_ref())?,
        None => Vec::new(),
    };
    let (users, items) = RatingsData::shape_of(&tr, &te);
    RatingsData::new(users, items, tr, te)
}

/// Undirected simple graph with its dense Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphData {
    pub p: usize,
    /// Edges `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Row-major `p x p` Laplacian.
    pub laplacian: Vec<f64>,
    pub self_loops_dropped: usize,
}

impl GraphData {
    /// Deduplicates edges and drops self-loops.
    pub fn from_edges(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        let mut loops = 0;
        for (a, b) in edges {
            if a >= p || b >= p {
                return Err(Error::IndexOutOfRange { index: a.max(b), len: p });
            }
            if a == b {
                loops += 1;
                continue;
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut laplacian = vec![0.0; p * p];
        for &(a, b) in &set {
            laplacian[a * p + a] += 1.0;
            laplacian[b * p + b] += 1.0;
            laplacian[a * p + b] -= 1.0;
            laplacian[b * p + a] -= 1.0;
        }
        if loops > 0 {
            log::warn!("dropped {loops} self-loops");
        }
        Ok(GraphData {
            p,
            edges: set.into_iter().collect(),
            laplacian,
            self_loops_dropped: loops,
        })
    }

    /// Connected random graph: a random spanning tree plus uniformly drawn
    /// extra edges until `num_edges` distinct edges exist.
    pub fn random(p: usize, num_edges: usize, seed: u64) -> Result<Self> {
        let max_edges = p * p.saturating_sub(1) / 2;
        if num_edges > max_edges || (p > 1 && num_edges < p - 1) {
            return Err(Error::InvalidParameter(format!(
                "cannot build a connected graph on {p} vertices with {num_edges} edges"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = BTreeSet::new();
        for v in 1..p {
            let u = rng.random_range(0..v);
            set.insert((u, v));
        }
        while set.len() < num_edges {
            let a = rng.random_range(0..p);
            let b = rng.random_range(0..p);
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        GraphData::from_edges(p, set)
    }
}

/// Reads an edge list or a MatrixMarket pattern file. Lines starting with
/// `%` or `#` are comments. Edge lists are 1-based unless some index is 0;
/// MatrixMarket files are always 1-based and take the vertex count from
/// their size line.
pub fn load_graph(path: impl AsRef<Path>) -> Result<GraphData> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut matrix_market = false;
    let mut declared: Option<usize> = None;
    let mut raw = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = no + 1;
        let t = line.trim();
        if no == 0 && t.starts_with("%%MatrixMarket") {
            let lower = t.to_ascii_lowercase();
            if !lower.contains("matrix") || !lower.contains("coordinate") {
                return Err(Error::Parse {
                    line: 1,
                    message: "unsupported MatrixMarket header".into(),
                });
            }
            matrix_market = true;
            continue;
        }
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let num = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad vertex index '{s}'"),
            })
        };
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                message: "expected two vertex indices".into(),
            });
        }
        if matrix_market && declared.is_none() {
            let rows = num(fields[0])?;
            let cols = num(fields[1])?;
            declared = Some(rows.max(cols));
            continue;
        }
        raw.push((num(fields[0])?, num(fields[1])?, lineno));
    }
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let one_based = matrix_market || raw.iter().all(|&(a, b, _)| a > 0 && b > 0);
    let shift = usize::from(one_based);
    if matrix_market {
        if let Some(&(a, b, line)) = raw.iter().find(|&&(a, b, _)| a == 0 || b == 0) {
            return Err(Error::Parse {
                line,
                message: format!("index 0 in 1-based file ({a}, {b})"),
            });
        }
    }
    let max_index = raw.iter().map(|&(a, b, _)| a.max(b)).max().unwrap_or(0) - shift;
    let p = match declared {
        Some(p) => {
            if let Some(&(a, b, line)) = raw.iter().find(|&&(a, b, _)| a.max(b) > p) {
                return Err(Error::Parse {
                    line,
                    message: format!("vertex ({a}, {b}) exceeds declared size {p}"),
                });
            }
            p
        }
        None => max_index + 1,
    };
    GraphData::from_edges(p, raw.into_iter().map(|(a, b, _)| (a - shift, b - shift)))
}
