//! Dataset representation: response, regressor groups ("players") and the
//! dummy-encoded design matrix they expand into.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on players for complete subset enumeration.
pub const MAX_EXACT_PLAYERS: usize = 25;
/// Upper bound on players for any run (keys are 64-bit masks).
pub const MAX_PLAYERS: usize = 63;

/// Inclusion mask over players: bit `i` set means player `i` is in the coalition.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SubsetKey(pub u64);

impl SubsetKey {
    pub const EMPTY: SubsetKey = SubsetKey(0);

    pub fn full(p: usize) -> SubsetKey {
        assert!(p <= MAX_PLAYERS, "at most {MAX_PLAYERS} players");
        SubsetKey((1u64 << p) - 1)
    }

    pub fn from_players(players: impl IntoIterator<Item = usize>) -> SubsetKey {
        SubsetKey(players.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    pub fn contains(self, player: usize) -> bool {
        self.0 >> player & 1 == 1
    }

    pub fn with(self, player: usize) -> SubsetKey {
        SubsetKey(self.0 | (1 << player))
    }

    pub fn without(self, player: usize) -> SubsetKey {
        SubsetKey(self.0 & !(1 << player))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: SubsetKey) -> bool {
        self.0 & !other.0 == 0
    }

    /// Player indices in increasing order.
    pub fn players(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |i| bits >> i & 1 == 1)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SubsetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

/// A named regressor group; a multi-level factor is one player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Player {
    pub name: String,
    /// Design column indices (0-based, excluding the intercept).
    pub columns: Vec<usize>,
}

/// Immutable regression data. The intercept is implicit and always present.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    response_name: String,
    y: Vec<f64>,
    design: DMatrix<f64>,
    column_names: Vec<String>,
    players: Vec<Player>,
}

impl Dataset {
    pub fn new(
        response_name: impl Into<String>,
        y: Vec<f64>,
        design: DMatrix<f64>,
        column_names: Vec<String>,
        players: Vec<Player>,
    ) -> Result<Dataset> {
        let n = y.len();
        let m = design.ncols();
        if design.nrows() != n {
            return Err(Error::Argument(format!(
                "design has {} rows but response has {n}",
                design.nrows()
            )));
        }
        if column_names.len() != m {
            return Err(Error::Argument(format!(
                "{} column names for {m} design columns",
                column_names.len()
            )));
        }
        if players.is_empty() {
            return Err(Error::Argument("no players".into()));
        }
        if players.len() > MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                method: "any run",
                p: players.len(),
                limit: MAX_PLAYERS,
            });
        }
        let mut names = HashSet::new();
        let mut owner: Vec<Option<usize>> = vec![None; m];
        for (pi, player) in players.iter().enumerate() {
            if !names.insert(player.name.as_str()) {
                return Err(Error::DuplicatePlayer(player.name.clone()));
            }
            if player.columns.is_empty() {
                return Err(Error::Argument(format!(
                    "player `{}` has no columns",
                    player.name
                )));
            }
            for &c in &player.columns {
                match owner.get(c) {
                    None => {
                        return Err(Error::Argument(format!(
                            "player `{}` references column {c} beyond {m}",
                            player.name
                        )))
                    }
                    Some(Some(other)) => {
                        return Err(Error::Argument(format!(
                            "column {c} claimed by players `{}` and `{}`",
                            players[*other].name, player.name
                        )))
                    }
                    Some(None) => owner[c] = Some(pi),
                }
            }
        }
        if let Some(c) = owner.iter().position(Option::is_none) {
            return Err(Error::Argument(format!(
                "design column `{}` belongs to no player",
                column_names[c]
            )));
        }
        if n < m + 1 {
            return Err(Error::TooFewObservations { n, columns: m });
        }
        if y.iter().any(|v| !v.is_finite()) || design.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite value in data".into()));
        }
        Ok(Dataset {
            response_name: response_name.into(),
            y,
            design,
            column_names,
            players,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of design columns, intercept excluded.
    pub fn m(&self) -> usize {
        self.design.ncols()
    }

    pub fn p(&self) -> usize {
        self.players.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    pub fn player_names(&self) -> Vec<String> {
        self.players.iter().map(|p| p.name.clone()).collect()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn full_key(&self) -> SubsetKey {
        SubsetKey::full(self.p())
    }

    /// Names of the players in `key`, joined with `+` (`(intercept)` when empty).
    pub fn describe(&self, key: SubsetKey) -> String {
        if key.is_empty() {
            return "(intercept)".into();
        }
        key.players()
            .filter_map(|i| self.players.get(i).map(|p| p.name.as_str()))
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Design columns owned by the players in `key`, in original column order.
    pub fn select_columns(&self, key: SubsetKey) -> Vec<usize> {
        let mut cols: Vec<usize> = key
            .players()
            .take_while(|&i| i < self.p())
            .flat_map(|i| self.players[i].columns.iter().copied())
            .collect();
        cols.sort_unstable();
        cols
    }

    /// Model matrix for `key`: intercept column first, then the selected columns.
    pub fn model_matrix(&self, key: SubsetKey) -> DMatrix<f64> {
        let cols = self.select_columns(key);
        let n = self.n();
        DMatrix::from_fn(n, cols.len() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                self.design[(i, cols[j - 1])]
            }
        })
    }

    pub fn model_column_names(&self, key: SubsetKey) -> Vec<String> {
        std::iter::once("(intercept)".to_string())
            .chain(
                self.select_columns(key)
                    .into_iter()
                    .map(|c| self.column_names[c].clone()),
            )
            .collect()
    }

    /// Same regressors, different response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Dataset> {
        Dataset::new(
            self.response_name.clone(),
            y,
            self.design.clone(),
            self.column_names.clone(),
            self.players.clone(),
        )
    }

    /// Rows where `keep` is true, players unchanged.
    pub fn filter_rows(&self, keep: impl Fn(usize, f64) -> bool) -> Result<Dataset> {
        let rows: Vec<usize> = (0..self.n()).filter(|&i| keep(i, self.y[i])).collect();
        let design = DMatrix::from_fn(rows.len(), self.m(), |i, j| self.design[(rows[i], j)]);
        Dataset::new(
            self.response_name.clone(),
            rows.iter().map(|&i| self.y[i]).collect(),
            design,
            self.column_names.clone(),
            self.players.clone(),
        )
    }

    /// Restrict to a subset of players (renumbered in the given order).
    pub fn with_players(&self, names: &[String]) -> Result<Dataset> {
        let mut columns = Vec::new();
        let mut players = Vec::new();
        for name in names {
            let player = self
                .players
                .iter()
                .find(|p| &p.name == name)
                .ok_or_else(|| Error::Argument(format!("unknown player `{name}`")))?;
            let start = columns.len();
            columns.extend(player.columns.iter().copied());
            players.push(Player {
                name: player.name.clone(),
                columns: (start..columns.len()).collect(),
            });
        }
        let design = DMatrix::from_fn(self.n(), columns.len(), |i, j| self.design[(i, columns[j])]);
        Dataset::new(
            self.response_name.clone(),
            self.y.clone(),
            design,
            columns
                .iter()
                .map(|&c| self.column_names[c].clone())
                .collect(),
            players,
        )
    }
}

/// String-valued table as read from a delimited text file.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn from_reader<R: Read>(reader: R, delimiter: u8) -> Result<RawTable> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(RawTable { headers, rows })
    }

    pub fn from_path(path: impl AsRef<Path>, delimiter: u8) -> Result<RawTable> {
        let file = std::fs::File::open(path)?;
        RawTable::from_reader(std::io::BufReader::new(file), delimiter)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn column(&self, name: &str) -> Result<Vec<&str>> {
        let idx = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let v = row.get(idx).map(String::as_str).unwrap_or("");
                if is_missing(v) {
                    Err(Error::MissingValue {
                        row: r + 1,
                        column: name.to_string(),
                    })
                } else {
                    Ok(v)
                }
            })
            .collect()
    }
}

fn is_missing(v: &str) -> bool {
    matches!(v, "" | "NA" | "NaN" | "nan" | "null")
}

/// One player: a name and the raw table columns it groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerSpec {
    pub name: String,
    pub columns: Vec<String>,
}

impl PlayerSpec {
    pub fn single(column: impl Into<String>) -> PlayerSpec {
        let column = column.into();
        PlayerSpec {
            name: column.clone(),
            columns: vec![column],
        }
    }

    /// Parses `a,b,grp=c+d` into three players: `a`, `b`, and `grp` over `c` and `d`.
    pub fn parse_list(spec: &str) -> Result<Vec<PlayerSpec>> {
        let specs: Vec<PlayerSpec> = spec
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| match item.split_once('=') {
                Some((name, cols)) => {
                    let columns: Vec<String> = cols
                        .split('+')
                        .map(str::trim)
                        .filter(|c| !c.is_empty())
                        .map(str::to_string)
                        .collect();
                    if name.trim().is_empty() || columns.is_empty() {
                        Err(Error::Argument(format!("malformed player spec `{item}`")))
                    } else {
                        Ok(PlayerSpec {
                            name: name.trim().to_string(),
                            columns,
                        })
                    }
                }
                None => Ok(PlayerSpec::single(item)),
            })
            .collect::<Result<_>>()?;
        if specs.is_empty() {
            return Err(Error::Argument("empty player list".into()));
        }
        Ok(specs)
    }
}

/// How raw columns become design columns.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorPolicy {
    /// Columns treated as categorical even when every value parses as a number.
    pub force_categorical: BTreeSet<String>,
}

/// Builds a [`Dataset`] from a raw table.
///
/// Non-numeric columns (and those in `policy.force_categorical`) expand to
/// `levels - 1` treatment dummies, with the lexicographically first level as
/// reference. Rows with a missing value in any used column are rejected.
pub fn encode_dataset(
    raw: &RawTable,
    response_name: &str,
    player_specs: &[PlayerSpec],
    policy: &FactorPolicy,
) -> Result<Dataset> {
    let response = raw.column(response_name)?;
    let y = response
        .iter()
        .map(|v| {
            v.parse::<f64>().map_err(|_| Error::ColumnType {
                column: response_name.to_string(),
                message: format!("response must be numeric, found `{v}`"),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = y.len();

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut column_names = Vec::new();
    let mut players = Vec::new();
    for spec in player_specs {
        let start = columns.len();
        for col in &spec.columns {
            if col == response_name {
                return Err(Error::Argument(format!(
                    "response `{col}` cannot be a regressor"
                )));
            }
            let values = raw.column(col)?;
            let numeric: Option<Vec<f64>> = if policy.force_categorical.contains(col) {
                None
            } else {
                values.iter().map(|v| v.parse::<f64>().ok()).collect()
            };
            match numeric {
                Some(x) => {
                    let first = x.first().copied().unwrap_or(0.0);
                    if x.iter().all(|&v| v == first) {
                        return Err(Error::DegenerateColumn(col.clone()));
                    }
                    columns.push(x);
                    column_names.push(col.clone());
                }
                None => {
                    let levels: BTreeSet<&str> = values.iter().copied().collect();
                    if levels.len() < 2 {
                        return Err(Error::DegenerateColumn(col.clone()));
                    }
                    for level in levels.iter().skip(1) {
                        columns.push(
                            values
                                .iter()
                                .map(|v| if v == level { 1.0 } else { 0.0 })
                                .collect(),
                        );
                        column_names.push(format!("{col}:{level}"));
                    }
                }
            }
        }
        players.push(Player {
            name: spec.name.clone(),
            columns: (start..columns.len()).collect(),
        });
    }
    let design = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    Dataset::new(response_name, y, design, column_names, players)
}
