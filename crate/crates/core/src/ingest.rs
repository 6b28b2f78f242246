//! Loading score/group CSV files, sparsity preprocessing, and synthetic
//! datasets.
//!
//! File formats (UTF-8, `#` lines are comments):
//!
//! ```text
//! user_id,item_id,score        item_id,group_id
//! u1,i7,0.83                   i7,publisher-a
//! ```

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::model::{Candidate, GroupCatalog, GroupId, ItemId, ScoreTable};

pub const INFREQUENT_GROUP: &str = "infrequent";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UserOrder {
    #[default]
    FileOrder,
    Shuffled(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub scores_path: PathBuf,
    pub groups_path: PathBuf,
    /// Users and items with fewer interactions are dropped (k-core).
    pub min_interactions: usize,
    /// Groups with fewer items are merged into one infrequent group.
    pub infrequent_group_threshold: usize,
    pub user_order: UserOrder,
}

impl DatasetSpec {
    pub fn new(scores_path: impl Into<PathBuf>, groups_path: impl Into<PathBuf>) -> Self {
        Self {
            scores_path: scores_path.into(),
            groups_path: groups_path.into(),
            min_interactions: 0,
            infrequent_group_threshold: 10,
            user_order: UserOrder::FileOrder,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub rows: usize,
    pub duplicate_pairs: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub table: ScoreTable,
    pub catalog: GroupCatalog,
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path)?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(file))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn check_header(rdr: &mut csv::Reader<File>, path: &Path, expected: &[&str]) -> Result<()> {
    let header = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        let line = header.position().map_or(1, |p| p.line());
        return Err(parse_err(
            path,
            line,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Reads the `item_id,group_id` file. Group ids follow first appearance.
pub fn load_groups(path: &Path) -> Result<GroupCatalog> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &["item_id", "group_id"])?;
    let mut group_index: HashMap<String, GroupId> = HashMap::new();
    let mut group_names = Vec::new();
    let mut item_index: HashMap<String, GroupId> = HashMap::new();
    let mut items = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 || rec[0].is_empty() || rec[1].is_empty() {
            return Err(parse_err(path, line, "expected `item_id,group_id`"));
        }
        let group = match group_index.get(&rec[1]) {
            Some(g) => *g,
            None => {
                let g = GroupId::from(group_names.len());
                group_names.push(rec[1].to_string());
                group_index.insert(rec[1].to_string(), g);
                g
            }
        };
        match item_index.get(&rec[0]) {
            Some(prev) if *prev != group => {
                return Err(parse_err(
                    path,
                    line,
                    format!("item `{}` assigned to more than one group", &rec[0]),
                ))
            }
            Some(_) => {}
            None => {
                item_index.insert(rec[0].to_string(), group);
                items.push((rec[0].to_string(), group));
            }
        }
    }
    if items.is_empty() {
        return Err(parse_err(path, 1, "no items"));
    }
    GroupCatalog::new(group_names, items)
}

/// Reads the `user_id,item_id,score` file against `catalog`. Users follow first
/// appearance; a repeated (user, item) pair keeps its first position and its
/// last score.
pub fn load_scores(path: &Path, catalog: &GroupCatalog) -> Result<(ScoreTable, LoadReport)> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &["user_id", "item_id", "score"])?;
    let items: HashMap<&str, ItemId> = catalog.items().map(|(id, name, _)| (name, id)).collect();
    let mut user_index: HashMap<String, usize> = HashMap::new();
    let mut users: Vec<(String, Vec<Candidate>)> = Vec::new();
    let mut seen: HashMap<(usize, ItemId), usize> = HashMap::new();
    let mut report = LoadReport::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 || rec[0].is_empty() || rec[1].is_empty() {
            return Err(parse_err(path, line, "expected `user_id,item_id,score`"));
        }
        let item = *items
            .get(&rec[1])
            .ok_or_else(|| Error::UngroupedItem(rec[1].to_string()))?;
        let score: f64 = rec[2]
            .parse()
            .map_err(|_| parse_err(path, line, format!("score `{}` is not a decimal number", &rec[2])))?;
        if !score.is_finite() || score < 0.0 {
            return Err(parse_err(path, line, format!("score {score} must be finite and >= 0")));
        }
        let u = *user_index.entry(rec[0].to_string()).or_insert_with(|| {
            users.push((rec[0].to_string(), Vec::new()));
            users.len() - 1
        });
        report.rows += 1;
        match seen.get(&(u, item)) {
            Some(pos) => {
                report.duplicate_pairs += 1;
                report.warnings.push(format!(
                    "line {line}: duplicate pair ({}, {}), keeping the later score",
                    &rec[0], &rec[1]
                ));
                users[u].1[*pos].score = score;
            }
            None => {
                seen.insert((u, item), users[u].1.len());
                users[u].1.push(Candidate { item, score });
            }
        }
    }
    for w in &report.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok((ScoreTable::new(users, catalog)?, report))
}

/// Loads both files and applies the user order. Preprocessing is separate
/// (see [`preprocess`]).
pub fn load_dataset(spec: &DatasetSpec) -> Result<(Dataset, LoadReport)> {
    let catalog = load_groups(&spec.groups_path)?;
    let (table, report) = load_scores(&spec.scores_path, &catalog)?;
    let table = reorder_users(table, &catalog, spec.user_order)?;
    Ok((Dataset { table, catalog }, report))
}

pub fn reorder_users(table: ScoreTable, catalog: &GroupCatalog, order: UserOrder) -> Result<ScoreTable> {
    match order {
        UserOrder::FileOrder => Ok(table),
        UserOrder::Shuffled(seed) => {
            let mut users: Vec<(String, Vec<Candidate>)> = table
                .users()
                .iter()
                .map(|u| (u.name.clone(), u.candidates.clone()))
                .collect();
            users.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            ScoreTable::new(users, catalog)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessSpec {
    pub min_interactions: usize,
    pub infrequent_group_threshold: usize,
}

impl From<&DatasetSpec> for PreprocessSpec {
    fn from(s: &DatasetSpec) -> Self {
        Self {
            min_interactions: s.min_interactions,
            infrequent_group_threshold: s.infrequent_group_threshold,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreprocessReport {
    /// k-core passes that removed something.
    pub kcore_iterations: usize,
    pub users_removed: usize,
    pub items_removed: usize,
    pub interactions_removed: usize,
    /// Number of groups folded into the infrequent group.
    pub groups_merged: usize,
}

/// k-core filter to a fixpoint, then merges small groups and re-indexes.
pub fn preprocess(
    table: &ScoreTable,
    catalog: &GroupCatalog,
    spec: &PreprocessSpec,
) -> Result<(Dataset, PreprocessReport)> {
    let mut report = PreprocessReport::default();
    let l = spec.min_interactions;
    let mut user_alive = vec![true; table.user_count()];
    let mut item_alive = vec![true; catalog.item_count()];
    loop {
        let mut item_degree = vec![0usize; catalog.item_count()];
        let mut user_degree = vec![0usize; table.user_count()];
        for (u, user) in table.users().iter().enumerate() {
            if !user_alive[u] {
                continue;
            }
            for c in user.candidates.iter().filter(|c| item_alive[c.item.index()]) {
                user_degree[u] += 1;
                item_degree[c.item.index()] += 1;
            }
        }
        let mut changed = false;
        for (u, alive) in user_alive.iter_mut().enumerate() {
            if *alive && user_degree[u] < l {
                *alive = false;
                changed = true;
            }
        }
        for (i, alive) in item_alive.iter_mut().enumerate() {
            if *alive && item_degree[i] < l {
                *alive = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        report.kcore_iterations += 1;
    }
    report.users_removed = user_alive.iter().filter(|a| !**a).count();
    report.items_removed = item_alive.iter().filter(|a| !**a).count();

    // Surviving rosters decide which groups are merged.
    let mut sizes = vec![0usize; catalog.group_count()];
    for (item, _, group) in catalog.items() {
        if item_alive[item.index()] {
            sizes[group.index()] += 1;
        }
    }
    let small = |g: usize| sizes[g] < spec.infrequent_group_threshold;
    let mut new_group: Vec<Option<GroupId>> = vec![None; catalog.group_count()];
    let mut group_names = Vec::new();
    for g in 0..catalog.group_count() {
        if sizes[g] > 0 && !small(g) {
            new_group[g] = Some(GroupId::from(group_names.len()));
            group_names.push(catalog.group_name(GroupId::from(g)).to_string());
        }
    }
    let merged: Vec<usize> = (0..catalog.group_count())
        .filter(|g| sizes[*g] > 0 && small(*g))
        .collect();
    if !merged.is_empty() {
        let id = GroupId::from(group_names.len());
        group_names.push(INFREQUENT_GROUP.to_string());
        for g in &merged {
            new_group[*g] = Some(id);
        }
    }
    report.groups_merged = merged.len();

    let mut new_item = vec![None; catalog.item_count()];
    let mut items = Vec::new();
    for (item, name, group) in catalog.items() {
        if let (true, Some(g)) = (item_alive[item.index()], new_group[group.index()]) {
            new_item[item.index()] = Some(ItemId::from(items.len()));
            items.push((name.to_string(), g));
        }
    }
    if items.is_empty() || group_names.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let new_catalog = GroupCatalog::new(group_names, items)?;

    let mut users = Vec::new();
    for (u, user) in table.users().iter().enumerate() {
        if !user_alive[u] {
            report.interactions_removed += user.candidates.len();
            continue;
        }
        let kept: Vec<Candidate> = user
            .candidates
            .iter()
            .filter_map(|c| new_item[c.item.index()].map(|item| Candidate { item, score: c.score }))
            .collect();
        report.interactions_removed += user.candidates.len() - kept.len();
        users.push((user.name.clone(), kept));
    }
    if users.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let new_table = ScoreTable::new(users, &new_catalog)?;
    Ok((
        Dataset {
            table: new_table,
            catalog: new_catalog,
        },
        report,
    ))
}

/// Parameters of a generated dataset. Group `g` holds a Zipf-like share
/// `(g + 1)^-skew` of the items, and its items' appeal is scaled by
/// `group_score_decay^g`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_users: usize,
    pub n_items: usize,
    pub n_groups: usize,
    pub group_size_skew: f64,
    pub candidates_per_user: usize,
    /// Beta(alpha, beta) draw for each item's base appeal.
    pub score_alpha: f64,
    pub score_beta: f64,
    pub group_score_decay: f64,
    /// Half-width of the uniform multiplicative per-user noise around 1.
    pub user_noise: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            n_users: 100,
            n_items: 60,
            n_groups: 4,
            group_size_skew: 1.0,
            candidates_per_user: 20,
            score_alpha: 2.0,
            score_beta: 5.0,
            group_score_decay: 1.0,
            user_noise: 0.5,
        }
    }
}

impl SynthSpec {
    /// Two groups, 1000 users, 100 candidates each; the vanilla top-10 puts
    /// about 80% of the selected score mass on group 0.
    pub fn skewed_two_group() -> Self {
        Self {
            seed: 2024,
            n_users: 1000,
            n_items: 400,
            n_groups: 2,
            group_size_skew: 1.0,
            candidates_per_user: 100,
            score_alpha: 2.0,
            score_beta: 5.0,
            group_score_decay: 0.83,
            user_noise: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_users", self.n_users),
            ("n_items", self.n_items),
            ("n_groups", self.n_groups),
            ("candidates_per_user", self.candidates_per_user),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, n)| *n == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
        }
        if self.n_groups > self.n_items {
            return Err(Error::InvalidConfig("n_groups cannot exceed n_items".into()));
        }
        if self.candidates_per_user > self.n_items {
            return Err(Error::InvalidConfig("candidates_per_user cannot exceed n_items".into()));
        }
        if !(self.score_alpha > 0.0 && self.score_beta > 0.0) {
            return Err(Error::InvalidConfig("Beta parameters must be > 0".into()));
        }
        if !(self.group_size_skew >= 0.0 && self.group_score_decay > 0.0) {
            return Err(Error::InvalidConfig("skew must be >= 0 and decay > 0".into()));
        }
        if !(0.0..1.0).contains(&self.user_noise) {
            return Err(Error::InvalidConfig("user_noise must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Largest-remainder split of `total` into parts proportional to
/// `(g + 1)^-skew`, each at least 1.
pub fn zipf_group_sizes(total: usize, groups: usize, skew: f64) -> Vec<usize> {
    let weights: Vec<f64> = (0..groups).map(|g| ((g + 1) as f64).powf(-skew)).collect();
    let wsum: f64 = weights.iter().sum();
    let spare = total - groups;
    let quotas: Vec<f64> = weights.iter().map(|w| w / wsum * spare as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize + 1).collect();
    let mut left = total - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..groups).collect();
    order.sort_by(|a, b| {
        let ra = quotas[*a] - quotas[*a].floor();
        let rb = quotas[*b] - quotas[*b].floor();
        rb.total_cmp(&ra).then(a.cmp(b))
    });
    for g in order {
        if left == 0 {
            break;
        }
        sizes[g] += 1;
        left -= 1;
    }
    sizes
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sizes = zipf_group_sizes(spec.n_items, spec.n_groups, spec.group_size_skew);
    let width = (spec.n_items - 1).to_string().len();
    let mut items = Vec::with_capacity(spec.n_items);
    for (g, size) in sizes.iter().enumerate() {
        for _ in 0..*size {
            items.push((format!("i{:0width$}", items.len()), GroupId::from(g)));
        }
    }
    let beta = Beta::new(spec.score_alpha, spec.score_beta)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let appeal: Vec<f64> = items
        .iter()
        .map(|(_, g)| beta.sample(&mut rng) * spec.group_score_decay.powi(g.0 as i32))
        .collect();
    let catalog = GroupCatalog::new((0..spec.n_groups).map(|g| format!("g{g}")).collect(), items)?;

    let uwidth = (spec.n_users - 1).to_string().len();
    let mut users = Vec::with_capacity(spec.n_users);
    for u in 0..spec.n_users {
        let mut picks = index::sample(&mut rng, spec.n_items, spec.candidates_per_user).into_vec();
        picks.sort_unstable();
        let candidates = picks
            .into_iter()
            .map(|i| {
                let noise = 1.0 + spec.user_noise * (2.0 * rng.random::<f64>() - 1.0);
                Candidate {
                    item: ItemId::from(i),
                    score: (appeal[i] * noise).clamp(1e-6, 1.0 - 1e-6),
                }
            })
            .collect();
        users.push((format!("u{u:0uwidth$}"), candidates));
    }
    let table = ScoreTable::new(users, &catalog)?;
    Ok(Dataset { table, catalog })
}

/// Writes the `item_id,group_id` table.
pub fn write_groups<W: Write>(data: &Dataset, mut w: W) -> Result<()> {
    writeln!(w, "item_id,group_id")?;
    for (_, name, group) in data.catalog.items() {
        writeln!(w, "{name},{}", data.catalog.group_name(group))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the `user_id,item_id,score` table; scores in shortest round-trip form.
pub fn write_scores<W: Write>(data: &Dataset, mut w: W) -> Result<()> {
    writeln!(w, "user_id,item_id,score")?;
    for user in data.table.users() {
        for c in &user.candidates {
            writeln!(w, "{},{},{}", user.name, data.catalog.item_name(c.item), c.score)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes both files in the formats [`load_dataset`] reads.
pub fn write_dataset(data: &Dataset, scores_path: &Path, groups_path: &Path) -> Result<()> {
    write_groups(data, BufWriter::new(File::create(groups_path)?))?;
    write_scores(data, BufWriter::new(File::create(scores_path)?))
}

/// Distinct items that appear in at least one candidate list.
pub fn active_items(table: &ScoreTable) -> HashSet<ItemId> {
    table
        .users()
        .iter()
        .flat_map(|u| u.candidates.iter().map(|c| c.item))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_small_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let groups = write(dir.path(), "g.csv", "# publishers\nitem_id,group_id\na,p1\nb,p2\nc,p1\n");
        let scores = write(dir.path(), "s.csv", "user_id,item_id,score\nu1,a,0.9\nu1,b,0.4\nu1,c,0.1\n");
        let (data, report) = load_dataset(&DatasetSpec::new(&scores, &groups)).unwrap();
        assert_eq!(data.table.user_count(), 1);
        assert_eq!(data.table.users()[0].candidates.len(), 3);
        assert_eq!(data.catalog.group_count(), 2);
        assert_eq!(data.catalog.roster_sizes(), vec![2, 1]);
        assert_eq!(report.rows, 3);
    }

    #[test]
    fn ungrouped_item_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let groups = write(dir.path(), "g.csv", "item_id,group_id\na,p1\n");
        let scores = write(dir.path(), "s.csv", "user_id,item_id,score\nu1,a,0.9\nu1,zz9,0.4\n");
        let err = load_dataset(&DatasetSpec::new(&scores, &groups)).unwrap_err();
        assert!(matches!(&err, Error::UngroupedItem(i) if i == "zz9"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let groups = write(dir.path(), "g.csv", "item_id,group_id\na,p1\n");
        let scores = write(dir.path(), "s.csv", "user_id,item_id,score\nu1,a,0.9\nu2,a,high\n");
        match load_dataset(&DatasetSpec::new(&scores, &groups)).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
        let scores = write(dir.path(), "s2.csv", "user,item,score\nu1,a,0.9\n");
        assert!(matches!(
            load_dataset(&DatasetSpec::new(&scores, &groups)),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_pair_last_wins() {
        let dir = tempfile::tempdir().unwrap();
        let groups = write(dir.path(), "g.csv", "item_id,group_id\na,p1\nb,p1\n");
        let scores = write(dir.path(), "s.csv", "user_id,item_id,score\nu1,a,0.9\nu1,b,0.5\nu1,a,0.2\n");
        let (data, report) = load_dataset(&DatasetSpec::new(&scores, &groups)).unwrap();
        assert_eq!(report.duplicate_pairs, 1);
        let c = &data.table.users()[0].candidates;
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].item, c[0].score), (ItemId(0), 0.2));
    }

    #[test]
    fn conflicting_group_assignment_fails() {
        let dir = tempfile::tempdir().unwrap();
        let groups = write(dir.path(), "g.csv", "item_id,group_id\na,p1\na,p2\n");
        assert!(matches!(load_groups(&groups), Err(Error::Parse { line: 3, .. })));
    }

    fn toy(groups: &[(&str, &str)], users: &[(&str, &[(&str, f64)])]) -> (ScoreTable, GroupCatalog) {
        let mut names: Vec<String> = Vec::new();
        let items = groups
            .iter()
            .map(|(i, g)| {
                let pos = names.iter().position(|n| n == g).unwrap_or_else(|| {
                    names.push(g.to_string());
                    names.len() - 1
                });
                (i.to_string(), GroupId::from(pos))
            })
            .collect();
        let cat = GroupCatalog::new(names, items).unwrap();
        let users = users
            .iter()
            .map(|(u, cs)| {
                let cands = cs
                    .iter()
                    .map(|(i, s)| Candidate { item: cat.item_by_name(i).unwrap(), score: *s })
                    .collect();
                (u.to_string(), cands)
            })
            .collect();
        let table = ScoreTable::new(users, &cat).unwrap();
        (table, cat)
    }

    fn spec(l: usize, threshold: usize) -> PreprocessSpec {
        PreprocessSpec { min_interactions: l, infrequent_group_threshold: threshold }
    }

    #[test]
    fn kcore_needs_second_pass() {
        // u4 is sparse; dropping it leaves c with a single interaction.
        let (table, cat) = toy(
            &[("a", "p"), ("b", "p"), ("c", "q")],
            &[
                ("u1", &[("a", 0.5), ("b", 0.4)]),
                ("u2", &[("a", 0.3), ("b", 0.2)]),
                ("u3", &[("a", 0.9), ("b", 0.8), ("c", 0.7)]),
                ("u4", &[("c", 0.6)]),
            ],
        );
        let (data, report) = preprocess(&table, &cat, &spec(2, 0)).unwrap();
        assert_eq!(report.kcore_iterations, 2);
        assert_eq!((report.users_removed, report.items_removed), (1, 1));
        assert_eq!(report.interactions_removed, 2);
        assert_eq!(data.table.user_count(), 3);
        assert_eq!(data.catalog.item_count(), 2);
        assert_eq!(data.catalog.group_names(), &["p".to_string()]);
        assert!(data.table.users().iter().all(|u| u.candidates.len() >= 2));
    }

    #[test]
    fn small_groups_merge_into_infrequent() {
        let mut groups = Vec::new();
        let names: Vec<String> = (0..17).map(|i| format!("i{i}")).collect();
        for (i, n) in names.iter().enumerate() {
            let g = match i {
                0..=11 => "big",
                12..=14 => "mid",
                _ => "small",
            };
            groups.push((n.as_str(), g));
        }
        let cands: Vec<(&str, f64)> = names.iter().map(|n| (n.as_str(), 0.5)).collect();
        let (table, cat) = toy(&groups, &[("u", &cands)]);
        let (data, report) = preprocess(&table, &cat, &spec(0, 10)).unwrap();
        assert_eq!(data.catalog.group_names(), &["big".to_string(), INFREQUENT_GROUP.to_string()]);
        assert_eq!(data.catalog.roster_sizes(), vec![12, 5]);
        assert_eq!(report.groups_merged, 2);
    }

    #[test]
    fn preprocess_is_idempotent_on_synthetic() {
        let data = generate_synthetic(&SynthSpec {
            n_users: 60,
            n_items: 80,
            n_groups: 6,
            group_size_skew: 1.2,
            candidates_per_user: 5,
            ..Default::default()
        })
        .unwrap();
        let s = spec(3, 8);
        let (once, _) = preprocess(&data.table, &data.catalog, &s).unwrap();
        let (twice, report) = preprocess(&once.table, &once.catalog, &s).unwrap();
        assert_eq!(once.table, twice.table);
        assert_eq!(once.catalog, twice.catalog);
        assert_eq!(report.kcore_iterations, 0);
        let active = active_items(&once.table);
        assert_eq!(active.len(), once.catalog.item_count());
    }

    #[test]
    fn everything_filtered_is_an_error() {
        let (table, cat) = toy(&[("a", "p")], &[("u1", &[("a", 0.5)])]);
        assert!(matches!(preprocess(&table, &cat, &spec(5, 0)), Err(Error::EmptyDataset)));
    }

    #[test]
    fn synthetic_round_trip() {
        let data = generate_synthetic(&SynthSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (s, g) = (dir.path().join("s.csv"), dir.path().join("g.csv"));
        write_dataset(&data, &s, &g).unwrap();
        let (back, _) = load_dataset(&DatasetSpec::new(&s, &g)).unwrap();
        assert_eq!(back.table, data.table);
        assert_eq!(back.catalog, data.catalog);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(&SynthSpec::default()).unwrap();
        let b = generate_synthetic(&SynthSpec::default()).unwrap();
        assert_eq!(a.table, b.table);
        let c = generate_synthetic(&SynthSpec { seed: 43, ..Default::default() }).unwrap();
        assert_ne!(a.table, c.table);
    }

    #[test]
    fn shuffled_order_is_seeded() {
        let data = generate_synthetic(&SynthSpec::default()).unwrap();
        let a = reorder_users(data.table.clone(), &data.catalog, UserOrder::Shuffled(3)).unwrap();
        let b = reorder_users(data.table.clone(), &data.catalog, UserOrder::Shuffled(3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.users()[0].name, data.table.users()[0].name);
    }

    #[test]
    fn group_sizes_follow_skew() {
        assert_eq!(zipf_group_sizes(12, 3, 0.0), vec![4, 4, 4]);
        let s = zipf_group_sizes(100, 7, 0.0);
        assert_eq!(s.iter().sum::<usize>(), 100);
        assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        let s = zipf_group_sizes(100, 4, 1.5);
        assert_eq!(s.iter().sum::<usize>(), 100);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn synthetic_single_group() {
        let data = generate_synthetic(&SynthSpec { n_groups: 1, ..Default::default() }).unwrap();
        assert_eq!(data.catalog.group_count(), 1);
        assert_eq!(data.catalog.roster_sizes(), vec![60]);
        for u in data.table.users() {
            assert!(u.candidates.iter().all(|c| c.score > 0.0 && c.score < 1.0));
        }
    }

    #[test]
    fn synthetic_rejects_bad_spec() {
        assert!(generate_synthetic(&SynthSpec { n_users: 0, ..Default::default() }).is_err());
        assert!(generate_synthetic(&SynthSpec { candidates_per_user: 61, ..Default::default() }).is_err());
    }
}
