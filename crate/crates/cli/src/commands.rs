use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use elasticrank::eval::{evaluate, pareto_sweep, EvalSettings, SweepConfig};
use elasticrank::fairness::{default_t_grid, ef_curve as sample_curve, ef_metric, EfConfig};
use elasticrank::ingest::{
    generate_synthetic, load_groups, load_scores, preprocess, reorder_users, write_groups, write_scores, Dataset,
    PreprocessSpec, SynthSpec, UserOrder,
};
use elasticrank::model::accumulate_utilities;
use elasticrank::quadrature::QuadratureKind;
use elasticrank::rerank::{vanilla_topk, Registry, RerankParams};
use elasticrank::{Error, RankedEntry, RankedList, UtilityVector};

use crate::output::{num, out_path, read_header, read_list_records, read_utilities, write_atomic, Header, ListRecord};
use crate::{DataArgs, EfArgs, EfCurveArgs, EvalArgs, RankArgs, RerankArgs, SweepArgs, SynthArgs};

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    /// Failure that is not the caller's fault (exit code 1).
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => e.fmt(f),
            Failure::Runtime(m) => f.write_str(m),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn require_file(flag: &str, path: &Path) -> Result<(), Error> {
    if !path.is_file() {
        return Err(Error::InvalidConfig(format!("{flag}: no such file `{}`", path.display())));
    }
    Ok(())
}

fn load(data: &DataArgs, header: &mut Header) -> Result<Dataset, Error> {
    require_file("--scores", &data.scores)?;
    require_file("--groups", &data.groups)?;
    header.input("scores", &data.scores)?;
    header.input("groups", &data.groups)?;
    header
        .set("min_interactions", data.min_interactions)
        .set("infrequent_threshold", data.infrequent_threshold)
        .set("seed", data.seed.map_or("none".to_string(), |s| s.to_string()));
    let catalog = load_groups(&data.groups)?;
    let (table, report) = load_scores(&data.scores, &catalog)?;
    if report.duplicate_pairs > 0 {
        log::warn!("{} duplicate (user, item) rows; later rows kept", report.duplicate_pairs);
    }
    let spec = PreprocessSpec {
        min_interactions: data.min_interactions,
        infrequent_group_threshold: data.infrequent_threshold,
    };
    let (data_out, pre) = preprocess(&table, &catalog, &spec)?;
    log::info!("preprocess: {pre:?}");
    let order = data.seed.map_or(UserOrder::FileOrder, UserOrder::Shuffled);
    let table = reorder_users(data_out.table, &data_out.catalog, order)?;
    Ok(Dataset {
        table,
        catalog: data_out.catalog,
    })
}

fn ef_config(ef: &EfArgs, header: &mut Header) -> Result<EfConfig, Error> {
    let quadrature = QuadratureKind::by_name(&ef.quad, ef.quad_tol, ef.quad_nodes)?;
    header.set("m", ef.m).set("quad", quadrature.to_string());
    Ok(EfConfig {
        half_width: ef.m,
        quadrature,
        ..Default::default()
    })
}

fn rerank_params(rank: &RankArgs, t: f64, lambda: f64, eta: f64, trace: bool) -> Result<RerankParams, Error> {
    Ok(RerankParams {
        k: rank.k,
        t,
        eta_percent: eta,
        lambda,
        initial_utility: rank.initial_utility,
        update_scope: rank.update_scope.parse()?,
        distance_basis: rank.distance_basis.parse()?,
        record_trace: trace,
    })
}

fn rank_header(header: &mut Header, rank: &RankArgs) {
    header
        .set("algorithm", &rank.algorithm)
        .set("k", rank.k)
        .set("initial_utility", rank.initial_utility)
        .set("update_scope", &rank.update_scope)
        .set("distance_basis", &rank.distance_basis);
}

fn list_records(lists: &[RankedList], data: &Dataset) -> Vec<ListRecord> {
    lists
        .iter()
        .map(|l| ListRecord {
            user: data.table.users()[l.user.index()].name.clone(),
            items: l.entries.iter().map(|e| data.catalog.item_name(e.item).to_string()).collect(),
            original: l.entries.iter().map(|e| e.original).collect(),
            adjusted: l.entries.iter().map(|e| e.adjusted).collect(),
            underfilled: l.underfilled,
        })
        .collect()
}

fn utilities_csv(header: &Header, data: &Dataset, selected: &UtilityVector, state: &UtilityVector) -> String {
    let mut s = header.render();
    s.push_str("group_id,utility,state\n");
    for (g, name) in data.catalog.group_names().iter().enumerate() {
        let _ = writeln!(s, "{name},{},{}", num(selected.as_slice()[g]), num(state.as_slice()[g]));
    }
    s
}

pub fn rerank(a: &RerankArgs) -> Outcome {
    let mut header = Header::new("rerank");
    let data = load(&a.data, &mut header)?;
    rank_header(&mut header, &a.rank);
    header.set("t", a.t).set("eta", a.rank.eta).set("lambda", a.lambda).set("trace", a.trace);
    let params = rerank_params(&a.rank, a.t, a.lambda, a.rank.eta, a.trace)?;
    let ranker = Registry::with_builtins().build(&a.rank.algorithm, &params)?;
    let outcome = ranker.rerank(&data.table, &data.catalog)?;

    let mut lists = header.render();
    for rec in list_records(&outcome.lists, &data) {
        lists.push_str(&serde_json::to_string(&rec).map_err(|e| Failure::Runtime(e.to_string()))?);
        lists.push('\n');
    }
    write_atomic(&out_path(&a.out, "lists.jsonl"), &lists)?;

    let selected = accumulate_utilities(&outcome.lists, &data.catalog)?;
    write_atomic(
        &out_path(&a.out, "utilities.csv"),
        &utilities_csv(&header, &data, &selected, &outcome.utilities),
    )?;

    if a.trace {
        let mut s = header.render();
        s.push_str("step,anchor,group_id,v_g,d\n");
        for step in outcome.trace.iter().flatten() {
            let anchor = data.catalog.group_name(step.anchor);
            for (g, name) in data.catalog.group_names().iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{anchor},{name},{},{}",
                    step.step,
                    num(step.utilities[g]),
                    num(step.distances[g])
                );
            }
        }
        if outcome.trace.is_none() {
            log::warn!("algorithm `{}` does not record a trace", a.rank.algorithm);
        }
        write_atomic(&out_path(&a.out, "trace.csv"), &s)?;
    }
    Ok(())
}

pub fn ef_curve(a: &EfCurveArgs) -> Outcome {
    require_file("--utilities", &a.utilities)?;
    let mut header = Header::new("ef-curve");
    header.input("utilities", &a.utilities)?;
    header.set("grid", a.grid);
    let cfg = ef_config(&a.ef, &mut header)?;
    if a.grid == 0 {
        return Err(Error::InvalidConfig("--grid must be >= 1".into()).into());
    }
    let v = UtilityVector::new(read_utilities(&a.utilities)?.into_iter().map(|(_, u)| u).collect());
    let curve = sample_curve(&v, &default_t_grid(a.ef.m, a.grid), &cfg)?;
    let ef = ef_metric(&v, &cfg)?;
    let mut s = header.render();
    let _ = writeln!(s, "# ef={}", num(ef));
    s.push_str("t,f_over_groups\n");
    for (t, y) in curve {
        let _ = writeln!(s, "{},{}", num(t), num(y));
    }
    write_atomic(&out_path(&a.out, "ef_curve.csv"), &s)?;
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> Outcome {
    let mut header = Header::new("sweep");
    let data = load(&a.data, &mut header)?;
    rank_header(&mut header, &a.rank);
    let cfg = ef_config(&a.ef, &mut header)?;
    let etas = if a.eta_grid.is_empty() { vec![a.rank.eta] } else { a.eta_grid.clone() };
    let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    header.set("t", join(&a.t)).set("eta", join(&etas)).set("lambda", join(&a.lambda));
    let mut grid = Vec::new();
    for &t in &a.t {
        for &eta in &etas {
            for &lambda in &a.lambda {
                grid.push(SweepConfig {
                    algorithm: a.rank.algorithm.clone(),
                    params: rerank_params(&a.rank, t, lambda, eta, false)?,
                });
            }
        }
    }
    let points = pareto_sweep(&data.table, &data.catalog, &grid, &Registry::with_builtins(), &cfg)?;
    let mut s = header.render();
    s.push_str("algorithm,t,eta,lambda,ndcg,loss,ef,dominated,error\n");
    for p in &points {
        let err = p.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{err}",
            p.algorithm,
            num(p.t),
            num(p.eta_percent),
            num(p.lambda),
            num(p.ndcg),
            num(p.loss),
            num(p.ef),
            p.dominated
        );
    }
    write_atomic(&out_path(&a.out, "pareto.csv"), &s)?;
    if points.iter().all(|p| p.error.is_some()) {
        return Err(Failure::Runtime("every sweep point failed".into()));
    }
    Ok(())
}

/// Rebuilds ranked lists from a lists file against the loaded dataset,
/// ordered like the dataset's users.
fn lists_from_records(records: Vec<ListRecord>, data: &Dataset) -> Result<Vec<RankedList>, Error> {
    let users: HashMap<&str, usize> = data
        .table
        .users()
        .iter()
        .enumerate()
        .map(|(i, u)| (u.name.as_str(), i))
        .collect();
    let items: HashMap<&str, elasticrank::ItemId> =
        data.catalog.items().map(|(id, name, _)| (name, id)).collect();
    let mut slots: Vec<Option<RankedList>> = vec![None; users.len()];
    for rec in records {
        let u = *users
            .get(rec.user.as_str())
            .ok_or_else(|| Error::ListMismatch(format!("user `{}` is not in the score file", rec.user)))?;
        let entries = rec
            .items
            .iter()
            .zip(rec.original.iter().zip(&rec.adjusted))
            .map(|(name, (o, adj))| {
                let item = *items
                    .get(name.as_str())
                    .ok_or_else(|| Error::UnknownItem(name.clone()))?;
                Ok(RankedEntry { item, original: *o, adjusted: *adj })
            })
            .collect::<Result<Vec<_>, Error>>()?;
        slots[u] = Some(RankedList {
            user: data.table.users()[u].id,
            entries,
            underfilled: rec.underfilled,
        });
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(u, l)| {
            l.ok_or_else(|| {
                Error::ListMismatch(format!("no list for user `{}`", data.table.users()[u].name))
            })
        })
        .collect()
}

pub fn eval(a: &EvalArgs) -> Outcome {
    require_file("--lists", &a.lists)?;
    let mut header = Header::new("eval");
    let data = load(&a.data, &mut header)?;
    header.input("lists", &a.lists)?;
    header.set("k", a.k);
    let cfg = ef_config(&a.ef, &mut header)?;
    let source = read_header(&a.lists)?;
    let fair = lists_from_records(read_list_records(&a.lists)?, &data)?;
    let original = vanilla_topk(&data.table, a.k)?;
    let src_f64 = |key: &str| source.get(&format!("config.{key}")).and_then(|v| v.parse::<f64>().ok());
    let settings = EvalSettings {
        algorithm: source
            .get("config.algorithm")
            .cloned()
            .unwrap_or_else(|| "unknown".into()),
        k: a.k,
        half_width: a.ef.m,
        t: src_f64("t"),
        eta_percent: src_f64("eta"),
        lambda: src_f64("lambda"),
    };
    let report = evaluate(&original, &fair, &data.catalog, settings, &cfg)?;
    let source_hash = source.get("config_hash").cloned().unwrap_or_else(|| "none".into());

    let mut txt = header.render();
    let _ = writeln!(txt, "lists_config_hash={source_hash}");
    for (k, v) in report.to_key_values() {
        let _ = writeln!(txt, "{k}={v}");
    }
    write_atomic(&out_path(&a.out, "report.txt"), &txt)?;

    let json = serde_json::json!({
        "header": header.as_map(),
        "lists_config_hash": source_hash,
        "report": report,
    });
    let body = serde_json::to_string_pretty(&json).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_atomic(&out_path(&a.out, "report.json"), &(body + "\n"))?;
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Outcome {
    let mut spec = match a.preset.as_str() {
        "skewed" => SynthSpec::skewed_two_group(),
        _ => SynthSpec::default(),
    };
    if let Some(x) = a.seed {
        spec.seed = x;
    }
    if let Some(x) = a.users {
        spec.n_users = x;
    }
    if let Some(x) = a.items {
        spec.n_items = x;
    }
    if let Some(x) = a.n_groups {
        spec.n_groups = x;
    }
    if let Some(x) = a.candidates {
        spec.candidates_per_user = x;
    }
    if let Some(x) = a.skew {
        spec.group_size_skew = x;
    }
    if let Some(x) = a.decay {
        spec.group_score_decay = x;
    }
    let data = generate_synthetic(&spec)?;
    let mut header = Header::new("synth");
    header
        .set("preset", &a.preset)
        .set("seed", spec.seed)
        .set("users", spec.n_users)
        .set("items", spec.n_items)
        .set("groups", spec.n_groups)
        .set("candidates", spec.candidates_per_user)
        .set("skew", spec.group_size_skew)
        .set("decay", spec.group_score_decay)
        .set("score_alpha", spec.score_alpha)
        .set("score_beta", spec.score_beta)
        .set("user_noise", spec.user_noise);
    let rendered = header.render();
    let mut scores = rendered.clone().into_bytes();
    write_scores(&data, &mut scores)?;
    let mut groups = rendered.into_bytes();
    write_groups(&data, &mut groups)?;
    for (bytes, name) in [(scores, "scores.csv"), (groups, "groups.csv")] {
        let body = String::from_utf8(bytes).map_err(|e| Failure::Runtime(e.to_string()))?;
        write_atomic(&out_path(&a.out, name), &body)?;
    }
    Ok(())
}
