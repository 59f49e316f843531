use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use dissent_core::aggregation::{rank_from_scores, win_percentage};
use dissent_core::audit::{
    convergence_curve, eigenvector_alignment, iia_robustness, pairwise_efficiency, pairwise_matrix,
    svd_factors, ConvergenceCurve, IiaReport,
};
use dissent_core::corpus::{load_corpus, parse_preflib_soc, write_corpus};
use dissent_core::curation::{deduplicate, detect_suspicious, remove_flagged};
use dissent_core::divisiveness::{
    aggregate_divisiveness, multidimensional_report, pairwise_divisiveness,
    pairwise_divisiveness_values, responsiveness_matrix, split_divisiveness, split_scores,
    MultidimensionalTable, Orientation, Scenario,
};
use dissent_core::pairwise::{
    consistency, transitivity, write_pairwise, ConsistencyMode, ConsistencyReport, PairwiseBuilder,
    TransitivityReport,
};
use dissent_core::synthgen::{generate, ElectorateSpec};
use dissent_core::{
    bootstrap, CurationConfig, DivisivenessTable, Error as CoreError, PairwiseData,
    PairwiseOptions, PairwiseRecord, PairwiseTally, PreferenceCorpus, Ranking, SplitSpec,
    SuspicionReport,
};

use crate::config::{DatasetKind, RunConfig};
use crate::output::{num, opt, ReportWriter};

// ---------------------------------------------------------------------------
// Loading and preparation

pub fn load_dataset(config: &RunConfig) -> Result<PreferenceCorpus> {
    let input = config.input()?;
    if !input.exists() {
        bail!("input {} does not exist", input.display());
    }
    let corpus = match config.kind {
        DatasetKind::PlatformCsv => load_corpus(input)?,
        DatasetKind::PreflibSoc => parse_preflib_soc(input)?,
        DatasetKind::SyntheticSpec => {
            let text = std::fs::read_to_string(input)
                .with_context(|| format!("reading {}", input.display()))?;
            generate(&ElectorateSpec::from_toml_str(&text)?)?
        }
    };
    corpus.validate()?;
    Ok(corpus)
}

fn read_column(path: &Path, column: &str) -> Result<Vec<(String, Option<String>)>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = r.headers()?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .with_context(|| format!("{}: missing column '{column}'", path.display()))?;
    let second = (0..headers.len()).find(|&i| i != idx);
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.with_context(|| format!("reading {}", path.display()))?;
        out.push((
            row[idx].to_string(),
            second.and_then(|i| row.get(i)).map(str::to_string),
        ));
    }
    Ok(out)
}

fn curation_config(config: &RunConfig) -> Result<CurationConfig> {
    let consent_ids = match &config.consent {
        Some(p) => Some(
            read_column(p, "user_id")?
                .into_iter()
                .map(|(u, _)| u)
                .collect(),
        ),
        None => None,
    };
    Ok(CurationConfig {
        accepted_universes: config.accepted_universes.iter().copied().collect(),
        recaptcha_threshold: config.recaptcha_threshold,
        static_rank_max_update_rate: config.static_rank_max_update_rate,
        static_rank_min_panels: config.static_rank_min_panels,
        max_approvals: config.max_approvals,
        consent_ids,
        user_ips: None,
        ip_scores: None,
    })
}

fn read_orientations(path: &Path) -> Result<BTreeMap<String, Orientation>> {
    let rows = read_column(path, "candidate_id")?;
    rows.into_iter()
        .map(|(c, o)| {
            let o = o.unwrap_or_default();
            let parsed = match o.to_ascii_lowercase().as_str() {
                "left" => Orientation::Left,
                "right" => Orientation::Right,
                "centrist" | "center" | "centre" => Orientation::Centrist,
                _ => bail!(
                    "{}: candidate '{c}' has unknown orientation '{o}'",
                    path.display()
                ),
            };
            Ok((c, parsed))
        })
        .collect()
}

pub struct Prepared {
    pub corpus: PreferenceCorpus,
    pub raw_records: usize,
    pub suspicion: Option<SuspicionReport>,
    pub consistency: ConsistencyReport,
    pub transitivity: TransitivityReport,
    /// Curated, deduplicated, tie-free records.
    pub data: PairwiseData,
}

impl Prepared {
    pub fn n(&self) -> usize {
        self.data.n()
    }
}

/// Loads the corpus, flags suspicious users, computes the repeat-judgment
/// diagnostics on the unflagged records, then deduplicates.
pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let corpus = load_dataset(config)?;
    let mut builder = PairwiseBuilder::new(&corpus.catalog);
    builder.add_approvals(&corpus.approvals)?;
    builder.add_ranks(&corpus.ranks)?;
    let raw = builder.finish();
    let raw_records = raw.records.len();

    let curating = config.curate && config.kind != DatasetKind::PreflibSoc;
    let suspicion = if curating {
        Some(detect_suspicious(&corpus, &curation_config(config)?)?)
    } else {
        None
    };
    let clean = match &suspicion {
        Some(report) => remove_flagged(&raw, report),
        None => raw,
    };
    let panels: Vec<_> = corpus
        .ranks
        .iter()
        .filter(|r| !suspicion.as_ref().is_some_and(|s| s.is_flagged(&r.user_id)))
        .cloned()
        .collect();
    let consistency = consistency(&clean, ConsistencyMode::ModalFraction);
    let transitivity = transitivity(&clean, &panels);
    let records: Vec<PairwiseRecord> = if curating {
        deduplicate(&clean.records)
    } else {
        clean.records.clone()
    }
    .into_iter()
    .filter(|r| !r.is_tie())
    .collect();
    if records.is_empty() {
        bail!("no pairwise records left after curation");
    }
    Ok(Prepared {
        data: clean.with_records(records),
        corpus,
        raw_records,
        suspicion,
        consistency,
        transitivity,
    })
}

fn ids(data: &PairwiseData) -> Vec<String> {
    data.proposals.iter().map(|p| p.to_string()).collect()
}

fn pairwise_options(config: &RunConfig) -> PairwiseOptions {
    PairwiseOptions {
        membership: config.membership,
        normalization: config.normalization,
        fast_path: true,
    }
}

// ---------------------------------------------------------------------------
// ingest / curate / synth

pub fn cmd_ingest(config: &RunConfig) -> Result<Value> {
    let corpus = load_dataset(config)?;
    let mut builder = PairwiseBuilder::new(&corpus.catalog);
    builder.add_approvals(&corpus.approvals)?;
    let from_approvals = builder.finish().records.len();
    let mut builder = PairwiseBuilder::new(&corpus.catalog);
    builder.add_ranks(&corpus.ranks)?;
    let from_ranks = builder.finish().records.len();
    let mut builder = PairwiseBuilder::new(&corpus.catalog);
    builder.add_approvals(&corpus.approvals)?;
    builder.add_ranks(&corpus.ranks)?;
    let all = builder.finish();
    let unique = deduplicate(&all.records).len();

    let mut w = ReportWriter::new(config)?;
    write_corpus(&w.dir().join("corpus"), &corpus)?;
    let summary = json!({
        "kind": config.kind,
        "proposals": corpus.catalog.len(),
        "approvals": corpus.approvals.len(),
        "rank_panels": corpus.ranks.len(),
        "profiles": corpus.profiles.len(),
        "participants": corpus.participants().len(),
        "pairwise_records": all.records.len(),
        "pairwise_from_approvals": from_approvals,
        "pairwise_from_ranks": from_ranks,
        "duplicate_pairwise_records": all.records.len() - unique,
    });
    w.json("ingest", &summary)?;
    Ok(summary)
}

pub fn cmd_curate(config: &RunConfig) -> Result<Value> {
    let p = prepare(config)?;
    let mut w = ReportWriter::new(config)?;
    if let Some(s) = &p.suspicion {
        w.json("suspicion", s)?;
    }
    let file = std::fs::File::create(w.dir().join("pairwise.csv"))?;
    write_pairwise(std::io::BufWriter::new(file), &p.data)?;
    let summary = diagnostics(&p);
    w.json("curate", &summary)?;
    Ok(summary)
}

pub fn cmd_synth(config: &RunConfig) -> Result<Value> {
    let input = config.input()?;
    let text =
        std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let spec = ElectorateSpec::from_toml_str(&text)?;
    let corpus = generate(&spec)?;
    let w = ReportWriter::new(config)?;
    write_corpus(w.dir(), &corpus)?;
    Ok(json!({
        "proposals": corpus.catalog.len(),
        "participants": corpus.participants().len(),
        "rank_panels": corpus.ranks.len(),
        "out": w.dir(),
    }))
}

fn diagnostics(p: &Prepared) -> Value {
    let flagged = p.suspicion.as_ref().map(|s| s.flagged().len());
    let disabled: Option<BTreeMap<u8, String>> = p.suspicion.as_ref().map(|s| s.disabled.clone());
    json!({
        "raw_pairwise_records": p.raw_records,
        "curated_pairwise_records": p.data.records.len(),
        "participants": p.corpus.participants().len(),
        "flagged_participants": flagged,
        "disabled_criteria": disabled,
        "consistency": p.consistency.overall,
        "repeated_cells": p.consistency.repeated_cells,
        "transitivity": p.transitivity.overall,
        "triplets": p.transitivity.triplets,
    })
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Serialize)]
struct SplitResult {
    dimension: String,
    a: String,
    b: String,
    aggregate_divisiveness: Option<f64>,
    skipped: Option<String>,
}

fn divisiveness_rows(t: &DivisivenessTable) -> Vec<Vec<String>> {
    t.entries
        .iter()
        .map(|e| {
            vec![
                e.proposal_id.to_string(),
                t.metric.clone(),
                opt(e.value),
                opt(e.ci_low),
                opt(e.ci_high),
                e.n_valid_terms.map(|n| n.to_string()).unwrap_or_default(),
                e.flags.join("|"),
            ]
        })
        .collect()
}

fn regression_value(table: &MultidimensionalTable) -> Value {
    let predictors: Vec<&str> = table
        .columns
        .iter()
        .map(|(n, _)| n.as_str())
        .filter(|n| *n != dissent_core::divisiveness::PAIRWISE_COLUMN)
        .collect();
    match table.regress(dissent_core::divisiveness::PAIRWISE_COLUMN, &predictors) {
        Ok(s) => serde_json::to_value(s).expect("summary serializes"),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn cmd_analyze(config: &RunConfig) -> Result<Value> {
    let p = prepare(config)?;
    let data = &p.data;
    let n = p.n();
    let function = config.score_function();
    let options = pairwise_options(config);
    let mut w = ReportWriter::new(config)?;
    let ids = ids(data);

    let table = bootstrap(&function, &data.records, n, &config.bootstrap())?;
    let ranking = rank_from_scores(&table.means())?;
    let rows: Vec<Vec<String>> = table
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                ids[i].clone(),
                table.function.clone(),
                opt(e.mean),
                opt(e.ci_low),
                opt(e.ci_high),
                e.n_comparisons.to_string(),
                ranking.position[i].to_string(),
            ]
        })
        .collect();
    w.csv(
        "scores",
        &[
            "proposal_id",
            "function",
            "score",
            "ci_low",
            "ci_high",
            "n_comparisons",
            "rank",
        ],
        &rows,
    )?;

    let boot = config.bootstrap();
    let pd = pairwise_divisiveness(
        data,
        &function,
        &options,
        config.bootstrap_divisiveness.then_some(&boot),
    )?;
    let div_ranking = rank_from_scores(&pd.values())?;
    let mut tables = vec![pd.clone()];

    let mut splits = Vec::new();
    let mut split_specs = Vec::new();
    if !p.corpus.profiles.is_empty() {
        let defaults = SplitSpec::defaults(config.country);
        for dim in &config.splits {
            let spec = defaults
                .iter()
                .find(|s| s.dimension == *dim)
                .expect("every dimension has a default split");
            let mut result = SplitResult {
                dimension: dim.to_string(),
                a: spec.a_name.clone(),
                b: spec.b_name.clone(),
                aggregate_divisiveness: None,
                skipped: None,
            };
            match split_scores(data, &p.corpus.profiles, spec, &function) {
                Ok((a, b)) => {
                    tables.push(split_divisiveness(
                        data,
                        &p.corpus.profiles,
                        spec,
                        &function,
                        config.bootstrap_divisiveness.then_some(&boot),
                    )?);
                    result.aggregate_divisiveness =
                        match aggregate_divisiveness(&a.values, &b.values) {
                            Ok(v) => Some(v),
                            Err(e) => {
                                result.skipped = Some(e.to_string());
                                None
                            }
                        };
                    split_specs.push(spec.clone());
                }
                Err(CoreError::EmptySide(m)) => result.skipped = Some(m),
                Err(e) => return Err(e.into()),
            }
            splits.push(result);
        }
    }
    let div_rows: Vec<Vec<String>> = tables.iter().flat_map(divisiveness_rows).collect();
    w.csv(
        "divisiveness",
        &[
            "proposal_id",
            "metric",
            "value",
            "ci_low",
            "ci_high",
            "n_valid_terms",
            "flags",
        ],
        &div_rows,
    )?;
    let split_rows: Vec<Vec<String>> = splits
        .iter()
        .map(|s| {
            vec![
                s.dimension.clone(),
                s.a.clone(),
                s.b.clone(),
                opt(s.aggregate_divisiveness),
                s.skipped.clone().unwrap_or_default(),
            ]
        })
        .collect();
    if !splits.is_empty() {
        w.csv(
            "splits",
            &[
                "dimension",
                "group_a",
                "group_b",
                "aggregate_divisiveness",
                "skipped",
            ],
            &split_rows,
        )?;
    }

    let scatter: Vec<Vec<String>> = (0..n)
        .map(|i| {
            vec![
                ids[i].clone(),
                opt(table.entries[i].mean),
                opt(pd.entries[i].value),
                ranking.position[i].to_string(),
                div_ranking.position[i].to_string(),
            ]
        })
        .collect();
    w.csv(
        "scatter",
        &[
            "proposal_id",
            "score",
            "divisiveness",
            "score_rank",
            "divisiveness_rank",
        ],
        &scatter,
    )?;

    let multidimensional = if split_specs.is_empty() {
        None
    } else {
        let mut t =
            multidimensional_report(data, &p.corpus.profiles, &split_specs, &function, &options)?;
        t.add_column(function.name(), table.means())?;
        let rows: Vec<Vec<String>> = (0..n)
            .map(|i| {
                std::iter::once(ids[i].clone())
                    .chain(t.columns.iter().map(|(_, v)| opt(v[i])))
                    .collect()
            })
            .collect();
        let mut header = vec!["proposal_id"];
        header.extend(t.columns.iter().map(|(n, _)| n.as_str()));
        w.csv("multidimensional", &header, &rows)?;
        let regression = regression_value(&t);
        Some(json!({ "table": t, "regression": regression }))
    };

    let responsiveness = match &config.orientations {
        Some(path) => {
            let orientations = read_orientations(path)?;
            let politics = SplitSpec::defaults(config.country)
                .into_iter()
                .find(|s| s.dimension == dissent_core::Dimension::Politics)
                .expect("politics split exists");
            let mut out = Vec::new();
            let mut rows = Vec::new();
            for scenario in Scenario::ALL {
                let m = responsiveness_matrix(
                    &p.corpus.approvals,
                    &p.corpus.catalog,
                    &p.corpus.profiles,
                    &politics,
                    &orientations,
                    scenario,
                )?;
                for (pi, pn) in ["left", "right"].iter().enumerate() {
                    for (qi, qn) in ["left", "right"].iter().enumerate() {
                        rows.push(vec![
                            scenario.name().to_string(),
                            pn.to_string(),
                            qn.to_string(),
                            opt(m.rates[pi][qi]),
                            m.approvals[pi][qi].to_string(),
                            m.judgments[pi][qi].to_string(),
                        ]);
                    }
                }
                out.push(m);
            }
            w.csv(
                "responsiveness",
                &[
                    "scenario",
                    "participants",
                    "proposals",
                    "approval_rate",
                    "approvals",
                    "judgments",
                ],
                &rows,
            )?;
            Some(out)
        }
        None => None,
    };

    let diag = diagnostics(&p);
    w.json(
        "analyze",
        &json!({
            "scores": table,
            "ranking": ranking.order.iter().map(|&i| data.proposals[i]).collect::<Vec<_>>(),
            "divisiveness": tables,
            "divisiveness_ranking": div_ranking.order.iter().map(|&i| data.proposals[i]).collect::<Vec<_>>(),
            "splits": splits,
            "multidimensional": multidimensional,
            "responsiveness": responsiveness,
            "diagnostics": diag,
        }),
    )?;
    Ok(json!({
        "function": function.name(),
        "proposals": n,
        "records": data.records.len(),
        "top": data.proposals[ranking.order[0]],
        "most_divisive": data.proposals[div_ranking.order[0]],
        "files": w.written(),
        "diagnostics": diag,
    }))
}

// ---------------------------------------------------------------------------
// audit

/// Default convergence grid: fixed fractions of the record count.
pub fn default_sizes(total: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
        .iter()
        .map(|f| ((total as f64 * f).floor() as usize).max(1))
        .collect();
    v.dedup();
    v
}

fn iia_rows(report: &IiaReport, data: &PairwiseData, metric: &str) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (removed, row) in report.distances.iter().enumerate() {
        for (other, d) in row.iter().enumerate() {
            if let Some(d) = d {
                rows.push(vec![
                    metric.to_string(),
                    data.proposals[removed].to_string(),
                    data.proposals[other].to_string(),
                    d.to_string(),
                ]);
            }
        }
    }
    rows
}

fn convergence_rows(curve: &ConvergenceCurve, metric: &str) -> Vec<Vec<String>> {
    curve
        .rows
        .iter()
        .map(|r| {
            vec![
                metric.to_string(),
                r.size.to_string(),
                num(r.median),
                num(r.q25),
                num(r.q75),
            ]
        })
        .collect()
}

pub fn cmd_audit(config: &RunConfig) -> Result<Value> {
    let p = prepare(config)?;
    let data = &p.data;
    let n = p.n();
    let function = config.score_function();
    let options = pairwise_options(config);
    let mut w = ReportWriter::new(config)?;

    let agree = |r: &[PairwiseRecord]| -> dissent_core::Result<Ranking> {
        rank_from_scores(&function.score(r, n)?.values)
    };
    let divide = |r: &[PairwiseRecord]| -> dissent_core::Result<Ranking> {
        let v = pairwise_divisiveness_values(r, n, &function, &options)?;
        rank_from_scores(&v.into_iter().map(|(d, _)| Some(d)).collect::<Vec<_>>())
    };

    let tally = PairwiseTally::build(&data.records, n)?;
    let matrix = pairwise_matrix(&tally, 0.5);
    let ranking = agree(&data.records)?;
    let efficiency = pairwise_efficiency(&matrix, &ranking)?;
    let mut summary: Vec<(String, f64)> = vec![("pairwise_efficiency".into(), efficiency)];

    let mut iia = BTreeMap::new();
    if config.audit_iia && n >= 3 {
        let mut rows = Vec::new();
        for (metric, builder) in [
            ("agreement", &agree as &dissent_core::audit::RankBuilder),
            ("divisiveness", &divide),
        ] {
            let r = iia_robustness(&data.records, n, builder, config.iia_threshold)?;
            summary.push((format!("iia_robustness_{metric}"), r.robustness));
            summary.push((format!("iia_top_robustness_{metric}"), r.top_robustness));
            rows.extend(iia_rows(&r, data, metric));
            iia.insert(metric, r);
        }
        w.csv(
            "iia",
            &["ranking", "removed_id", "proposal_id", "distance"],
            &rows,
        )?;
    }

    let mut convergence = BTreeMap::new();
    if config.audit_convergence {
        let sizes = if config.convergence_sizes.is_empty() {
            default_sizes(data.records.len())
        } else {
            config.convergence_sizes.clone()
        };
        let mut rows = Vec::new();
        for (metric, builder) in [
            ("agreement", &agree as &dissent_core::audit::RankBuilder),
            ("divisiveness", &divide),
        ] {
            let c = convergence_curve(
                &data.records,
                builder,
                &sizes,
                config.convergence_iters,
                config.seed,
            )?;
            if let Some(s) = c.converged_at {
                summary.push((format!("converged_at_{metric}"), s as f64));
            }
            rows.extend(convergence_rows(&c, metric));
            convergence.insert(metric, c);
        }
        w.csv(
            "convergence",
            &["ranking", "size", "median_tau", "q25", "q75"],
            &rows,
        )?;
    }

    let mut spectral = None;
    let mut alignment = None;
    if config.audit_spectral {
        let report = svd_factors(&matrix, config.factors.min(n))?;
        let win = win_percentage(&tally).values;
        let div: Vec<Option<f64>> =
            pairwise_divisiveness(data, &function, &options, None)?.values();
        let a = eigenvector_alignment(&report, &win, &div, config.factors)?;
        let rows: Vec<Vec<String>> = a
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.index.to_string(),
                    num(r.sigma),
                    num(r.variance_share),
                    opt(r.r2_vs_win),
                    opt(r.r2_vs_div),
                ]
            })
            .collect();
        w.csv(
            "spectral",
            &["index", "sigma", "variance_share", "r2_vs_win", "r2_vs_div"],
            &rows,
        )?;
        summary.push((
            "first_factor_variance_share".into(),
            report.variance_share[0],
        ));
        summary.push((
            "first_factor_efficiency".into(),
            report.factor_efficiency(0, &ranking)?,
        ));
        if let Some(r) = a.rows.first().and_then(|r| r.r2_vs_win) {
            summary.push(("first_vector_r2_vs_win".into(), r));
        }
        spectral = Some(report);
        alignment = Some(a);
    }

    let matrix_rows: Vec<Vec<String>> = (0..n)
        .flat_map(|i| {
            let m = &matrix;
            let ids = &data.proposals;
            (0..n).map(move |j| {
                vec![
                    ids[i].to_string(),
                    ids[j].to_string(),
                    num(m.get(i, j)),
                    (m.is_observed(i, j) as u8).to_string(),
                ]
            })
        })
        .collect();
    w.csv(
        "matrix",
        &["row_id", "col_id", "win_rate", "observed"],
        &matrix_rows,
    )?;
    let summary_rows: Vec<Vec<String>> = summary
        .iter()
        .map(|(k, v)| vec![k.clone(), num(*v)])
        .collect();
    w.csv("audit_summary", &["metric", "value"], &summary_rows)?;

    let summary_map: BTreeMap<String, f64> = summary.into_iter().collect();
    w.json(
        "audit",
        &json!({
            "summary": summary_map,
            "iia": iia,
            "convergence": convergence,
            "spectral": spectral.as_ref().map(|s| json!({
                "singular_values": s.singular_values,
                "variance_share": s.variance_share,
                "left": s.left,
            })),
            "alignment": alignment,
            "ranking": ranking.order.iter().map(|&i| data.proposals[i]).collect::<Vec<_>>(),
        }),
    )?;
    Ok(json!({ "summary": summary_map, "files": w.written() }))
}
