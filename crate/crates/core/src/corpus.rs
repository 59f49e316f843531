//! Ballot data model and parsers.
//!
//! The canonical on-disk layout is a directory of four UTF-8, comma-delimited
//! CSV files with header rows:
//!
//! | file            | columns                                                                  |
//! |-----------------|--------------------------------------------------------------------------|
//! | `proposals.csv` | `id,text,candidates`                                                     |
//! | `approvals.csv` | `user_id,proposal_id,agree,universe,score,created_at,locale`             |
//! | `ranks.csv`     | `user_id,rank,updated,universe,score,created_at`                         |
//! | `profiles.csv`  | `user_id,politica,location,age,sex,education,zone,universe,created_at`   |
//!
//! `candidates` and `rank` are pipe-separated lists (`4|1|9`, most preferred
//! first for ranks). `score` may be empty. Timestamps are RFC 3339; the
//! space-separated `YYYY-MM-DD HH:MM:SS[.f]` form is also accepted and read
//! as UTC. Columns not listed are ignored.
//!
//! PrefLib strict-order-complete files are read with [`parse_preflib_soc`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProposalId(pub u32);

impl fmt::Display for ProposalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: ProposalId,
    pub text: String,
    pub candidate_ids: BTreeSet<String>,
}

/// Proposals sorted by id. Dense indices used throughout the analysis
/// layers are positions in this list, so index order matches id order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    proposals: Vec<Proposal>,
}

impl Catalog {
    pub fn new(mut proposals: Vec<Proposal>) -> Result<Self> {
        proposals.sort_by_key(|p| p.id);
        for w in proposals.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::Catalog(format!("duplicate proposal id {}", w[0].id)));
            }
        }
        for p in &proposals {
            if p.id.0 == 0 {
                return Err(Error::Catalog("proposal ids must be positive".into()));
            }
            if p.text.trim().is_empty() {
                return Err(Error::Catalog(format!("proposal {} has empty text", p.id)));
            }
        }
        Ok(Self { proposals })
    }

    /// Catalog with ids `1..=n` and placeholder text.
    pub fn numbered(n: usize) -> Self {
        Self {
            proposals: (1..=n as u32)
                .map(|i| Proposal {
                    id: ProposalId(i),
                    text: format!("proposal {i}"),
                    candidate_ids: BTreeSet::new(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn proposals(&self) -> &[Proposal] {
        &self.proposals
    }

    pub fn ids(&self) -> Vec<ProposalId> {
        self.proposals.iter().map(|p| p.id).collect()
    }

    pub fn index_of(&self, id: ProposalId) -> Option<usize> {
        self.proposals.binary_search_by_key(&id, |p| p.id).ok()
    }

    pub fn contains(&self, id: ProposalId) -> bool {
        self.index_of(id).is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Agreement {
    Disapprove,
    Abstain,
    Approve,
}

impl Agreement {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            -1 => Some(Agreement::Disapprove),
            0 => Some(Agreement::Abstain),
            1 => Some(Agreement::Approve),
            _ => None,
        }
    }

    pub fn code(self) -> i8 {
        match self {
            Agreement::Disapprove => -1,
            Agreement::Abstain => 0,
            Agreement::Approve => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApprovalRecord {
    pub user_id: String,
    pub proposal_id: ProposalId,
    pub agree: Agreement,
    pub universe: i32,
    pub score: Option<f64>,
    pub timestamp: Timestamp,
    pub locale: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub user_id: String,
    /// Most preferred first.
    pub panel: Vec<ProposalId>,
    pub updated: bool,
    pub universe: i32,
    pub score: Option<f64>,
    pub timestamp: Timestamp,
}

/// Self-reported demographics. Labels are the platform's integer codes;
/// `None` means the column was absent or blank.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub user_id: String,
    pub politics: Option<i32>,
    pub location: Option<i32>,
    pub age: Option<i32>,
    pub sex: Option<i32>,
    pub education: Option<i32>,
    pub zone: Option<i32>,
    pub universe: Option<i32>,
    pub timestamp: Timestamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Politics,
    Location,
    Age,
    Sex,
    Education,
    Zone,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Politics,
        Dimension::Location,
        Dimension::Age,
        Dimension::Sex,
        Dimension::Education,
        Dimension::Zone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Politics => "politics",
            Dimension::Location => "location",
            Dimension::Age => "age",
            Dimension::Sex => "sex",
            Dimension::Education => "education",
            Dimension::Zone => "zone",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ParticipantProfile {
    pub fn label(&self, dim: Dimension) -> Option<i32> {
        match dim {
            Dimension::Politics => self.politics,
            Dimension::Location => self.location,
            Dimension::Age => self.age,
            Dimension::Sex => self.sex,
            Dimension::Education => self.education,
            Dimension::Zone => self.zone,
        }
    }
}

pub type Profiles = BTreeMap<String, ParticipantProfile>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PreferenceCorpus {
    pub catalog: Catalog,
    pub approvals: Vec<ApprovalRecord>,
    pub ranks: Vec<RankRecord>,
    pub profiles: Profiles,
}

impl PreferenceCorpus {
    /// Checks that every proposal reference resolves and every panel is
    /// well formed.
    pub fn validate(&self) -> Result<()> {
        for a in &self.approvals {
            if !self.catalog.contains(a.proposal_id) {
                return Err(Error::Catalog(format!(
                    "approval by {} references unknown proposal {}",
                    a.user_id, a.proposal_id
                )));
            }
        }
        for r in &self.ranks {
            if r.panel.is_empty() {
                return Err(Error::Catalog(format!(
                    "empty panel for user {}",
                    r.user_id
                )));
            }
            let mut seen = HashSet::new();
            for id in &r.panel {
                if !self.catalog.contains(*id) {
                    return Err(Error::Catalog(format!(
                        "panel of {} references unknown proposal {id}",
                        r.user_id
                    )));
                }
                if !seen.insert(*id) {
                    return Err(Error::Catalog(format!(
                        "panel of {} repeats proposal {id}",
                        r.user_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// All user ids appearing in approvals or ranks, sorted.
    pub fn participants(&self) -> BTreeSet<String> {
        self.approvals
            .iter()
            .map(|a| a.user_id.clone())
            .chain(self.ranks.iter().map(|r| r.user_id.clone()))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// CSV plumbing

struct Table {
    name: String,
    headers: Vec<String>,
    reader: csv::Reader<Box<dyn Read>>,
}

impl Table {
    fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(path.display().to_string(), Box::new(file))
    }

    fn from_reader(name: String, reader: Box<dyn Read>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let headers = reader
            .headers()
            .map_err(|e| Error::Row {
                file: name.clone(),
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').to_string())
            .collect();
        Ok(Self {
            name,
            headers,
            reader,
        })
    }

    fn column(&self, names: &[&str]) -> Result<usize> {
        self.optional_column(names).ok_or_else(|| Error::Schema {
            file: self.name.clone(),
            column: names[0].to_string(),
        })
    }

    fn optional_column(&self, names: &[&str]) -> Option<usize> {
        names
            .iter()
            .find_map(|n| self.headers.iter().position(|h| h == n))
    }

    /// Iterates data rows as `(line, record)`.
    fn rows(&mut self) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + '_ {
        let name = self.name.clone();
        self.reader.records().map(move |r| match r {
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line());
                Ok((line, rec))
            }
            Err(e) => Err(Error::Row {
                file: name.clone(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            }),
        })
    }
}

struct RowCtx<'a> {
    file: &'a str,
    line: u64,
    rec: &'a csv::StringRecord,
}

impl RowCtx<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Row {
            file: self.file.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn str(&self, col: usize) -> &str {
        self.rec.get(col).unwrap_or("")
    }

    fn int<T: std::str::FromStr>(&self, col: usize, what: &str) -> Result<T> {
        let raw = self.str(col);
        raw.parse()
            .map_err(|_| self.err(format!("invalid {what} `{raw}`")))
    }

    fn opt_int(&self, col: Option<usize>, what: &str) -> Result<Option<i32>> {
        match col.map(|c| self.str(c)) {
            None | Some("") => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| self.err(format!("invalid {what} `{raw}`"))),
        }
    }

    fn score(&self, col: usize) -> Result<Option<f64>> {
        let raw = self.str(col);
        if raw.is_empty() {
            return Ok(None);
        }
        let v: f64 = raw
            .parse()
            .map_err(|_| self.err(format!("invalid score `{raw}`")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(self.err(format!("score {v} outside [0, 1]")));
        }
        Ok(Some(v))
    }

    fn timestamp(&self, col: usize) -> Result<Timestamp> {
        let raw = self.str(col);
        parse_timestamp(raw).ok_or_else(|| self.err(format!("invalid timestamp `{raw}`")))
    }

    fn boolean(&self, col: usize) -> Result<bool> {
        match self.str(col).to_ascii_lowercase().as_str() {
            "true" | "t" | "1" | "yes" => Ok(true),
            "false" | "f" | "0" | "no" => Ok(false),
            other => Err(self.err(format!("invalid boolean `{other}`"))),
        }
    }
}

pub fn parse_timestamp(raw: &str) -> Option<Timestamp> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(Utc.from_utc_datetime(&t));
        }
    }
    None
}

pub fn format_timestamp(t: &Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn split_ids(raw: &str) -> std::result::Result<Vec<ProposalId>, String> {
    raw.split('|')
        .map(|s| {
            let s = s.trim();
            s.parse::<u32>()
                .map(ProposalId)
                .map_err(|_| format!("invalid proposal id `{s}`"))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Parsers

pub fn parse_catalog(path: &Path) -> Result<Catalog> {
    read_catalog(Table::open(path)?)
}

fn read_catalog(mut t: Table) -> Result<Catalog> {
    let c_id = t.column(&["id", "proposal_id"])?;
    let c_text = t.column(&["text"])?;
    let c_cand = t.optional_column(&["candidates", "candidate_ids"]);
    let file = t.name.clone();
    let mut proposals = Vec::new();
    for row in t.rows() {
        let (line, rec) = row?;
        let ctx = RowCtx {
            file: &file,
            line,
            rec: &rec,
        };
        let id = ProposalId(ctx.int(c_id, "proposal id")?);
        let text = ctx.str(c_text).to_string();
        if text.is_empty() {
            return Err(ctx.err("empty proposal text"));
        }
        let candidate_ids = match c_cand.map(|c| ctx.str(c)) {
            None | Some("") => BTreeSet::new(),
            Some(raw) => raw.split('|').map(|s| s.trim().to_string()).collect(),
        };
        proposals.push(Proposal {
            id,
            text,
            candidate_ids,
        });
    }
    Catalog::new(proposals)
}

pub fn parse_approvals(path: &Path, catalog: &Catalog) -> Result<Vec<ApprovalRecord>> {
    read_approvals_table(Table::open(path)?, catalog)
}

/// Reads an approval table from any reader; `name` labels error messages.
pub fn read_approvals<R: Read + 'static>(
    reader: R,
    name: &str,
    catalog: &Catalog,
) -> Result<Vec<ApprovalRecord>> {
    read_approvals_table(Table::from_reader(name.into(), Box::new(reader))?, catalog)
}

fn read_approvals_table(mut t: Table, catalog: &Catalog) -> Result<Vec<ApprovalRecord>> {
    let c_user = t.column(&["user_id"])?;
    let c_prop = t.column(&["proposal_id"])?;
    let c_agree = t.column(&["agree"])?;
    let c_universe = t.column(&["universe"])?;
    let c_score = t.column(&["score"])?;
    let c_time = t.column(&["created_at"])?;
    let c_locale = t.column(&["locale"])?;
    let file = t.name.clone();
    let mut out = Vec::new();
    for row in t.rows() {
        let (line, rec) = row?;
        let ctx = RowCtx {
            file: &file,
            line,
            rec: &rec,
        };
        let proposal_id = ProposalId(ctx.int(c_prop, "proposal id")?);
        if !catalog.contains(proposal_id) {
            return Err(ctx.err(format!("unknown proposal {proposal_id}")));
        }
        let code: i64 = ctx.int(c_agree, "agree code")?;
        let agree = Agreement::from_code(code)
            .ok_or_else(|| ctx.err(format!("agree code {code} not in {{-1, 0, 1}}")))?;
        out.push(ApprovalRecord {
            user_id: ctx.str(c_user).to_string(),
            proposal_id,
            agree,
            universe: ctx.int(c_universe, "universe")?,
            score: ctx.score(c_score)?,
            timestamp: ctx.timestamp(c_time)?,
            locale: ctx.str(c_locale).to_string(),
        });
    }
    Ok(out)
}

pub fn parse_ranks(path: &Path, catalog: &Catalog) -> Result<Vec<RankRecord>> {
    read_ranks_table(Table::open(path)?, catalog)
}

pub fn read_ranks<R: Read + 'static>(
    reader: R,
    name: &str,
    catalog: &Catalog,
) -> Result<Vec<RankRecord>> {
    read_ranks_table(Table::from_reader(name.into(), Box::new(reader))?, catalog)
}

fn read_ranks_table(mut t: Table, catalog: &Catalog) -> Result<Vec<RankRecord>> {
    let c_user = t.column(&["user_id"])?;
    let c_rank = t.column(&["rank"])?;
    let c_updated = t.column(&["updated"])?;
    let c_universe = t.column(&["universe"])?;
    let c_score = t.column(&["score"])?;
    let c_time = t.column(&["created_at"])?;
    let file = t.name.clone();
    let mut out = Vec::new();
    for row in t.rows() {
        let (line, rec) = row?;
        let ctx = RowCtx {
            file: &file,
            line,
            rec: &rec,
        };
        let raw = ctx.str(c_rank);
        if raw.is_empty() {
            return Err(ctx.err("empty rank panel"));
        }
        let panel = split_ids(raw).map_err(|m| ctx.err(m))?;
        let mut seen = HashSet::new();
        for id in &panel {
            if !seen.insert(*id) {
                return Err(ctx.err(format!("proposal {id} repeated in panel")));
            }
            if !catalog.contains(*id) {
                return Err(ctx.err(format!("unknown proposal {id}")));
            }
        }
        out.push(RankRecord {
            user_id: ctx.str(c_user).to_string(),
            panel,
            updated: ctx.boolean(c_updated)?,
            universe: ctx.int(c_universe, "universe")?,
            score: ctx.score(c_score)?,
            timestamp: ctx.timestamp(c_time)?,
        });
    }
    Ok(out)
}

pub fn parse_profiles(path: &Path) -> Result<Profiles> {
    read_profiles_table(Table::open(path)?)
}

pub fn read_profiles<R: Read + 'static>(reader: R, name: &str) -> Result<Profiles> {
    read_profiles_table(Table::from_reader(name.into(), Box::new(reader))?)
}

fn read_profiles_table(mut t: Table) -> Result<Profiles> {
    let c_user = t.column(&["user_id"])?;
    let c_time = t.column(&["created_at"])?;
    let c_pol = t.optional_column(&["politica", "politics"]);
    let c_loc = t.optional_column(&["location"]);
    let c_age = t.optional_column(&["age"]);
    let c_sex = t.optional_column(&["sex"]);
    let c_edu = t.optional_column(&["education"]);
    let c_zone = t.optional_column(&["zone"]);
    let c_universe = t.optional_column(&["universe"]);
    let file = t.name.clone();
    let mut rows = Vec::new();
    for row in t.rows() {
        let (line, rec) = row?;
        let ctx = RowCtx {
            file: &file,
            line,
            rec: &rec,
        };
        rows.push(ParticipantProfile {
            user_id: ctx.str(c_user).to_string(),
            politics: ctx.opt_int(c_pol, "politics label")?,
            location: ctx.opt_int(c_loc, "location label")?,
            age: ctx.opt_int(c_age, "age label")?,
            sex: ctx.opt_int(c_sex, "sex label")?,
            education: ctx.opt_int(c_edu, "education label")?,
            zone: ctx.opt_int(c_zone, "zone label")?,
            universe: ctx.opt_int(c_universe, "universe")?,
            timestamp: ctx.timestamp(c_time)?,
        });
    }
    Ok(dedup_profiles(rows))
}

/// Keeps the most recent profile per user. Equal timestamps fall back to
/// comparing the labels, so the result does not depend on row order.
pub fn dedup_profiles(rows: impl IntoIterator<Item = ParticipantProfile>) -> Profiles {
    let key = |p: &ParticipantProfile| {
        (
            p.timestamp,
            [
                p.politics,
                p.location,
                p.age,
                p.sex,
                p.education,
                p.zone,
                p.universe,
            ],
        )
    };
    let mut out: Profiles = BTreeMap::new();
    for p in rows {
        match out.get(&p.user_id) {
            Some(existing) if key(existing) >= key(&p) => {}
            _ => {
                out.insert(p.user_id.clone(), p);
            }
        }
    }
    out
}

/// Loads the canonical directory layout. `approvals.csv`, `ranks.csv` and
/// `profiles.csv` are optional; `proposals.csv` is required.
pub fn load_corpus(dir: &Path) -> Result<PreferenceCorpus> {
    let catalog = parse_catalog(&dir.join("proposals.csv"))?;
    let approvals = match dir.join("approvals.csv") {
        p if p.exists() => parse_approvals(&p, &catalog)?,
        _ => Vec::new(),
    };
    let ranks = match dir.join("ranks.csv") {
        p if p.exists() => parse_ranks(&p, &catalog)?,
        _ => Vec::new(),
    };
    let profiles = match dir.join("profiles.csv") {
        p if p.exists() => parse_profiles(&p)?,
        _ => Profiles::new(),
    };
    Ok(PreferenceCorpus {
        catalog,
        approvals,
        ranks,
        profiles,
    })
}

// ---------------------------------------------------------------------------
// PrefLib strict-order-complete

/// Parses a PrefLib `.soc` file: `#`-prefixed metadata, then data lines
/// `multiplicity: id,id,...`. Each data line expands to `multiplicity`
/// voters with ids `soc:<line>:<k>` (`k` from 1).
pub fn parse_preflib_soc(path: &Path) -> Result<PreferenceCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_preflib_soc(BufReader::new(file), &path.display().to_string())
}

pub fn read_preflib_soc<R: BufRead>(reader: R, name: &str) -> Result<PreferenceCorpus> {
    let ferr = |line: u64, message: String| Error::Format {
        file: name.to_string(),
        line,
        message,
    };
    let mut declared_alternatives: Option<usize> = None;
    let mut declared_voters: Option<usize> = None;
    let mut names: BTreeMap<u32, String> = BTreeMap::new();
    let mut orders: Vec<(u64, usize, Vec<ProposalId>)> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.map_err(|e| ferr(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            if let Some((key, value)) = meta.split_once(':') {
                let key = key.trim().to_ascii_uppercase();
                let value = value.trim();
                if key == "NUMBER ALTERNATIVES" {
                    declared_alternatives =
                        Some(value.parse().map_err(|_| {
                            ferr(lineno, format!("bad alternative count `{value}`"))
                        })?);
                } else if key == "NUMBER VOTERS" {
                    declared_voters = Some(
                        value
                            .parse()
                            .map_err(|_| ferr(lineno, format!("bad voter count `{value}`")))?,
                    );
                } else if let Some(id) = key.strip_prefix("ALTERNATIVE NAME ") {
                    let id: u32 = id
                        .trim()
                        .parse()
                        .map_err(|_| ferr(lineno, format!("bad alternative id in `{key}`")))?;
                    names.insert(id, value.to_string());
                }
            }
            continue;
        }
        let (mult, order) = line
            .split_once(':')
            .ok_or_else(|| ferr(lineno, "expected `multiplicity: order`".into()))?;
        let mult: usize = mult
            .trim()
            .parse()
            .map_err(|_| ferr(lineno, format!("bad multiplicity `{}`", mult.trim())))?;
        if order.contains('{') {
            return Err(ferr(lineno, "ties are not allowed in strict orders".into()));
        }
        let ids = order
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<u32>()
                    .map(ProposalId)
                    .map_err(|_| ferr(lineno, format!("bad alternative id `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        orders.push((lineno, mult, ids));
    }

    let alternatives: BTreeSet<u32> = if !names.is_empty() {
        names.keys().copied().collect()
    } else if let Some(n) = declared_alternatives {
        (1..=n as u32).collect()
    } else if let Some((_, _, first)) = orders.first() {
        first.iter().map(|p| p.0).collect()
    } else {
        BTreeSet::new()
    };
    if let Some(n) = declared_alternatives {
        if n != alternatives.len() {
            return Err(ferr(
                0,
                format!("{n} alternatives declared, {} named", alternatives.len()),
            ));
        }
    }
    if alternatives.contains(&0) {
        return Err(ferr(0, "alternative ids must be positive".into()));
    }

    let mut ranks = Vec::new();
    for (lineno, mult, order) in orders {
        let distinct: BTreeSet<u32> = order.iter().map(|p| p.0).collect();
        if distinct.len() != order.len() || distinct != alternatives {
            return Err(ferr(
                lineno,
                "order is not a complete permutation of the alternatives".into(),
            ));
        }
        for k in 1..=mult {
            let voter = ranks.len() as i64;
            ranks.push(RankRecord {
                user_id: format!("soc:{lineno}:{k}"),
                panel: order.clone(),
                updated: true,
                universe: order.len() as i32,
                score: None,
                timestamp: Utc.timestamp_opt(voter, 0).single().unwrap_or_default(),
            });
        }
    }
    if let Some(v) = declared_voters {
        if v != ranks.len() {
            return Err(ferr(
                0,
                format!("{v} voters declared, {} found", ranks.len()),
            ));
        }
    }

    let proposals = alternatives
        .iter()
        .map(|&id| Proposal {
            id: ProposalId(id),
            text: names
                .get(&id)
                .filter(|s| !s.is_empty())
                .cloned()
                .unwrap_or_else(|| format!("alternative {id}")),
            candidate_ids: BTreeSet::new(),
        })
        .collect();
    Ok(PreferenceCorpus {
        catalog: Catalog::new(proposals)?,
        approvals: Vec::new(),
        ranks,
        profiles: Profiles::new(),
    })
}

// ---------------------------------------------------------------------------
// Writers

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn join_ids(ids: &[ProposalId]) -> String {
    ids.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("|")
}

pub fn write_catalog<W: Write>(w: W, catalog: &Catalog) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["id", "text", "candidates"])?;
    for p in catalog.proposals() {
        let cands = p
            .candidate_ids
            .iter()
            .cloned()
            .collect::<Vec<_>>()
            .join("|");
        out.write_record([p.id.to_string(), p.text.clone(), cands])?;
    }
    out.flush().map_err(|e| Error::io("<catalog>", e))?;
    Ok(())
}

pub fn write_approvals<W: Write>(w: W, approvals: &[ApprovalRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "user_id",
        "proposal_id",
        "agree",
        "universe",
        "score",
        "created_at",
        "locale",
    ])?;
    for a in approvals {
        out.write_record([
            a.user_id.clone(),
            a.proposal_id.to_string(),
            a.agree.code().to_string(),
            a.universe.to_string(),
            fmt_opt(&a.score),
            format_timestamp(&a.timestamp),
            a.locale.clone(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<approvals>", e))?;
    Ok(())
}

pub fn write_ranks<W: Write>(w: W, ranks: &[RankRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "user_id",
        "rank",
        "updated",
        "universe",
        "score",
        "created_at",
    ])?;
    for r in ranks {
        out.write_record([
            r.user_id.clone(),
            join_ids(&r.panel),
            r.updated.to_string(),
            r.universe.to_string(),
            fmt_opt(&r.score),
            format_timestamp(&r.timestamp),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<ranks>", e))?;
    Ok(())
}

pub fn write_profiles<W: Write>(w: W, profiles: &Profiles) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "user_id",
        "politica",
        "location",
        "age",
        "sex",
        "education",
        "zone",
        "universe",
        "created_at",
    ])?;
    for p in profiles.values() {
        out.write_record([
            p.user_id.clone(),
            fmt_opt(&p.politics),
            fmt_opt(&p.location),
            fmt_opt(&p.age),
            fmt_opt(&p.sex),
            fmt_opt(&p.education),
            fmt_opt(&p.zone),
            fmt_opt(&p.universe),
            format_timestamp(&p.timestamp),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<profiles>", e))?;
    Ok(())
}

/// Writes the canonical directory layout read by [`load_corpus`].
pub fn write_corpus(dir: &Path, corpus: &PreferenceCorpus) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        File::create(&p).map_err(|e| Error::io(p, e))
    };
    write_catalog(create("proposals.csv")?, &corpus.catalog)?;
    write_approvals(create("approvals.csv")?, &corpus.approvals)?;
    write_ranks(create("ranks.csv")?, &corpus.ranks)?;
    write_profiles(create("profiles.csv")?, &corpus.profiles)?;
    Ok(())
}
