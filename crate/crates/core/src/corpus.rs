//! Expression-text pair corpus and the concept-map proposition dataset.
//!
//! The canonical corpus form is UTF-8 JSON tagged with [`CORPUS_SCHEMA`].
//! CSV is accepted as an import format with the fixed header
//! `id,task_source,se,lt,ilt,rc,irc,ot`; an empty `rc`/`irc` cell means the
//! record has no related-concept pair. Text is kept verbatim apart from
//! leading/trailing whitespace trimming.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CORPUS_SCHEMA: &str = "symbed-corpus/1";
pub const DEFAULT_OFF_TOPIC: &str = "apple pie recipe";
pub const CSV_HEADER: [&str; 8] = ["id", "task_source", "se", "lt", "ilt", "rc", "irc", "ot"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSource {
    ConceptMap,
    ProblemSolving,
}

impl TaskSource {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskSource::ConceptMap => "concept_map",
            TaskSource::ProblemSolving => "problem_solving",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "concept_map" => Some(TaskSource::ConceptMap),
            "problem_solving" => Some(TaskSource::ProblemSolving),
            _ => None,
        }
    }
}

/// One symbolic expression with its five counterpart texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairRecord {
    pub id: String,
    pub task_source: TaskSource,
    pub se: String,
    pub lt: String,
    pub ilt: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rc: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub irc: Option<String>,
    pub ot: String,
}

impl PairRecord {
    pub fn has_related_concepts(&self) -> bool {
        self.rc.is_some() && self.irc.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<PairRecord>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Json,
    Csv,
}

impl CorpusFormat {
    /// Guesses the format from the file extension; anything but `.csv` is JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Json,
        }
    }
}

/// Record as it appears on disk, before trimming and invariant checks.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPairRecord {
    id: Option<String>,
    task_source: Option<String>,
    se: Option<String>,
    lt: Option<String>,
    ilt: Option<String>,
    rc: Option<String>,
    irc: Option<String>,
    ot: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusFileIn {
    schema: String,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    records: Vec<RawPairRecord>,
}

#[derive(Serialize)]
struct CorpusFileOut<'a> {
    schema: &'a str,
    metadata: &'a BTreeMap<String, String>,
    records: &'a [PairRecord],
}

fn trimmed(v: Option<String>) -> Option<String> {
    v.map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

impl RawPairRecord {
    fn validate(self, position: usize) -> std::result::Result<PairRecord, (String, String)> {
        let id =
            trimmed(self.id).ok_or_else(|| (format!("#{position}"), "empty id".to_string()))?;
        let fail = |reason: String| (id.clone(), reason);
        let source_text =
            trimmed(self.task_source).ok_or_else(|| fail("missing task_source".into()))?;
        let task_source = TaskSource::parse(&source_text).ok_or_else(|| {
            fail(format!(
                "unknown task_source {source_text:?} (expected concept_map or problem_solving)"
            ))
        })?;
        let se = trimmed(self.se).ok_or_else(|| fail("empty field se".into()))?;
        let lt = trimmed(self.lt).ok_or_else(|| fail("empty field lt".into()))?;
        let ilt = trimmed(self.ilt).ok_or_else(|| fail("empty field ilt".into()))?;
        let ot = match self.ot {
            None => DEFAULT_OFF_TOPIC.to_string(),
            Some(raw) => trimmed(Some(raw)).ok_or_else(|| fail("empty field ot".into()))?,
        };
        let rc = trimmed(self.rc);
        let irc = trimmed(self.irc);
        if rc.is_some() != irc.is_some() {
            return Err(fail(
                "rc and irc must be both present or both absent".to_string(),
            ));
        }
        Ok(PairRecord {
            id,
            task_source,
            se,
            lt,
            ilt,
            rc,
            irc,
            ot,
        })
    }
}

fn build_corpus(
    path: &Path,
    raw: Vec<(RawPairRecord, usize)>,
    metadata: BTreeMap<String, String>,
) -> Result<Corpus> {
    if raw.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            location: "1".into(),
            message: "corpus has no records".into(),
        });
    }
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(raw.len());
    for (rec, position) in raw {
        let rec = rec
            .validate(position)
            .map_err(|(id, reason)| Error::InvalidRecord {
                path: path.to_path_buf(),
                id,
                reason,
            })?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::InvalidRecord {
                path: path.to_path_buf(),
                id: rec.id,
                reason: "duplicate id".into(),
            });
        }
        records.push(rec);
    }
    Ok(Corpus { records, metadata })
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        CorpusFormat::Json => parse_corpus_json(path, &text),
        CorpusFormat::Csv => parse_corpus_csv(path, &text),
    }
}

pub fn parse_corpus_json(path: &Path, text: &str) -> Result<Corpus> {
    let file: CorpusFileIn = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        location: format!("{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if file.schema != CORPUS_SCHEMA {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            location: "1".into(),
            message: format!(
                "unsupported schema {:?} (expected {CORPUS_SCHEMA:?})",
                file.schema
            ),
        });
    }
    let raw = file
        .records
        .into_iter()
        .enumerate()
        .map(|(i, r)| (r, i + 1))
        .collect();
    build_corpus(path, raw, file.metadata)
}

pub fn parse_corpus_csv(path: &Path, text: &str) -> Result<Corpus> {
    let parse_err = |location: String, message: String| Error::Parse {
        path: path.to_path_buf(),
        location,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err("1".into(), e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != CSV_HEADER {
        return Err(parse_err(
            "1".into(),
            format!("header must be {:?}, found {names:?}", CSV_HEADER.join(",")),
        ));
    }
    let mut raw = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line.to_string(), e.to_string())
        })?;
        let cell = |k: usize| row.get(k).map(str::to_string);
        raw.push((
            RawPairRecord {
                id: cell(0),
                task_source: cell(1),
                se: cell(2),
                lt: cell(3),
                ilt: cell(4),
                rc: cell(5),
                irc: cell(6),
                ot: cell(7),
            },
            i + 1,
        ));
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("imported_from".to_string(), "csv".to_string());
    build_corpus(path, raw, metadata)
}

/// Canonical JSON form: fixed key order, two-space indent, LF newlines,
/// trailing newline.
pub fn to_canonical_json(corpus: &Corpus) -> String {
    let out = CorpusFileOut {
        schema: CORPUS_SCHEMA,
        metadata: &corpus.metadata,
        records: &corpus.records,
    };
    let mut s = serde_json::to_string_pretty(&out).expect("corpus serializes");
    s.push('\n');
    s
}

pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    fs::write(path, to_canonical_json(corpus)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub n: usize,
    pub concept_map: usize,
    pub problem_solving: usize,
    pub rc_pairs: usize,
}

impl fmt::Display for CorpusSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={}, concept_map={}, problem_solving={}, rc_pairs={}",
            self.n, self.concept_map, self.problem_solving, self.rc_pairs
        )
    }
}

pub fn corpus_summary(corpus: &Corpus) -> CorpusSummary {
    let mut summary = CorpusSummary {
        n: corpus.records.len(),
        concept_map: 0,
        problem_solving: 0,
        rc_pairs: 0,
    };
    for r in &corpus.records {
        match r.task_source {
            TaskSource::ConceptMap => summary.concept_map += 1,
            TaskSource::ProblemSolving => summary.problem_solving += 1,
        }
        if r.has_related_concepts() {
            summary.rc_pairs += 1;
        }
    }
    summary
}

/// The four ordered rating categories for concept-map propositions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingLabel {
    Wrong,
    Superficial,
    SimpleDirected,
    Detailed,
}

impl RatingLabel {
    pub const ALL: [RatingLabel; 4] = [
        RatingLabel::Wrong,
        RatingLabel::Superficial,
        RatingLabel::SimpleDirected,
        RatingLabel::Detailed,
    ];

    pub fn class_id(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RatingLabel::Wrong => "wrong",
            RatingLabel::Superficial => "superficial",
            RatingLabel::SimpleDirected => "simple_directed",
            RatingLabel::Detailed => "detailed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropositionRecord {
    pub id: String,
    pub concept_a: String,
    pub link_text: String,
    pub concept_b: String,
    pub label: RatingLabel,
    pub contains_symbolic: bool,
}

impl PropositionRecord {
    pub fn full_text(&self) -> String {
        format!("{} {} {}", self.concept_a, self.link_text, self.concept_b)
    }
}

/// Reads propositions from JSONL, one record per line; blank lines are skipped.
pub fn load_propositions(path: &Path) -> Result<Vec<PropositionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_propositions(path, &text)
}

pub fn parse_propositions(path: &Path, text: &str) -> Result<Vec<PropositionRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: PropositionRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            location: format!("{}:{}", i + 1, e.column()),
            message: e.to_string(),
        })?;
        rec.id = rec.id.trim().to_string();
        rec.concept_a = rec.concept_a.trim().to_string();
        rec.link_text = rec.link_text.trim().to_string();
        rec.concept_b = rec.concept_b.trim().to_string();
        let invalid = |id: &str, reason: &str| Error::InvalidRecord {
            path: path.to_path_buf(),
            id: format!("{id} (line {})", i + 1),
            reason: reason.to_string(),
        };
        if rec.id.is_empty() {
            return Err(invalid("", "empty id"));
        }
        if rec.concept_a.is_empty() || rec.concept_b.is_empty() {
            return Err(invalid(&rec.id, "empty concept field"));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(invalid(&rec.id, "duplicate id"));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            location: "1".into(),
            message: "no propositions".into(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropositionSummary {
    pub n: usize,
    /// Counts in [`RatingLabel::ALL`] order.
    pub per_label: [usize; 4],
    pub textual: usize,
    pub symbolic: usize,
}

impl fmt::Display for PropositionSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "propositions={}", self.n)?;
        for (label, count) in RatingLabel::ALL.iter().zip(self.per_label) {
            write!(f, ", {}={count}", label.as_str())?;
        }
        write!(f, ", textual={}, symbolic={}", self.textual, self.symbolic)
    }
}

pub fn proposition_summary(props: &[PropositionRecord]) -> PropositionSummary {
    let mut per_label = [0usize; 4];
    let mut symbolic = 0;
    for p in props {
        per_label[p.label.class_id()] += 1;
        if p.contains_symbolic {
            symbolic += 1;
        }
    }
    PropositionSummary {
        n: props.len(),
        per_label,
        textual: props.len() - symbolic,
        symbolic,
    }
}

pub fn write_propositions(path: &Path, props: &[PropositionRecord]) -> Result<()> {
    let mut s = String::new();
    for p in props {
        s.push_str(&serde_json::to_string(p).expect("proposition serializes"));
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(PathBuf::from(path), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("test.json")
    }

    fn wrap(records: &str) -> String {
        format!(r#"{{"schema":"symbed-corpus/1","metadata":{{}},"records":[{records}]}}"#)
    }

    #[test]
    fn accepts_table_row_with_related_concepts() {
        let text = wrap(
            r#"{"id":"ex2","task_source":"concept_map","se":"V=AXT","lt":"velocity equals acceleration times time","ilt":"velocity is constant","rc":"uniformly accelerated motion","irc":"uniform motion","ot":"apple pie recipe"}"#,
        );
        let c = parse_corpus_json(p(), &text).unwrap();
        assert_eq!(c.records.len(), 1);
        assert!(c.records[0].has_related_concepts());
    }

    #[test]
    fn accepts_row_without_related_concepts_and_defaults_ot() {
        let text = wrap(
            r#"{"id":"ex3","task_source":"problem_solving","se":"v=sqrt(g*r)","lt":"velocity equals square root of gravitational acceleration times radius","ilt":"acceleration equals square root of gravitational acceleration times radius"}"#,
        );
        let c = parse_corpus_json(p(), &text).unwrap();
        let r = &c.records[0];
        assert_eq!(r.rc, None);
        assert_eq!(r.irc, None);
        assert_eq!(r.ot, DEFAULT_OFF_TOPIC);
        assert_eq!(corpus_summary(&c).rc_pairs, 0);
    }

    #[test]
    fn rejects_unpaired_rc() {
        let text = wrap(
            r#"{"id":"bad","task_source":"concept_map","se":"a","lt":"b","ilt":"c","rc":"d"}"#,
        );
        let err = parse_corpus_json(p(), &text).unwrap_err();
        match err {
            Error::InvalidRecord { id, reason, .. } => {
                assert_eq!(id, "bad");
                assert!(reason.contains("rc and irc"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_duplicate_ids_and_blank_fields() {
        let rec = r#"{"id":"a","task_source":"concept_map","se":"x","lt":"y","ilt":"z"}"#;
        let err = parse_corpus_json(p(), &wrap(&format!("{rec},{rec}"))).unwrap_err();
        assert!(err.to_string().contains("duplicate id"), "{err}");

        let blank = r#"{"id":"b","task_source":"concept_map","se":"   ","lt":"y","ilt":"z"}"#;
        let err = parse_corpus_json(p(), &wrap(blank)).unwrap_err();
        assert!(err.to_string().contains("empty field se"), "{err}");
    }

    #[test]
    fn parse_error_is_located() {
        let err =
            parse_corpus_json(p(), "{\n \"schema\": \"symbed-corpus/1\",\n oops").unwrap_err();
        match err {
            Error::Parse { location, .. } => assert!(location.starts_with("3:"), "{location}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_empty_corpus_and_wrong_schema() {
        assert!(parse_corpus_json(p(), &wrap("")).is_err());
        let err = parse_corpus_json(p(), r#"{"schema":"other/2","records":[]}"#).unwrap_err();
        assert!(err.to_string().contains("unsupported schema"));
    }

    #[test]
    fn csv_import_treats_empty_cells_as_absent() {
        let csv = "id,task_source,se,lt,ilt,rc,irc,ot\n\
                   1,concept_map,m·g·h= 1/2·m·v²,l,il,law of conservation of energy,law of conservation of momentum,apple pie recipe\n\
                   2,problem_solving,v=sqrt(g*r),l,il,,,apple pie recipe\n";
        let c = parse_corpus_csv(Path::new("c.csv"), csv).unwrap();
        assert_eq!(c.records[0].se, "m·g·h= 1/2·m·v²");
        assert!(c.records[0].has_related_concepts());
        assert!(!c.records[1].has_related_concepts());

        let bad = "id,task_source,se,lt,ilt,rc,irc,ot\n1,concept_map,a,b,c,d,,e\n";
        assert!(parse_corpus_csv(Path::new("c.csv"), bad).is_err());
        let bad_header = "id,source,se,lt,ilt,rc,irc,ot\n";
        assert!(parse_corpus_csv(Path::new("c.csv"), bad_header).is_err());
    }

    #[test]
    fn symbols_are_preserved_verbatim() {
        let text = wrap(
            r#"{"id":"s","task_source":"concept_map","se":"  ΔE = m·g·Δh ","lt":"y","ilt":"z"}"#,
        );
        let c = parse_corpus_json(p(), &text).unwrap();
        assert_eq!(c.records[0].se, "ΔE = m·g·Δh");
    }

    #[test]
    fn summary_counts() {
        let text = wrap(
            r#"{"id":"1","task_source":"concept_map","se":"a","lt":"b","ilt":"c","rc":"d","irc":"e"},
               {"id":"2","task_source":"problem_solving","se":"a","lt":"b","ilt":"c","rc":"d","irc":"e"},
               {"id":"3","task_source":"problem_solving","se":"a","lt":"b","ilt":"c"}"#,
        );
        let s = corpus_summary(&parse_corpus_json(p(), &text).unwrap());
        assert_eq!(
            s,
            CorpusSummary {
                n: 3,
                concept_map: 1,
                problem_solving: 2,
                rc_pairs: 2
            }
        );
    }

    #[test]
    fn propositions_parse_and_reject_unknown_labels() {
        let text = concat!(
            r#"{"id":"p1","concept_a":"force","link_text":"F = m*a","concept_b":"acceleration","label":"detailed","contains_symbolic":true}"#,
            "\n\n",
            r#"{"id":"p2","concept_a":"velocity","link_text":"increases with","concept_b":"free fall","label":"simple_directed","contains_symbolic":false}"#,
            "\n"
        );
        let props = parse_propositions(Path::new("p.jsonl"), text).unwrap();
        assert_eq!(props.len(), 2);
        assert_eq!(props[0].full_text(), "force F = m*a acceleration");
        let s = proposition_summary(&props);
        assert_eq!(s.per_label, [0, 0, 1, 1]);
        assert_eq!((s.textual, s.symbolic), (1, 1));

        let bad = r#"{"id":"p3","concept_a":"a","link_text":"b","concept_b":"c","label":"excellent","contains_symbolic":false}"#;
        let err = parse_propositions(Path::new("p.jsonl"), bad).unwrap_err();
        assert!(err.to_string().contains("excellent"), "{err}");

        let empty = r#"{"id":"p4","concept_a":" ","link_text":"b","concept_b":"c","label":"wrong","contains_symbolic":false}"#;
        assert!(parse_propositions(Path::new("p.jsonl"), empty).is_err());
    }

    fn arb_text() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9=*/·²Δ ]{0,3}[a-zA-Z0-9=*/·²Δ]{1,12}"
    }

    fn arb_record(i: usize) -> impl Strategy<Value = PairRecord> {
        (
            any::<bool>(),
            arb_text(),
            arb_text(),
            arb_text(),
            proptest::option::of((arb_text(), arb_text())),
            arb_text(),
        )
            .prop_map(move |(cm, se, lt, ilt, rel, ot)| PairRecord {
                id: format!("r{i}"),
                task_source: if cm {
                    TaskSource::ConceptMap
                } else {
                    TaskSource::ProblemSolving
                },
                se: se.trim().to_string(),
                lt: lt.trim().to_string(),
                ilt: ilt.trim().to_string(),
                rc: rel.as_ref().map(|r| r.0.trim().to_string()),
                irc: rel.map(|r| r.1.trim().to_string()),
                ot: ot.trim().to_string(),
            })
    }

    fn arb_corpus() -> impl Strategy<Value = Corpus> {
        (1usize..20)
            .prop_flat_map(|n| (0..n).map(arb_record).collect::<Vec<_>>())
            .prop_map(|records| Corpus {
                records,
                metadata: BTreeMap::from([("language".to_string(), "de".to_string())]),
            })
    }

    proptest! {
        #[test]
        fn canonical_json_round_trips_byte_identical(c in arb_corpus()) {
            let text = to_canonical_json(&c);
            let back = parse_corpus_json(p(), &text).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(to_canonical_json(&back), text);
        }

        #[test]
        fn summary_matches_recount(c in arb_corpus()) {
            let s = corpus_summary(&c);
            let cm = c.records.iter().filter(|r| r.task_source == TaskSource::ConceptMap).count();
            let rc = c.records.iter().filter(|r| r.rc.is_some() && r.irc.is_some()).count();
            prop_assert_eq!(s.n, c.records.len());
            prop_assert_eq!(s.concept_map, cm);
            prop_assert_eq!(s.problem_solving, c.records.len() - cm);
            prop_assert_eq!(s.rc_pairs, rc);
        }
    }
}
