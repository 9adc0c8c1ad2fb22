//! Geometry problem records, dataset validation and Table-1 style statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of answer options for selection questions.
pub const MAX_CHOICES: usize = 8;
/// Minimum number of answer options for selection questions.
pub const MIN_CHOICES: usize = 2;
/// Prefix marking an inline base64 PNG in the `image` field.
pub const INLINE_IMAGE_PREFIX: &str = "data:image/png;base64,";
/// Separator between a source id and the paraphrase variant index.
pub const VARIANT_SEPARATOR: &str = "#p";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("empty id")]
    EmptyId,
    #[error("empty question")]
    EmptyQuestion,
    #[error("empty image reference")]
    EmptyImage,
    #[error("answer kind `{0}` carries no matching payload")]
    MissingPayload(&'static str),
    #[error("answer kind `{0}` carries more than one payload")]
    ExtraPayload(&'static str),
    #[error("selection question needs {MIN_CHOICES}-{MAX_CHOICES} choices, got {0}")]
    ChoiceCount(usize),
    #[error("choice index {index} out of range for {count} choices")]
    ChoiceIndex { index: usize, count: usize },
    #[error("{qtype} question cannot have a {kind} answer")]
    AnswerKind { qtype: QuestionType, kind: &'static str },
    #[error("cloze answer must be non-empty")]
    EmptyClozeAnswer,
    #[error("caption text must be non-empty")]
    EmptyCaption,
    #[error("numeric answer must be finite with a non-negative finite tolerance")]
    BadNumeric,
    #[error("choices are only allowed on choice answers")]
    UnexpectedChoices,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatasetError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "GeoQA+")]
    GeoQaPlus,
    #[serde(rename = "PGPS9K")]
    Pgps9k,
    UniGeo,
    GeoMath,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::GeoQaPlus, Source::Pgps9k, Source::UniGeo, Source::GeoMath];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::GeoQaPlus => "GeoQA+",
            Source::Pgps9k => "PGPS9K",
            Source::UniGeo => "UniGeo",
            Source::GeoMath => "GeoMath",
        }
    }
}

/// Question kind. `Caption` holds image-text pairs (image description records).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Selection,
    Cloze,
    Proving,
    Caption,
}

impl QuestionType {
    pub const ALL: [QuestionType; 4] =
        [QuestionType::Selection, QuestionType::Cloze, QuestionType::Proving, QuestionType::Caption];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::Selection => "selection",
            QuestionType::Cloze => "cloze",
            QuestionType::Proving => "proving",
            QuestionType::Caption => "caption",
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
}

/// Where a record's diagram lives: a path relative to the dataset file, or
/// an inline base64 PNG.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum ImageRef {
    Path(String),
    Inline(String),
}

impl From<String> for ImageRef {
    fn from(s: String) -> Self {
        match s.strip_prefix(INLINE_IMAGE_PREFIX) {
            Some(payload) => ImageRef::Inline(payload.to_string()),
            None => ImageRef::Path(s),
        }
    }
}

impl From<ImageRef> for String {
    fn from(r: ImageRef) -> Self {
        match r {
            ImageRef::Path(p) => p,
            ImageRef::Inline(b) => format!("{INLINE_IMAGE_PREFIX}{b}"),
        }
    }
}

impl ImageRef {
    fn is_empty(&self) -> bool {
        match self {
            ImageRef::Path(p) => p.is_empty(),
            ImageRef::Inline(b) => b.is_empty(),
        }
    }
}

/// A gold or predicted answer. Exactly one payload per kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnswerValue {
    /// 0-based index into the record's choice list.
    Choice(usize),
    Text(String),
    /// `rel_tol` overrides the grader's default relative tolerance when set.
    Numeric { value: f64, rel_tol: Option<f64> },
}

impl AnswerValue {
    pub fn kind(&self) -> &'static str {
        match self {
            AnswerValue::Choice(_) => "choice",
            AnswerValue::Text(_) => "text",
            AnswerValue::Numeric { .. } => "numeric",
        }
    }

    /// How the answer is written in prompts and completions.
    pub fn render(&self) -> String {
        match self {
            AnswerValue::Choice(i) => choice_letter(*i).to_string(),
            AnswerValue::Text(t) => t.clone(),
            AnswerValue::Numeric { value, .. } => format!("{value}"),
        }
    }
}

/// `0 -> 'A'`, `1 -> 'B'`, ...
pub fn choice_letter(index: usize) -> char {
    (b'A' + index as u8) as char
}

/// On-disk answer object: `{kind, choice_index?, text?, numeric?, rel_tol?, choices?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerWire {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choice_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    numeric: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choices: Option<Vec<String>>,
}

/// On-disk record layout. Field names are part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordWire {
    id: String,
    question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question_norm: Option<String>,
    image: ImageRef,
    steps: Vec<String>,
    answer: AnswerWire,
    qtype: QuestionType,
    split: Split,
    source: Source,
    lang: Language,
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    synthetic: bool,
}

/// One geometry problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecordWire", into = "RecordWire")]
pub struct GeoRecord {
    pub id: String,
    pub question_raw: String,
    /// Filled by the normalizer; `None` until then.
    pub question_norm: Option<String>,
    pub image: ImageRef,
    pub solution_steps: Vec<String>,
    pub answer: AnswerValue,
    /// Ordered options for selection questions, empty otherwise.
    pub choices: Vec<String>,
    pub qtype: QuestionType,
    pub split: Split,
    pub source: Source,
    pub language: Language,
    /// Paraphrase-generated record; excluded from evaluation denominators.
    pub synthetic: bool,
}

impl GeoRecord {
    /// Check every record invariant.
    pub fn validate(&self) -> Result<(), RecordError> {
        if self.id.is_empty() {
            return Err(RecordError::EmptyId);
        }
        if self.question_raw.trim().is_empty() {
            return Err(RecordError::EmptyQuestion);
        }
        if self.image.is_empty() {
            return Err(RecordError::EmptyImage);
        }
        if let AnswerValue::Numeric { value, rel_tol } = &self.answer {
            let tol_ok = rel_tol.map_or(true, |t| t.is_finite() && t >= 0.0);
            if !value.is_finite() || !tol_ok {
                return Err(RecordError::BadNumeric);
            }
        }
        match (self.qtype, &self.answer) {
            (QuestionType::Selection, AnswerValue::Choice(index)) => {
                let count = self.choices.len();
                if !(MIN_CHOICES..=MAX_CHOICES).contains(&count) {
                    return Err(RecordError::ChoiceCount(count));
                }
                if *index >= count {
                    return Err(RecordError::ChoiceIndex { index: *index, count });
                }
                return Ok(());
            }
            (QuestionType::Cloze, AnswerValue::Text(t)) if t.trim().is_empty() => {
                return Err(RecordError::EmptyClozeAnswer)
            }
            (QuestionType::Cloze, AnswerValue::Text(_) | AnswerValue::Numeric { .. }) => {}
            (QuestionType::Proving, AnswerValue::Text(_)) => {}
            (QuestionType::Caption, AnswerValue::Text(t)) if t.trim().is_empty() => {
                return Err(RecordError::EmptyCaption)
            }
            (QuestionType::Caption, AnswerValue::Text(_)) => {}
            (qtype, answer) => return Err(RecordError::AnswerKind { qtype, kind: answer.kind() }),
        }
        if !self.choices.is_empty() {
            return Err(RecordError::UnexpectedChoices);
        }
        Ok(())
    }

    /// Question text for featurization and prompts: normalized when available.
    pub fn question_text(&self) -> &str {
        self.question_norm.as_deref().unwrap_or(&self.question_raw)
    }

    /// Id of the record this one was paraphrased from (itself if original).
    pub fn source_id(&self) -> &str {
        source_id(&self.id)
    }

    /// Whether this record is graded with an accuracy metric.
    pub fn is_gradable(&self) -> bool {
        matches!(self.qtype, QuestionType::Selection | QuestionType::Cloze)
    }
}

/// Strip a `#p{k}` paraphrase suffix.
pub fn source_id(id: &str) -> &str {
    match id.rfind(VARIANT_SEPARATOR) {
        Some(pos) if id[pos + VARIANT_SEPARATOR.len()..].bytes().all(|b| b.is_ascii_digit())
            && pos + VARIANT_SEPARATOR.len() < id.len() =>
        {
            &id[..pos]
        }
        _ => id,
    }
}

impl TryFrom<RecordWire> for GeoRecord {
    type Error = RecordError;

    fn try_from(w: RecordWire) -> Result<Self, Self::Error> {
        let a = w.answer;
        let payloads = [a.choice_index.is_some(), a.text.is_some(), a.numeric.is_some()];
        let populated = payloads.iter().filter(|p| **p).count();
        let (answer, kind): (Option<AnswerValue>, &'static str) = match a.kind.as_str() {
            "choice" => (a.choice_index.map(AnswerValue::Choice), "choice"),
            "text" => (a.text.clone().map(AnswerValue::Text), "text"),
            "numeric" => (a.numeric.map(|value| AnswerValue::Numeric { value, rel_tol: a.rel_tol }), "numeric"),
            _ => (None, "unknown"),
        };
        let answer = answer.ok_or(RecordError::MissingPayload(kind))?;
        if populated != 1 {
            return Err(RecordError::ExtraPayload(kind));
        }
        if a.rel_tol.is_some() && kind != "numeric" {
            return Err(RecordError::ExtraPayload(kind));
        }
        let choices = match (kind, a.choices) {
            ("choice", Some(c)) => c,
            ("choice", None) => Vec::new(),
            (_, Some(_)) => return Err(RecordError::UnexpectedChoices),
            (_, None) => Vec::new(),
        };
        let record = GeoRecord {
            id: w.id,
            question_raw: w.question,
            question_norm: w.question_norm,
            image: w.image,
            solution_steps: w.steps,
            answer,
            choices,
            qtype: w.qtype,
            split: w.split,
            source: w.source,
            language: w.lang,
            synthetic: w.synthetic,
        };
        record.validate()?;
        Ok(record)
    }
}

impl From<GeoRecord> for RecordWire {
    fn from(r: GeoRecord) -> Self {
        let mut answer = AnswerWire {
            kind: r.answer.kind().to_string(),
            choice_index: None,
            text: None,
            numeric: None,
            rel_tol: None,
            choices: None,
        };
        match r.answer {
            AnswerValue::Choice(i) => {
                answer.choice_index = Some(i);
                answer.choices = Some(r.choices);
            }
            AnswerValue::Text(t) => answer.text = Some(t),
            AnswerValue::Numeric { value, rel_tol } => {
                answer.numeric = Some(value);
                answer.rel_tol = rel_tol;
            }
        }
        RecordWire {
            id: r.id,
            question: r.question_raw,
            question_norm: r.question_norm,
            image: r.image,
            steps: r.solution_steps,
            answer,
            qtype: r.qtype,
            split: r.split,
            source: r.source,
            lang: r.language,
            synthetic: r.synthetic,
        }
    }
}

/// An immutable, id-unique collection of records in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    records: Vec<GeoRecord>,
    by_id: BTreeMap<String, usize>,
}

impl Dataset {
    pub fn new(records: Vec<GeoRecord>) -> Result<Self, DatasetError> {
        let mut by_id = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.id.clone(), i).is_some() {
                return Err(DatasetError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self { records, by_id })
    }

    pub fn records(&self) -> &[GeoRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<GeoRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&GeoRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn iter(&self) -> core::slice::Iter<'_, GeoRecord> {
        self.records.iter()
    }

    /// Records with the given split, in original order.
    pub fn filter_split(&self, split: Split) -> Dataset {
        let records: Vec<_> = self.records.iter().filter(|r| r.split == split).cloned().collect();
        Dataset::new(records).expect("subset of a unique-id dataset is unique")
    }

    pub fn compute_stats(&self) -> DatasetStats {
        DatasetStats::from_records(&self.records)
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a GeoRecord;
    type IntoIter = core::slice::Iter<'a, GeoRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// One `(source, qtype, split)` cell count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsEntry {
    pub source: Source,
    pub qtype: QuestionType,
    pub split: Split,
    pub count: usize,
}

/// Record counts per source, question type and split.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetStats {
    counts: BTreeMap<(Source, QuestionType, Split), usize>,
    total: usize,
}

impl DatasetStats {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a GeoRecord>) -> Self {
        let mut stats = DatasetStats::default();
        for r in records {
            *stats.counts.entry((r.source, r.qtype, r.split)).or_default() += 1;
            stats.total += 1;
        }
        stats
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn count(&self, source: Source, qtype: QuestionType, split: Split) -> usize {
        self.counts.get(&(source, qtype, split)).copied().unwrap_or(0)
    }

    /// All-split count for a cell.
    pub fn cell_total(&self, source: Source, qtype: QuestionType) -> usize {
        Split::ALL.iter().map(|&s| self.count(source, qtype, s)).sum()
    }

    /// Count of records of a kind summed over sources, optionally for one split.
    pub fn qtype_count(&self, qtype: QuestionType, split: Option<Split>) -> usize {
        self.counts
            .iter()
            .filter(|((_, q, s), _)| *q == qtype && split.map_or(true, |want| *s == want))
            .map(|(_, n)| n)
            .sum()
    }

    /// Image-text pair count (caption records) over all sources and splits.
    pub fn image_text_pairs(&self) -> usize {
        self.qtype_count(QuestionType::Caption, None)
    }

    pub fn entries(&self) -> Vec<StatsEntry> {
        self.counts
            .iter()
            .map(|(&(source, qtype, split), &count)| StatsEntry { source, qtype, split, count })
            .collect()
    }

    pub fn sources(&self) -> BTreeSet<Source> {
        self.counts.keys().map(|(s, _, _)| *s).collect()
    }

    /// `total(test)` for a cell, or `-` when the cell is empty.
    pub fn render_cell(&self, source: Source, qtype: QuestionType) -> String {
        let total = self.cell_total(source, qtype);
        if total == 0 {
            "-".to_string()
        } else {
            format!("{}({})", total, self.count(source, qtype, Split::Test))
        }
    }

    /// Plain-text table with one row per record kind and one column per source.
    pub fn render_table(&self) -> String {
        const ROWS: [(&str, QuestionType); 4] = [
            ("QA-selection", QuestionType::Selection),
            ("QA-cloze", QuestionType::Cloze),
            ("QA-proving", QuestionType::Proving),
            ("Image-text pairs", QuestionType::Caption),
        ];
        let mut cells: Vec<Vec<String>> = Vec::new();
        let mut header = Vec::from(["Stat. type".to_string()]);
        header.extend(Source::ALL.iter().map(|s| s.as_str().to_string()));
        cells.push(header);
        for (label, q) in ROWS {
            let mut row = Vec::from([label.to_string()]);
            row.extend(Source::ALL.iter().map(|&s| self.render_cell(s, q)));
            cells.push(row);
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in cells.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:<w$}", w = *w))
                .collect();
            out.push_str(line.join(" | ").trim_end());
            out.push('\n');
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                out.push_str(&rule.join("-+-"));
                out.push('\n');
            }
        }
        out
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use alloc::vec;

    #[test]
    fn validation_catches_answer_shape_errors() {
        let mut r = selection("q", Split::Train, 5);
        assert_eq!(r.validate(), Err(RecordError::ChoiceIndex { index: 5, count: 4 }));
        r.answer = AnswerValue::Choice(0);
        r.choices = vec!["only".into()];
        assert_eq!(r.validate(), Err(RecordError::ChoiceCount(1)));
        r.choices = (0..9).map(|i| format!("{i}")).collect();
        assert_eq!(r.validate(), Err(RecordError::ChoiceCount(9)));

        let mut c = cloze("c", Split::Train, 1.0);
        assert!(c.validate().is_ok());
        c.answer = AnswerValue::Text("  ".into());
        assert_eq!(c.validate(), Err(RecordError::EmptyClozeAnswer));
        c.answer = AnswerValue::Choice(1);
        assert!(matches!(c.validate(), Err(RecordError::AnswerKind { .. })));

        let mut p = cloze("p", Split::Train, 1.0);
        p.qtype = QuestionType::Proving;
        p.answer = AnswerValue::Text(String::new());
        assert!(p.validate().is_ok());
    }

    #[test]
    fn source_id_strips_variant_suffix() {
        assert_eq!(source_id("q1#p3"), "q1");
        assert_eq!(source_id("q1"), "q1");
        assert_eq!(source_id("q#px"), "q#px");
        assert_eq!(source_id("q#p"), "q#p");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Dataset::new(vec![selection("q1", Split::Train, 0), selection("q1", Split::Test, 1)]);
        assert_eq!(err, Err(DatasetError::DuplicateId("q1".into())));
    }

    #[test]
    fn filter_split_partitions() {
        let ds = Dataset::new(vec![
            selection("a", Split::Train, 0),
            selection("b", Split::Test, 0),
            selection("c", Split::Train, 1),
        ])
        .unwrap();
        let test = ds.filter_split(Split::Test);
        assert_eq!(test.records().iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["b"]);
        assert!(ds.filter_split(Split::Val).is_empty());
        let train = ds.filter_split(Split::Train);
        assert_eq!(train.records().iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(train.len() + test.len(), ds.len());
    }

    #[test]
    fn stats_count_cells() {
        let mut records: Vec<_> = (0..4)
            .map(|i| selection(&format!("s{i}"), if i == 0 { Split::Test } else { Split::Train }, 0))
            .collect();
        records.push(cloze("c0", Split::Train, 1.0));
        records.push(cloze("c1", Split::Val, 2.0));
        let stats = Dataset::new(records).unwrap().compute_stats();
        assert_eq!(stats.render_cell(Source::GeoMath, QuestionType::Selection), "4(1)");
        assert_eq!(stats.render_cell(Source::GeoMath, QuestionType::Cloze), "2(0)");
        assert_eq!(stats.render_cell(Source::GeoQaPlus, QuestionType::Selection), "-");
        assert_eq!(stats.entries().iter().map(|e| e.count).sum::<usize>(), stats.total());
    }

    #[test]
    fn empty_stats_are_all_zero() {
        let stats = Dataset::default().compute_stats();
        assert_eq!(stats.total(), 0);
        assert!(stats.entries().is_empty());
        let table = stats.render_table();
        assert_eq!(table.lines().count(), 6);
        for line in table.lines().skip(2) {
            let cells: Vec<&str> = line.split('|').skip(1).map(str::trim).collect();
            assert_eq!(cells, ["-"; 4], "{line}");
        }
    }

    #[test]
    fn stats_table_reproduces_row_shape_at_full_scale() {
        // GeoMath column of the published dataset statistics.
        let rows = [
            (QuestionType::Selection, 4258, 404),
            (QuestionType::Cloze, 1423, 150),
            (QuestionType::Proving, 3474, 352),
            (QuestionType::Caption, 4540, 453),
        ];
        let mut records = Vec::new();
        for (q, total, test) in rows {
            for i in 0..total {
                let mut r = cloze(&format!("{q}-{i}"), if i < test { Split::Test } else { Split::Train }, 1.0);
                r.qtype = q;
                r.answer = match q {
                    QuestionType::Selection => AnswerValue::Choice(0),
                    QuestionType::Cloze => AnswerValue::Numeric { value: 1.0, rel_tol: None },
                    _ => AnswerValue::Text("x".into()),
                };
                if q == QuestionType::Selection {
                    r.choices = vec!["a".into(), "b".into()];
                }
                records.push(r);
            }
        }
        let stats = Dataset::new(records).unwrap().compute_stats();
        assert_eq!(stats.render_cell(Source::GeoMath, QuestionType::Selection), "4258(404)");
        assert_eq!(stats.render_cell(Source::GeoMath, QuestionType::Cloze), "1423(150)");
        assert_eq!(stats.render_cell(Source::GeoMath, QuestionType::Proving), "3474(352)");
        assert_eq!(stats.image_text_pairs(), 4540);
        let table = stats.render_table();
        let cloze_row = table.lines().find(|l| l.starts_with("QA-cloze")).unwrap();
        assert!(cloze_row.ends_with("1423(150)"), "{cloze_row}");
    }
}
