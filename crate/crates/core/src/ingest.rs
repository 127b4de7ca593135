//! Streaming extraction of citation records from MEDLINE/PubMed bulk XML.
//!
//! Only five fields are kept per citation: PMID, article title, abstract,
//! journal title and publication year. The reader walks the document with a
//! pull parser and holds at most one citation in memory at a time.

use std::io::{self, BufRead, BufReader, Read};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use flate2::read::MultiGzDecoder;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One parsed publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PubRecord {
    pub pmid: u64,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: Option<String>,
    pub journal: String,
    pub year: Option<i32>,
}

/// Outcome of [`validate_record`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    EligibleForEncoding,
    TitleOnly,
    Invalid,
}

/// Classifies a record by which text fields it carries.
pub fn validate_record(record: &PubRecord) -> Verdict {
    let has_title = !record.title.trim().is_empty();
    let has_abstract = record
        .abstract_text
        .as_deref()
        .is_some_and(|a| !a.trim().is_empty());
    match (has_title, has_abstract) {
        (true, true) => Verdict::EligibleForEncoding,
        (true, false) => Verdict::TitleOnly,
        _ => Verdict::Invalid,
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("stream error at compressed byte offset {offset}: {source}")]
    Stream {
        offset: u64,
        #[source]
        source: io::Error,
    },
    #[error("malformed XML at {path} (near byte {offset}): {message}")]
    Xml {
        path: String,
        offset: u64,
        message: String,
    },
}

/// Records from one archive plus the tally of citations that were dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseOutcome {
    pub records: Vec<PubRecord>,
    pub skipped: usize,
    pub citations: usize,
}

impl ParseOutcome {
    /// Diagnostic line emitted once per archive.
    pub fn summary_line(&self, name: &str) -> String {
        format!(
            "{name}: {} citations, {} records, {} skipped (missing PMID)",
            self.citations,
            self.records.len(),
            self.skipped
        )
    }
}

/// Parses a gzip-compressed MEDLINE archive in full.
pub fn parse_archive<R: Read>(source: R) -> Result<ParseOutcome, IngestError> {
    MedlineReader::from_gzip(source).collect_outcome()
}

/// Parses an uncompressed MEDLINE XML document in full.
pub fn parse_xml<R: BufRead>(source: R) -> Result<ParseOutcome, IngestError> {
    MedlineReader::new(source).collect_outcome()
}

/// Counts bytes pulled through a reader so stream errors can report where
/// in the compressed input they happened.
#[derive(Debug)]
pub struct CountingReader<R> {
    inner: R,
    count: Arc<AtomicU64>,
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.count.fetch_add(n as u64, Ordering::Relaxed);
        Ok(n)
    }
}

pub type GzipMedlineReader<R> = MedlineReader<BufReader<MultiGzDecoder<CountingReader<R>>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Pmid,
    Title,
    AbstractSection,
    Journal,
    Year,
    MedlineDate,
}

impl Field {
    /// Maps the element path below `MedlineCitation` to the field it feeds.
    /// Title and abstract also collect text from inline markup (`<i>`, `<sup>`).
    fn for_path(rel: &[Vec<u8>]) -> Option<Field> {
        let names: Vec<&[u8]> = rel.iter().map(Vec::as_slice).collect();
        match names.as_slice() {
            [b"PMID"] => Some(Field::Pmid),
            [b"Article", b"ArticleTitle", ..] => Some(Field::Title),
            [b"Article", b"Abstract", b"AbstractText", ..] => Some(Field::AbstractSection),
            [b"Article", b"Journal", b"Title"] => Some(Field::Journal),
            [b"Article", b"Journal", b"JournalIssue", b"PubDate", b"Year"] => Some(Field::Year),
            [b"Article", b"Journal", b"JournalIssue", b"PubDate", b"MedlineDate"] => {
                Some(Field::MedlineDate)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Default)]
struct CitationBuilder {
    pmid: String,
    title: String,
    sections: Vec<String>,
    journal: String,
    year: String,
    medline_date: String,
}

impl CitationBuilder {
    fn push(&mut self, field: Field, text: &str) {
        let target = match field {
            Field::Pmid => &mut self.pmid,
            Field::Title => &mut self.title,
            Field::AbstractSection => {
                if self.sections.is_empty() {
                    self.sections.push(String::new());
                }
                self.sections.last_mut().unwrap()
            }
            Field::Journal => &mut self.journal,
            Field::Year => &mut self.year,
            Field::MedlineDate => &mut self.medline_date,
        };
        target.push_str(text);
    }

    fn finish(self) -> Option<PubRecord> {
        let pmid = self.pmid.trim().parse::<u64>().ok().filter(|&p| p > 0)?;
        let abstract_text = self
            .sections
            .iter()
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        let year = four_digit_year(self.year.trim())
            .or_else(|| first_four_digit_token(&self.medline_date));
        Some(PubRecord {
            pmid,
            title: self.title.trim().to_string(),
            abstract_text: (!abstract_text.is_empty()).then_some(abstract_text),
            journal: self.journal.trim().to_string(),
            year,
        })
    }
}

fn four_digit_year(s: &str) -> Option<i32> {
    (s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit()))
        .then(|| s.parse().ok())
        .flatten()
}

/// First maximal run of exactly four ASCII digits, e.g. `1998` in
/// `"1998 Dec-1999 Jan"`.
fn first_four_digit_token(s: &str) -> Option<i32> {
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i - start == 4 {
                return s[start..i].parse().ok();
            }
        } else {
            i += 1;
        }
    }
    None
}

/// Pull-based reader yielding one [`PubRecord`] per `MedlineCitation`.
pub struct MedlineReader<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    path: Vec<Vec<u8>>,
    citation_depth: Option<usize>,
    current: Option<CitationBuilder>,
    compressed_bytes: Option<Arc<AtomicU64>>,
    seen_root: bool,
    done: bool,
    skipped: usize,
    citations: usize,
}

impl<R: Read> GzipMedlineReader<R> {
    pub fn from_gzip(source: R) -> Self {
        let count = Arc::new(AtomicU64::new(0));
        let counting = CountingReader {
            inner: source,
            count: Arc::clone(&count),
        };
        let mut reader = MedlineReader::new(BufReader::new(MultiGzDecoder::new(counting)));
        reader.compressed_bytes = Some(count);
        reader
    }
}

impl<R: BufRead> MedlineReader<R> {
    pub fn new(source: R) -> Self {
        let mut reader = Reader::from_reader(source);
        reader.config_mut().trim_text(false);
        MedlineReader {
            reader,
            buf: Vec::with_capacity(4096),
            path: Vec::new(),
            citation_depth: None,
            current: None,
            compressed_bytes: None,
            seen_root: false,
            done: false,
            skipped: 0,
            citations: 0,
        }
    }

    /// Citations dropped because they had no usable PMID.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// `MedlineCitation` elements seen so far.
    pub fn citations(&self) -> usize {
        self.citations
    }

    pub fn collect_outcome(mut self) -> Result<ParseOutcome, IngestError> {
        let mut records = Vec::new();
        while let Some(record) = self.next_record()? {
            records.push(record);
        }
        Ok(ParseOutcome {
            records,
            skipped: self.skipped,
            citations: self.citations,
        })
    }

    fn path_string(&self) -> String {
        if self.path.is_empty() {
            return "/".to_string();
        }
        self.path
            .iter()
            .map(|p| String::from_utf8_lossy(p).into_owned())
            .collect::<Vec<_>>()
            .join("/")
    }

    fn xml_error(&self, message: impl Into<String>) -> IngestError {
        IngestError::Xml {
            path: self.path_string(),
            offset: self.reader.buffer_position(),
            message: message.into(),
        }
    }

    fn convert_error(&self, err: quick_xml::Error) -> IngestError {
        match err {
            quick_xml::Error::Io(io_err) => IngestError::Stream {
                offset: self
                    .compressed_bytes
                    .as_ref()
                    .map(|c| c.load(Ordering::Relaxed))
                    .unwrap_or_else(|| self.reader.buffer_position()),
                source: io::Error::new(io_err.kind(), io_err.to_string()),
            },
            other => self.xml_error(other.to_string()),
        }
    }

    fn current_field(&self) -> Option<Field> {
        let depth = self.citation_depth?;
        Field::for_path(&self.path[depth..])
    }

    fn append_text(&mut self, text: &str) {
        if let Some(field) = self.current_field() {
            if let Some(builder) = self.current.as_mut() {
                builder.push(field, text);
            }
        }
    }

    /// Returns the next record, or `None` at end of document.
    pub fn next_record(&mut self) -> Result<Option<PubRecord>, IngestError> {
        if self.done {
            return Ok(None);
        }
        loop {
            self.buf.clear();
            let event = match self.reader.read_event_into(&mut self.buf) {
                Ok(event) => event.into_owned(),
                Err(err) => {
                    self.done = true;
                    return Err(self.convert_error(err));
                }
            };
            match event {
                Event::Start(start) => {
                    let name = start.name().as_ref().to_vec();
                    self.seen_root = true;
                    let is_citation = name == b"MedlineCitation";
                    self.path.push(name);
                    if is_citation && self.citation_depth.is_none() {
                        self.citation_depth = Some(self.path.len());
                        self.current = Some(CitationBuilder::default());
                        self.citations += 1;
                    } else if self.current_field() == Some(Field::AbstractSection)
                        && self.path.len() == self.citation_depth.unwrap_or(0) + 3
                    {
                        // a fresh <AbstractText> section
                        if let Some(builder) = self.current.as_mut() {
                            builder.sections.push(String::new());
                        }
                    }
                }
                Event::Empty(start) => {
                    self.seen_root = true;
                    if start.name().as_ref() == b"MedlineCitation" && self.citation_depth.is_none()
                    {
                        self.citations += 1;
                        self.skipped += 1;
                    }
                }
                Event::End(_) => {
                    let closing_citation = self.citation_depth == Some(self.path.len());
                    self.path.pop();
                    if closing_citation {
                        self.citation_depth = None;
                        let builder = self.current.take().unwrap_or_default();
                        match builder.finish() {
                            Some(record) => return Ok(Some(record)),
                            None => self.skipped += 1,
                        }
                    }
                }
                Event::Text(text) => {
                    if self.current_field().is_some() {
                        let decoded = match text.unescape() {
                            Ok(decoded) => decoded.into_owned(),
                            Err(err) => {
                                self.done = true;
                                return Err(self.xml_error(err.to_string()));
                            }
                        };
                        self.append_text(&decoded);
                    }
                }
                Event::CData(data) => {
                    if self.current_field().is_some() {
                        let decoded = String::from_utf8_lossy(&data).into_owned();
                        self.append_text(&decoded);
                    }
                }
                Event::Eof => {
                    self.done = true;
                    if !self.path.is_empty() {
                        return Err(self.xml_error("unexpected end of document"));
                    }
                    if !self.seen_root {
                        return Err(self.xml_error("document has no root element"));
                    }
                    return Ok(None);
                }
                _ => {}
            }
        }
    }
}

impl<R: BufRead> Iterator for MedlineReader<R> {
    type Item = Result<PubRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}
