//! Pair files: `question1<TAB>question2<TAB>label[<TAB>provenance]` with a
//! header row, UTF-8, no quoting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Dataset, Label, Provenance};
use crate::{Error, Result};

/// One row of a pair file. The label column is optional so that unlabeled
/// pair lists can be read for prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRow {
    pub q1: String,
    pub q2: String,
    pub label: Option<Label>,
    pub provenance: Option<Provenance>,
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .flexible(true)
        .from_reader(file))
}

/// Reads every row of a pair file, accepting two to four columns.
pub fn read_pair_rows(path: impl AsRef<Path>) -> Result<Vec<PairRow>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let malformed = |detail: String| Error::Malformed {
            location: format!("{}:{line}", path.display()),
            detail,
        };
        let record = record.map_err(|e| malformed(e.to_string()))?;
        if record.len() < 2 || record.len() > 4 {
            return Err(malformed(format!("expected 2 to 4 columns, found {}", record.len())));
        }
        let label = match record.get(2) {
            Some(s) => {
                let v: u8 = s
                    .trim()
                    .parse()
                    .map_err(|_| malformed(format!("label {s:?} is not 0 or 1")))?;
                Some(Label::from_u8(v).map_err(|e| malformed(e.to_string()))?)
            }
            None => None,
        };
        let provenance = match record.get(3) {
            Some(s) => Some(Provenance::parse(s.trim()).map_err(|e| malformed(e.to_string()))?),
            None => None,
        };
        let q1 = record[0].to_owned();
        let q2 = record[1].to_owned();
        if q1.trim().is_empty() || q2.trim().is_empty() {
            return Err(malformed("empty question".into()));
        }
        rows.push(PairRow {
            q1,
            q2,
            label,
            provenance,
        });
    }
    Ok(rows)
}

/// Reads a labeled pair file into a [`Dataset`]. Rows without a provenance
/// column are marked original.
pub fn read_pairs_tsv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut ds = Dataset::new();
    for (i, row) in read_pair_rows(path)?.into_iter().enumerate() {
        let label = row.label.ok_or_else(|| Error::Malformed {
            location: format!("{}:{}", path.display(), i + 2),
            detail: "missing label column".into(),
        })?;
        ds.push_text(
            &row.q1,
            &row.q2,
            label,
            row.provenance.unwrap_or(Provenance::Original),
        );
    }
    Ok(ds)
}

fn check_field(q: &str) -> Result<()> {
    if q.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidInput(format!(
            "question {q:?} contains a tab or newline and cannot be written as TSV"
        )));
    }
    Ok(())
}

/// Writes a dataset as a four-column pair file.
pub fn write_pairs_tsv(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "question1\tquestion2\tlabel\tprovenance").map_err(io)?;
    for p in &ds.pairs {
        let (a, b) = ds.pair_texts(p);
        check_field(a)?;
        check_field(b)?;
        writeln!(w, "{a}\t{b}\t{}\t{}", p.label.as_u8(), p.provenance).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes rows with as many columns as the widest row has: two, three or
/// four. Every row must then carry the same optional columns.
pub fn write_pair_rows(path: impl AsRef<Path>, rows: &[PairRow]) -> Result<()> {
    let path = path.as_ref();
    let with_label = rows.iter().any(|r| r.label.is_some());
    let with_prov = rows.iter().any(|r| r.provenance.is_some());
    if rows
        .iter()
        .any(|r| r.label.is_some() != with_label || r.provenance.is_some() != with_prov)
    {
        return Err(Error::InvalidInput("pair rows have differing column counts".into()));
    }
    if with_prov && !with_label {
        return Err(Error::InvalidInput("provenance column without a label column".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header = match (with_label, with_prov) {
        (false, _) => "question1\tquestion2",
        (true, false) => "question1\tquestion2\tlabel",
        (true, true) => "question1\tquestion2\tlabel\tprovenance",
    };
    writeln!(w, "{header}").map_err(io)?;
    for r in rows {
        check_field(&r.q1)?;
        check_field(&r.q2)?;
        write!(w, "{}\t{}", r.q1, r.q2).map_err(io)?;
        if let Some(l) = r.label {
            write!(w, "\t{}", l.as_u8()).map_err(io)?;
        }
        if let Some(p) = r.provenance {
            write!(w, "\t{p}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
