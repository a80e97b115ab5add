use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RATINGS_HEADER: &str = "annotator_id,ad_id,engagement,valence,arousal";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Arousal,
    Valence,
    Engagement,
}

impl Attribute {
    /// Table order: arousal, valence, engagement.
    pub const ALL: [Attribute; 3] = [Attribute::Arousal, Attribute::Valence, Attribute::Engagement];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Arousal => "arousal",
            Attribute::Valence => "valence",
            Attribute::Engagement => "engagement",
        }
    }

    pub fn range(self) -> (i8, i8) {
        match self {
            Attribute::Valence => (-2, 2),
            Attribute::Arousal | Attribute::Engagement => (0, 4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub annotator_id: String,
    pub ad_id: String,
    pub engagement: i8,
    pub valence: Option<i8>,
    pub arousal: Option<i8>,
}

impl RatingRecord {
    pub fn get(&self, attr: Attribute) -> Option<i8> {
        match attr {
            Attribute::Engagement => Some(self.engagement),
            Attribute::Valence => self.valence,
            Attribute::Arousal => self.arousal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RatingTable {
    pub records: Vec<RatingRecord>,
}

fn check_range(attr: Attribute, v: i8) -> Result<i8> {
    let (lo, hi) = attr.range();
    if v < lo || v > hi {
        return Err(Error::InvalidData(format!("{} {v} outside {lo}..={hi}", attr.as_str())));
    }
    Ok(v)
}

impl RatingTable {
    /// Validates ranges and `(annotator, ad)` uniqueness.
    pub fn new(records: Vec<RatingRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            for attr in Attribute::ALL {
                if let Some(v) = r.get(attr) {
                    check_range(attr, v)?;
                }
            }
            if !seen.insert((r.annotator_id.as_str(), r.ad_id.as_str())) {
                return Err(Error::InvalidData(format!(
                    "duplicate rating by {} for {}",
                    r.annotator_id, r.ad_id
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct ad ids in first-seen order.
    pub fn ad_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.ad_id.as_str()))
            .map(|r| r.ad_id.clone())
            .collect()
    }

    pub fn annotator_count(&self) -> usize {
        self.records.iter().map(|r| r.annotator_id.as_str()).collect::<HashSet<_>>().len()
    }

    pub fn has_attribute(&self, attr: Attribute) -> bool {
        self.records.iter().any(|r| r.get(attr).is_some())
    }

    /// Parses ratings CSV text. The header must contain `annotator_id`,
    /// `ad_id` and `engagement`; `valence` and `arousal` are optional
    /// columns whose cells may be empty.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let col = |name: &str| columns.iter().position(|c| *c == name);
        let (annotator, ad, engagement) = match (col("annotator_id"), col("ad_id"), col("engagement")) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(err(1, format!("header must contain annotator_id, ad_id and engagement; got {header:?}")))
            }
        };
        let (valence, arousal) = (col("valence"), col("arousal"));

        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != columns.len() {
                return Err(err(no, format!("expected {} fields, found {}", columns.len(), cells.len())));
            }
            let value = |attr: Attribute, idx: Option<usize>, required: bool| -> Result<Option<i8>> {
                let Some(i) = idx else { return Ok(None) };
                let cell = cells[i];
                if cell.is_empty() {
                    return if required {
                        Err(err(no, format!("missing {} rating", attr.as_str())))
                    } else {
                        Ok(None)
                    };
                }
                let v: i8 = cell
                    .parse()
                    .map_err(|_| err(no, format!("{} value {cell:?} is not an integer", attr.as_str())))?;
                check_range(attr, v).map_err(|e| err(no, e.to_string()))?;
                Ok(Some(v))
            };
            let record = RatingRecord {
                annotator_id: cells[annotator].to_string(),
                ad_id: cells[ad].to_string(),
                engagement: value(Attribute::Engagement, Some(engagement), true)?.expect("required"),
                valence: value(Attribute::Valence, valence, false)?,
                arousal: value(Attribute::Arousal, arousal, false)?,
            };
            if record.annotator_id.is_empty() || record.ad_id.is_empty() {
                return Err(err(no, "empty annotator_id or ad_id".into()));
            }
            if !seen.insert((record.annotator_id.clone(), record.ad_id.clone())) {
                return Err(err(no, format!("duplicate rating by {} for {}", record.annotator_id, record.ad_id)));
            }
            records.push(record);
        }
        Ok(Self { records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(RATINGS_HEADER);
        out.push('\n');
        let opt = |v: Option<i8>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.annotator_id,
                r.ad_id,
                r.engagement,
                opt(r.valence),
                opt(r.arousal)
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = RatingTable::parse(
            "annotator_id,ad_id,engagement,valence,arousal\na1,ad1,3,-1,2\na2,ad1,0,,\n",
            Path::new("r.csv"),
        )
        .unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.records[1].valence, None);
        let again = RatingTable::parse(&t.to_csv(), Path::new("r.csv")).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn out_of_range_names_the_line() {
        let err = RatingTable::parse("annotator_id,ad_id,engagement\na,b,2\na,c,7\n", Path::new("r.csv")).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("engagement 7"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn engagement_only_is_accepted() {
        let t = RatingTable::parse("annotator_id,ad_id,engagement\na,b,2\n", Path::new("r.csv")).unwrap();
        assert!(!t.has_attribute(Attribute::Valence));
    }

    #[test]
    fn duplicates_are_rejected() {
        let err = RatingTable::parse("annotator_id,ad_id,engagement\na,b,2\na,b,3\n", Path::new("r.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}
