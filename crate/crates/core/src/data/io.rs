use std::fs::File;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{ComparisonRecord, Dataset, ResponseRecord, SurveyScale};
use crate::error::{Result, SurveyError};

const RATINGS_HEADER: [&str; 4] = ["respondent_id", "item_id", "value", "elapsed_ms"];
const COMPARISONS_HEADER: [&str; 5] = ["respondent_id", "item_left", "item_right", "winner", "elapsed_ms"];

fn io_err(path: &Path, source: std::io::Error) -> SurveyError {
    SurveyError::Io { path: path.display().to_string(), source }
}

fn read_csv<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let malformed =
        |line: u64, message: String| SurveyError::Malformed { path: path.display().to_string(), line, message };

    let found = reader.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(malformed(
            1,
            format!("expected header {:?}, found {:?}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for row in reader.deserialize() {
        match row {
            Ok(r) => out.push(r),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(malformed(line, e.to_string()));
            }
        }
    }
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let csv_err = |e: csv::Error| io_err(path, std::io::Error::other(e));
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

pub fn read_ratings(path: &Path) -> Result<Vec<ResponseRecord>> {
    read_csv(path, &RATINGS_HEADER)
}

pub fn read_comparisons(path: &Path) -> Result<Vec<ComparisonRecord>> {
    read_csv(path, &COMPARISONS_HEADER)
}

pub fn write_ratings(path: &Path, rows: &[ResponseRecord]) -> Result<()> {
    write_csv(path, rows, &RATINGS_HEADER)
}

pub fn write_comparisons(path: &Path, rows: &[ComparisonRecord]) -> Result<()> {
    write_csv(path, rows, &COMPARISONS_HEADER)
}

/// Reads and validates a survey from its ratings and comparisons CSVs.
///
/// Rating surveys need a ratings file; pairwise surveys take only the
/// comparisons file. The dataset context is the stem of the first file given.
pub fn load_dataset(
    ratings_path: Option<&Path>,
    comparisons_path: Option<&Path>,
    scale: SurveyScale,
) -> Result<Dataset> {
    let ratings = match ratings_path {
        Some(p) => read_ratings(p)?,
        None => Vec::new(),
    };
    let comparisons = match comparisons_path {
        Some(p) => read_comparisons(p)?,
        None => Vec::new(),
    };
    let context = ratings_path
        .or(comparisons_path)
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::from_records(context, scale, &ratings, &comparisons)
}

impl Dataset {
    /// Writes the dataset back to the two CSV files; ratings are skipped for
    /// pairwise surveys.
    pub fn save(&self, ratings_path: Option<&Path>, comparisons_path: &Path) -> Result<()> {
        let (ratings, comparisons) = self.to_records();
        if let Some(p) = ratings_path {
            write_ratings(p, &ratings)?;
        }
        write_comparisons(comparisons_path, &comparisons)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn loads_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let r = write(
            dir.path(),
            "streetview.csv",
            "respondent_id,item_id,value,elapsed_ms\nu2,a,3,1200\nu1,a,1,800\nu1,b,5,950\n",
        );
        let c = write(
            dir.path(),
            "cmp.csv",
            "respondent_id,item_left,item_right,winner,elapsed_ms\nu1,a,b,right,400\nu2,b,a,left,500\n",
        );
        let ds = load_dataset(Some(&r), Some(&c), SurveyScale::R5).unwrap();
        assert_eq!(ds.context, "streetview");
        assert_eq!(ds.ratings.nnz(), 3);
        assert_eq!(ds.heldout_comparisons.len(), 2);

        let r2 = dir.path().join("r2.csv");
        let c2 = dir.path().join("c2.csv");
        ds.save(Some(&r2), &c2).unwrap();
        let mut again = load_dataset(Some(&r2), Some(&c2), SurveyScale::R5).unwrap();
        again.context = ds.context.clone();
        assert_eq!(again, ds);
    }

    #[test]
    fn malformed_rows_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let bad_type = write(dir.path(), "a.csv", "respondent_id,item_id,value,elapsed_ms\nu1,a,x,10\n");
        assert!(matches!(
            load_dataset(Some(&bad_type), None, SurveyScale::R5),
            Err(SurveyError::Malformed { line: 2, .. })
        ));
        let bad_cols = write(dir.path(), "b.csv", "respondent_id,item_id,value,elapsed_ms\nu1,a,3\n");
        assert!(matches!(load_dataset(Some(&bad_cols), None, SurveyScale::R5), Err(SurveyError::Malformed { .. })));
        let bad_header = write(dir.path(), "c.csv", "who,item_id,value,elapsed_ms\nu1,a,3,1\n");
        assert!(matches!(
            load_dataset(Some(&bad_header), None, SurveyScale::R5),
            Err(SurveyError::Malformed { line: 1, .. })
        ));
        let negative = write(dir.path(), "d.csv", "respondent_id,item_id,value,elapsed_ms\nu1,a,3,-5\n");
        assert!(load_dataset(Some(&negative), None, SurveyScale::R5).is_err());
        let bad_winner =
            write(dir.path(), "e.csv", "respondent_id,item_left,item_right,winner,elapsed_ms\nu1,a,b,up,5\n");
        assert!(matches!(load_dataset(None, Some(&bad_winner), SurveyScale::Pc), Err(SurveyError::Malformed { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_dataset(Some(Path::new("/nonexistent/ratings.csv")), None, SurveyScale::R2).unwrap_err();
        assert_eq!(err.kind(), "io");
    }
}
