use std::fs;
use std::path::Path;

use super::{label_violation, ClassInfo, ClassTable, DatagenError, GzslDataset, Split, SplitKind};
use crate::numgrad::Tensor;

pub const CLASSES_FILE: &str = "classes.csv";

fn io_err(path: &Path, source: std::io::Error) -> DatagenError {
    DatagenError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(file: &str, line: u64, msg: impl Into<String>) -> DatagenError {
    DatagenError::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

fn csv_err(path: &Path, file: &str, e: csv::Error) -> DatagenError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => parse_err(file, line, format!("{other:?}")),
    }
}

/// Writes the four CSV files. Floats use shortest round-trip decimal text
/// and rows are already canonical, so output bytes depend only on content.
pub fn save_dataset(dataset: &GzslDataset, dir: &Path) -> Result<(), DatagenError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let path = dir.join(CLASSES_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, CLASSES_FILE, e))?;
    let da = dataset.classes().semantic_dim();
    let mut header = vec!["class_id".to_string(), "name".into(), "is_seen".into()];
    header.extend((0..da).map(|i| format!("a_{i}")));
    w.write_record(&header).map_err(|e| csv_err(&path, CLASSES_FILE, e))?;
    for c in dataset.classes().classes() {
        let mut rec = vec![c.id.to_string(), c.name.clone(), u8::from(c.is_seen).to_string()];
        rec.extend(c.semantic.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(&path, CLASSES_FILE, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let dx = dataset.feature_dim();
    for kind in SplitKind::ALL {
        let file = kind.file_name();
        let path = dir.join(file);
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, file, e))?;
        let mut header = vec!["class_id".to_string()];
        header.extend((0..dx).map(|i| format!("x_{i}")));
        w.write_record(&header).map_err(|e| csv_err(&path, file, e))?;
        let split = dataset.split(kind);
        for (row, label) in split.features.iter_rows().zip(&split.labels) {
            let mut rec = vec![label.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_err(&path, file, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn open(dir: &Path, file: &str) -> Result<csv::Reader<fs::File>, DatagenError> {
    let path = dir.join(file);
    let f = fs::File::open(&path).map_err(|e| io_err(&path, e))?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(f))
}

fn check_header(file: &str, header: &csv::StringRecord, fixed: &[&str], prefix: &str) -> Result<usize, DatagenError> {
    for (i, name) in fixed.iter().enumerate() {
        if header.get(i) != Some(name) {
            return Err(parse_err(file, 1, format!("expected column {i} to be `{name}`")));
        }
    }
    let dim = header.len().saturating_sub(fixed.len());
    if dim == 0 {
        return Err(parse_err(file, 1, format!("no `{prefix}0` columns")));
    }
    for i in 0..dim {
        let expected = format!("{prefix}{i}");
        if header.get(fixed.len() + i) != Some(expected.as_str()) {
            return Err(parse_err(file, 1, format!("expected column `{expected}`")));
        }
    }
    Ok(dim)
}

fn parse_f64(file: &str, line: u64, field: &str) -> Result<f64, DatagenError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(file, line, format!("malformed number `{field}`")))?;
    if !v.is_finite() {
        return Err(parse_err(file, line, format!("non-finite number `{field}`")));
    }
    Ok(v)
}

/// Reads and validates `classes.csv` from `dir`.
pub fn load_class_table(dir: &Path) -> Result<ClassTable, DatagenError> {
    let file = CLASSES_FILE;
    let mut r = open(dir, file)?;
    let path = dir.join(file);
    let header = r.headers().map_err(|e| csv_err(&path, file, e))?.clone();
    let da = check_header(file, &header, &["class_id", "name", "is_seen"], "a_")?;
    let mut classes = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(&path, file, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != da + 3 {
            return Err(parse_err(file, line, format!("{} fields, expected {}", rec.len(), da + 3)));
        }
        let id: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(file, line, format!("malformed class id `{}`", &rec[0])))?;
        let is_seen = match rec[2].trim() {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(file, line, format!("is_seen must be 0 or 1, got `{other}`"))),
        };
        let semantic = (3..rec.len())
            .map(|i| parse_f64(file, line, &rec[i]))
            .collect::<Result<Vec<_>, _>>()?;
        classes.push(ClassInfo {
            id,
            name: rec[1].to_string(),
            is_seen,
            semantic,
        });
    }
    ClassTable::new(classes).map_err(|e| parse_err(file, 0, e.to_string()))
}

fn load_split(dir: &Path, kind: SplitKind, table: &ClassTable) -> Result<Split, DatagenError> {
    let file = kind.file_name();
    let path = dir.join(file);
    let mut r = open(dir, file)?;
    let header = r.headers().map_err(|e| csv_err(&path, file, e))?.clone();
    let dx = check_header(file, &header, &["class_id"], "x_")?;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(&path, file, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != dx + 1 {
            return Err(parse_err(file, line, format!("{} fields, expected {}", rec.len(), dx + 1)));
        }
        let class: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(file, line, format!("malformed class id `{}`", &rec[0])))?;
        if let Some(why) = label_violation(table, kind, class) {
            return Err(parse_err(file, line, format!("class {class}: {why}")));
        }
        for i in 1..rec.len() {
            let v = parse_f64(file, line, &rec[i])?;
            if v < 0.0 {
                return Err(parse_err(
                    file,
                    line,
                    format!("row {} column x_{} is negative ({v})", labels.len(), i - 1),
                ));
            }
            data.push(v);
        }
        labels.push(class);
    }
    let n = labels.len();
    let features = Tensor::new(n, dx, data).map_err(|e| parse_err(file, 0, e.to_string()))?;
    Ok(Split::new(labels, features))
}

/// Reads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<GzslDataset, DatagenError> {
    let table = load_class_table(dir)?;
    let train = load_split(dir, SplitKind::Train, &table)?;
    let test_seen = load_split(dir, SplitKind::TestSeen, &table)?;
    let test_unseen = load_split(dir, SplitKind::TestUnseen, &table)?;
    for (kind, split) in [(SplitKind::TestSeen, &test_seen), (SplitKind::TestUnseen, &test_unseen)] {
        if split.features.cols() != train.features.cols() {
            return Err(parse_err(
                kind.file_name(),
                1,
                format!(
                    "{} feature columns, train.csv has {}",
                    split.features.cols(),
                    train.features.cols()
                ),
            ));
        }
    }
    GzslDataset::new(table, train, test_seen, test_unseen)
}
