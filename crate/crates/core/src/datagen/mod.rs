//! Class tables, GZSL datasets, seeded synthetic worlds and the CSV
//! interchange format.

mod discrete;
mod io;
mod synth;

pub use discrete::{make_discrete_world, DiscreteWorld};
pub use io::{load_class_table, load_dataset, save_dataset, CLASSES_FILE};
pub use synth::{bias_field, synthesize, BiasField, GroundTruth, SyntheticSpec};

use crate::numgrad::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum DatagenError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid class table: {0}")]
    ClassTable(String),
    #[error("{split}: row {row} has label {class}: {kind}")]
    SplitViolation {
        split: SplitKind,
        row: usize,
        class: usize,
        kind: &'static str,
    },
    #[error("{split}: row {row} column {col} is negative ({value})")]
    NegativeFeature {
        split: SplitKind,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("{split}: {found} feature columns, expected {expected}")]
    FeatureDim {
        split: SplitKind,
        expected: usize,
        found: usize,
    },
    #[error("{split}: {labels} labels for {rows} feature rows")]
    LabelCount {
        split: SplitKind,
        labels: usize,
        rows: usize,
    },
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: u64, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid discrete world: {0}")]
    World(String),
}

/// One class: contiguous id, display name, seen flag and semantic vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassInfo {
    pub id: usize,
    pub name: String,
    pub is_seen: bool,
    pub semantic: Vec<f64>,
}

/// The label space `Y^s ∪ Y^u` with its semantic descriptors.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassTable {
    classes: Vec<ClassInfo>,
}

impl ClassTable {
    pub fn new(classes: Vec<ClassInfo>) -> Result<Self, DatagenError> {
        let bad = |m: String| Err(DatagenError::ClassTable(m));
        let Some(first) = classes.first() else {
            return bad("no classes".into());
        };
        let dim = first.semantic.len();
        if dim == 0 {
            return bad("semantic dimension must be at least 1".into());
        }
        for (i, c) in classes.iter().enumerate() {
            if c.id != i {
                return bad(format!("class ids must be contiguous from 0, found {} at position {i}", c.id));
            }
            if c.semantic.len() != dim {
                return bad(format!("class {i} has semantic dimension {}, expected {dim}", c.semantic.len()));
            }
            if c.semantic.iter().any(|v| !v.is_finite()) {
                return bad(format!("class {i} has a non-finite semantic value"));
            }
            if c.name.is_empty() || c.name.contains([',', '"', '\n', '\r']) {
                return bad(format!("class {i} name {:?} is empty or contains CSV metacharacters", c.name));
            }
        }
        if !classes.iter().any(|c| c.is_seen) {
            return bad("no seen classes".into());
        }
        if !classes.iter().any(|c| !c.is_seen) {
            return bad("no unseen classes".into());
        }
        Ok(Self { classes })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[ClassInfo] {
        &self.classes
    }

    pub fn get(&self, id: usize) -> Option<&ClassInfo> {
        self.classes.get(id)
    }

    pub fn is_seen(&self, id: usize) -> bool {
        self.classes[id].is_seen
    }

    pub fn seen_flags(&self) -> Vec<bool> {
        self.classes.iter().map(|c| c.is_seen).collect()
    }

    pub fn seen_ids(&self) -> Vec<usize> {
        self.classes.iter().filter(|c| c.is_seen).map(|c| c.id).collect()
    }

    pub fn unseen_ids(&self) -> Vec<usize> {
        self.classes.iter().filter(|c| !c.is_seen).map(|c| c.id).collect()
    }

    pub fn semantic_dim(&self) -> usize {
        self.classes[0].semantic.len()
    }

    /// `K × d_a` matrix of semantic vectors in id order.
    pub fn semantics(&self) -> Tensor {
        let rows: Vec<Vec<f64>> = self.classes.iter().map(|c| c.semantic.clone()).collect();
        Tensor::from_rows(&rows).expect("validated table")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitKind {
    Train,
    TestSeen,
    TestUnseen,
}

impl SplitKind {
    pub const ALL: [SplitKind; 3] = [SplitKind::Train, SplitKind::TestSeen, SplitKind::TestUnseen];

    pub fn file_name(self) -> &'static str {
        match self {
            SplitKind::Train => "train.csv",
            SplitKind::TestSeen => "test_seen.csv",
            SplitKind::TestUnseen => "test_unseen.csv",
        }
    }
}

impl std::fmt::Display for SplitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.file_name())
    }
}

/// Labelled feature rows of one split.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub labels: Vec<usize>,
    pub features: Tensor,
}

impl Split {
    pub fn new(labels: Vec<usize>, features: Tensor) -> Self {
        Self { labels, features }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            labels: Vec::new(),
            features: Tensor::zeros(0, dim),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Stable sort by class id, keeping insertion order within a class.
    fn canonicalize(&mut self) {
        if self.labels.windows(2).all(|w| w[0] <= w[1]) {
            return;
        }
        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by_key(|&i| self.labels[i]);
        self.features = self.features.select_rows(&order);
        self.labels = order.iter().map(|&i| self.labels[i]).collect();
    }
}

/// Why `class` may not appear in a split of kind `kind`, if it may not.
pub(crate) fn label_violation(table: &ClassTable, kind: SplitKind, class: usize) -> Option<&'static str> {
    let Some(info) = table.get(class) else {
        return Some("unknown class id");
    };
    match kind {
        SplitKind::Train | SplitKind::TestSeen if !info.is_seen => Some("seen-split violation"),
        SplitKind::TestUnseen if info.is_seen => Some("unseen-split violation"),
        _ => None,
    }
}

/// Seen-class training rows and both test splits over one class table.
#[derive(Clone, Debug, PartialEq)]
pub struct GzslDataset {
    classes: ClassTable,
    train: Split,
    test_seen: Split,
    test_unseen: Split,
}

impl GzslDataset {
    /// Validates the split contracts and feature nonnegativity, then puts
    /// every split in canonical row order.
    pub fn new(
        classes: ClassTable,
        train: Split,
        test_seen: Split,
        test_unseen: Split,
    ) -> Result<Self, DatagenError> {
        let dim = train.features.cols();
        let mut ds = Self {
            classes,
            train,
            test_seen,
            test_unseen,
        };
        for kind in SplitKind::ALL {
            let split = ds.split(kind);
            if split.features.cols() != dim {
                return Err(DatagenError::FeatureDim {
                    split: kind,
                    expected: dim,
                    found: split.features.cols(),
                });
            }
            if split.labels.len() != split.features.rows() {
                return Err(DatagenError::LabelCount {
                    split: kind,
                    labels: split.labels.len(),
                    rows: split.features.rows(),
                });
            }
            for (row, &class) in split.labels.iter().enumerate() {
                ds.check_label(kind, row, class)?;
            }
            for (row, values) in split.features.iter_rows().enumerate() {
                if let Some(col) = values.iter().position(|v| v.is_nan() || *v < 0.0 || !v.is_finite()) {
                    return Err(DatagenError::NegativeFeature {
                        split: kind,
                        row,
                        col,
                        value: values[col],
                    });
                }
            }
        }
        if dim < 1 {
            return Err(DatagenError::FeatureDim {
                split: SplitKind::Train,
                expected: 1,
                found: 0,
            });
        }
        ds.train.canonicalize();
        ds.test_seen.canonicalize();
        ds.test_unseen.canonicalize();
        Ok(ds)
    }

    fn check_label(&self, kind: SplitKind, row: usize, class: usize) -> Result<(), DatagenError> {
        match label_violation(&self.classes, kind, class) {
            Some(kind_msg) => Err(DatagenError::SplitViolation {
                split: kind,
                row,
                class,
                kind: kind_msg,
            }),
            None => Ok(()),
        }
    }

    pub fn classes(&self) -> &ClassTable {
        &self.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.train.features.cols()
    }

    pub fn train(&self) -> &Split {
        &self.train
    }

    pub fn test_seen(&self) -> &Split {
        &self.test_seen
    }

    pub fn test_unseen(&self) -> &Split {
        &self.test_unseen
    }

    pub fn split(&self, kind: SplitKind) -> &Split {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::TestSeen => &self.test_seen,
            SplitKind::TestUnseen => &self.test_unseen,
        }
    }

    /// Row count per class id in the given split.
    pub fn class_counts(&self, kind: SplitKind) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &l in &self.split(kind).labels {
            counts[l] += 1;
        }
        counts
    }

    /// Empirical per-class mean of train features (`None` for classes with
    /// no training rows).
    pub fn train_class_means(&self) -> Vec<Option<Vec<f64>>> {
        let dim = self.feature_dim();
        let mut sums = vec![vec![0.0; dim]; self.classes.len()];
        let counts = self.class_counts(SplitKind::Train);
        for (row, &l) in self.train.features.iter_rows().zip(&self.train.labels) {
            for (s, v) in sums[l].iter_mut().zip(row) {
                *s += v;
            }
        }
        sums.into_iter()
            .zip(counts)
            .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table() -> ClassTable {
        ClassTable::new(vec![
            ClassInfo { id: 0, name: "a".into(), is_seen: true, semantic: vec![1.0, 0.0] },
            ClassInfo { id: 1, name: "b".into(), is_seen: false, semantic: vec![0.0, 1.0] },
            ClassInfo { id: 2, name: "c".into(), is_seen: true, semantic: vec![1.0, 1.0] },
        ])
        .unwrap()
    }

    fn split(labels: &[usize], rows: &[[f64; 2]]) -> Split {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        Split::new(labels.to_vec(), Tensor::from_rows(&rows).unwrap())
    }

    #[test]
    fn class_table_rejects_bad_tables() {
        let mut c = table().classes().to_vec();
        c[1].is_seen = true;
        assert!(ClassTable::new(c).is_err());
        let mut c = table().classes().to_vec();
        c[2].id = 5;
        assert!(ClassTable::new(c).is_err());
        let mut c = table().classes().to_vec();
        c[2].semantic.push(0.0);
        assert!(ClassTable::new(c).is_err());
        let mut c = table().classes().to_vec();
        c[0].name = "x,y".into();
        assert!(ClassTable::new(c).is_err());
        assert!(ClassTable::new(vec![]).is_err());
    }

    #[test]
    fn dataset_enforces_split_contracts() {
        let ok = GzslDataset::new(
            table(),
            split(&[2, 0, 2], &[[1., 0.], [2., 0.], [3., 0.]]),
            split(&[0], &[[1., 1.]]),
            split(&[1], &[[0., 1.]]),
        )
        .unwrap();
        // canonical order: stable by class id
        assert_eq!(ok.train().labels, vec![0, 2, 2]);
        assert_eq!(ok.train().features.data(), &[2., 0., 1., 0., 3., 0.]);

        let err = GzslDataset::new(
            table(),
            split(&[1], &[[1., 0.]]),
            split(&[0], &[[1., 1.]]),
            split(&[1], &[[0., 1.]]),
        )
        .unwrap_err();
        assert!(err.to_string().contains("seen-split violation"));

        let err = GzslDataset::new(
            table(),
            split(&[0], &[[1., 0.]]),
            split(&[0], &[[1., 1.]]),
            split(&[2], &[[0., 1.]]),
        )
        .unwrap_err();
        assert!(err.to_string().contains("unseen-split violation"));

        let err = GzslDataset::new(
            table(),
            split(&[0], &[[1., -0.5]]),
            split(&[0], &[[1., 1.]]),
            split(&[1], &[[0., 1.]]),
        )
        .unwrap_err();
        assert!(matches!(err, DatagenError::NegativeFeature { row: 0, col: 1, .. }));
    }
}
