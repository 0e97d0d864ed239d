use std::fmt::Write;

pub const CSV_HEADER: &str = "run_id,sigma,ng,generator,classifier,loss,acc_unseen,acc_seen,acc_h";

/// One evaluated run, accuracies as fractions.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub run_id: String,
    pub sigma: f64,
    pub ng: usize,
    pub generator: String,
    pub classifier: String,
    pub loss: String,
    pub acc_unseen: f64,
    pub acc_seen: f64,
    pub acc_h: f64,
}

impl ReportRow {
    /// CSV line without trailing newline, accuracies to 4 decimals.
    pub fn to_csv_line(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{:.4},{:.4},{:.4}",
            self.run_id,
            self.sigma,
            self.ng,
            self.generator,
            self.classifier,
            self.loss,
            self.acc_unseen,
            self.acc_seen,
            self.acc_h
        )
        .expect("write to string");
        s
    }
}
