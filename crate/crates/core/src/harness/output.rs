use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ExperimentResult;

/// SHA-256 of the compact JSON encoding of `config`, in hex.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes to JSON");
    hex::encode(Sha256::digest(&bytes))
}

/// Comment lines written above every CSV table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvMeta {
    pub seed: u64,
    pub config_hash: String,
    /// Unix time of generation; `None` keeps output byte-reproducible.
    pub generated_unix: Option<u64>,
}

impl CsvMeta {
    pub fn new<T: Serialize>(seed: u64, config: &T, timestamp: bool) -> Self {
        let generated_unix = timestamp.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
        Self { seed, config_hash: config_hash(config), generated_unix }
    }

    pub fn write_header<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# config_hash={}", self.config_hash)?;
        if let Some(t) = self.generated_unix {
            writeln!(out, "# generated_unix={t}")?;
        }
        Ok(())
    }

    /// Writes the comment header, `header` and each row.
    pub fn write_table<W: Write>(&self, out: &mut W, header: &str, rows: &[String]) -> io::Result<()> {
        self.write_header(out)?;
        writeln!(out, "{header}")?;
        for row in rows {
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

impl ExperimentResult {
    pub const CSV_HEADER: &'static str = "scenario,n,level,replicates,exceedances,rate,wilson_low,wilson_high";

    /// One row per cutoff level.
    pub fn csv_rows(&self) -> Vec<String> {
        self.levels
            .iter()
            .map(|l| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    self.spec.scenario.name,
                    self.spec.config.n,
                    l.level,
                    l.estimate.replicates,
                    l.count,
                    l.estimate.rejection_rate,
                    l.estimate.wilson_low,
                    l.estimate.wilson_high
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&serde_json::json!({"n": 4096, "s": 2.0}));
        assert_eq!(a.len(), 64);
        assert_eq!(a, config_hash(&serde_json::json!({"n": 4096, "s": 2.0})));
        assert_ne!(a, config_hash(&serde_json::json!({"n": 4097, "s": 2.0})));
    }

    #[test]
    fn header_without_timestamp() {
        let meta = CsvMeta { seed: 7, config_hash: "abc".into(), generated_unix: None };
        let mut buf = Vec::new();
        meta.write_table(&mut buf, "x,y", &["1,2".to_string()]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# seed=7\n# config_hash=abc\nx,y\n1,2\n");
    }
}
