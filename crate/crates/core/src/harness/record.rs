//! Per-episode run records and their CSV form.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Mutex;

use crate::error::{EbeError, Result};

pub const CSV_HEADER: &str = "seed,strategy,episode,phase,reward,steps,h0,sq_error,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    /// Recorded when a cell aborts; metrics are empty.
    Failed,
    Test,
    Train,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Failed => "failed",
            Self::Test => "test",
            Self::Train => "train",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "failed" => Some(Self::Failed),
            "test" => Some(Self::Test),
            "train" => Some(Self::Train),
            _ => None,
        }
    }
}

/// One CSV row. Test rows average over the checkpoint's evaluation episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub seed: u64,
    pub strategy: String,
    pub episode: u64,
    pub phase: Phase,
    pub reward: Option<f64>,
    pub steps: Option<f64>,
    pub h0: Option<f64>,
    pub sq_error: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl RunRow {
    pub fn metric(&self, name: &str) -> Result<Option<f64>> {
        Ok(match name {
            "reward" => self.reward,
            "steps" => self.steps,
            "h0" => self.h0,
            "sq_error" => self.sq_error,
            "wall_ms" => self.wall_ms,
            other => return Err(EbeError::UnknownMetric(other.to_string())),
        })
    }

    fn sort_key(&self) -> (&str, u64, Phase, u64) {
        (&self.strategy, self.seed, self.phase, self.episode)
    }
}

/// Metric names accepted by [`RunRow::metric`].
pub const METRICS: &[&str] = &["reward", "steps", "h0", "sq_error", "wall_ms"];

/// Thread-safe append-only collector for rows from concurrent cells.
#[derive(Debug, Default)]
pub struct RecordSink {
    rows: Mutex<Vec<RunRow>>,
}

impl RecordSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn extend(&self, rows: impl IntoIterator<Item = RunRow>) {
        self.rows.lock().expect("record sink poisoned").extend(rows);
    }

    pub fn into_rows(self) -> Vec<RunRow> {
        self.rows.into_inner().expect("record sink poisoned")
    }
}

fn field(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        // Shortest representation that parses back to the same value.
        write!(out, "{v}").expect("writing to a string");
    }
}

/// CSV text for `rows`, sorted by (strategy, seed, phase, episode).
pub fn csv_string(rows: &[RunRow]) -> Result<String> {
    let mut sorted: Vec<&RunRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in sorted {
        for v in [r.reward, r.steps, r.h0, r.sq_error, r.wall_ms].into_iter().flatten() {
            if !v.is_finite() {
                return Err(EbeError::NonFinite(format!("metric in row {} of {}", r.episode, r.strategy)));
            }
        }
        if r.strategy.contains([',', '"', '\n', '\r']) {
            return Err(EbeError::Csv(format!("strategy name {:?} cannot be written unquoted", r.strategy)));
        }
        write!(out, "{},{},{},{},", r.seed, r.strategy, r.episode, r.phase.as_str()).expect("writing to a string");
        field(&mut out, r.reward);
        out.push(',');
        field(&mut out, r.steps);
        out.push(',');
        field(&mut out, r.h0);
        out.push(',');
        field(&mut out, r.sq_error);
        out.push(',');
        field(&mut out, r.wall_ms);
        out.push('\n');
    }
    Ok(out)
}

/// Writes `contents` through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| EbeError::Csv(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        EbeError::Io(e)
    })
}

pub fn write_csv(rows: &[RunRow], path: &Path) -> Result<()> {
    write_atomic(path, csv_string(rows)?.as_bytes())
}

fn parse_opt(s: &str, line: u64, name: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| EbeError::Csv(format!("line {line}: field {name}: {e}")))
}

pub fn parse_csv(text: &str) -> Result<Vec<RunRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| EbeError::Csv(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(EbeError::Csv(format!("unexpected header; expected {CSV_HEADER}")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| EbeError::Csv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |i: usize| rec.get(i).unwrap_or("");
        let int = |i: usize, name: &str| {
            get(i).parse::<u64>().map_err(|e| EbeError::Csv(format!("line {line}: field {name}: {e}")))
        };
        rows.push(RunRow {
            seed: int(0, "seed")?,
            strategy: get(1).to_string(),
            episode: int(2, "episode")?,
            phase: Phase::parse(get(3)).ok_or_else(|| EbeError::Csv(format!("line {line}: unknown phase {:?}", get(3))))?,
            reward: parse_opt(get(4), line, "reward")?,
            steps: parse_opt(get(5), line, "steps")?,
            h0: parse_opt(get(6), line, "h0")?,
            sq_error: parse_opt(get(7), line, "sq_error")?,
            wall_ms: parse_opt(get(8), line, "wall_ms")?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<RunRow>> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text).map_err(|e| match e {
        EbeError::Csv(m) => EbeError::Csv(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(strategy: &str, seed: u64, episode: u64, phase: Phase) -> RunRow {
        RunRow {
            seed,
            strategy: strategy.into(),
            episode,
            phase,
            reward: Some(1.0),
            steps: Some(10.0),
            h0: Some(0.5),
            sq_error: None,
            wall_ms: None,
        }
    }

    #[test]
    fn empty_is_header_only() {
        assert_eq!(csv_string(&[]).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn one_row_two_lines() {
        let s = csv_string(&[row("ebe", 0, 0, Phase::Train)]).unwrap();
        assert_eq!(s.lines().count(), 2);
        assert_eq!(s.lines().nth(1).unwrap(), "0,ebe,0,train,1,10,0.5,,");
        assert!(!s.contains('\r'));
    }

    #[test]
    fn rows_are_sorted() {
        let rows = vec![
            row("z", 0, 1, Phase::Train),
            row("a", 1, 0, Phase::Train),
            row("a", 0, 1, Phase::Train),
            row("a", 0, 0, Phase::Test),
            row("a", 0, 0, Phase::Train),
        ];
        let parsed = parse_csv(&csv_string(&rows).unwrap()).unwrap();
        let keys: Vec<_> = parsed.iter().map(|r| (r.strategy.as_str(), r.seed, r.phase, r.episode)).collect();
        assert_eq!(
            keys,
            vec![("a", 0, Phase::Test, 0), ("a", 0, Phase::Train, 0), ("a", 0, Phase::Train, 1), ("a", 1, Phase::Train, 0), ("z", 0, Phase::Train, 1)]
        );
    }

    #[test]
    fn round_trip_is_exact() {
        let mut r = row("ebe", 3, 7, Phase::Test);
        r.reward = Some(0.1 + 0.2);
        r.h0 = Some(std::f64::consts::PI / 7.0);
        r.sq_error = Some(1.2345678901234567e-300);
        r.wall_ms = Some(12.5);
        let parsed = parse_csv(&csv_string(std::slice::from_ref(&r)).unwrap()).unwrap();
        assert_eq!(parsed, vec![r]);
    }

    #[test]
    fn rejects_non_finite_and_malformed() {
        let mut r = row("ebe", 0, 0, Phase::Train);
        r.reward = Some(f64::NAN);
        assert!(csv_string(&[r]).is_err());
        assert!(parse_csv("a,b\n1,2\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n0,ebe,x,train,,,,,\n")).is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n0,ebe,1,dance,,,,,\n")).is_err());
    }

    #[test]
    fn unknown_metric_errors() {
        assert!(matches!(row("a", 0, 0, Phase::Train).metric("speed"), Err(EbeError::UnknownMetric(_))));
    }
}
