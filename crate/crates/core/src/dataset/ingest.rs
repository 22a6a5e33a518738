use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of malformed data lines above which a file is rejected.
const MAX_MALFORMED_SHARE: f64 = 0.01;
const REPORTED_LINES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCheckIn {
    pub user: String,
    pub poi: String,
    pub lat: f64,
    pub lon: f64,
    pub when: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalformedLine {
    pub file: PathBuf,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub checkin_lines: usize,
    pub malformed: Vec<MalformedLine>,
    pub duplicate_social_edges: usize,
}

/// Everything parsed from the input files, still keyed by the original identifiers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawEvents {
    pub checkins: Vec<RawCheckIn>,
    /// Undirected, deduplicated, each edge stored once.
    pub social: Vec<(String, String)>,
    /// `None` when no category file was ingested.
    pub categories: Option<Vec<(String, String)>>,
    pub report: IngestReport,
}

impl RawEvents {
    pub fn from_checkins(checkins: Vec<RawCheckIn>) -> Self {
        RawEvents {
            checkins,
            ..Default::default()
        }
    }
}

/// Parses the check-in file plus the optional social and category files.
pub fn ingest(
    checkin_file: &Path,
    social_file: Option<&Path>,
    category_file: Option<&Path>,
) -> Result<RawEvents> {
    let mut report = IngestReport::default();

    let (checkins, lines) = parse_file(checkin_file, 5, &mut report, parse_checkin)?;
    report.checkin_lines = lines;

    let mut social = Vec::new();
    if let Some(path) = social_file {
        let (edges, _) = parse_file(path, 2, &mut report, parse_edge)?;
        let mut seen = HashSet::new();
        for (a, b) in edges {
            let key = if a <= b { (a, b) } else { (b, a) };
            if seen.insert(key.clone()) {
                social.push(key);
            } else {
                report.duplicate_social_edges += 1;
            }
        }
        if report.duplicate_social_edges > 0 {
            warn!(
                "{}: {} duplicate social edges dropped",
                path.display(),
                report.duplicate_social_edges
            );
        }
    }

    let categories = match category_file {
        Some(path) => {
            let (mut pairs, _) = parse_file(path, 2, &mut report, parse_category)?;
            let mut seen = HashSet::new();
            pairs.retain(|p| seen.insert(p.clone()));
            Some(pairs)
        }
        None => None,
    };

    Ok(RawEvents {
        checkins,
        social,
        categories,
        report,
    })
}

fn detect_delimiter(content: &str) -> char {
    let first = content
        .lines()
        .find(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    if first.contains('\t') {
        '\t'
    } else {
        ','
    }
}

/// Returns parsed records and the number of data lines seen (blank and `#` lines excluded).
fn parse_file<T>(
    path: &Path,
    arity: usize,
    report: &mut IngestReport,
    parse: fn(&[&str]) -> std::result::Result<T, String>,
) -> Result<(Vec<T>, usize)> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let delim = detect_delimiter(&content);
    let mut out = Vec::new();
    let mut bad = Vec::new();
    let mut data_lines = 0;
    let mut first = true;

    for (no, line) in content.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.splitn(arity, delim).map(str::trim).collect();
        if first {
            first = false;
            if is_header(&fields) {
                continue;
            }
        }
        data_lines += 1;
        let parsed = if fields.len() == arity {
            parse(&fields)
        } else {
            Err(format!("expected {arity} fields, found {}", fields.len()))
        };
        match parsed {
            Ok(v) => out.push(v),
            Err(reason) => bad.push(MalformedLine {
                file: path.to_path_buf(),
                line: no + 1,
                reason,
            }),
        }
    }

    if !bad.is_empty() {
        warn!("{}: {} malformed lines", path.display(), bad.len());
        if bad.len() as f64 > MAX_MALFORMED_SHARE * data_lines as f64 {
            return Err(Error::TooManyMalformed {
                path: path.to_path_buf(),
                malformed: bad.len(),
                total: data_lines,
                lines: bad.iter().take(REPORTED_LINES).map(|m| m.line).collect(),
            });
        }
    }
    report.malformed.extend(bad);
    Ok((out, data_lines))
}

fn is_header(fields: &[&str]) -> bool {
    let known = [
        "user", "user_id", "poi", "poi_id", "latitude", "lat", "longitude", "lon", "lng",
        "timestamp", "unix_timestamp", "time", "category", "category_name", "friend",
        "friend_id",
    ];
    fields
        .iter()
        .all(|f| known.contains(&f.to_ascii_lowercase().as_str()))
}

fn parse_checkin(f: &[&str]) -> std::result::Result<RawCheckIn, String> {
    let user = non_empty(f[0], "user")?;
    let poi = non_empty(f[1], "poi")?;
    let lat: f64 = f[2].parse().map_err(|_| format!("bad latitude {:?}", f[2]))?;
    let lon: f64 = f[3].parse().map_err(|_| format!("bad longitude {:?}", f[3]))?;
    let when: i64 = f[4].parse().map_err(|_| format!("bad timestamp {:?}", f[4]))?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err(format!("latitude {lat} out of range"));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(format!("longitude {lon} out of range"));
    }
    if when <= 0 {
        return Err(format!("timestamp {when} not positive"));
    }
    Ok(RawCheckIn {
        user,
        poi,
        lat,
        lon,
        when,
    })
}

fn parse_edge(f: &[&str]) -> std::result::Result<(String, String), String> {
    let a = non_empty(f[0], "user")?;
    let b = non_empty(f[1], "user")?;
    if a == b {
        return Err("self-loop".into());
    }
    Ok((a, b))
}

fn parse_category(f: &[&str]) -> std::result::Result<(String, String), String> {
    Ok((non_empty(f[0], "poi")?, non_empty(f[1], "category")?))
}

fn non_empty(s: &str, what: &str) -> std::result::Result<String, String> {
    if s.is_empty() {
        Err(format!("empty {what} identifier"))
    } else {
        Ok(s.to_string())
    }
}
