use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta, LinkSample, PathSample, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::estimators::ModelDocument;

pub const LINKS_FILE: &str = "links.csv";
pub const PATHS_FILE: &str = "paths.csv";
pub const META_FILE: &str = "meta.toml";

pub const LINK_HEADERS: [&str; 12] = [
    "link_id",
    "topology_id",
    "topology_size",
    "role",
    "lambda",
    "mu",
    "K",
    "capacity",
    "avg_packet_size",
    "observed_occupancy",
    "observed_delay",
    "observed_loss",
];

pub const PATH_HEADERS: [&str; 4] = [
    "flow_id",
    "topology_id",
    "link_ids",
    "observed_end_to_end_delay",
];

#[derive(Serialize, Deserialize)]
struct PathRow {
    flow_id: String,
    topology_id: String,
    link_ids: String,
    observed_end_to_end_delay: f64,
}

fn csv_err(file: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(file, source),
        kind => Error::Malformed {
            file: file.to_path_buf(),
            line,
            message: describe(&kind),
        },
    }
}

fn describe(kind: &csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::Utf8 { err, .. } => format!("invalid UTF-8: {err}"),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        csv::ErrorKind::Serialize(msg) => msg.clone(),
        other => format!("{other:?}"),
    }
}

fn write_table<T: Serialize>(file: &Path, headers: &[&str], rows: impl Iterator<Item = T>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(file)
        .map_err(|e| csv_err(file, e))?;
    wtr.write_record(headers).map_err(|e| csv_err(file, e))?;
    for row in rows {
        wtr.serialize(row).map_err(|e| csv_err(file, e))?;
    }
    wtr.flush().map_err(|e| Error::io(file, e))
}

fn read_table<T: for<'de> Deserialize<'de>>(file: &Path, headers: &[&str]) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(file)
        .map_err(|e| csv_err(file, e))?;
    let found = rdr.headers().map_err(|e| csv_err(file, e))?.clone();
    if found.iter().ne(headers.iter().copied()) {
        return Err(Error::Malformed {
            file: file.to_path_buf(),
            line: 1,
            message: format!(
                "header mismatch: expected {}, found {}",
                headers.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    rdr.deserialize()
        .map(|row| row.map_err(|e| csv_err(file, e)))
        .collect()
}

/// Write `dataset` into directory `dir` (created if needed).
pub fn save(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    dataset.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let meta_path = dir.join(META_FILE);
    let meta = toml::to_string(&dataset.meta)
        .map_err(|e| Error::invalid(format!("cannot encode metadata: {e}")))?;
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;

    write_table(&dir.join(LINKS_FILE), &LINK_HEADERS, dataset.links.iter())?;
    write_table(
        &dir.join(PATHS_FILE),
        &PATH_HEADERS,
        dataset.paths.iter().map(|p| PathRow {
            flow_id: p.flow_id.clone(),
            topology_id: p.topology_id.clone(),
            link_ids: p.link_ids.join(";"),
            observed_end_to_end_delay: p.observed_end_to_end_delay,
        }),
    )
}

/// Read a dataset directory written by [`save`].
pub fn load(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let malformed_meta = |message: String| Error::Malformed {
        file: meta_path.clone(),
        line: 0,
        message,
    };
    let table: toml::Table = toml::from_str(&text).map_err(|e| malformed_meta(e.to_string()))?;
    let version = table
        .get("schema_version")
        .and_then(|v| v.as_integer())
        .ok_or_else(|| malformed_meta("missing integer schema_version".into()))?;
    if version != SCHEMA_VERSION as i64 {
        return Err(Error::SchemaVersion {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: SCHEMA_VERSION,
        });
    }
    let meta: DatasetMeta = toml::from_str(&text).map_err(|e| malformed_meta(e.to_string()))?;

    let links: Vec<LinkSample> = read_table(&dir.join(LINKS_FILE), &LINK_HEADERS)?;
    let rows: Vec<PathRow> = read_table(&dir.join(PATHS_FILE), &PATH_HEADERS)?;
    let paths = rows
        .into_iter()
        .map(|r| PathSample {
            flow_id: r.flow_id,
            topology_id: r.topology_id,
            link_ids: if r.link_ids.is_empty() {
                Vec::new()
            } else {
                r.link_ids.split(';').map(str::to_string).collect()
            },
            observed_end_to_end_delay: r.observed_end_to_end_delay,
        })
        .collect();
    let dataset = Dataset { links, paths, meta };
    dataset.validate()?;
    Ok(dataset)
}

/// Write a fitted model as a TOML document.
pub fn save_model(doc: &ModelDocument, file: impl AsRef<Path>) -> Result<()> {
    let file = file.as_ref();
    fs::write(file, doc.to_toml()?).map_err(|e| Error::io(file, e))
}

pub fn load_model(file: impl AsRef<Path>) -> Result<ModelDocument> {
    let file = file.as_ref();
    let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    ModelDocument::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::super::{Role, Source};
    use super::*;

    fn sample_dataset() -> Dataset {
        let link = |id: &str, occ: f64| LinkSample {
            link_id: id.into(),
            topology_id: "t0".into(),
            topology_size: 2,
            role: Role::Sample,
            lambda: 0.1 + 0.2,
            mu: Some(1.0 / 3.0),
            k: 4,
            capacity: Some(1e6),
            avg_packet_size: None,
            observed_occupancy: occ,
            observed_delay: Some(1e-7),
            observed_loss: None,
        };
        Dataset {
            links: vec![link("a", 0.123_456_789_012_345_68), link("b", 3.999999999999999)],
            paths: vec![PathSample {
                flow_id: "f0".into(),
                topology_id: "t0".into(),
                link_ids: vec!["a".into(), "b".into()],
                observed_end_to_end_delay: 2.5e-3,
            }],
            meta: DatasetMeta::new(Source::Simulated, Some(u64::MAX)),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample_dataset();
        save(&d, dir.path()).unwrap();
        assert_eq!(load(dir.path()).unwrap(), d);
    }

    #[test]
    fn headers_are_canonical() {
        let dir = tempfile::tempdir().unwrap();
        save(&sample_dataset(), dir.path()).unwrap();
        let links = fs::read_to_string(dir.path().join(LINKS_FILE)).unwrap();
        assert_eq!(
            links.lines().next().unwrap(),
            "link_id,topology_id,topology_size,role,lambda,mu,K,capacity,avg_packet_size,observed_occupancy,observed_delay,observed_loss"
        );
        let paths = fs::read_to_string(dir.path().join(PATHS_FILE)).unwrap();
        assert_eq!(
            paths.lines().next().unwrap(),
            "flow_id,topology_id,link_ids,observed_end_to_end_delay"
        );
    }

    #[test]
    fn unknown_schema_version() {
        let dir = tempfile::tempdir().unwrap();
        save(&sample_dataset(), dir.path()).unwrap();
        let meta = dir.path().join(META_FILE);
        let text = fs::read_to_string(&meta).unwrap().replace("schema_version = 1", "schema_version = 7");
        fs::write(&meta, text).unwrap();
        let err = load(dir.path()).unwrap_err();
        assert!(matches!(err, Error::SchemaVersion { found: 7, expected: 1 }), "{err}");
        assert!(err.to_string().contains('7') && err.to_string().contains('1'));
    }

    #[test]
    fn occupancy_above_k_names_link() {
        let dir = tempfile::tempdir().unwrap();
        save(&sample_dataset(), dir.path()).unwrap();
        let file = dir.path().join(LINKS_FILE);
        let text = fs::read_to_string(&file).unwrap().replace("3.999999999999999", "4.5");
        fs::write(&file, text).unwrap();
        let err = load(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Integrity(ref m) if m.contains("\"b\"")), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        save(&sample_dataset(), dir.path()).unwrap();
        let file = dir.path().join(LINKS_FILE);
        let mut text = fs::read_to_string(&file).unwrap();
        text.push_str("c,t0,2,sample,oops,1,4,,,0.5,,\n");
        fs::write(&file, text).unwrap();
        match load(dir.path()).unwrap_err() {
            Error::Malformed { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn dangling_path_link() {
        let mut d = sample_dataset();
        d.paths[0].link_ids.push("zz".into());
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(save(&d, dir.path()), Err(Error::Integrity(_))));
    }
}
