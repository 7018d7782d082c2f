use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::{Dataset, DatasetMeta, LinkSample, PathSample, Role, Source};
use crate::error::{Error, Result};

/// Binds canonical field names (`lambda`, `K`, ...) to the column headers of
/// an external table. Unbound fields are looked up under their canonical name.
#[derive(Debug, Clone, Default)]
pub struct ColumnMap {
    pub bindings: BTreeMap<String, String>,
    pub delimiter: Option<u8>,
}

impl ColumnMap {
    pub fn bind(mut self, canonical: &str, source: &str) -> Self {
        self.bindings.insert(canonical.to_string(), source.to_string());
        self
    }

    fn column<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.bindings
            .get(canonical)
            .map(String::as_str)
            .unwrap_or(canonical)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ImportOutcome {
    pub dataset: Dataset,
    pub rejected: usize,
    /// First ten rejected rows.
    pub rejected_examples: Vec<RejectedRow>,
}

struct Table {
    headers: HashMap<String, usize>,
    records: Vec<(u64, csv::StringRecord)>,
}

fn read(file: &Path, delimiter: u8) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(file)
        .map_err(|e| Error::Malformed {
            file: file.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Malformed {
            file: file.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Malformed {
            file: file.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec));
    }
    Ok(Table { headers, records })
}

fn lookup(table: &Table, map: &ColumnMap, canonical: &str, required: bool) -> Result<Option<usize>> {
    match table.headers.get(map.column(canonical)) {
        Some(&i) => Ok(Some(i)),
        None if required => Err(Error::MissingColumn(canonical.to_string())),
        None => Ok(None),
    }
}

fn field(rec: &csv::StringRecord, col: Option<usize>) -> Option<&str> {
    col.and_then(|i| rec.get(i)).filter(|s| !s.is_empty())
}

fn number(rec: &csv::StringRecord, col: Option<usize>, name: &str) -> std::result::Result<Option<f64>, String> {
    field(rec, col)
        .map(|s| s.parse::<f64>().map_err(|_| format!("{name}: cannot parse {s:?}")))
        .transpose()
}

/// Read a flattened per-link table (one row per link, header row required).
///
/// Required fields: `lambda`, `K`, `observed_occupancy`, and either `mu` or
/// both `capacity` and `avg_packet_size`. Optional: `link_id`, `topology_id`,
/// `topology_size`, `observed_delay`, `observed_loss`. Rows that fail link
/// validation are skipped and reported.
pub fn import_flat(file: impl AsRef<Path>, map: &ColumnMap) -> Result<ImportOutcome> {
    let file = file.as_ref();
    let table = read(file, map.delimiter.unwrap_or(b','))?;
    let lambda = lookup(&table, map, "lambda", true)?;
    let k = lookup(&table, map, "K", true)?;
    let occupancy = lookup(&table, map, "observed_occupancy", true)?;
    let mu = lookup(&table, map, "mu", false)?;
    let capacity = lookup(&table, map, "capacity", false)?;
    let packet = lookup(&table, map, "avg_packet_size", false)?;
    if mu.is_none() && (capacity.is_none() || packet.is_none()) {
        return Err(Error::MissingColumn("mu".into()));
    }
    let link_id = lookup(&table, map, "link_id", false)?;
    let topology_id = lookup(&table, map, "topology_id", false)?;
    let topology_size = lookup(&table, map, "topology_size", false)?;
    let delay = lookup(&table, map, "observed_delay", false)?;
    let loss = lookup(&table, map, "observed_loss", false)?;

    let mut links = Vec::with_capacity(table.records.len());
    let mut rejected = 0usize;
    let mut examples = Vec::new();
    for (row, (line, rec)) in table.records.iter().enumerate() {
        let parsed = (|| -> std::result::Result<LinkSample, String> {
            let k_value = field(rec, k)
                .ok_or("K: missing")?
                .parse::<u32>()
                .map_err(|_| "K: not a nonnegative integer".to_string())?;
            let sample = LinkSample {
                link_id: field(rec, link_id)
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("row{row}")),
                topology_id: field(rec, topology_id).unwrap_or("imported").to_string(),
                topology_size: field(rec, topology_size)
                    .map(|s| s.parse::<u32>().map_err(|_| format!("topology_size: {s:?}")))
                    .transpose()?
                    .unwrap_or(0),
                role: Role::Sample,
                lambda: number(rec, lambda, "lambda")?.ok_or("lambda: missing")?,
                mu: number(rec, mu, "mu")?,
                k: k_value,
                capacity: number(rec, capacity, "capacity")?,
                avg_packet_size: number(rec, packet, "avg_packet_size")?,
                observed_occupancy: number(rec, occupancy, "observed_occupancy")?
                    .ok_or("observed_occupancy: missing")?,
                observed_delay: number(rec, delay, "observed_delay")?,
                observed_loss: number(rec, loss, "observed_loss")?,
            };
            sample.validate().map_err(|e| e.to_string())?;
            Ok(sample)
        })();
        match parsed {
            Ok(sample) => links.push(sample),
            Err(reason) => {
                rejected += 1;
                if examples.len() < 10 {
                    examples.push(RejectedRow { line: *line, reason });
                }
            }
        }
    }
    if links.is_empty() {
        return Err(Error::invalid(format!(
            "{}: no valid rows ({rejected} rejected)",
            file.display()
        )));
    }
    let dataset = Dataset {
        links,
        paths: Vec::new(),
        meta: DatasetMeta::new(Source::Imported, None),
    };
    dataset.validate()?;
    Ok(ImportOutcome {
        dataset,
        rejected,
        rejected_examples: examples,
    })
}

/// Attach a flattened per-flow table (`flow_id`, `link_ids` separated by `;`,
/// `observed_end_to_end_delay`, optional `topology_id`) to an imported dataset.
/// Flows that reference links missing from `dataset` are rejected.
pub fn import_flat_paths(file: impl AsRef<Path>, map: &ColumnMap, dataset: &mut Dataset) -> Result<usize> {
    let file = file.as_ref();
    let table = read(file, map.delimiter.unwrap_or(b','))?;
    let flow_id = lookup(&table, map, "flow_id", true)?;
    let link_ids = lookup(&table, map, "link_ids", true)?;
    let delay = lookup(&table, map, "observed_end_to_end_delay", true)?;
    let topology_id = lookup(&table, map, "topology_id", false)?;
    let known: std::collections::HashSet<String> =
        dataset.links.iter().map(|l| l.link_id.clone()).collect();
    let mut rejected = 0;
    for (_, rec) in &table.records {
        let ids: Vec<String> = field(rec, link_ids)
            .map(|s| s.split(';').map(|x| x.trim().to_string()).collect())
            .unwrap_or_default();
        let d = number(rec, delay, "observed_end_to_end_delay").ok().flatten();
        match (field(rec, flow_id), d) {
            (Some(id), Some(d)) if !ids.is_empty() && ids.iter().all(|l| known.contains(l)) && d >= 0.0 => {
                dataset.paths.push(PathSample {
                    flow_id: id.to_string(),
                    topology_id: field(rec, topology_id).unwrap_or("imported").to_string(),
                    link_ids: ids,
                    observed_end_to_end_delay: d,
                })
            }
            _ => rejected += 1,
        }
    }
    dataset.validate()?;
    Ok(rejected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn canonical_headers() {
        let f = write("link_id,lambda,mu,K,observed_occupancy\na,0.5,1,8,0.9\nb,1.2,1,8,5.1\n");
        let out = import_flat(f.path(), &ColumnMap::default()).unwrap();
        assert_eq!(out.dataset.links.len(), 2);
        assert_eq!(out.dataset.meta.source, Source::Imported);
        assert_eq!(out.rejected, 0);
    }

    #[test]
    fn missing_k_is_named() {
        let f = write("lambda,mu,observed_occupancy\n0.5,1,0.9\n");
        let err = import_flat(f.path(), &ColumnMap::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "K"), "{err}");
        assert!(err.to_string().contains("\"K\""));
    }

    #[test]
    fn bad_rows_are_reported() {
        let f = write("lambda,mu,K,observed_occupancy\n0.5,0,8,0.9\n0.5,1,8,0.9\n0.5,1,8,9.5\n");
        let out = import_flat(f.path(), &ColumnMap::default()).unwrap();
        assert_eq!(out.dataset.links.len(), 1);
        assert_eq!(out.rejected, 2);
        assert_eq!(out.rejected_examples[0].line, 2);
        assert_eq!(out.rejected_examples[1].line, 4);
    }

    #[test]
    fn mapped_columns_and_capacity() {
        let f = write("id;load;bw;pkt;buf;occ\nx;100;1e6;1e4;32;0.7\n");
        let map = ColumnMap {
            delimiter: Some(b';'),
            ..ColumnMap::default()
        }
        .bind("link_id", "id")
        .bind("lambda", "load")
        .bind("capacity", "bw")
        .bind("avg_packet_size", "pkt")
        .bind("K", "buf")
        .bind("observed_occupancy", "occ");
        let out = import_flat(f.path(), &map).unwrap();
        let link = &out.dataset.links[0];
        assert_eq!(link.traffic().service_rate().unwrap(), 100.0);
        assert_eq!(link.link_id, "x");
    }

    #[test]
    fn zero_valid_rows() {
        let f = write("lambda,mu,K,observed_occupancy\n0.5,0,8,0.9\n");
        assert!(import_flat(f.path(), &ColumnMap::default()).is_err());
    }

    #[test]
    fn paths_attach() {
        let f = write("link_id,lambda,mu,K,observed_occupancy\na,0.5,1,8,0.9\nb,0.5,1,8,0.9\n");
        let mut d = import_flat(f.path(), &ColumnMap::default()).unwrap().dataset;
        let p = write("flow_id,link_ids,observed_end_to_end_delay\nf,a;b,2.0\ng,a;zz,1.0\n");
        let rejected = import_flat_paths(p.path(), &ColumnMap::default(), &mut d).unwrap();
        assert_eq!(rejected, 1);
        assert_eq!(d.paths[0].link_ids, vec!["a", "b"]);
    }
}
