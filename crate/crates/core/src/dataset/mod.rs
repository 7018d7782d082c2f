//! Labeled link and path records, and their on-disk layout.
//!
//! A dataset directory holds three files:
//!
//! ```text
//! links.csv   link_id,topology_id,topology_size,role,lambda,mu,K,capacity,avg_packet_size,
//!             observed_occupancy,observed_delay,observed_loss
//! paths.csv   flow_id,topology_id,link_ids,observed_end_to_end_delay
//! meta.toml   schema_version, source, seed, generator
//! ```
//!
//! Units are fixed: rates in packets/second, capacity in bits/second, packet
//! sizes in bits, delays in seconds, occupancy in packets. `link_ids` is a
//! `;`-separated list in traversal order. Optional numeric fields are empty.

mod import;
mod io;
mod split;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queue::LinkTraffic;

pub use import::{import_flat, import_flat_paths, ColumnMap, ImportOutcome, RejectedRow};
pub use io::{load, load_model, save, save_model, LINKS_FILE, LINK_HEADERS, META_FILE, PATHS_FILE, PATH_HEADERS};
pub use split::{split, SplitMode};

/// On-disk schema version written to `meta.toml`.
pub const SCHEMA_VERSION: u32 = 1;

/// Whether a link row is a labeled sample of this dataset or only carried so
/// that the dataset's paths can be resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sample,
    Context,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub link_id: String,
    pub topology_id: String,
    /// Number of links in the topology this link was observed in.
    pub topology_size: u32,
    pub role: Role,
    pub lambda: f64,
    pub mu: Option<f64>,
    #[serde(rename = "K")]
    pub k: u32,
    pub capacity: Option<f64>,
    pub avg_packet_size: Option<f64>,
    /// Mean packets in system.
    pub observed_occupancy: f64,
    pub observed_delay: Option<f64>,
    pub observed_loss: Option<f64>,
}

impl LinkSample {
    pub fn traffic(&self) -> LinkTraffic {
        LinkTraffic {
            lambda: self.lambda,
            mu: self.mu,
            k: self.k,
            capacity: self.capacity,
            avg_packet_size: self.avg_packet_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.traffic()
            .validate()
            .map_err(|e| Error::Integrity(format!("link {:?}: {e}", self.link_id)))?;
        let labels = [
            Some(self.observed_occupancy),
            self.observed_delay,
            self.observed_loss,
        ];
        if labels.iter().flatten().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Integrity(format!(
                "link {:?}: labels must be finite and nonnegative",
                self.link_id
            )));
        }
        if self.observed_occupancy > self.k as f64 {
            return Err(Error::Integrity(format!(
                "link {:?}: observed_occupancy {} exceeds K = {}",
                self.link_id, self.observed_occupancy, self.k
            )));
        }
        if matches!(self.observed_loss, Some(l) if l > 1.0) {
            return Err(Error::Integrity(format!(
                "link {:?}: observed_loss above 1",
                self.link_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub flow_id: String,
    pub topology_id: String,
    pub link_ids: Vec<String>,
    pub observed_end_to_end_delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Simulated,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub source: Source,
    /// Seed of the generator run; stored as a string in `meta.toml` since TOML
    /// integers are signed.
    #[serde(default, with = "seed_string", skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub generator: String,
}

impl DatasetMeta {
    pub fn new(source: Source, seed: Option<u64>) -> Self {
        DatasetMeta {
            schema_version: SCHEMA_VERSION,
            source,
            seed,
            generator: crate::sim::GENERATOR.to_string(),
        }
    }
}

mod seed_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match seed {
            Some(v) => s.serialize_str(&v.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        raw.map(|s| s.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub links: Vec<LinkSample>,
    pub paths: Vec<PathSample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Links with [`Role::Sample`].
    pub fn samples(&self) -> impl Iterator<Item = &LinkSample> {
        self.links.iter().filter(|l| l.role == Role::Sample)
    }

    pub fn link_index(&self) -> HashMap<&str, &LinkSample> {
        self.links.iter().map(|l| (l.link_id.as_str(), l)).collect()
    }

    /// Checks labels, unique link ids, and that every path link exists.
    pub fn validate(&self) -> Result<()> {
        if self.meta.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.meta.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let mut ids = HashSet::with_capacity(self.links.len());
        for link in &self.links {
            link.validate()?;
            if !ids.insert(link.link_id.as_str()) {
                return Err(Error::Integrity(format!("duplicate link_id {:?}", link.link_id)));
            }
        }
        for path in &self.paths {
            if path.link_ids.is_empty() {
                return Err(Error::Integrity(format!("flow {:?} has no links", path.flow_id)));
            }
            if let Some(missing) = path.link_ids.iter().find(|id| !ids.contains(id.as_str())) {
                return Err(Error::Integrity(format!(
                    "flow {:?} references unknown link {missing:?}",
                    path.flow_id
                )));
            }
            let d = path.observed_end_to_end_delay;
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::Integrity(format!(
                    "flow {:?}: end-to-end delay must be nonnegative",
                    path.flow_id
                )));
            }
        }
        Ok(())
    }
}
