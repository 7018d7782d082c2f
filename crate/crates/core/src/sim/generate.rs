use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    rng_for, simulate_queue, simulate_tandem, FlowSpec, LinkSpec, ServiceDistribution, SimConfig,
    TandemConfig, MIN_MEASURED_EVENTS,
};
use crate::dataset::{Dataset, DatasetMeta, LinkSample, PathSample, Role, Source};
use crate::error::{Error, Result};

/// Generator name written into dataset metadata.
pub const GENERATOR: &str = concat!("queue-kpi ", env!("CARGO_PKG_VERSION"));

/// Service law of every link in a run, scaled to the run's packet size and capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ServiceKind {
    Exponential,
    Deterministic,
    /// Packet sizes Normal(mean, cv * mean) truncated at zero.
    TruncatedNormal { cv: f64 },
}

impl ServiceKind {
    fn distribution(self, packet_size: f64, capacity: f64) -> ServiceDistribution {
        let mean = packet_size / capacity;
        match self {
            ServiceKind::Exponential => ServiceDistribution::Exponential { rate: 1.0 / mean },
            ServiceKind::Deterministic => ServiceDistribution::Deterministic { time: mean },
            ServiceKind::TruncatedNormal { cv } => ServiceDistribution::TruncatedNormal {
                mean,
                std: cv * mean,
            },
        }
    }
}

/// Topology template. Link indices increase along every path, so all templates
/// are feed-forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Topology {
    /// One queue, one flow.
    Single,
    /// Links in series; one end-to-end flow plus one single-hop flow per link.
    Chain { links: usize },
    /// `leaves` access links merging into one shared link, one flow per leaf.
    Star { leaves: usize },
    /// Random increasing paths of 1..=max_hops links over `links` links.
    RandomDag { links: usize, flows: usize, max_hops: usize },
}

fn default_packet_size() -> f64 {
    1000.0
}

fn default_capacities() -> Vec<f64> {
    vec![1e6]
}

fn default_replications() -> u32 {
    1
}

fn default_measured() -> u64 {
    MIN_MEASURED_EVENTS
}

/// Cartesian grid of simulation runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Target utilization of the busiest link of each run.
    pub loads: Vec<f64>,
    #[serde(rename = "K")]
    pub buffers: Vec<u32>,
    pub services: Vec<ServiceKind>,
    pub topologies: Vec<Topology>,
    /// Link capacities, bits/second.
    #[serde(default = "default_capacities")]
    pub capacities: Vec<f64>,
    /// Mean packet size, bits.
    #[serde(default = "default_packet_size")]
    pub mean_packet_size: f64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default = "default_measured")]
    pub measured_events: u64,
    /// Defaults to 10% of `measured_events`.
    #[serde(default)]
    pub warmup_events: Option<u64>,
}

impl GridSpec {
    /// Single M/M/1/K queues over the given loads and buffer sizes.
    pub fn single_queues(loads: Vec<f64>, buffers: Vec<u32>) -> Self {
        GridSpec {
            loads,
            buffers,
            services: vec![ServiceKind::Exponential],
            topologies: vec![Topology::Single],
            capacities: default_capacities(),
            mean_packet_size: default_packet_size(),
            replications: 1,
            measured_events: MIN_MEASURED_EVENTS,
            warmup_events: None,
        }
    }

    pub fn runs(&self) -> usize {
        self.loads.len()
            * self.buffers.len()
            * self.services.len()
            * self.topologies.len()
            * self.capacities.len()
            * self.replications as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs() == 0 {
            return Err(Error::SimConfig("grid produces no runs".into()));
        }
        if let Some(l) = self.loads.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::SimConfig(format!("loads must be positive, got {l}")));
        }
        if self.buffers.contains(&0) {
            return Err(Error::SimConfig("K must be at least 1".into()));
        }
        if let Some(c) = self.capacities.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::SimConfig(format!("capacity must be positive, got {c}")));
        }
        if !(self.mean_packet_size > 0.0 && self.mean_packet_size.is_finite()) {
            return Err(Error::SimConfig("mean_packet_size must be positive".into()));
        }
        for s in &self.services {
            if let ServiceKind::TruncatedNormal { cv } = s {
                if !(*cv >= 0.0 && cv.is_finite()) {
                    return Err(Error::SimConfig(format!("cv must be >= 0, got {cv}")));
                }
            }
        }
        for t in &self.topologies {
            let ok = match *t {
                Topology::Single => true,
                Topology::Chain { links } => links >= 1,
                Topology::Star { leaves } => leaves >= 1,
                Topology::RandomDag { links, flows, max_hops } => links >= 1 && flows >= 1 && max_hops >= 1,
            };
            if !ok {
                return Err(Error::SimConfig(format!("degenerate topology {t:?}")));
            }
        }
        super::check_measured(self.measured_events)
    }

    fn run(&self, index: usize) -> Run {
        let mut i = index;
        let mut pick = |n: usize| {
            let v = i % n;
            i /= n;
            v
        };
        let load = self.loads[pick(self.loads.len())];
        let k = self.buffers[pick(self.buffers.len())];
        let service = self.services[pick(self.services.len())];
        let topology = self.topologies[pick(self.topologies.len())];
        let capacity = self.capacities[pick(self.capacities.len())];
        Run {
            index,
            load,
            k,
            service,
            topology,
            capacity,
        }
    }
}

struct Run {
    index: usize,
    load: f64,
    k: u32,
    service: ServiceKind,
    topology: Topology,
    capacity: f64,
}

/// Flow paths and relative weights of one topology instance.
fn routing(topology: Topology, rng: &mut impl Rng) -> (usize, Vec<Vec<usize>>) {
    match topology {
        Topology::Single => (1, vec![vec![0]]),
        Topology::Chain { links } => {
            let mut paths = vec![(0..links).collect::<Vec<_>>()];
            if links > 1 {
                paths.extend((0..links).map(|l| vec![l]));
            }
            (links, paths)
        }
        Topology::Star { leaves } => (leaves + 1, (1..=leaves).map(|l| vec![l, 0]).collect()),
        Topology::RandomDag { links, flows, max_hops } => {
            let paths = (0..flows)
                .map(|_| {
                    let hops = rng.random_range(1..=max_hops.min(links));
                    let mut path = rand::seq::index::sample(rng, links, hops).into_vec();
                    path.sort_unstable();
                    path
                })
                .collect();
            (links, paths)
        }
    }
}

fn simulate_run(grid: &GridSpec, run: &Run, seed: u64) -> Result<(Vec<LinkSample>, Vec<PathSample>)> {
    // even streams shape the topology, odd streams drive the simulation
    let mut rng = rng_for(seed, 2 * run.index as u64);
    let (n_links, paths) = routing(run.topology, &mut rng);
    let dist = run.service.distribution(grid.mean_packet_size, run.capacity);
    let mu = dist.rate();
    let avg_packet_size = dist.mean() * run.capacity;

    let weights: Vec<f64> = paths.iter().map(|_| rng.random_range(0.5..1.5)).collect();
    let mut load = vec![0.0; n_links];
    for (p, w) in paths.iter().zip(&weights) {
        for &l in p {
            load[l] += w;
        }
    }
    let peak = load.iter().cloned().fold(0.0, f64::max);
    let scale = run.load * mu / peak;
    let flows: Vec<FlowSpec> = paths
        .iter()
        .zip(&weights)
        .map(|(p, w)| FlowSpec {
            path: p.clone(),
            rate: w * scale,
        })
        .collect();

    let warmup = grid.warmup_events.unwrap_or(grid.measured_events / 10);
    let stream = 2 * run.index as u64 + 1;
    let (link_results, flow_results) = if run.topology == Topology::Single {
        let cfg = SimConfig {
            lambda: flows[0].rate,
            service: dist,
            k: run.k,
            warmup_events: warmup,
            measured_events: grid.measured_events,
            seed,
            stream,
        };
        let r = simulate_queue(&cfg)?;
        (vec![r], vec![(r.mean_sojourn, r.delivered)])
    } else {
        let cfg = TandemConfig {
            links: vec![LinkSpec { service: dist, k: run.k }; n_links],
            flows: flows.clone(),
            warmup_events: warmup,
            measured_events: grid.measured_events,
            seed,
            stream,
        };
        let r = simulate_tandem(&cfg)?;
        let flows = r.flows.iter().map(|f| (f.mean_delay, f.delivered)).collect();
        (r.links, flows)
    };

    let offered = {
        let mut rates = vec![0.0; n_links];
        for f in &flows {
            for &l in &f.path {
                rates[l] += f.rate;
            }
        }
        rates
    };
    let topology_id = format!("t{}", run.index);
    let used: Vec<usize> = (0..n_links).filter(|&l| offered[l] > 0.0).collect();
    let links = used
        .iter()
        .map(|&l| {
            let r = &link_results[l];
            LinkSample {
                link_id: format!("{topology_id}-l{l}"),
                topology_id: topology_id.clone(),
                topology_size: used.len() as u32,
                role: Role::Sample,
                lambda: offered[l],
                mu: Some(mu),
                k: run.k,
                capacity: Some(run.capacity),
                avg_packet_size: Some(avg_packet_size),
                observed_occupancy: r.mean_occupancy.min(run.k as f64),
                observed_delay: Some(r.mean_sojourn),
                observed_loss: Some(r.loss_prob),
            }
        })
        .collect();
    let paths = flows
        .iter()
        .zip(&flow_results)
        .enumerate()
        .filter(|(_, (_, (_, delivered)))| *delivered > 0)
        .map(|(j, (f, (delay, _)))| PathSample {
            flow_id: format!("{topology_id}-f{j}"),
            topology_id: topology_id.clone(),
            link_ids: f.path.iter().map(|l| format!("{topology_id}-l{l}")).collect(),
            observed_end_to_end_delay: *delay,
        })
        .collect();
    Ok((links, paths))
}

/// Simulate every grid run and collect the labeled links and flows.
///
/// Run `i` draws its topology from stream `2i` and its traffic from stream
/// `2i + 1` of `seed`, so the output does not depend on `threads`.
pub fn generate_dataset(grid: &GridSpec, seed: u64, threads: Option<usize>) -> Result<Dataset> {
    grid.validate()?;
    let total = grid.runs();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::SimConfig(format!("cannot start worker pool: {e}")))?;
    let parts: Vec<(Vec<LinkSample>, Vec<PathSample>)> = pool.install(|| {
        (0..total)
            .into_par_iter()
            .map(|i| simulate_run(grid, &grid.run(i), seed))
            .collect::<Result<_>>()
    })?;
    let mut dataset = Dataset {
        links: Vec::new(),
        paths: Vec::new(),
        meta: DatasetMeta::new(Source::Simulated, Some(seed)),
    };
    for (links, paths) in parts {
        dataset.links.extend(links);
        dataset.paths.extend(paths);
    }
    if dataset.links.is_empty() {
        return Err(Error::SimConfig("grid produced no link samples".into()));
    }
    dataset.validate()?;
    Ok(dataset)
}
