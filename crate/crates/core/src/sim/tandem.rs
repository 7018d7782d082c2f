use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::monitor::{batch_of, LinkMonitor};
use super::{
    check_measured, half_width, rng_for, t_quantile, ServiceDistribution, ServiceSampler,
    SimResult, BATCHES,
};
use crate::error::{Error, Result};

/// One queue of a tandem network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub service: ServiceDistribution,
    #[serde(rename = "K")]
    pub k: u32,
}

/// A Poisson flow routed along `path` (link indices, in traversal order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub path: Vec<usize>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TandemConfig {
    pub links: Vec<LinkSpec>,
    pub flows: Vec<FlowSpec>,
    /// External arrivals (all flows) discarded before measurement.
    pub warmup_events: u64,
    /// External arrivals inside the measurement window.
    pub measured_events: u64,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    /// Mean end-to-end delay over delivered packets, seconds.
    pub mean_delay: f64,
    pub half_width: f64,
    pub offered: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TandemResult {
    pub links: Vec<SimResult>,
    pub flows: Vec<FlowResult>,
}

impl TandemConfig {
    /// Config with the default warmup of 10% of `measured_events`.
    pub fn new(links: Vec<LinkSpec>, flows: Vec<FlowSpec>, measured_events: u64, seed: u64) -> Self {
        TandemConfig {
            links,
            flows,
            warmup_events: measured_events / 10,
            measured_events,
            seed,
            stream: 0,
        }
    }

    /// Nominal offered rate at each link: the sum of the rates of flows crossing it.
    pub fn offered_rates(&self) -> Vec<f64> {
        let mut rates = vec![0.0; self.links.len()];
        for flow in &self.flows {
            for &l in &flow.path {
                if let Some(r) = rates.get_mut(l) {
                    *r += flow.rate;
                }
            }
        }
        rates
    }

    pub fn validate(&self) -> Result<()> {
        check_measured(self.measured_events)?;
        if self.links.is_empty() || self.flows.is_empty() {
            return Err(Error::SimConfig("tandem needs at least one link and one flow".into()));
        }
        for (i, link) in self.links.iter().enumerate() {
            link.service.validate()?;
            if link.k < 1 {
                return Err(Error::SimConfig(format!("link {i}: K must be at least 1")));
            }
        }
        for (f, flow) in self.flows.iter().enumerate() {
            if flow.path.is_empty() {
                return Err(Error::SimConfig(format!("flow {f} has an empty path")));
            }
            if !(flow.rate > 0.0 && flow.rate.is_finite()) {
                return Err(Error::SimConfig(format!("flow {f}: rate must be positive")));
            }
            if let Some(&bad) = flow.path.iter().find(|&&l| l >= self.links.len()) {
                return Err(Error::SimConfig(format!("flow {f} references unknown link {bad}")));
            }
        }
        check_feed_forward(self.links.len(), &self.flows)
    }
}

/// Reject routings whose hop graph has a cycle (including a path revisiting a link).
fn check_feed_forward(n_links: usize, flows: &[FlowSpec]) -> Result<()> {
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n_links];
    let mut indegree = vec![0usize; n_links];
    for flow in flows {
        for hop in flow.path.windows(2) {
            let (a, b) = (hop[0], hop[1]);
            if !succ[a].contains(&b) {
                succ[a].push(b);
                indegree[b] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..n_links).filter(|&l| indegree[l] == 0).collect();
    let mut visited = 0;
    while let Some(l) = ready.pop() {
        visited += 1;
        for &m in &succ[l] {
            indegree[m] -= 1;
            if indegree[m] == 0 {
                ready.push(m);
            }
        }
    }
    if visited == n_links {
        Ok(())
    } else {
        let stuck: Vec<usize> = (0..n_links).filter(|&l| indegree[l] > 0).collect();
        Err(Error::CyclicPath(format!("links {stuck:?} lie on a routing cycle")))
    }
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    flow: usize,
    hop: usize,
    born: f64,
    /// batch open when the flow's packet entered the network, if measured
    born_batch: Option<usize>,
    link_arrival: f64,
    link_batch: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Departure {
    time: f64,
    seq: u64,
    link: usize,
}

impl Eq for Departure {}

impl Ord for Departure {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (time, seq)
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct FlowAccum {
    offered: u64,
    delivered: u64,
    dropped: u64,
    delay_sum: f64,
}

struct Network<'a> {
    cfg: &'a TandemConfig,
    services: Vec<ServiceSampler>,
    monitors: Vec<LinkMonitor>,
    queues: Vec<VecDeque<Packet>>,
    departures: BinaryHeap<Departure>,
    seq: u64,
    flows: Vec<[FlowAccum; BATCHES]>,
}

impl Network<'_> {
    fn schedule(&mut self, link: usize, time: f64) {
        self.seq += 1;
        self.departures.push(Departure {
            time,
            seq: self.seq,
            link,
        });
    }

    fn offer(&mut self, rng: &mut rand_chacha::ChaCha8Rng, mut packet: Packet, t: f64) {
        let link = self.cfg.flows[packet.flow].path[packet.hop];
        if self.monitors[link].arrival(t) {
            packet.link_arrival = t;
            packet.link_batch = self.monitors[link].current_batch();
            self.queues[link].push_back(packet);
            if self.queues[link].len() == 1 {
                let s = self.services[link].sample(rng);
                self.schedule(link, t + s);
            }
        } else if let Some(b) = packet.born_batch {
            self.flows[packet.flow][b].dropped += 1;
        }
    }

    fn depart(&mut self, rng: &mut rand_chacha::ChaCha8Rng, link: usize, t: f64) {
        let packet = self.queues[link].pop_front().expect("departure from empty link");
        self.monitors[link].departure(t);
        if let Some(b) = packet.link_batch {
            self.monitors[link].record_sojourn(b, t - packet.link_arrival);
        }
        if !self.queues[link].is_empty() {
            let s = self.services[link].sample(rng);
            self.schedule(link, t + s);
        }
        let path_len = self.cfg.flows[packet.flow].path.len();
        if packet.hop + 1 < path_len {
            let next = Packet {
                hop: packet.hop + 1,
                ..packet
            };
            self.offer(rng, next, t);
        } else if let Some(b) = packet.born_batch {
            let acc = &mut self.flows[packet.flow][b];
            acc.delivered += 1;
            acc.delay_sum += t - packet.born;
        }
    }
}

/// Simulate a feed-forward network of finite FIFO queues.
///
/// Packets move to the next hop the instant they finish service; a drop at any
/// hop ends the packet. Flow delays average delivered packets only.
pub fn simulate_tandem(cfg: &TandemConfig) -> Result<TandemResult> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, cfg.stream);
    let rates: Vec<f64> = cfg.flows.iter().map(|f| f.rate).collect();
    let total_rate: f64 = rates.iter().sum();
    let interarrival = Exp::new(total_rate).map_err(|e| Error::SimConfig(e.to_string()))?;
    let pick_flow = WeightedIndex::new(&rates).map_err(|e| Error::SimConfig(e.to_string()))?;

    let mut net = Network {
        cfg,
        services: cfg
            .links
            .iter()
            .map(|l| l.service.sampler())
            .collect::<Result<_>>()?,
        monitors: cfg.links.iter().map(|l| LinkMonitor::new(l.k)).collect(),
        queues: cfg
            .links
            .iter()
            .map(|l| VecDeque::with_capacity(l.k as usize))
            .collect(),
        departures: BinaryHeap::new(),
        seq: 0,
        flows: vec![[FlowAccum::default(); BATCHES]; cfg.flows.len()],
    };

    let last = cfg.warmup_events + cfg.measured_events;
    let mut seen: u64 = 0;
    let mut batch: Option<usize> = None;
    let mut next_arrival = interarrival.sample(&mut rng);
    let mut open = true;

    loop {
        let next_departure = net.departures.peek().map_or(f64::INFINITY, |d| d.time);
        if open && next_arrival <= next_departure {
            let t = next_arrival;
            if seen == last {
                for m in &mut net.monitors {
                    m.close(t);
                }
                open = false;
                continue;
            }
            if seen >= cfg.warmup_events {
                let b = batch_of(seen - cfg.warmup_events, cfg.measured_events);
                if batch != Some(b) {
                    for m in &mut net.monitors {
                        m.open_batch(t, b);
                    }
                    batch = Some(b);
                }
            }
            let flow = pick_flow.sample(&mut rng);
            if let Some(b) = batch {
                net.flows[flow][b].offered += 1;
            }
            let packet = Packet {
                flow,
                hop: 0,
                born: t,
                born_batch: batch,
                link_arrival: t,
                link_batch: None,
            };
            net.offer(&mut rng, packet, t);
            seen += 1;
            next_arrival = t + interarrival.sample(&mut rng);
        } else if let Some(dep) = net.departures.pop() {
            net.depart(&mut rng, dep.link, dep.time);
        } else {
            break;
        }
    }

    let tq = t_quantile();
    let links = net.monitors.iter().map(|m| m.result(tq)).collect();
    let flows = net
        .flows
        .iter()
        .map(|batches| {
            let mut total = FlowAccum::default();
            let mut per_batch = Vec::with_capacity(BATCHES);
            for b in batches {
                total.offered += b.offered;
                total.delivered += b.delivered;
                total.dropped += b.dropped;
                total.delay_sum += b.delay_sum;
                if b.delivered > 0 {
                    per_batch.push(b.delay_sum / b.delivered as f64);
                }
            }
            FlowResult {
                mean_delay: if total.delivered > 0 {
                    total.delay_sum / total.delivered as f64
                } else {
                    0.0
                },
                half_width: half_width(&per_batch, tq),
                offered: total.offered,
                delivered: total.delivered,
                dropped: total.dropped,
            }
        })
        .collect();
    Ok(TandemResult { links, flows })
}
