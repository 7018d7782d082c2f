use super::{half_width, HalfWidths, SimResult, BATCHES};

#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    duration: f64,
    area: f64,
    empty_time: f64,
    full_time: f64,
    offered: u64,
    accepted: u64,
    dropped: u64,
    sojourn_sum: f64,
    sojourn_count: u64,
}

impl Accum {
    fn ratio(num: f64, den: f64) -> f64 {
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    fn occupancy(&self) -> f64 {
        Self::ratio(self.area, self.duration)
    }
    fn pi0(&self) -> f64 {
        Self::ratio(self.empty_time, self.duration)
    }
    fn pi_k(&self) -> f64 {
        Self::ratio(self.full_time, self.duration)
    }
    fn loss(&self) -> f64 {
        Self::ratio(self.dropped as f64, self.offered as f64)
    }
    fn lambda_e(&self) -> f64 {
        Self::ratio(self.accepted as f64, self.duration)
    }
    fn sojourn(&self) -> f64 {
        Self::ratio(self.sojourn_sum, self.sojourn_count as f64)
    }
}

/// Occupancy bookkeeping for one FIFO queue of capacity `k`.
///
/// Time integrals only accumulate while a batch is open; `close` ends the
/// measurement window but sojourn records keep arriving while the queue drains.
#[derive(Debug, Clone)]
pub(crate) struct LinkMonitor {
    k: u32,
    n: u32,
    last_t: f64,
    batch: Option<usize>,
    batches: Vec<Accum>,
}

impl LinkMonitor {
    pub(crate) fn new(k: u32) -> Self {
        LinkMonitor {
            k,
            n: 0,
            last_t: 0.0,
            batch: None,
            batches: vec![Accum::default(); BATCHES],
        }
    }

    #[inline]
    fn advance(&mut self, t: f64) {
        if let Some(b) = self.batch {
            let dt = t - self.last_t;
            let acc = &mut self.batches[b];
            acc.duration += dt;
            acc.area += self.n as f64 * dt;
            if self.n == 0 {
                acc.empty_time += dt;
            } else if self.n == self.k {
                acc.full_time += dt;
            }
        }
        self.last_t = t;
    }

    /// Open batch `b` at time `t` (closing the previous one).
    #[inline]
    pub(crate) fn open_batch(&mut self, t: f64, b: usize) {
        self.advance(t);
        self.batch = Some(b);
    }

    /// End the measurement window at `t`.
    pub(crate) fn close(&mut self, t: f64) {
        self.advance(t);
        self.batch = None;
    }

    #[inline]
    pub(crate) fn current_batch(&self) -> Option<usize> {
        self.batch
    }

    #[inline]
    pub(crate) fn len(&self) -> u32 {
        self.n
    }

    /// Offer a packet at `t`; returns whether it was admitted.
    #[inline]
    pub(crate) fn arrival(&mut self, t: f64) -> bool {
        self.advance(t);
        let admitted = self.n < self.k;
        if admitted {
            self.n += 1;
        }
        if let Some(b) = self.batch {
            let acc = &mut self.batches[b];
            acc.offered += 1;
            if admitted {
                acc.accepted += 1;
            } else {
                acc.dropped += 1;
            }
        }
        admitted
    }

    #[inline]
    pub(crate) fn departure(&mut self, t: f64) {
        self.advance(t);
        debug_assert!(self.n > 0);
        self.n -= 1;
    }

    /// Sojourn of a packet admitted during batch `b`.
    #[inline]
    pub(crate) fn record_sojourn(&mut self, b: usize, sojourn: f64) {
        let acc = &mut self.batches[b];
        acc.sojourn_sum += sojourn;
        acc.sojourn_count += 1;
    }

    pub(crate) fn result(&self, t_quantile: f64) -> SimResult {
        let mut total = Accum::default();
        for b in &self.batches {
            total.duration += b.duration;
            total.area += b.area;
            total.empty_time += b.empty_time;
            total.full_time += b.full_time;
            total.offered += b.offered;
            total.accepted += b.accepted;
            total.dropped += b.dropped;
            total.sojourn_sum += b.sojourn_sum;
            total.sojourn_count += b.sojourn_count;
        }
        let hw = |f: fn(&Accum) -> f64| {
            let values: Vec<f64> = self.batches.iter().map(f).collect();
            half_width(&values, t_quantile)
        };
        SimResult {
            mean_occupancy: total.occupancy(),
            loss_prob: total.loss(),
            mean_sojourn: total.sojourn(),
            emp_pi0: total.pi0(),
            emp_pi_k: total.pi_k(),
            emp_lambda_e: total.lambda_e(),
            half_width: HalfWidths {
                mean_occupancy: hw(Accum::occupancy),
                loss_prob: hw(Accum::loss),
                mean_sojourn: hw(Accum::sojourn),
                pi0: hw(Accum::pi0),
                pi_k: hw(Accum::pi_k),
                lambda_e: hw(Accum::lambda_e),
            },
            offered: total.offered,
            accepted: total.accepted,
            dropped: total.dropped,
            delivered: total.sojourn_count,
            measured_time: total.duration,
        }
    }
}

/// Batch index of the `i`-th measured arrival out of `measured`.
#[inline]
pub(crate) fn batch_of(i: u64, measured: u64) -> usize {
    ((i as u128 * BATCHES as u128) / measured as u128) as usize
}
