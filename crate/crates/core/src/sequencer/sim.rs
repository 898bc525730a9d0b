//! Seeded Monte Carlo of the photon production attempts.
//!
//! The unit of work is one cooling cycle. Every cycle draws from its own
//! generator seeded with [`split_seed`]`(master, cycle)`, so the stream is a
//! function of the master seed and configuration only; worker count and
//! batch size never change a byte of the output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, Normal};
use rayon::prelude::*;

use super::{
    build_schedule, split_seed, Channel, RunPlan, Schedule, SequenceSpec, SimError, StreamHeader, TagRecord, TagSink,
    TagStream, CHANNEL_COUNT,
};
use crate::model::{DetectorSpec, SignalChannel, SourceSpec};

/// Background rates superposed on the two detector channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRates {
    pub pmt_hz: f64,
    pub snspd_hz: f64,
    /// Restrict noise to the live part of each attempt (trigger to attempt
    /// end) instead of the whole record.
    pub gated: bool,
}

impl NoiseRates {
    pub fn none() -> Self {
        Self { pmt_hz: 0.0, snspd_hz: 0.0, gated: false }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationSetup {
    pub sequence: SequenceSpec,
    pub plan: RunPlan,
    pub source: SourceSpec<f64>,
    pub pmt: DetectorSpec<f64>,
    pub snspd: DetectorSpec<f64>,
    pub noise: NoiseRates,
    /// Photon window the source's per-window probabilities refer to. The
    /// per-attempt detection probability is the window probability divided
    /// by the pulse fraction this window captures.
    pub signal_window_ns: f64,
    pub config_digest: [u8; 32],
}

impl SimulationSetup {
    /// Probability per attempt that a signal photon is detected at all on
    /// `channel`, anywhere in time.
    pub fn detection_probability(&self, channel: SignalChannel) -> f64 {
        let capture = self.source.capture_fraction(self.signal_window_ns);
        if capture > 0.0 {
            self.source.p_window(channel) / capture
        } else {
            0.0
        }
    }
}

pub struct Simulator {
    setup: SimulationSetup,
    schedule: Schedule,
    p_pmt: f64,
    p_any: f64,
    tau_ps: f64,
    jitter: [Option<Normal<f64>>; 2],
    noise: [Option<Exp<f64>>; 2],
}

fn invalid(field: &'static str, value: f64, legal: &'static str) -> SimError {
    SimError::Invalid { field, value, legal }
}

impl Simulator {
    pub fn new(setup: SimulationSetup) -> Result<Self, SimError> {
        let schedule = build_schedule(&setup.sequence, &setup.plan)?;
        if !(setup.signal_window_ns > 0.0) || !setup.signal_window_ns.is_finite() {
            return Err(invalid("window.signal_ns", setup.signal_window_ns, "(0, inf)"));
        }
        let p_pmt = setup.detection_probability(SignalChannel::Pmt);
        let p_snspd = setup.detection_probability(SignalChannel::Snspd);
        if p_pmt + p_snspd > 1.0 {
            return Err(invalid(
                "source.p_pmt_window + source.p_snspd_window (after window capture)",
                p_pmt + p_snspd,
                "[0, 1]",
            ));
        }
        let jitter = |d: &DetectorSpec<f64>| {
            (d.jitter_sigma_ps() > 0.0).then(|| Normal::new(0.0, d.jitter_sigma_ps()).expect("finite sigma"))
        };
        let noise = |field, hz: f64| -> Result<Option<Exp<f64>>, SimError> {
            if !(hz >= 0.0) || !hz.is_finite() {
                return Err(invalid(field, hz, "[0, inf)"));
            }
            // rate per picosecond
            Ok((hz > 0.0).then(|| Exp::new(hz * 1e-12).expect("positive rate")))
        };
        Ok(Self {
            p_pmt,
            p_any: p_pmt + p_snspd,
            tau_ps: setup.source.tau_ns() * 1e3,
            jitter: [jitter(&setup.pmt), jitter(&setup.snspd)],
            noise: [noise("pmt noise rate", setup.noise.pmt_hz)?, noise("snspd noise rate", setup.noise.snspd_hz)?],
            schedule,
            setup,
        })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn setup(&self) -> &SimulationSetup {
        &self.setup
    }

    pub fn header(&self) -> StreamHeader {
        StreamHeader {
            tick_ps: self.setup.plan.tick_ps,
            channel_count: CHANNEL_COUNT,
            attempt_count: self.schedule.attempts,
            master_seed: self.setup.plan.master_seed,
            config_digest: self.setup.config_digest,
        }
    }

    fn tick(&self) -> u64 {
        self.setup.plan.tick_ps as u64
    }

    fn exact_ticks(&self, cycle: u64, ps: u128) -> Result<u64, SimError> {
        let tick = self.tick() as u128;
        u64::try_from((2 * ps + tick) / (2 * tick)).map_err(|_| SimError::TickOverflow { cycle, ps })
    }

    /// Round `base + offset` picoseconds to the nearest tick, ties upward.
    fn offset_ticks(&self, cycle: u64, base_ps: u128, offset_ps: f64) -> Result<u64, SimError> {
        let tick = self.tick() as u128;
        let (q, r) = (base_ps / tick, base_ps % tick);
        let step = ((r as f64 + offset_ps) / tick as f64 + 0.5).floor() as i128;
        let total = (q as i128 + step).max(0);
        u64::try_from(total)
            .map_err(|_| SimError::TickOverflow { cycle, ps: base_ps.saturating_add(offset_ps.max(0.0) as u128) })
    }

    fn noise_between(
        &self,
        rng: &mut ChaCha8Rng,
        cycle: u64,
        channel: Channel,
        from_ps: u128,
        to_ps: u128,
        out: &mut Vec<TagRecord>,
    ) -> Result<(), SimError> {
        let Some(exp) = &self.noise[channel.id() as usize - 1] else {
            return Ok(());
        };
        let span = (to_ps - from_ps) as f64;
        let mut t = exp.sample(rng);
        while t < span {
            out.push(TagRecord::new(channel, self.offset_ticks(cycle, from_ps, t)?));
            t += exp.sample(rng);
        }
        Ok(())
    }

    /// Unsorted records of one cooling cycle.
    pub fn simulate_block(&self, cycle: u64) -> Result<Vec<TagRecord>, SimError> {
        let s = &self.schedule;
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(self.setup.plan.master_seed, cycle));
        let start_ps = s.cycle_start_ps(cycle);
        let n = s.attempts_in_cycle(cycle);
        let end_ps = if cycle + 1 < s.cycles { s.cycle_start_ps(cycle + 1) } else { s.wallclock_ps };
        let mut out = Vec::with_capacity(n as usize + n as usize / 64 + 16);
        let first = cycle * s.attempts_per_cycle;

        for j in 0..n {
            let attempt_ps = s.attempt_start_ps(first + j);
            let trigger_ps = attempt_ps + s.trigger_offset_ps as u128;
            out.push(TagRecord::new(Channel::Trigger, self.exact_ticks(cycle, trigger_ps)?));

            let u: f64 = rng.random();
            if u < self.p_any {
                let (channel, slot) = if u < self.p_pmt { (Channel::Pmt, 0) } else { (Channel::Snspd, 1) };
                let decay: f64 = Exp1.sample(&mut rng);
                let mut delay = decay * self.tau_ps;
                if let Some(jitter) = &self.jitter[slot] {
                    delay += jitter.sample(&mut rng);
                }
                let excite_ps = attempt_ps + s.excite_offset_ps as u128;
                // never earlier than the cycle start, which keeps blocks ordered
                let delay = delay.max(start_ps as f64 - excite_ps as f64);
                out.push(TagRecord::new(channel, self.offset_ticks(cycle, excite_ps, delay)?));
            }
        }

        for channel in [Channel::Pmt, Channel::Snspd] {
            if self.setup.noise.gated {
                for j in 0..n {
                    let attempt_ps = s.attempt_start_ps(first + j);
                    let live = attempt_ps + s.trigger_offset_ps as u128;
                    let stop = attempt_ps + s.attempt_ps as u128;
                    self.noise_between(&mut rng, cycle, channel, live, stop, &mut out)?;
                }
            } else {
                self.noise_between(&mut rng, cycle, channel, start_ps, end_ps, &mut out)?;
            }
        }
        Ok(out)
    }

    /// Stream the whole run, in global tick order, into `sink`.
    pub fn run<S: TagSink>(&self, workers: usize, sink: &mut S) -> Result<StreamHeader, SimError> {
        let workers = workers.max(1);
        let pool =
            rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| SimError::Pool(e.to_string()))?;
        let cycles = self.schedule.cycles;
        let batch = 64 * workers as u64;
        let tick = self.tick() as u128;
        let mut carry: Vec<TagRecord> = Vec::new();

        let mut b0 = 0;
        while b0 < cycles {
            let b1 = (b0 + batch).min(cycles);
            let blocks: Vec<Result<Vec<TagRecord>, SimError>> =
                pool.install(|| (b0..b1).into_par_iter().map(|c| self.simulate_block(c)).collect());
            for (cycle, block) in (b0..b1).zip(blocks) {
                let mut records = block?;
                records.append(&mut carry);
                records.sort_unstable_by_key(TagRecord::order_key);
                // every record of later cycles lies at or after this tick
                let boundary = if cycle + 1 < cycles {
                    u64::try_from(self.schedule.cycle_start_ps(cycle + 1) / tick).unwrap_or(u64::MAX)
                } else {
                    u64::MAX
                };
                let split = records.partition_point(|r| r.ticks < boundary);
                sink.accept(&records[..split])?;
                carry.extend_from_slice(&records[split..]);
            }
            b0 = b1;
        }
        sink.accept(&carry)?;
        Ok(self.header())
    }

    pub fn run_to_stream(&self, workers: usize) -> Result<TagStream, SimError> {
        let mut records = Vec::new();
        let header = self.run(workers, &mut records)?;
        Ok(TagStream { header, records })
    }
}

/// Simulate a full run into memory on a single worker.
pub fn simulate_run(
    seq: &SequenceSpec,
    plan: &RunPlan,
    source: &SourceSpec<f64>,
    pmt: &DetectorSpec<f64>,
    snspd: &DetectorSpec<f64>,
    noise: NoiseRates,
    signal_window_ns: f64,
) -> Result<TagStream, SimError> {
    let setup = SimulationSetup {
        sequence: *seq,
        plan: *plan,
        source: *source,
        pmt: pmt.clone(),
        snspd: snspd.clone(),
        noise,
        signal_window_ns,
        config_digest: [0; 32],
    };
    Simulator::new(setup)?.run_to_stream(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(attempts: u64, p_pmt: f64, p_snspd: f64, noise: NoiseRates, jitter_ps: f64) -> SimulationSetup {
        SimulationSetup {
            sequence: SequenceSpec::default(),
            plan: RunPlan::attempts(attempts, 11),
            source: SourceSpec::new(13.89, p_pmt, p_snspd).unwrap(),
            pmt: DetectorSpec::new("pmt", 1.0, 0.0, jitter_ps).unwrap(),
            snspd: DetectorSpec::new("snspd", 0.87, 0.0, jitter_ps).unwrap(),
            noise,
            signal_window_ns: 41.6,
            config_digest: [0; 32],
        }
    }

    #[test]
    fn empty_run_has_header_only() {
        let sim = Simulator::new(setup(0, 1e-3, 1e-3, NoiseRates::none(), 80.0)).unwrap();
        let stream = sim.run_to_stream(1).unwrap();
        assert!(stream.records.is_empty());
        assert_eq!(stream.header.attempt_count, 0);
    }

    #[test]
    fn one_trigger_per_attempt_and_ordered() {
        let noise = NoiseRates { pmt_hz: 5e4, snspd_hz: 5e4, gated: false };
        let sim = Simulator::new(setup(2_345, 0.2, 0.2, noise, 80.0)).unwrap();
        let stream = sim.run_to_stream(3).unwrap();
        assert_eq!(stream.count(Channel::Trigger) as u64, 2_345);
        assert_eq!(stream.first_disorder(), None);
        assert!(stream.count(Channel::Pmt) > 0 && stream.count(Channel::Snspd) > 0);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let noise = NoiseRates { pmt_hz: 857.0, snspd_hz: 56.0, gated: false };
        let sim = Simulator::new(setup(50_000, 0.01, 0.01, noise, 80.0)).unwrap();
        let a = sim.run_to_stream(1).unwrap();
        let b = sim.run_to_stream(4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gated_noise_stays_in_live_interval() {
        let noise = NoiseRates { pmt_hz: 1e5, snspd_hz: 0.0, gated: true };
        let sim = Simulator::new(setup(1_000, 0.0, 0.0, noise, 0.0)).unwrap();
        let stream = sim.run_to_stream(1).unwrap();
        let mut last_trigger = None;
        let mut seen = 0;
        for r in &stream.records {
            if r.channel == 0 {
                last_trigger = Some(r.ticks);
            } else {
                let dt = r.ticks - last_trigger.expect("noise before first trigger");
                // live part is trigger .. attempt end = 1.4 us = 17500 ticks
                assert!(dt <= 17_500, "{dt}");
                seen += 1;
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn probabilities_above_one_after_capture_rejected() {
        assert!(Simulator::new(setup(1, 0.5, 0.49, NoiseRates::none(), 0.0)).is_err());
    }

    #[test]
    fn tick_overflow_is_reported() {
        let mut s = setup(1_500, 0.0, 0.0, NoiseRates::none(), 0.0);
        s.sequence.intercycle_dead_us = 9.3e12;
        s.plan.tick_ps = 1;
        match Simulator::new(s).unwrap().run_to_stream(1) {
            Err(SimError::TickOverflow { cycle, .. }) => assert_eq!(cycle, 2),
            other => panic!("expected overflow, got {other:?}"),
        }
    }
}
