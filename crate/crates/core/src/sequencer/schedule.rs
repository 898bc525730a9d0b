use super::SimError;

pub const DEFAULT_TICK_PS: u32 = 80;

/// One cooling cycle: Doppler cooling followed by `attempts_per_cycle`
/// photon production attempts, each made of optical pumping, a dark delay,
/// the trigger pulse and the excitation pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceSpec {
    pub cooling_us: f64,
    pub attempts_per_cycle: u32,
    pub attempt_us: f64,
    pub pump_us: f64,
    pub delay_ns: f64,
    pub trigger_ns: f64,
    pub excite_ns: f64,
    /// Idle time between cycles; not part of the published sequence.
    pub intercycle_dead_us: f64,
}

impl Default for SequenceSpec {
    fn default() -> Self {
        Self {
            cooling_us: 100.0,
            attempts_per_cycle: 500,
            attempt_us: 10.0,
            pump_us: 8.0,
            delay_ns: 600.0,
            trigger_ns: 200.0,
            excite_ns: 200.0,
            intercycle_dead_us: 0.0,
        }
    }
}

fn to_ps(field: &'static str, value: f64, scale: f64, allow_zero: bool) -> Result<u64, SimError> {
    let ok = value.is_finite() && (value > 0.0 || (allow_zero && value == 0.0));
    let ps = (value * scale).round();
    if !ok || ps >= u64::MAX as f64 {
        return Err(SimError::Invalid { field, value, legal: if allow_zero { "[0, inf)" } else { "(0, inf)" } });
    }
    Ok(ps as u64)
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        self.timing().map(|_| ())
    }

    fn timing(&self) -> Result<Timing, SimError> {
        let cooling = to_ps("seq.cooling_us", self.cooling_us, 1e6, false)?;
        let attempt = to_ps("seq.attempt_us", self.attempt_us, 1e6, false)?;
        let pump = to_ps("seq.pump_us", self.pump_us, 1e6, false)?;
        let delay = to_ps("seq.delay_ns", self.delay_ns, 1e3, false)?;
        let trigger = to_ps("seq.trigger_ns", self.trigger_ns, 1e3, false)?;
        let excite = to_ps("seq.excite_ns", self.excite_ns, 1e3, false)?;
        let dead = to_ps("seq.intercycle_dead_us", self.intercycle_dead_us, 1e6, true)?;
        if self.attempts_per_cycle == 0 {
            return Err(SimError::Invalid { field: "seq.attempts_per_cycle", value: 0.0, legal: "[1, 2^32)" });
        }
        let busy = pump as u128 + delay as u128 + trigger as u128 + excite as u128;
        if busy > attempt as u128 {
            return Err(SimError::Invalid {
                field: "seq.pump_us + delay + trigger + excite",
                value: busy as f64 * 1e-6,
                legal: "<= seq.attempt_us",
            });
        }
        let cycle = cooling as u128 + self.attempts_per_cycle as u128 * attempt as u128;
        if cycle + dead as u128 > u64::MAX as u128 {
            return Err(SimError::Invalid { field: "cycle duration", value: cycle as f64 * 1e-6, legal: "< 2^64 ps" });
        }
        Ok(Timing {
            cooling,
            attempt,
            trigger_offset: pump + delay,
            excite_offset: pump + delay + trigger,
            cycle: cycle as u64,
            stride: cycle as u64 + dead,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Timing {
    cooling: u64,
    attempt: u64,
    trigger_offset: u64,
    excite_offset: u64,
    cycle: u64,
    stride: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunLength {
    Attempts(u64),
    /// Wallclock seconds; only fully completed attempts are counted.
    Duration(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPlan {
    pub length: RunLength,
    pub master_seed: u64,
    pub tick_ps: u32,
}

impl RunPlan {
    pub fn attempts(attempts: u64, master_seed: u64) -> Self {
        Self { length: RunLength::Attempts(attempts), master_seed, tick_ps: DEFAULT_TICK_PS }
    }

    pub fn duration(seconds: f64, master_seed: u64) -> Self {
        Self { length: RunLength::Duration(seconds), master_seed, tick_ps: DEFAULT_TICK_PS }
    }
}

/// Resolved timing of a run, in integer picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub cycles: u64,
    pub attempts: u64,
    pub attempts_per_cycle: u64,
    pub cooling_ps: u64,
    pub attempt_ps: u64,
    pub cycle_ps: u64,
    /// Cycle duration plus inter-cycle dead time.
    pub cycle_stride_ps: u64,
    /// Trigger rising edge relative to attempt start.
    pub trigger_offset_ps: u64,
    /// Excitation leading edge relative to attempt start.
    pub excite_offset_ps: u64,
    pub wallclock_ps: u128,
}

impl Schedule {
    pub fn cycle_start_ps(&self, cycle: u64) -> u128 {
        cycle as u128 * self.cycle_stride_ps as u128
    }

    pub fn attempt_start_ps(&self, attempt: u64) -> u128 {
        let cycle = attempt / self.attempts_per_cycle;
        let j = attempt % self.attempts_per_cycle;
        self.cycle_start_ps(cycle) + self.cooling_ps as u128 + j as u128 * self.attempt_ps as u128
    }

    pub fn trigger_epoch_ps(&self, attempt: u64) -> u128 {
        self.attempt_start_ps(attempt) + self.trigger_offset_ps as u128
    }

    /// Lazily enumerated trigger epochs of every attempt.
    pub fn trigger_epochs(&self) -> impl Iterator<Item = u128> + '_ {
        (0..self.attempts).map(|a| self.trigger_epoch_ps(a))
    }

    /// Attempts in cycle `cycle` (the last one may be partial).
    pub fn attempts_in_cycle(&self, cycle: u64) -> u64 {
        let before = cycle * self.attempts_per_cycle;
        self.attempts.saturating_sub(before).min(self.attempts_per_cycle)
    }

    /// Attempt repetition rate inside a cycle.
    pub fn attempt_rate_hz(&self) -> f64 {
        1e12 / self.attempt_ps as f64
    }

    pub fn wallclock_s(&self) -> f64 {
        self.wallclock_ps as f64 * 1e-12
    }
}

pub fn build_schedule(seq: &SequenceSpec, plan: &RunPlan) -> Result<Schedule, SimError> {
    let t = seq.timing()?;
    if plan.tick_ps == 0 {
        return Err(SimError::Invalid { field: "tick_ps", value: 0.0, legal: "(0, 2^32)" });
    }
    let apc = seq.attempts_per_cycle as u64;
    let attempts = match plan.length {
        RunLength::Attempts(n) => n,
        RunLength::Duration(seconds) => {
            if !(seconds.is_finite() && seconds >= 0.0) {
                return Err(SimError::Invalid { field: "run.duration_s", value: seconds, legal: "[0, inf)" });
            }
            let total = (seconds * 1e12).round() as u128;
            let (cycle, stride) = (t.cycle as u128, t.stride as u128);
            let full = if total >= cycle { (total - cycle) / stride + 1 } else { 0 };
            let rest = total.saturating_sub(full * stride);
            let partial = if rest > t.cooling as u128 {
                ((rest - t.cooling as u128) / t.attempt as u128).min(apc as u128)
            } else {
                0
            };
            u64::try_from(full * apc as u128 + partial).map_err(|_| SimError::Invalid {
                field: "run.duration_s",
                value: seconds,
                legal: "fewer than 2^64 attempts",
            })?
        }
    };
    let cycles = attempts.div_ceil(apc);
    let wallclock_ps = if attempts == 0 {
        0
    } else {
        let last = cycles - 1;
        let in_last = attempts - last * apc;
        last as u128 * t.stride as u128 + t.cooling as u128 + in_last as u128 * t.attempt as u128
    };
    Ok(Schedule {
        cycles,
        attempts,
        attempts_per_cycle: apc,
        cooling_ps: t.cooling,
        attempt_ps: t.attempt,
        cycle_ps: t.cycle,
        cycle_stride_ps: t.stride,
        trigger_offset_ps: t.trigger_offset,
        excite_offset_ps: t.excite_offset,
        wallclock_ps,
    })
}
