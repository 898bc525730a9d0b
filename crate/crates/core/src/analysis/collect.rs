use std::io;

use super::{ns_to_ps, AnalysisError, Histogram, HitList, WindowSpec, DEFAULT_BIN_NS};
use crate::sequencer::{Channel, TagRecord, TagSink, DEFAULT_TICK_PS};

/// A detection expressed relative to the trigger that precedes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignedDetection {
    pub channel: u8,
    /// Zero-based index of the governing trigger, i.e. the attempt.
    pub attempt: u64,
    pub offset_ticks: u64,
}

/// Assigns each detection to the most recent trigger.
#[derive(Debug, Clone)]
pub struct TriggerAligner {
    attempts: u64,
    last_trigger: Option<u64>,
    orphans: [u64; 256],
}

impl TriggerAligner {
    pub fn new() -> Self {
        Self { attempts: 0, last_trigger: None, orphans: [0; 256] }
    }

    #[inline]
    pub fn push(&mut self, r: &TagRecord) -> Option<AlignedDetection> {
        if r.channel == Channel::Trigger.id() {
            self.last_trigger = Some(r.ticks);
            self.attempts += 1;
            return None;
        }
        match self.last_trigger {
            Some(t) => {
                Some(AlignedDetection { channel: r.channel, attempt: self.attempts - 1, offset_ticks: r.ticks - t })
            }
            None => {
                self.orphans[r.channel as usize] += 1;
                None
            }
        }
    }

    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    /// Detections on `channel` seen before any trigger.
    pub fn orphans(&self, channel: u8) -> u64 {
        self.orphans[channel as usize]
    }
}

impl Default for TriggerAligner {
    fn default() -> Self {
        Self::new()
    }
}

/// Binning and retention range for a [`StreamCollector`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectorSettings {
    pub tick_ps: u32,
    pub bin_width_ns: f64,
    /// Trigger-relative start of the retained range.
    pub range_start_ns: f64,
    pub range_end_ns: f64,
}

impl Default for CollectorSettings {
    fn default() -> Self {
        Self { tick_ps: DEFAULT_TICK_PS, bin_width_ns: DEFAULT_BIN_NS, range_start_ns: 0.0, range_end_ns: 1000.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Event {
    attempt: u64,
    offset_ps: i64,
}

#[derive(Debug, Clone, Default)]
struct ChannelAccum {
    counts: Vec<u64>,
    events: Vec<Event>,
    out_of_range: u64,
}

/// Single-pass collector over a time-ordered stream, accumulating
/// histograms and in-range detections of both detector channels.
#[derive(Debug, Clone)]
pub struct StreamCollector {
    tick_ps: i64,
    bin_ps: i64,
    start_ps: i64,
    end_ps: i64,
    aligner: TriggerAligner,
    channels: [ChannelAccum; 2],
    foreign: u64,
}

impl StreamCollector {
    pub fn new(settings: CollectorSettings) -> Result<Self, AnalysisError> {
        if settings.tick_ps == 0 {
            return Err(AnalysisError::Invalid { field: "tick_ps", value: 0.0, legal: "> 0" });
        }
        let bin_ps = ns_to_ps("bin width", settings.bin_width_ns)?;
        let start_ps = ns_to_ps("histogram range start", settings.range_start_ns)?;
        let end_ps = ns_to_ps("histogram range end", settings.range_end_ns)?;
        if bin_ps <= 0 {
            return Err(AnalysisError::Invalid {
                field: "bin width",
                value: settings.bin_width_ns,
                legal: ">= 0.001 ns",
            });
        }
        if end_ps <= start_ps {
            return Err(AnalysisError::Invalid {
                field: "histogram range end",
                value: settings.range_end_ns,
                legal: "> range start",
            });
        }
        let bins = (end_ps - start_ps + bin_ps - 1) / bin_ps;
        let accum = ChannelAccum { counts: vec![0; bins as usize], ..ChannelAccum::default() };
        Ok(Self {
            tick_ps: settings.tick_ps as i64,
            bin_ps,
            start_ps,
            end_ps: start_ps + bins * bin_ps,
            aligner: TriggerAligner::new(),
            channels: [accum.clone(), accum],
            foreign: 0,
        })
    }

    #[inline]
    pub fn push(&mut self, r: &TagRecord) {
        let Some(d) = self.aligner.push(r) else {
            return;
        };
        let slot = match d.channel {
            1 => 0,
            2 => 1,
            _ => {
                self.foreign += 1;
                return;
            }
        };
        let acc = &mut self.channels[slot];
        let offset_ps = (d.offset_ticks as i64).saturating_mul(self.tick_ps);
        if offset_ps < self.start_ps || offset_ps >= self.end_ps {
            acc.out_of_range += 1;
            return;
        }
        acc.counts[((offset_ps - self.start_ps) / self.bin_ps) as usize] += 1;
        acc.events.push(Event { attempt: d.attempt, offset_ps });
    }

    pub fn attempts(&self) -> u64 {
        self.aligner.attempts()
    }

    pub fn finish(self) -> CollectedRun {
        let attempts = self.aligner.attempts();
        let make = |slot: usize, acc: ChannelAccum| ChannelData {
            channel: slot as u8 + 1,
            histogram: Histogram { bin_width_ps: self.bin_ps, origin_ps: self.start_ps, counts: acc.counts, attempts },
            events: acc.events,
            orphans: self.aligner.orphans(slot as u8 + 1),
            out_of_range: acc.out_of_range,
        };
        let [a, b] = self.channels;
        CollectedRun {
            tick_ps: self.tick_ps as u32,
            attempts,
            channels: [make(0, a), make(1, b)],
            foreign: self.foreign,
        }
    }
}

impl TagSink for StreamCollector {
    fn accept(&mut self, records: &[TagRecord]) -> io::Result<()> {
        for r in records {
            self.push(r);
        }
        Ok(())
    }
}

/// One detector channel of a collected run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelData {
    pub channel: u8,
    pub histogram: Histogram,
    events: Vec<Event>,
    /// Detections before the first trigger.
    pub orphans: u64,
    /// Detections outside the histogram range.
    pub out_of_range: u64,
}

impl ChannelData {
    /// Exact number of retained detections inside `w`.
    pub fn window_count(&self, w: &WindowSpec) -> Result<u64, AnalysisError> {
        let (a, b) = w.bounds_ps()?;
        Ok(self.events.iter().filter(|e| e.offset_ps >= a && e.offset_ps < b).count() as u64)
    }

    /// Attempts with at least one detection inside `w`.
    pub fn hits(&self, w: &WindowSpec) -> Result<HitList, AnalysisError> {
        let (a, b) = w.bounds_ps()?;
        let mut hits: Vec<u64> = Vec::new();
        for e in &self.events {
            if e.offset_ps >= a && e.offset_ps < b && hits.last() != Some(&e.attempt) {
                hits.push(e.attempt);
            }
        }
        Ok(HitList { attempts: self.histogram.attempts, hits })
    }

    /// Trigger-relative delays (ns) of retained detections.
    pub fn delays_ns(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.offset_ps as f64 * 1e-3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectedRun {
    pub tick_ps: u32,
    pub attempts: u64,
    channels: [ChannelData; 2],
    /// Detections on channels other than 1 and 2.
    pub foreign: u64,
}

impl CollectedRun {
    pub fn channel(&self, channel: Channel) -> Result<&ChannelData, AnalysisError> {
        match channel {
            Channel::Pmt => Ok(&self.channels[0]),
            Channel::Snspd => Ok(&self.channels[1]),
            Channel::Trigger => Err(AnalysisError::BadChannel(0)),
        }
    }

    pub fn pmt(&self) -> &ChannelData {
        &self.channels[0]
    }

    pub fn snspd(&self) -> &ChannelData {
        &self.channels[1]
    }
}

/// Trigger-relative histogram of one detector channel over `[start, end)` ns.
pub fn build_histogram<'a, I>(
    records: I,
    tick_ps: u32,
    channel: Channel,
    bin_width_ns: f64,
    range_ns: (f64, f64),
) -> Result<ChannelData, AnalysisError>
where
    I: IntoIterator<Item = &'a TagRecord>,
{
    if channel == Channel::Trigger {
        return Err(AnalysisError::BadChannel(0));
    }
    let mut c = StreamCollector::new(CollectorSettings {
        tick_ps,
        bin_width_ns,
        range_start_ns: range_ns.0,
        range_end_ns: range_ns.1,
    })?;
    for r in records {
        c.push(r);
    }
    Ok(c.finish().channel(channel)?.clone())
}
