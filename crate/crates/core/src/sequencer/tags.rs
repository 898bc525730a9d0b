use std::io;

/// Detector / reference channels of the tag stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Channel {
    /// Synchronization pulse, one per photon production attempt.
    Trigger = 0,
    /// Photomultiplier, 493 nm.
    Pmt = 1,
    /// Nanowire detector, 1287 nm.
    Snspd = 2,
}

pub const CHANNEL_COUNT: u8 = 3;

impl Channel {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Self::Trigger),
            1 => Some(Self::Pmt),
            2 => Some(Self::Snspd),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Trigger => "trigger",
            Self::Pmt => "pmt_493nm",
            Self::Snspd => "snspd_1287nm",
        }
    }
}

/// One detection event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TagRecord {
    pub channel: u8,
    pub ticks: u64,
}

impl TagRecord {
    pub fn new(channel: Channel, ticks: u64) -> Self {
        Self { channel: channel.id(), ticks }
    }

    /// Sort key used for the global merge order.
    #[inline]
    pub fn order_key(&self) -> (u64, u8) {
        (self.ticks, self.channel)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamHeader {
    pub tick_ps: u32,
    pub channel_count: u8,
    pub attempt_count: u64,
    pub master_seed: u64,
    pub config_digest: [u8; 32],
}

impl StreamHeader {
    pub fn tick_ns(&self) -> f64 {
        self.tick_ps as f64 * 1e-3
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagStream {
    pub header: StreamHeader,
    pub records: Vec<TagRecord>,
}

impl TagStream {
    pub fn empty(header: StreamHeader) -> Self {
        Self { header, records: Vec::new() }
    }

    /// Index of the first record breaking global tick order, if any.
    pub fn first_disorder(&self) -> Option<usize> {
        self.records.windows(2).position(|w| w[1].ticks < w[0].ticks).map(|i| i + 1)
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.records.iter().filter(|r| r.channel == channel.id()).count()
    }
}

/// Consumer of time-ordered record batches.
pub trait TagSink {
    fn accept(&mut self, records: &[TagRecord]) -> io::Result<()>;
}

impl TagSink for Vec<TagRecord> {
    fn accept(&mut self, records: &[TagRecord]) -> io::Result<()> {
        self.extend_from_slice(records);
        Ok(())
    }
}

impl<S: TagSink + ?Sized> TagSink for &mut S {
    fn accept(&mut self, records: &[TagRecord]) -> io::Result<()> {
        (**self).accept(records)
    }
}

/// Fan one stream out to two sinks.
impl<A: TagSink, B: TagSink> TagSink for (A, B) {
    fn accept(&mut self, records: &[TagRecord]) -> io::Result<()> {
        self.0.accept(records)?;
        self.1.accept(records)
    }
}
