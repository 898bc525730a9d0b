use std::io::{self, Read, Write};

use super::TagIoError;
use crate::sequencer::{StreamHeader, TagRecord, TagSink, TagStream};

pub const MAGIC: [u8; 4] = *b"QTAG";
pub const VERSION: u16 = 1;
/// magic 4, version 2, tick 4, channel count 1, attempts 8, seed 8, digest 32.
pub const HEADER_LEN: usize = 4 + 2 + 4 + 1 + 8 + 8 + 32;
/// channel 1, ticks 8.
pub const RECORD_LEN: usize = 1 + 8;

const BATCH: usize = 8192;

pub(crate) fn encode_header(h: &StreamHeader) -> [u8; HEADER_LEN] {
    let mut b = [0u8; HEADER_LEN];
    b[0..4].copy_from_slice(&MAGIC);
    b[4..6].copy_from_slice(&VERSION.to_le_bytes());
    b[6..10].copy_from_slice(&h.tick_ps.to_le_bytes());
    b[10] = h.channel_count;
    b[11..19].copy_from_slice(&h.attempt_count.to_le_bytes());
    b[19..27].copy_from_slice(&h.master_seed.to_le_bytes());
    b[27..59].copy_from_slice(&h.config_digest);
    b
}

pub(crate) fn decode_header(b: &[u8; HEADER_LEN]) -> Result<StreamHeader, TagIoError> {
    if b[0..4] != MAGIC {
        return Err(TagIoError::format(0, None, format!("bad magic {:02x?}, expected \"QTAG\"", &b[0..4])));
    }
    let version = u16::from_le_bytes([b[4], b[5]]);
    if version != VERSION {
        return Err(TagIoError::format(4, None, format!("unsupported version {version}")));
    }
    let tick_ps = u32::from_le_bytes(b[6..10].try_into().unwrap());
    if tick_ps == 0 {
        return Err(TagIoError::format(6, None, "tick_ps is zero"));
    }
    Ok(StreamHeader {
        tick_ps,
        channel_count: b[10],
        attempt_count: u64::from_le_bytes(b[11..19].try_into().unwrap()),
        master_seed: u64::from_le_bytes(b[19..27].try_into().unwrap()),
        config_digest: b[27..59].try_into().unwrap(),
    })
}

/// Streaming binary writer. Records must arrive in non-decreasing tick
/// order; an out-of-order record is refused with `InvalidInput`.
pub struct TagWriter<W: Write> {
    inner: W,
    buf: Vec<u8>,
    written: u64,
    records: u64,
    last_ticks: u64,
}

impl<W: Write> TagWriter<W> {
    pub fn new(mut inner: W, header: &StreamHeader) -> io::Result<Self> {
        inner.write_all(&encode_header(header))?;
        Ok(Self {
            inner,
            buf: Vec::with_capacity(BATCH * RECORD_LEN),
            written: HEADER_LEN as u64,
            records: 0,
            last_ticks: 0,
        })
    }

    pub fn write_record(&mut self, r: &TagRecord) -> io::Result<()> {
        if r.ticks < self.last_ticks {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("record {} goes back in time ({} < {})", self.records, r.ticks, self.last_ticks),
            ));
        }
        self.last_ticks = r.ticks;
        self.records += 1;
        self.buf.push(r.channel);
        self.buf.extend_from_slice(&r.ticks.to_le_bytes());
        if self.buf.len() >= BATCH * RECORD_LEN {
            self.flush_buf()?;
        }
        Ok(())
    }

    fn flush_buf(&mut self) -> io::Result<()> {
        self.inner.write_all(&self.buf)?;
        self.written += self.buf.len() as u64;
        self.buf.clear();
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    /// Flush and return the total byte count and the inner writer.
    pub fn finish(mut self) -> io::Result<(u64, W)> {
        self.flush_buf()?;
        self.inner.flush()?;
        Ok((self.written, self.inner))
    }
}

impl<W: Write> TagSink for TagWriter<W> {
    fn accept(&mut self, records: &[TagRecord]) -> io::Result<()> {
        records.iter().try_for_each(|r| self.write_record(r))
    }
}

/// Write a whole stream; returns the byte count.
pub fn write_tags<W: Write>(stream: &TagStream, destination: W) -> Result<u64, TagIoError> {
    if let Some(i) = stream.first_disorder() {
        return Err(TagIoError::Unordered { index: i as u64 });
    }
    let mut w = TagWriter::new(destination, &stream.header)?;
    for r in &stream.records {
        w.write_record(r)?;
    }
    Ok(w.finish()?.0)
}

/// Streaming binary reader that validates the header on open and the tick
/// order of every record.
pub struct TagReader<R: Read> {
    inner: R,
    header: StreamHeader,
    buf: Vec<u8>,
    pos: usize,
    len: usize,
    index: u64,
    last_ticks: u64,
    eof: bool,
}

impl<R: Read> TagReader<R> {
    pub fn new(mut inner: R) -> Result<Self, TagIoError> {
        let mut h = [0u8; HEADER_LEN];
        let got = read_full(&mut inner, &mut h)?;
        if got < 4 || h[0..4] != MAGIC {
            return Err(TagIoError::format(0, None, format!("bad magic {:02x?}, expected \"QTAG\"", &h[..got.min(4)])));
        }
        if got < HEADER_LEN {
            return Err(TagIoError::format(
                got as u64,
                None,
                format!("header truncated after {got} of {HEADER_LEN} bytes"),
            ));
        }
        let header = decode_header(&h)?;
        Ok(Self {
            inner,
            header,
            buf: vec![0; BATCH * RECORD_LEN],
            pos: 0,
            len: 0,
            index: 0,
            last_ticks: 0,
            eof: false,
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    /// Index of the next record to be read.
    pub fn position(&self) -> u64 {
        self.index
    }

    fn refill(&mut self) -> io::Result<()> {
        self.buf.copy_within(self.pos..self.len, 0);
        self.len -= self.pos;
        self.pos = 0;
        while !self.eof && self.len < self.buf.len() {
            match self.inner.read(&mut self.buf[self.len..]) {
                Ok(0) => self.eof = true,
                Ok(n) => self.len += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    pub fn next_record(&mut self) -> Result<Option<TagRecord>, TagIoError> {
        if self.len - self.pos < RECORD_LEN {
            self.refill()?;
            let left = self.len - self.pos;
            if left == 0 {
                return Ok(None);
            }
            if left < RECORD_LEN {
                return Err(TagIoError::format(
                    self.offset(),
                    Some(self.index),
                    format!("truncated record: {left} of {RECORD_LEN} bytes"),
                ));
            }
        }
        let b = &self.buf[self.pos..self.pos + RECORD_LEN];
        let r = TagRecord { channel: b[0], ticks: u64::from_le_bytes(b[1..9].try_into().unwrap()) };
        if r.ticks < self.last_ticks {
            return Err(TagIoError::format(
                self.offset(),
                Some(self.index),
                format!("ticks {} precede the previous record's {}", r.ticks, self.last_ticks),
            ));
        }
        self.last_ticks = r.ticks;
        self.pos += RECORD_LEN;
        self.index += 1;
        Ok(Some(r))
    }

    fn offset(&self) -> u64 {
        HEADER_LEN as u64 + self.index * RECORD_LEN as u64
    }

    /// Append up to `max` records to `out`; returns how many were read.
    pub fn read_batch(&mut self, out: &mut Vec<TagRecord>, max: usize) -> Result<usize, TagIoError> {
        let mut n = 0;
        while n < max {
            match self.next_record()? {
                Some(r) => out.push(r),
                None => break,
            }
            n += 1;
        }
        Ok(n)
    }

    /// Feed every remaining record to `sink` in batches.
    pub fn drain_into<S: TagSink>(&mut self, sink: &mut S) -> Result<u64, TagIoError> {
        let mut batch = Vec::with_capacity(BATCH);
        let mut total = 0;
        loop {
            batch.clear();
            let n = self.read_batch(&mut batch, BATCH)?;
            if n == 0 {
                return Ok(total);
            }
            sink.accept(&batch)?;
            total += n as u64;
        }
    }
}

impl<R: Read> Iterator for TagReader<R> {
    type Item = Result<TagRecord, TagIoError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

pub fn read_tags_binary<R: Read>(source: R) -> Result<TagStream, TagIoError> {
    let mut reader = TagReader::new(source)?;
    let mut records = Vec::new();
    reader.drain_into(&mut records)?;
    Ok(TagStream { header: reader.header.clone(), records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequencer::Channel;

    fn header() -> StreamHeader {
        StreamHeader {
            tick_ps: 80,
            channel_count: 3,
            attempt_count: 2,
            master_seed: 0xDEAD_BEEF,
            config_digest: [7; 32],
        }
    }

    #[test]
    fn header_size() {
        assert_eq!(HEADER_LEN, 59);
        let mut out = Vec::new();
        assert_eq!(write_tags(&TagStream::empty(header()), &mut out).unwrap(), 59);
        assert_eq!(out.len(), 59);
        assert_eq!(&out[..4], b"QTAG");
    }

    #[test]
    fn byte_layout() {
        let s = TagStream { header: header(), records: vec![TagRecord::new(Channel::Snspd, 0x0102_0304_0506_0708)] };
        let mut out = Vec::new();
        write_tags(&s, &mut out).unwrap();
        assert_eq!(&out[59..], &[2, 8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(&out[4..6], &[1, 0]);
        assert_eq!(&out[6..10], &[80, 0, 0, 0]);
    }

    #[test]
    fn refuses_disorder() {
        let s = TagStream {
            header: header(),
            records: vec![TagRecord::new(Channel::Trigger, 5), TagRecord::new(Channel::Pmt, 4)],
        };
        assert!(matches!(write_tags(&s, Vec::new()), Err(TagIoError::Unordered { index: 1 })));
    }

    #[test]
    fn reader_errors() {
        let s = TagStream {
            header: header(),
            records: vec![TagRecord::new(Channel::Trigger, 5), TagRecord::new(Channel::Pmt, 9)],
        };
        let mut bytes = Vec::new();
        write_tags(&s, &mut bytes).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        match read_tags_binary(&bad[..]) {
            Err(TagIoError::Format { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }

        let truncated = &bytes[..bytes.len() - 3];
        match read_tags_binary(truncated) {
            Err(TagIoError::Format { offset, record: Some(1), .. }) => assert_eq!(offset, 59 + 9),
            other => panic!("{other:?}"),
        }

        let mut swapped = bytes.clone();
        swapped[60..68].copy_from_slice(&100u64.to_le_bytes());
        match read_tags_binary(&swapped[..]) {
            Err(TagIoError::Format { record: Some(1), .. }) => {}
            other => panic!("{other:?}"),
        }

        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(read_tags_binary(&version[..]), Err(TagIoError::Format { offset: 4, .. })));
        assert!(read_tags_binary(&bytes[..30]).is_err());
    }
}
