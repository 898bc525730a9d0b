//! Text twin of the binary format: `#` header lines, a `channel,ticks`
//! column line, then one record per line.

use std::io::{BufRead, BufReader, Read, Write};

use super::TagIoError;
use crate::sequencer::{StreamHeader, TagRecord, TagStream};

const TITLE: &str = "# QTAG-CSV 1";

pub fn write_tags_csv<W: Write>(stream: &TagStream, mut out: W) -> Result<u64, TagIoError> {
    if let Some(i) = stream.first_disorder() {
        return Err(TagIoError::Unordered { index: i as u64 });
    }
    let h = &stream.header;
    let mut text = String::with_capacity(256 + stream.records.len() * 16);
    use std::fmt::Write as _;
    writeln!(text, "{TITLE}").unwrap();
    writeln!(text, "# tick_ps={}", h.tick_ps).unwrap();
    writeln!(text, "# channel_count={}", h.channel_count).unwrap();
    writeln!(text, "# attempt_count={}", h.attempt_count).unwrap();
    writeln!(text, "# master_seed={}", h.master_seed).unwrap();
    writeln!(text, "# config_digest={}", hex::encode(h.config_digest)).unwrap();
    writeln!(text, "channel,ticks").unwrap();
    for r in &stream.records {
        writeln!(text, "{},{}", r.channel, r.ticks).unwrap();
    }
    out.write_all(text.as_bytes())?;
    Ok(text.len() as u64)
}

pub fn read_tags_csv<R: Read>(source: R) -> Result<TagStream, TagIoError> {
    let reader = BufReader::new(source);
    let mut header =
        StreamHeader { tick_ps: 80, channel_count: 3, attempt_count: 0, master_seed: 0, config_digest: [0; 32] };
    let mut records = Vec::new();
    let mut offset = 0u64;
    let mut seen_attempts = false;
    for line in reader.lines() {
        let line = line?;
        let at = offset;
        offset += line.len() as u64 + 1;
        let t = line.trim();
        if t.is_empty() || t == "channel,ticks" {
            continue;
        }
        if let Some(meta) = t.strip_prefix('#') {
            if let Some((k, v)) = meta.trim().split_once('=') {
                let bad = |what: &str| TagIoError::format(at, None, format!("bad {what} `{v}`"));
                let v = v.trim();
                match k.trim() {
                    "tick_ps" => {
                        header.tick_ps = v.parse().map_err(|_| bad("tick_ps"))?;
                        if header.tick_ps == 0 {
                            return Err(bad("tick_ps"));
                        }
                    }
                    "channel_count" => header.channel_count = v.parse().map_err(|_| bad("channel_count"))?,
                    "attempt_count" => {
                        header.attempt_count = v.parse().map_err(|_| bad("attempt_count"))?;
                        seen_attempts = true;
                    }
                    "master_seed" => header.master_seed = v.parse().map_err(|_| bad("master_seed"))?,
                    "config_digest" => {
                        hex::decode_to_slice(v, &mut header.config_digest).map_err(|_| bad("config_digest"))?
                    }
                    _ => {}
                }
            }
            continue;
        }
        let index = records.len() as u64;
        let parsed = t
            .split_once(',')
            .and_then(|(c, k)| Some(TagRecord { channel: c.trim().parse().ok()?, ticks: k.trim().parse().ok()? }));
        let r = parsed
            .ok_or_else(|| TagIoError::format(at, Some(index), format!("expected `channel,ticks`, got `{t}`")))?;
        if records.last().is_some_and(|p: &TagRecord| r.ticks < p.ticks) {
            return Err(TagIoError::format(at, Some(index), "ticks go back in time"));
        }
        records.push(r);
    }
    if !seen_attempts {
        header.attempt_count = records.iter().filter(|r| r.channel == 0).count() as u64;
    }
    Ok(TagStream { header, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequencer::Channel;

    #[test]
    fn round_trip() {
        let s = TagStream {
            header: StreamHeader {
                tick_ps: 80,
                channel_count: 3,
                attempt_count: 1,
                master_seed: 42,
                config_digest: [0xAB; 32],
            },
            records: vec![TagRecord::new(Channel::Trigger, 10), TagRecord::new(Channel::Pmt, 300)],
        };
        let mut out = Vec::new();
        write_tags_csv(&s, &mut out).unwrap();
        assert_eq!(read_tags_csv(&out[..]).unwrap(), s);
    }

    #[test]
    fn bare_records_infer_attempts() {
        let s = read_tags_csv("0,1\n1,5\n0,9\n".as_bytes()).unwrap();
        assert_eq!(s.header.attempt_count, 2);
        assert_eq!(s.records.len(), 3);
    }

    #[test]
    fn errors_name_the_record() {
        match read_tags_csv("0,1\n1,x\n".as_bytes()) {
            Err(TagIoError::Format { offset: 4, record: Some(1), .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(read_tags_csv("0,5\n0,4\n".as_bytes()).is_err());
    }
}
