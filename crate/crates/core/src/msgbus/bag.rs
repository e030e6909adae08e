//! Bag files: ordered envelope logs used for record and replay.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! 0..8    magic  "VTUIBAG\0"
//! 8..12   u32    format version (1)
//! 12..16  u32    reserved, zero
//!         u64    start stamp (ns)
//!         u64    duration (ns)
//!         u32    topic count, then per topic: str16 topic, str16 type_tag
//! records until end of file:
//!         u32    record length in bytes (excluding this prefix)
//!         str16 topic, str16 type_tag, str16 publisher, u64 seq, u64 stamp,
//!         payload = remaining bytes of the record
//! ```
//!
//! `str16` is a u16 byte length followed by UTF-8 bytes.

use std::collections::BTreeMap;
use std::path::Path;

use super::codec::{ByteReader, ByteWriter, DecodeError};
use super::{BusError, MessageEnvelope};

pub const BAG_MAGIC: [u8; 8] = *b"VTUIBAG\0";
pub const BAG_VERSION: u32 = 1;
pub const BAG_HEADER_LEN: usize = 16;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BagFile {
    /// topic -> type_tag
    pub topics: BTreeMap<String, String>,
    /// Stamp of the first record (0 for an empty bag).
    pub start: u64,
    /// Last stamp minus first stamp.
    pub duration: u64,
    pub records: Vec<MessageEnvelope>,
}

fn record_order(a: &MessageEnvelope, b: &MessageEnvelope) -> std::cmp::Ordering {
    (a.stamp, &a.publisher, a.seq, &a.topic).cmp(&(b.stamp, &b.publisher, b.seq, &b.topic))
}

impl BagFile {
    /// Sorts the records and derives the topic table and time span.
    pub fn from_records(mut records: Vec<MessageEnvelope>) -> Self {
        records.sort_by(record_order);
        let topics = records
            .iter()
            .map(|r| (r.topic.clone(), r.type_tag.clone()))
            .collect();
        let (start, duration) = match (records.first(), records.last()) {
            (Some(f), Some(l)) => (f.stamp, l.stamp - f.stamp),
            _ => (0, 0),
        };
        Self {
            topics,
            start,
            duration,
            records,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn records_on<'a>(
        &'a self,
        topic: &'a str,
    ) -> impl Iterator<Item = &'a MessageEnvelope> + 'a {
        self.records.iter().filter(move |r| r.topic == topic)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(&BAG_MAGIC).u32(BAG_VERSION).u32(0);
        w.u64(self.start).u64(self.duration);
        w.u32(self.topics.len() as u32);
        for (topic, tag) in &self.topics {
            w.str16(topic).str16(tag);
        }
        for rec in &self.records {
            let mut body = ByteWriter::new();
            body.str16(&rec.topic)
                .str16(&rec.type_tag)
                .str16(&rec.publisher)
                .u64(rec.seq)
                .u64(rec.stamp)
                .bytes(&rec.payload);
            let body = body.into_inner();
            w.u32(body.len() as u32).bytes(&body);
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BusError> {
        Self::parse(bytes).map_err(|e| BusError::BagCorrupt(e.to_string()))
    }

    fn parse(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = ByteReader::new(bytes);
        if r.take(8)? != BAG_MAGIC {
            return Err(DecodeError::Invalid("bad magic".into()));
        }
        let version = r.u32()?;
        if version != BAG_VERSION {
            return Err(DecodeError::Invalid(format!(
                "unsupported version {version}"
            )));
        }
        let _reserved = r.u32()?;
        let start = r.u64()?;
        let duration = r.u64()?;
        let n_topics = r.u32()? as usize;
        let mut topics = BTreeMap::new();
        for _ in 0..n_topics {
            let topic = r.str16()?;
            let tag = r.str16()?;
            topics.insert(topic, tag);
        }
        let mut records: Vec<MessageEnvelope> = Vec::new();
        while r.remaining() > 0 {
            let at = r.position();
            let len = r.u32()? as usize;
            let mut body = ByteReader::new(r.take(len)?);
            let rec = MessageEnvelope {
                topic: body.str16()?,
                type_tag: body.str16()?,
                publisher: body.str16()?,
                seq: body.u64()?,
                stamp: body.u64()?,
                payload: body.rest().to_vec(),
            };
            match topics.get(&rec.topic) {
                Some(tag) if *tag == rec.type_tag => {}
                Some(_) => {
                    return Err(DecodeError::Invalid(format!(
                        "record at byte {at}: type_tag mismatch on {}",
                        rec.topic
                    )))
                }
                None => {
                    return Err(DecodeError::Invalid(format!(
                        "record at byte {at}: topic {} missing from table",
                        rec.topic
                    )))
                }
            }
            if let Some(prev) = records.last() {
                if record_order(prev, &rec).is_gt() {
                    return Err(DecodeError::Invalid(format!(
                        "record at byte {at} out of order"
                    )));
                }
            }
            records.push(rec);
        }
        Ok(Self {
            topics,
            start,
            duration,
            records,
        })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), BusError> {
        std::fs::write(path, self.to_bytes()).map_err(BusError::SinkWrite)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, BusError> {
        let bytes = std::fs::read(path.as_ref())
            .map_err(|e| BusError::BagCorrupt(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_bytes(&bytes)
    }

    /// Canonical form for comparing runs: strips `replay:` publisher prefixes,
    /// makes stamps relative to the first record and renumbers sequence
    /// numbers per (publisher, topic) from zero.
    pub fn normalized(&self) -> BagFile {
        let mut seqs: BTreeMap<(String, String), u64> = BTreeMap::new();
        let records = self
            .records
            .iter()
            .map(|r| {
                let mut publisher = r.publisher.as_str();
                while let Some(rest) = publisher.strip_prefix("replay:") {
                    publisher = rest;
                }
                let slot = seqs
                    .entry((publisher.to_owned(), r.topic.clone()))
                    .or_insert(0);
                let seq = *slot;
                *slot += 1;
                MessageEnvelope {
                    topic: r.topic.clone(),
                    type_tag: r.type_tag.clone(),
                    publisher: publisher.to_owned(),
                    seq,
                    stamp: r.stamp - self.start,
                    payload: r.payload.clone(),
                }
            })
            .collect();
        let mut out = BagFile::from_records(records);
        out.start = 0;
        out
    }

    /// Human-readable summary (`bag info`).
    pub fn info(&self) -> BagInfo {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.topic.clone()).or_default() += 1;
        }
        BagInfo {
            records: self.records.len(),
            duration_s: self.duration as f64 * 1e-9,
            topics: self
                .topics
                .iter()
                .map(|(t, tag)| (t.clone(), tag.clone(), counts.get(t).copied().unwrap_or(0)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BagInfo {
    pub records: usize,
    pub duration_s: f64,
    /// (topic, type_tag, record count)
    pub topics: Vec<(String, String, usize)>,
}

impl std::fmt::Display for BagInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "records: {}", self.records)?;
        writeln!(f, "duration: {:.6} s", self.duration_s)?;
        writeln!(f, "topics: {}", self.topics.len())?;
        for (topic, tag, n) in &self.topics {
            writeln!(f, "  {topic:<40} {tag:<16} {n}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(topic: &str, publisher: &str, seq: u64, stamp: u64) -> MessageEnvelope {
        MessageEnvelope {
            topic: topic.into(),
            type_tag: "T".into(),
            publisher: publisher.into(),
            seq,
            stamp,
            payload: vec![1, 2, 3],
        }
    }

    #[test]
    fn empty_bag_has_valid_header() {
        let bag = BagFile::from_records(vec![]);
        let bytes = bag.to_bytes();
        assert_eq!(&bytes[..8], &BAG_MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(bytes.len(), BAG_HEADER_LEN + 8 + 8 + 4);
        assert_eq!(BagFile::from_bytes(&bytes).unwrap(), bag);
    }

    #[test]
    fn sorts_by_stamp_then_publisher_then_seq() {
        let bag = BagFile::from_records(vec![
            env("/a", "n2", 0, 5),
            env("/a", "n1", 1, 5),
            env("/a", "n1", 0, 5),
            env("/a", "n3", 0, 1),
        ]);
        let order: Vec<_> = bag
            .records
            .iter()
            .map(|r| (r.publisher.as_str(), r.seq))
            .collect();
        assert_eq!(order, vec![("n3", 0), ("n1", 0), ("n1", 1), ("n2", 0)]);
        assert_eq!(bag.start, 1);
        assert_eq!(bag.duration, 4);
    }

    #[test]
    fn rejects_corruption() {
        let bag = BagFile::from_records(vec![env("/a", "n", 0, 1), env("/a", "n", 1, 2)]);
        let mut bytes = bag.to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            BagFile::from_bytes(&bytes),
            Err(BusError::BagCorrupt(_))
        ));

        let bytes = bag.to_bytes();
        assert!(BagFile::from_bytes(&bytes[..bytes.len() - 4]).is_err());

        // unknown topic in a record
        let mut other = bag.clone();
        other.topics.clear();
        assert!(BagFile::from_bytes(&other.to_bytes()).is_err());

        // out-of-order records
        let mut other = bag.clone();
        other.records.reverse();
        assert!(BagFile::from_bytes(&other.to_bytes()).is_err());
    }

    #[test]
    fn normalization_strips_replay_prefix_and_offsets() {
        let a = BagFile::from_records(vec![env("/a", "n", 7, 100), env("/a", "n", 8, 150)]);
        let b = BagFile::from_records(vec![
            env("/a", "replay:n", 0, 1000),
            env("/a", "replay:n", 1, 1050),
        ]);
        assert_eq!(a.normalized(), b.normalized());
        assert_eq!(a.normalized().records[1].stamp, 50);
    }
}
