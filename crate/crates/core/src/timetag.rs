//! PTAG time-tag files and k-way channel merging.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "PTAG"
//!      4     1  version = 0x01
//!      5     3  reserved, zero
//!      8     4  resolution_ps (u32)
//!     12     1  channel_count (u8)
//!     13     1  reserved, zero
//!     14     9  record 0: t_ps (u64), channel (u8)
//!     23     9  record 1 ...
//! ```
//!
//! Records are sorted by time, ties by ascending channel. Writers refuse
//! unsorted input; readers report the first out-of-order record.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::detection::TimeTag;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PTAG";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 14;
pub const RECORD_LEN: usize = 9;

/// I/O buffer size for streaming readers and writers.
pub const IO_BUFFER_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagFileHeader {
    pub resolution_ps: u32,
    pub channel_count: u8,
}

impl TagFileHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4] = VERSION;
        b[8..12].copy_from_slice(&self.resolution_ps.to_le_bytes());
        b[12] = self.channel_count;
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self> {
        if b[0..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:02x?}", &b[0..4])));
        }
        if b[4] != VERSION {
            return Err(Error::Format(format!("unsupported version {:#04x}", b[4])));
        }
        Ok(TagFileHeader {
            resolution_ps: u32::from_le_bytes(b[8..12].try_into().unwrap()),
            channel_count: b[12],
        })
    }
}

fn encode(tag: &TimeTag) -> [u8; RECORD_LEN] {
    let mut r = [0u8; RECORD_LEN];
    r[0..8].copy_from_slice(&tag.t.to_le_bytes());
    r[8] = tag.channel;
    r
}

/// Streaming PTAG writer.
pub struct TagWriter<W: Write> {
    out: W,
    last: Option<TimeTag>,
    count: u64,
}

impl<W: Write> TagWriter<W> {
    pub fn new(mut out: W, header: &TagFileHeader) -> Result<Self> {
        out.write_all(&header.to_bytes())?;
        Ok(TagWriter { out, last: None, count: 0 })
    }

    pub fn write(&mut self, tag: TimeTag) -> Result<()> {
        if let Some(prev) = self.last {
            if tag < prev {
                return Err(Error::Precondition(format!(
                    "tag {} ({}, ch {}) sorts before its predecessor ({}, ch {})",
                    self.count, tag.t, tag.channel, prev.t, prev.channel
                )));
            }
        }
        self.out.write_all(&encode(&tag))?;
        self.last = Some(tag);
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Flush and return the number of records written.
    pub fn finish(mut self) -> Result<u64> {
        self.out.flush()?;
        Ok(self.count)
    }
}

pub fn write_tags<I>(path: impl AsRef<Path>, header: &TagFileHeader, tags: I) -> Result<u64>
where
    I: IntoIterator<Item = TimeTag>,
{
    let file = File::create(path.as_ref()).map_err(|e| with_path(e, path.as_ref()))?;
    let mut w = TagWriter::new(BufWriter::with_capacity(IO_BUFFER_BYTES, file), header)?;
    for tag in tags {
        w.write(tag)?;
    }
    w.finish()
}

fn with_path(e: std::io::Error, path: &Path) -> std::io::Error {
    std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}

/// Streaming PTAG reader; yields records and checks order as it goes.
pub struct TagReader<R: Read> {
    input: R,
    header: TagFileHeader,
    last: Option<TimeTag>,
    index: u64,
    done: bool,
}

impl<R: Read> TagReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut h = [0u8; HEADER_LEN];
        read_exact_or(&mut input, &mut h).map_err(|e| match e {
            ReadFail::Short(n) => Error::Format(format!("file too short for header ({n} bytes)")),
            ReadFail::Io(e) => Error::Io(e),
        })?;
        let header = TagFileHeader::from_bytes(&h)?;
        Ok(TagReader { input, header, last: None, index: 0, done: false })
    }

    pub fn header(&self) -> &TagFileHeader {
        &self.header
    }

    fn next_record(&mut self) -> Result<Option<TimeTag>> {
        let mut r = [0u8; RECORD_LEN];
        match read_exact_or(&mut self.input, &mut r) {
            Ok(()) => {}
            Err(ReadFail::Short(0)) => return Ok(None),
            Err(ReadFail::Short(n)) => {
                return Err(Error::Corrupt(format!(
                    "truncated record {} ({n} of {RECORD_LEN} bytes)",
                    self.index
                )))
            }
            Err(ReadFail::Io(e)) => return Err(Error::Io(e)),
        }
        let tag = TimeTag::new(u64::from_le_bytes(r[0..8].try_into().unwrap()), r[8]);
        if let Some(prev) = self.last {
            if tag < prev {
                return Err(Error::Unsorted {
                    offset: self.index,
                    reason: format!("({}, ch {}) after ({}, ch {})", tag.t, tag.channel, prev.t, prev.channel),
                });
            }
        }
        self.last = Some(tag);
        self.index += 1;
        Ok(Some(tag))
    }
}

impl<R: Read> Iterator for TagReader<R> {
    type Item = Result<TimeTag>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let r = self.next_record().transpose();
        if !matches!(r, Some(Ok(_))) {
            self.done = true;
        }
        r
    }
}

enum ReadFail {
    Short(usize),
    Io(io::Error),
}

fn read_exact_or<R: Read>(input: &mut R, buf: &mut [u8]) -> std::result::Result<(), ReadFail> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => return Err(ReadFail::Short(filled)),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(ReadFail::Io(e)),
        }
    }
    Ok(())
}

pub fn read_tags(path: impl AsRef<Path>) -> Result<(TagFileHeader, TagReader<BufReader<File>>)> {
    let file = File::open(path.as_ref()).map_err(|e| with_path(e, path.as_ref()))?;
    let reader = TagReader::new(BufReader::with_capacity(IO_BUFFER_BYTES, file))?;
    Ok((*reader.header(), reader))
}

/// Write tags as `t_ps,channel` lines.
pub fn export_text<I, W>(tags: I, mut out: W) -> Result<u64>
where
    I: IntoIterator<Item = Result<TimeTag>>,
    W: Write,
{
    let mut n = 0;
    for tag in tags {
        let tag = tag?;
        writeln!(out, "{},{}", tag.t, tag.channel)?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

/// k-way merge of sorted tag streams into one sorted stream.
///
/// Ties on time are broken by channel, then by input position, so the merge
/// is stable.
pub struct MergeChannels<I: Iterator<Item = TimeTag>> {
    inputs: Vec<I>,
    heap: BinaryHeap<Reverse<(TimeTag, usize)>>,
    failed: bool,
}

pub fn merge_channels<I: Iterator<Item = TimeTag>>(streams: Vec<I>) -> MergeChannels<I> {
    let mut inputs = streams;
    let mut heap = BinaryHeap::with_capacity(inputs.len());
    for (i, s) in inputs.iter_mut().enumerate() {
        if let Some(tag) = s.next() {
            heap.push(Reverse((tag, i)));
        }
    }
    MergeChannels { inputs, heap, failed: false }
}

impl<I: Iterator<Item = TimeTag>> Iterator for MergeChannels<I> {
    type Item = Result<TimeTag>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let Reverse((tag, i)) = self.heap.pop()?;
        if let Some(next) = self.inputs[i].next() {
            if next < tag {
                self.failed = true;
                return Some(Err(Error::Unsorted {
                    offset: i as u64,
                    reason: format!(
                        "merge input {i} went backwards: ({}, ch {}) after ({}, ch {})",
                        next.t, next.channel, tag.t, tag.channel
                    ),
                }));
            }
            self.heap.push(Reverse((next, i)));
        }
        Some(Ok(tag))
    }
}
