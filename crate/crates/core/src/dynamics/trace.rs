use std::io::{self, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Point;

const RLE_MAGIC: &[u8; 4] = b"CLRL";
const RLE_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Csv,
    Rle,
}

impl FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "rle" => Ok(Self::Rle),
            other => Err(format!("unknown trace format {other:?}")),
        }
    }
}

/// The levels `ℓ_1..ℓ_N` of one orbit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelTrace {
    alpha: String,
    base: Point,
    levels: Vec<i64>,
    max_abs: i64,
}

impl LevelTrace {
    pub fn new(alpha: String, base: Point, levels: Vec<i64>) -> Self {
        let max_abs = levels.iter().map(|l| l.abs()).max().unwrap_or(0);
        Self {
            alpha,
            base,
            levels,
            max_abs,
        }
    }

    pub fn alpha(&self) -> &str {
        &self.alpha
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `ℓ_k`, with `ℓ_0 = 0`.
    pub fn level(&self, k: usize) -> i64 {
        if k == 0 {
            0
        } else {
            self.levels[k - 1]
        }
    }

    /// `ℓ_1..ℓ_N`.
    pub fn levels(&self) -> &[i64] {
        &self.levels
    }

    pub fn max_abs(&self) -> i64 {
        self.max_abs
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,level")?;
        for (i, l) in self.levels.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, l)?;
        }
        Ok(())
    }

    /// Run-length encoding of the monotone segments of the trace.
    ///
    /// Layout: the magic `CLRL`, a version byte, the step count as a
    /// little-endian `u64`, then one zigzag LEB128 varint per maximal run of
    /// equal steps: `+r` for `r` consecutive `+1` steps, `-r` for `r`
    /// consecutive `-1` steps. The walk starts at level 0.
    pub fn write_rle<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(RLE_MAGIC)?;
        out.write_all(&[RLE_VERSION])?;
        out.write_all(&(self.levels.len() as u64).to_le_bytes())?;
        let mut prev = 0i64;
        let mut run = 0i64;
        for &l in &self.levels {
            let step = l - prev;
            prev = l;
            if run != 0 && run.signum() != step {
                write_varint(&mut out, zigzag(run))?;
                run = 0;
            }
            run += step;
        }
        if run != 0 {
            write_varint(&mut out, zigzag(run))?;
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, format: TraceFormat, out: W) -> io::Result<()> {
        match format {
            TraceFormat::Csv => self.write_csv(out),
            TraceFormat::Rle => self.write_rle(out),
        }
    }
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

fn unzigzag(v: u64) -> i64 {
    ((v >> 1) as i64) ^ -((v & 1) as i64)
}

fn write_varint<W: Write>(out: &mut W, mut v: u64) -> io::Result<()> {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            return out.write_all(&[byte]);
        }
        out.write_all(&[byte | 0x80])?;
    }
}

fn read_varint<R: Read>(input: &mut R) -> io::Result<Option<u64>> {
    let mut value = 0u64;
    let mut shift = 0;
    loop {
        let mut byte = [0u8];
        if input.read(&mut byte)? == 0 {
            return if shift == 0 {
                Ok(None)
            } else {
                Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated varint"))
            };
        }
        if shift >= 64 {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "varint overflow"));
        }
        value |= u64::from(byte[0] & 0x7f) << shift;
        if byte[0] & 0x80 == 0 {
            return Ok(Some(value));
        }
        shift += 7;
    }
}

/// Decodes the run-length format back to `ℓ_1..ℓ_N`.
pub fn read_rle<R: Read>(mut input: R) -> io::Result<Vec<i64>> {
    let invalid = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut header = [0u8; 13];
    input.read_exact(&mut header)?;
    if &header[..4] != RLE_MAGIC || header[4] != RLE_VERSION {
        return Err(invalid("not a level trace"));
    }
    let n = u64::from_le_bytes(header[5..13].try_into().expect("8 bytes"));
    let mut levels = Vec::with_capacity(n as usize);
    let mut level = 0i64;
    while let Some(run) = read_varint(&mut input)? {
        let run = unzigzag(run);
        if run == 0 {
            return Err(invalid("empty run"));
        }
        for _ in 0..run.unsigned_abs() {
            level += run.signum();
            levels.push(level);
        }
    }
    if levels.len() as u64 != n {
        return Err(invalid("step count mismatch"));
    }
    Ok(levels)
}
