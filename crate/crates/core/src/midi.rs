//! Minimal Standard MIDI File (format 0/1) reader, 1/16-note grid
//! quantization, and a JSON-lines note format for corpus injection without
//! MIDI.
//!
//! Tempo and other meta events are skipped: the grid is score-metrical
//! (1/16 of a quarter note), not wall-clock.

use std::io::Read;

use crate::error::{Error, Result};
use crate::pianoroll::NoteEvent;

/// Merged note events of one piece, still in MIDI ticks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmfPiece {
    pub ticks_per_quarter: u32,
    /// `(pitch, onset_tick, duration_tick)`, sorted by onset then pitch.
    pub notes: Vec<(u8, u32, u32)>,
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::MalformedData("truncated MIDI file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn varlen(&mut self) -> Result<u32> {
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(Error::MalformedData("variable-length quantity longer than 4 bytes".into()))
    }
}

/// Parses an SMF format 0 or 1 file. Tracks are merged; running status is
/// honored; meta and sysex events are skipped.
pub fn parse_smf(bytes: &[u8]) -> Result<SmfPiece> {
    let mut r = Reader { data: bytes, pos: 0 };
    if r.take(4)? != b"MThd" {
        return Err(Error::MalformedData("missing MThd header chunk".into()));
    }
    let header_len = r.u32()?;
    if header_len < 6 {
        return Err(Error::MalformedData("MThd chunk shorter than 6 bytes".into()));
    }
    let format = r.u16()?;
    let n_tracks = r.u16()?;
    let division = r.u16()?;
    r.take(header_len as usize - 6)?;
    if format == 2 {
        return Err(Error::MalformedData("SMF format 2 is not supported".into()));
    }
    if division & 0x8000 != 0 {
        return Err(Error::MalformedData("SMPTE time division is not supported".into()));
    }

    let mut notes: Vec<(u8, u32, u32)> = Vec::new();
    for _ in 0..n_tracks {
        if r.take(4)? != b"MTrk" {
            return Err(Error::MalformedData("expected MTrk chunk".into()));
        }
        let len = r.u32()? as usize;
        let body = r.take(len)?;
        parse_track(body, &mut notes)?;
    }
    notes.sort_unstable_by_key(|&(pitch, onset, _)| (onset, pitch));
    Ok(SmfPiece { ticks_per_quarter: division as u32, notes })
}

fn parse_track(body: &[u8], notes: &mut Vec<(u8, u32, u32)>) -> Result<()> {
    let mut r = Reader { data: body, pos: 0 };
    // FIFO onset queues per (channel, pitch).
    let mut open: std::collections::HashMap<(u8, u8), std::collections::VecDeque<u32>> =
        std::collections::HashMap::new();
    let mut time = 0u32;
    let mut running_status: Option<u8> = None;
    while r.pos < body.len() {
        time += r.varlen()?;
        let first = r.u8()?;
        let status = if first & 0x80 != 0 {
            if first < 0xf0 {
                running_status = Some(first);
            }
            first
        } else {
            r.pos -= 1;
            running_status
                .ok_or_else(|| Error::MalformedData("data byte without running status".into()))?
        };
        match status & 0xf0 {
            0x90 => {
                let pitch = r.u8()? & 0x7f;
                let velocity = r.u8()? & 0x7f;
                let key = (status & 0x0f, pitch);
                if velocity > 0 {
                    open.entry(key).or_default().push_back(time);
                } else {
                    close_note(&mut open, key, time, notes)?;
                }
            }
            0x80 => {
                let pitch = r.u8()? & 0x7f;
                let _velocity = r.u8()?;
                close_note(&mut open, (status & 0x0f, pitch), time, notes)?;
            }
            0xa0 | 0xb0 | 0xe0 => {
                r.take(2)?;
            }
            0xc0 | 0xd0 => {
                r.take(1)?;
            }
            0xf0 => match status {
                0xff => {
                    let _meta_type = r.u8()?;
                    let len = r.varlen()? as usize;
                    r.take(len)?;
                }
                0xf0 | 0xf7 => {
                    let len = r.varlen()? as usize;
                    r.take(len)?;
                }
                other => {
                    return Err(Error::MalformedData(format!(
                        "unsupported system message 0x{other:02x}"
                    )));
                }
            },
            _ => unreachable!(),
        }
    }
    if open.values().any(|q| !q.is_empty()) {
        return Err(Error::MalformedData("dangling note-on without matching note-off".into()));
    }
    Ok(())
}

fn close_note(
    open: &mut std::collections::HashMap<(u8, u8), std::collections::VecDeque<u32>>,
    key: (u8, u8),
    time: u32,
    notes: &mut Vec<(u8, u32, u32)>,
) -> Result<()> {
    let onset = open
        .get_mut(&key)
        .and_then(|q| q.pop_front())
        .ok_or_else(|| Error::MalformedData("note-off without matching note-on".into()))?;
    if time <= onset {
        return Err(Error::MalformedData("note with non-positive duration".into()));
    }
    notes.push((key.1, onset, time - onset));
    Ok(())
}

/// Serializes a piece as a single-track format-0 file with explicit status
/// bytes. Used for fixtures and normal-form round trips.
pub fn write_smf(piece: &SmfPiece) -> Vec<u8> {
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    struct Ev {
        tick: u32,
        off_first: u8, // note-offs before note-ons at the same tick
        pitch: u8,
        on: bool,
    }
    let mut events = Vec::new();
    for &(pitch, onset, duration) in &piece.notes {
        events.push(Ev { tick: onset, off_first: 1, pitch, on: true });
        events.push(Ev { tick: onset + duration, off_first: 0, pitch, on: false });
    }
    events.sort();

    let mut track = Vec::new();
    let mut last = 0u32;
    for ev in &events {
        write_varlen(&mut track, ev.tick - last);
        last = ev.tick;
        track.push(if ev.on { 0x90 } else { 0x80 });
        track.push(ev.pitch);
        track.push(if ev.on { 0x40 } else { 0x00 });
    }
    // End-of-track meta event.
    track.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);

    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(piece.ticks_per_quarter as u16).to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}

fn write_varlen(out: &mut Vec<u8>, mut value: u32) {
    let mut stack = [0u8; 4];
    let mut n = 0;
    loop {
        stack[n] = (value & 0x7f) as u8;
        value >>= 7;
        n += 1;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(stack[i] | if i > 0 { 0x80 } else { 0 });
    }
}

/// Quantizes to the 1/16-note grid. Onsets round to nearest (ties down);
/// durations round likewise but are clamped to at least 1.
pub fn quantize(piece: &SmfPiece) -> Result<Vec<NoteEvent>> {
    if piece.ticks_per_quarter < 4 {
        return Err(Error::InvalidArgument(format!(
            "ticks_per_quarter must be at least 4, got {}",
            piece.ticks_per_quarter
        )));
    }
    let unit = piece.ticks_per_quarter as f64 / 4.0;
    let round_half_down = |x: f64| (x - 0.5).ceil();
    let mut out = Vec::with_capacity(piece.notes.len());
    for &(pitch, onset, duration) in &piece.notes {
        let onset_grid = round_half_down(onset as f64 / unit).max(0.0) as u32;
        let dur_grid = (round_half_down(duration as f64 / unit) as i64).max(1) as u32;
        out.push(NoteEvent { pitch, onset: onset_grid, duration: dur_grid });
    }
    Ok(out)
}

/// Reads the JSON-lines note format: one object per line,
/// `{"pitch": .., "onset": .., "duration": ..}` in grid ticks.
pub fn read_jsonl_notes<R: Read>(reader: R) -> Result<Vec<NoteEvent>> {
    let mut content = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut content)?;
    let mut notes = Vec::new();
    for line in content.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let note: NoteEvent = serde_json::from_str(line)?;
        if note.duration == 0 {
            return Err(Error::MalformedData("note with zero duration".into()));
        }
        notes.push(note);
    }
    Ok(notes)
}

pub fn write_jsonl_notes(notes: &[NoteEvent]) -> Vec<u8> {
    let mut out = Vec::new();
    for n in notes {
        out.extend_from_slice(serde_json::to_string(n).expect("plain struct").as_bytes());
        out.push(b'\n');
    }
    out
}
