//! Binary piano rolls over MIDI pitches [36, 100] at 1/16-note resolution,
//! the 65x8 n-grams cut from them, and the packed bit-vector encoding used
//! by the models and the dataset files.

use crate::error::{Error, Result};

/// Lowest represented MIDI pitch (row 0).
pub const PITCH_MIN: u8 = 36;
/// Highest represented MIDI pitch (row 64).
pub const PITCH_MAX: u8 = 100;
/// Number of pitch rows.
pub const N_PITCHES: usize = 65;
/// Time steps per n-gram.
pub const NGRAM_LEN: usize = 8;
/// Flattened n-gram size, `P` in the models.
pub const NGRAM_BITS: usize = N_PITCHES * NGRAM_LEN;
/// Size of a concatenated pair.
pub const PAIR_BITS: usize = 2 * NGRAM_BITS;

/// A quantized note on the 1/16-note grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NoteEvent {
    pub pitch: u8,
    /// Onset in 1/16-note ticks.
    pub onset: u32,
    /// Duration in 1/16-note ticks, at least 1.
    pub duration: u32,
}

/// Binary pitch x time matrix; always exactly 65 pitch rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PianoRoll {
    cols: usize,
    /// Row-major cells, `cells[row * cols + t]`.
    cells: Vec<bool>,
}

impl PianoRoll {
    pub fn empty(cols: usize) -> Self {
        PianoRoll { cols, cells: vec![false; N_PITCHES * cols] }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, t: usize) -> bool {
        self.cells[row * self.cols + t]
    }

    #[inline]
    pub fn set(&mut self, row: usize, t: usize, value: bool) {
        self.cells[row * self.cols + t] = value;
    }
}

/// Builds a roll from note events. Pitches outside [36, 100] are dropped;
/// the count of dropped notes is returned alongside the roll.
pub fn roll_from_notes(notes: &[NoteEvent]) -> (PianoRoll, usize) {
    let mut dropped = 0usize;
    let mut end = 0u32;
    for n in notes {
        if (PITCH_MIN..=PITCH_MAX).contains(&n.pitch) {
            end = end.max(n.onset + n.duration);
        } else {
            dropped += 1;
        }
    }
    let mut roll = PianoRoll::empty(end as usize);
    for n in notes {
        if !(PITCH_MIN..=PITCH_MAX).contains(&n.pitch) {
            continue;
        }
        let row = (n.pitch - PITCH_MIN) as usize;
        for t in n.onset..n.onset + n.duration {
            roll.set(row, t as usize, true);
        }
    }
    (roll, dropped)
}

/// One 65x8 binary n-gram; the unit of musical material.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct NGram {
    cells: [bool; NGRAM_BITS],
}

impl std::fmt::Debug for NGram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NGram({} set cells)", self.count_set())
    }
}

impl Default for NGram {
    fn default() -> Self {
        NGram { cells: [false; NGRAM_BITS] }
    }
}

impl NGram {
    #[inline]
    pub fn get(&self, row: usize, t: usize) -> bool {
        self.cells[row * NGRAM_LEN + t]
    }

    #[inline]
    pub fn set(&mut self, row: usize, t: usize, value: bool) {
        self.cells[row * NGRAM_LEN + t] = value;
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(|&c| !c)
    }

    pub fn count_set(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Iterator over set `(row, t)` cells.
    pub fn set_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| (i / NGRAM_LEN, i % NGRAM_LEN))
    }

    /// Distinct MIDI pitches with at least one set cell, ascending.
    pub fn pitches(&self) -> Vec<u8> {
        (0..N_PITCHES)
            .filter(|&row| (0..NGRAM_LEN).any(|t| self.get(row, t)))
            .map(|row| PITCH_MIN + row as u8)
            .collect()
    }

    /// Flat real-valued view for model input, row-major.
    pub fn to_f64(&self) -> Vec<f64> {
        self.cells.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect()
    }
}

/// Extracts 8-wide windows at offsets `0, stride, 2*stride, ...`, dropping
/// all-silent windows.
pub fn extract_ngrams(roll: &PianoRoll, stride: usize) -> Vec<NGram> {
    assert!(stride >= 1);
    let mut out = Vec::new();
    let mut offset = 0;
    while offset + NGRAM_LEN <= roll.cols() {
        let mut g = NGram::default();
        for row in 0..N_PITCHES {
            for t in 0..NGRAM_LEN {
                g.set(row, t, roll.get(row, offset + t));
            }
        }
        if !g.is_empty() {
            out.push(g);
        }
        offset += stride;
    }
    out
}

/// Packed bits, LSB-first within each byte. Length is 520 for an n-gram or
/// 1040 for a concatenated pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVec {
    len: usize,
    bytes: Vec<u8>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec { len, bytes: vec![0; len.div_ceil(8)] }
    }

    pub fn from_bytes(len: usize, bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::MalformedData(format!(
                "bit vector of length {len} needs {} bytes, got {}",
                len.div_ceil(8),
                bytes.len()
            )));
        }
        Ok(BitVec { len, bytes })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.bytes[i / 8] & (1 << (i % 8)) != 0
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        if value {
            self.bytes[i / 8] |= 1 << (i % 8);
        } else {
            self.bytes[i / 8] &= !(1 << (i % 8));
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect()
    }

    /// Concatenation, used for RBM pair input.
    pub fn concat(&self, other: &BitVec) -> BitVec {
        let mut out = BitVec::zeros(self.len + other.len);
        for i in 0..self.len {
            out.set(i, self.get(i));
        }
        for i in 0..other.len {
            out.set(self.len + i, other.get(i));
        }
        out
    }
}

/// Row-major flattening: pitch row 0 first, its 8 time cells in order.
pub fn encode(g: &NGram) -> BitVec {
    let mut b = BitVec::zeros(NGRAM_BITS);
    for (i, &c) in g.cells.iter().enumerate() {
        if c {
            b.set(i, true);
        }
    }
    b
}

pub fn decode(b: &BitVec) -> Result<NGram> {
    if b.len() != NGRAM_BITS {
        return Err(Error::MalformedData(format!(
            "expected {} bits for an n-gram, got {}",
            NGRAM_BITS,
            b.len()
        )));
    }
    let mut g = NGram::default();
    for i in 0..NGRAM_BITS {
        g.cells[i] = b.get(i);
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Ascii,
    Pgm,
}

/// Renders a real-valued 65x8 matrix (values in [0,1]) as ASCII art or
/// binary PGM.
///
/// PGM layout, byte-exact: header `P5\n8 65\n255\n` followed by 520 raster
/// bytes, pitch row 0 first, each row's 8 time cells in order. Each byte is
/// `round(255 * (1 - p))`, so certain notes are black.
pub fn render(values: &[f64], format: RenderFormat) -> Result<Vec<u8>> {
    if values.len() != NGRAM_BITS {
        return Err(Error::InvalidArgument(format!(
            "render expects {} values, got {}",
            NGRAM_BITS,
            values.len()
        )));
    }
    if values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidArgument("render values must lie in [0, 1]".into()));
    }
    match format {
        RenderFormat::Pgm => {
            let mut out = format!("P5\n{} {}\n255\n", NGRAM_LEN, N_PITCHES).into_bytes();
            out.extend(values.iter().map(|&v| (255.0 * (1.0 - v)).round() as u8));
            Ok(out)
        }
        RenderFormat::Ascii => {
            let mut s = String::new();
            for row in (0..N_PITCHES).rev() {
                for t in 0..NGRAM_LEN {
                    let v = values[row * NGRAM_LEN + t];
                    s.push(match v {
                        v if v >= 0.75 => '#',
                        v if v >= 0.5 => '+',
                        v if v >= 0.25 => '.',
                        _ => ' ',
                    });
                }
                s.push('\n');
            }
            Ok(s.into_bytes())
        }
    }
}

/// Convenience for rendering a binary n-gram.
pub fn render_ngram(g: &NGram, format: RenderFormat) -> Vec<u8> {
    render(&g.to_f64(), format).expect("binary cells are in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(pitch: u8, onset: u32, duration: u32) -> NoteEvent {
        NoteEvent { pitch, onset, duration }
    }

    #[test]
    fn roll_layout_lowest_pitch() {
        let (roll, dropped) = roll_from_notes(&[note(36, 0, 1)]);
        assert_eq!(dropped, 0);
        assert_eq!(roll.cols(), 1);
        assert!(roll.get(0, 0));
    }

    #[test]
    fn roll_layout_highest_pitch() {
        let (roll, _) = roll_from_notes(&[note(100, 7, 2)]);
        assert!(roll.get(64, 7));
        assert!(roll.get(64, 8));
        assert!(!roll.get(64, 6));
    }

    #[test]
    fn overlapping_notes_stay_binary() {
        let (roll, _) = roll_from_notes(&[note(60, 0, 4), note(60, 2, 4)]);
        for t in 0..6 {
            assert!(roll.get(24, t));
        }
    }

    #[test]
    fn out_of_range_notes_dropped_and_counted() {
        let (roll, dropped) = roll_from_notes(&[note(35, 0, 1), note(101, 0, 1), note(60, 0, 1)]);
        assert_eq!(dropped, 2);
        assert_eq!(roll.cols(), 1);
        assert!(roll.get(24, 0));
    }

    #[test]
    fn ngram_window_counts() {
        let (roll, _) = roll_from_notes(&[note(60, 0, 8)]);
        assert_eq!(extract_ngrams(&roll, 1).len(), 1);

        let (roll, _) = roll_from_notes(&[note(60, 0, 10)]);
        assert_eq!(extract_ngrams(&roll, 1).len(), 3);
    }

    #[test]
    fn silent_windows_filtered() {
        let roll = PianoRoll::empty(32);
        assert!(extract_ngrams(&roll, 1).is_empty());

        // Note only in the first window; later windows are silent.
        let (roll, _) = roll_from_notes(&[note(60, 0, 1), note(60, 31, 1)]);
        let grams = extract_ngrams(&roll, 8);
        assert_eq!(grams.len(), 2);
    }

    #[test]
    fn encode_layout_corners() {
        let mut g = NGram::default();
        g.set(0, 0, true);
        let b = encode(&g);
        assert!(b.get(0));
        assert_eq!(b.bytes()[0], 1);

        let mut g = NGram::default();
        g.set(64, 7, true);
        let b = encode(&g);
        assert!(b.get(519));
    }

    #[test]
    fn decode_wrong_length_errors() {
        let b = BitVec::zeros(8);
        assert!(decode(&b).is_err());
    }

    #[test]
    fn pgm_all_zero_is_white() {
        let g = NGram::default();
        let png = render_ngram(&g, RenderFormat::Pgm);
        let header = b"P5\n8 65\n255\n";
        assert_eq!(&png[..header.len()], header);
        assert_eq!(png.len(), header.len() + NGRAM_BITS);
        assert!(png[header.len()..].iter().all(|&b| b == 255));
    }

    #[test]
    fn pgm_certain_note_is_black() {
        let mut g = NGram::default();
        g.set(0, 0, true);
        let png = render_ngram(&g, RenderFormat::Pgm);
        let header_len = b"P5\n8 65\n255\n".len();
        assert_eq!(png[header_len], 0);
    }

    #[test]
    fn render_rejects_out_of_range() {
        let mut v = vec![0.0; NGRAM_BITS];
        v[0] = 1.5;
        assert!(render(&v, RenderFormat::Pgm).is_err());
    }

    #[test]
    fn concat_lengths() {
        let a = encode(&NGram::default());
        let pair = a.concat(&a);
        assert_eq!(pair.len(), PAIR_BITS);
    }
}
