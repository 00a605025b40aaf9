//! The four transformation types over n-grams, key estimation for diatonic
//! transposition, and labeled pair-dataset construction.

use crate::error::{Error, Result};
use crate::pianoroll::{encode, BitVec, NGram, NGRAM_LEN, PITCH_MAX, PITCH_MIN};
use crate::rng::Rng;

/// Major-scale intervals above the tonic.
pub const MAJOR_SCALE: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];

/// Accidental count of the major key with the given tonic pitch class,
/// i.e. its distance from C on the circle of fifths (minimum of the sharp
/// and flat spellings; F-sharp/G-flat counts 6).
const ACCIDENTALS_BY_TONIC: [u8; 12] = [0, 5, 2, 3, 4, 1, 6, 1, 4, 3, 2, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum TransformType {
    TransC,
    TransD,
    Tempo,
    Retro,
}

impl TransformType {
    pub fn class_count(&self) -> usize {
        match self {
            TransformType::TransC => 24,
            TransformType::TransD => 14,
            TransformType::Tempo => 3,
            TransformType::Retro => 2,
        }
    }

    pub fn tag(&self) -> u8 {
        match self {
            TransformType::TransC => 0,
            TransformType::TransD => 1,
            TransformType::Tempo => 2,
            TransformType::Retro => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(TransformType::TransC),
            1 => Ok(TransformType::TransD),
            2 => Ok(TransformType::Tempo),
            3 => Ok(TransformType::Retro),
            other => Err(Error::MalformedData(format!("unknown transform tag {other}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TransformType::TransC => "TransC",
            TransformType::TransD => "TransD",
            TransformType::Tempo => "Tempo",
            TransformType::Retro => "Retro",
        }
    }

    /// Random-guessing misclassification baseline in percent.
    pub fn random_baseline(&self) -> f64 {
        100.0 * (1.0 - 1.0 / self.class_count() as f64)
    }
}

/// A major key, identified by its tonic pitch class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeyId {
    pub tonic: u8,
}

impl KeyId {
    pub fn new(tonic: u8) -> Self {
        assert!(tonic < 12);
        KeyId { tonic }
    }

    pub fn accidentals(&self) -> u8 {
        ACCIDENTALS_BY_TONIC[self.tonic as usize]
    }

    pub fn contains_pc(&self, pitch_class: u8) -> bool {
        let rel = (pitch_class + 12 - self.tonic) % 12;
        MAJOR_SCALE.contains(&rel)
    }

    /// All MIDI pitches 0..=127 belonging to this scale, ascending. Seven
    /// entries per octave, so an index shift of 7 is exactly an octave.
    pub fn scale_pitches(&self) -> Vec<u8> {
        (0u8..=127).filter(|&p| self.contains_pc(p % 12)).collect()
    }
}

/// Chromatic shift of a whole n-gram by `k` semitones. `None` if any pitch
/// would leave [36, 100].
pub fn shift_ngram(g: &NGram, k: i32) -> Option<NGram> {
    let mut out = NGram::default();
    for (row, t) in g.set_cells() {
        let new_row = row as i32 + k;
        if !(0..65).contains(&new_row) {
            return None;
        }
        out.set(new_row as usize, t, true);
    }
    Some(out)
}

/// The random pre-shift applied to every source n-gram before pairing:
/// `k` is drawn from [-12, 11] and resampled on range violation. Gives up
/// after 24 attempts.
pub fn preshift(g: &NGram, rng: &mut Rng) -> Option<NGram> {
    for _ in 0..24 {
        let k = rng.next_range_i32(-12, 11);
        if let Some(shifted) = shift_ngram(g, k) {
            return Some(shifted);
        }
    }
    None
}

/// Chromatic transposition; labeled pair generation samples `k` from
/// `[-12, 11]` (class label `k + 12`), while the operation accepts the
/// full octave `[-12, 12]` so every labeled shift has a total inverse.
pub fn transpose_chromatic(g: &NGram, k: i32) -> Result<Option<NGram>> {
    if !(-12..=12).contains(&k) {
        return Err(Error::InvalidArgument(format!("chromatic shift {k} outside [-12, 12]")));
    }
    Ok(shift_ngram(g, k))
}

/// Estimates the unique minimum-accidental major key containing every pitch
/// class of `g`. `None` if no key fits or the minimum ties.
pub fn estimate_key(g: &NGram) -> Option<KeyId> {
    let pitches = g.pitches();
    if pitches.is_empty() {
        return None;
    }
    let mut pcs: Vec<u8> = pitches.iter().map(|p| p % 12).collect();
    pcs.sort_unstable();
    pcs.dedup();
    let fitting: Vec<KeyId> = (0..12)
        .map(KeyId::new)
        .filter(|key| pcs.iter().all(|&pc| key.contains_pc(pc)))
        .collect();
    let best = fitting.iter().map(|k| k.accidentals()).min()?;
    let mut at_min = fitting.iter().filter(|k| k.accidentals() == best);
    let key = *at_min.next()?;
    if at_min.next().is_some() {
        return None; // ambiguous
    }
    Some(key)
}

/// Diatonic transposition by `k` scale steps within `key`; since degrees
/// span all octaves, `k = 7` is exactly one octave. Every pitch must
/// already belong to the key's scale. Labeled pair generation samples
/// `k` from `[-7, 6]` (class label `k + 7`), but the operation itself
/// accepts any shift so that composition and inversion stay total.
pub fn transpose_diatonic(g: &NGram, key: KeyId, k: i32) -> Result<Option<NGram>> {
    let scale = key.scale_pitches();
    let mut out = NGram::default();
    for (row, t) in g.set_cells() {
        let pitch = PITCH_MIN + row as u8;
        let degree = scale.binary_search(&pitch).map_err(|_| {
            Error::InvalidArgument(format!(
                "pitch {pitch} does not belong to the scale of tonic {}",
                key.tonic
            ))
        })?;
        let target = degree as i32 + k;
        if target < 0 || target as usize >= scale.len() {
            return Ok(None);
        }
        let new_pitch = scale[target as usize];
        if !(PITCH_MIN..=PITCH_MAX).contains(&new_pitch) {
            return Ok(None);
        }
        out.set((new_pitch - PITCH_MIN) as usize, t, true);
    }
    Ok(Some(out))
}

/// Half time: the n-gram stretched to double width, first half kept.
/// Output columns `2i` and `2i+1` copy input column `i`.
pub fn halftime(g: &NGram) -> NGram {
    let mut out = NGram::default();
    for (row, t) in g.set_cells() {
        if t < NGRAM_LEN / 2 {
            out.set(row, 2 * t, true);
            out.set(row, 2 * t + 1, true);
        }
    }
    out
}

/// Horizontal flip: output column `t` is input column `7 - t`.
pub fn retrograde(g: &NGram) -> NGram {
    let mut out = NGram::default();
    for (row, t) in g.set_cells() {
        out.set(row, NGRAM_LEN - 1 - t, true);
    }
    out
}

/// Tempo class labels.
pub const TEMPO_HALF: u16 = 0;
pub const TEMPO_DOUBLE: u16 = 1;
pub const TEMPO_IDENTITY: u16 = 2;

/// Retro class labels.
pub const RETRO_RETROGRADE: u16 = 0;
pub const RETRO_IDENTITY: u16 = 1;

/// One labeled transformation pair, already bit-packed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSample {
    pub x: BitVec,
    pub y: BitVec,
    pub label: u16,
}

/// A labeled pair corpus for one transformation type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairDataset {
    pub transform: TransformType,
    pub samples: Vec<PairSample>,
}

impl PairDataset {
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.transform.class_count()];
        for s in &self.samples {
            counts[s.label as usize] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<u16> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

/// Bookkeeping from pair construction, reported in dataset sidecars.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct PairStats {
    pub preshift_rejections: u64,
    pub range_rejections: u64,
    pub key_fit_rejections: u64,
}

/// Builds `n` labeled pairs. Each sample starts from a randomly drawn,
/// randomly pre-shifted n-gram; the counterpart realizes the sampled (or,
/// with balancing, assigned) class. With `balance` on, per-class counts are
/// uniform within one.
pub fn make_pairs(
    ngrams: &[NGram],
    transform: TransformType,
    n: usize,
    rng: &mut Rng,
    balance: bool,
) -> Result<(PairDataset, PairStats)> {
    if ngrams.is_empty() {
        return Err(Error::InsufficientData("no n-grams to draw pairs from".into()));
    }
    let classes = transform.class_count();
    let mut stats = PairStats::default();
    let mut samples = Vec::with_capacity(n);
    // Attempt budget guards against corpora where a class is unreachable
    // (e.g. no n-gram fits any key for TransD).
    let budget = n.saturating_mul(200).max(10_000);
    let mut attempts = 0usize;
    for i in 0..n {
        let wanted_class: Option<u16> = balance.then(|| (i % classes) as u16);
        loop {
            attempts += 1;
            if attempts > budget {
                return Err(Error::InsufficientData(format!(
                    "could not build {} {} pairs from {} n-grams after {} draws \
                     (preshift rejections {}, range rejections {}, key-fit rejections {})",
                    n,
                    transform.name(),
                    ngrams.len(),
                    attempts,
                    stats.preshift_rejections,
                    stats.range_rejections,
                    stats.key_fit_rejections
                )));
            }
            let g = &ngrams[rng.next_below(ngrams.len() as u64) as usize];
            let Some(x) = preshift(g, rng) else {
                stats.preshift_rejections += 1;
                continue;
            };
            if let Some(sample) = build_counterpart(&x, transform, wanted_class, rng, &mut stats)? {
                samples.push(sample);
                break;
            }
        }
    }
    Ok((PairDataset { transform, samples }, stats))
}

fn build_counterpart(
    x: &NGram,
    transform: TransformType,
    wanted_class: Option<u16>,
    rng: &mut Rng,
    stats: &mut PairStats,
) -> Result<Option<PairSample>> {
    match transform {
        TransformType::TransC => {
            let label =
                wanted_class.unwrap_or_else(|| rng.next_below(24) as u16);
            let k = label as i32 - 12;
            match transpose_chromatic(x, k)? {
                Some(y) => Ok(Some(PairSample { x: encode(x), y: encode(&y), label })),
                None => {
                    stats.range_rejections += 1;
                    Ok(None)
                }
            }
        }
        TransformType::TransD => {
            let Some(key) = estimate_key(x) else {
                stats.key_fit_rejections += 1;
                return Ok(None);
            };
            let label = wanted_class.unwrap_or_else(|| rng.next_below(14) as u16);
            let k = label as i32 - 7;
            match transpose_diatonic(x, key, k)? {
                Some(y) => Ok(Some(PairSample { x: encode(x), y: encode(&y), label })),
                None => {
                    stats.range_rejections += 1;
                    Ok(None)
                }
            }
        }
        TransformType::Tempo => {
            let label = wanted_class.unwrap_or_else(|| rng.next_below(3) as u16);
            let (x_out, y_out) = match label {
                TEMPO_HALF => (x.clone(), halftime(x)),
                TEMPO_DOUBLE => (halftime(x), x.clone()),
                _ => (x.clone(), x.clone()),
            };
            Ok(Some(PairSample { x: encode(&x_out), y: encode(&y_out), label }))
        }
        TransformType::Retro => {
            let label = wanted_class.unwrap_or_else(|| rng.next_below(2) as u16);
            let y = if label == RETRO_RETROGRADE { retrograde(x) } else { x.clone() };
            Ok(Some(PairSample { x: encode(x), y: encode(&y), label }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pianoroll::decode;

    fn single(pitch: u8, t: usize) -> NGram {
        let mut g = NGram::default();
        g.set((pitch - PITCH_MIN) as usize, t, true);
        g
    }

    fn chord(pitches: &[u8]) -> NGram {
        let mut g = NGram::default();
        for &p in pitches {
            g.set((p - PITCH_MIN) as usize, 0, true);
        }
        g
    }

    /// Independent enumeration oracle: fitting keys by scanning all 12
    /// major scales directly from the interval table.
    fn fitting_keys(pcs: &[u8]) -> Vec<(u8, u8)> {
        (0u8..12)
            .filter(|&t| {
                pcs.iter().all(|&pc| MAJOR_SCALE.contains(&((pc + 12 - t) % 12)))
            })
            .map(|t| (t, ACCIDENTALS_BY_TONIC[t as usize]))
            .collect()
    }

    #[test]
    fn chromatic_shift_moves_cell() {
        let g = single(60, 0);
        let shifted = transpose_chromatic(&g, 5).unwrap().unwrap();
        assert_eq!(shifted, single(65, 0));
    }

    #[test]
    fn chromatic_identity_label() {
        let g = single(60, 3);
        assert_eq!(transpose_chromatic(&g, 0).unwrap().unwrap(), g);
    }

    #[test]
    fn chromatic_out_of_range_is_none() {
        let g = single(37, 0);
        assert!(transpose_chromatic(&g, -2).unwrap().is_none());
        assert!(transpose_chromatic(&g, -1).unwrap().is_some());
    }

    #[test]
    fn chromatic_bad_k_is_error() {
        let g = single(60, 0);
        assert!(transpose_chromatic(&g, 13).is_err());
        assert!(transpose_chromatic(&g, -13).is_err());
    }

    #[test]
    fn key_estimation_cde_is_c_major() {
        let g = chord(&[60, 62, 64]);
        // Enumeration oracle: C, D, E fit C (0 acc) and G (1) and F (1).
        let fits = fitting_keys(&[0, 2, 4]);
        assert!(fits.contains(&(0, 0)));
        assert_eq!(estimate_key(&g), Some(KeyId::new(0)));
    }

    #[test]
    fn key_estimation_f_sharp_alone_is_g_major() {
        let g = single(66, 0); // F#4
        let fits = fitting_keys(&[6]);
        let min = fits.iter().map(|&(_, a)| a).min().unwrap();
        let best: Vec<_> = fits.iter().filter(|&&(_, a)| a == min).collect();
        assert_eq!(best, vec![&(7u8, 1u8)]);
        assert_eq!(estimate_key(&g), Some(KeyId::new(7)));
    }

    #[test]
    fn chromatic_cluster_has_no_key() {
        let g = chord(&[60, 61, 62]);
        assert_eq!(estimate_key(&g), None);
    }

    #[test]
    fn ambiguous_key_is_none() {
        // Hunt for a pitch-class pair whose minimum-accidental key ties
        // under the enumeration oracle, then check estimate_key skips it.
        let mut found_tie = false;
        'outer: for a in 0u8..12 {
            for b in a + 1..12 {
                let fits = fitting_keys(&[a, b]);
                if let Some(min) = fits.iter().map(|&(_, acc)| acc).min() {
                    if fits.iter().filter(|&&(_, acc)| acc == min).count() > 1 {
                        let g = chord(&[48 + a, 48 + b]);
                        assert_eq!(estimate_key(&g), None, "pcs {a},{b}");
                        found_tie = true;
                        break 'outer;
                    }
                }
            }
        }
        assert!(found_tie, "expected at least one tied pitch-class pair");
    }

    #[test]
    fn diatonic_step_examples() {
        let key = KeyId::new(0);
        let g = single(60, 0);
        assert_eq!(transpose_diatonic(&g, key, 2).unwrap().unwrap(), single(64, 0));
        let g = single(64, 0);
        assert_eq!(transpose_diatonic(&g, key, 1).unwrap().unwrap(), single(65, 0));
    }

    #[test]
    fn diatonic_octave_chord() {
        let key = KeyId::new(0);
        let g = chord(&[60, 64, 67]);
        let up = transpose_diatonic(&g, key, 7).unwrap().unwrap();
        assert_eq!(up, chord(&[72, 76, 79]));
    }

    #[test]
    fn diatonic_non_scale_pitch_is_error() {
        let key = KeyId::new(0);
        let g = single(61, 0); // C#
        assert!(transpose_diatonic(&g, key, 1).is_err());
    }

    #[test]
    fn halftime_column_duplication() {
        let mut g = NGram::default();
        for t in 0..NGRAM_LEN {
            g.set(t, t, true); // diagonal for distinct columns
        }
        let h = halftime(&g);
        for i in 0..4 {
            assert!(h.get(i, 2 * i));
            assert!(h.get(i, 2 * i + 1));
        }
        assert_eq!(h.count_set(), 8);
    }

    #[test]
    fn halftime_twice_uses_first_quarter() {
        let mut g = NGram::default();
        g.set(10, 1, true);
        g.set(11, 4, true); // beyond column 1, erased by double application
        let hh = halftime(&halftime(&g));
        assert!(hh.get(10, 4) && hh.get(10, 5) && hh.get(10, 6) && hh.get(10, 7));
        assert_eq!(hh.count_set(), 4);
    }

    #[test]
    fn retrograde_involution_and_endpoints() {
        let g = single(60, 0);
        let r = retrograde(&g);
        assert!(r.get(24, 7));
        assert_eq!(retrograde(&r), g);
    }

    #[test]
    fn preshift_deterministic_and_in_range() {
        let g = single(60, 0);
        let mut rng = Rng::new(11);
        let a = preshift(&g, &mut rng).unwrap();
        let mut rng = Rng::new(11);
        let b = preshift(&g, &mut rng).unwrap();
        assert_eq!(a, b);
        assert!(a.pitches().iter().all(|p| (PITCH_MIN..=PITCH_MAX).contains(p)));
    }

    #[test]
    fn balanced_transc_histogram() {
        let ngrams: Vec<NGram> = (50..80).map(|p| single(p, 2)).collect();
        let mut rng = Rng::new(5);
        let (ds, _) = make_pairs(&ngrams, TransformType::TransC, 240, &mut rng, true).unwrap();
        let hist = ds.class_histogram();
        assert_eq!(hist, vec![10; 24]);
    }

    #[test]
    fn retro_identity_samples_have_equal_halves() {
        let ngrams: Vec<NGram> = (50..80).map(|p| single(p, 1)).collect();
        let mut rng = Rng::new(6);
        let (ds, _) = make_pairs(&ngrams, TransformType::Retro, 40, &mut rng, true).unwrap();
        for s in &ds.samples {
            if s.label == RETRO_IDENTITY {
                assert_eq!(s.x, s.y);
            } else {
                let x = decode(&s.x).unwrap();
                let y = decode(&s.y).unwrap();
                assert_eq!(retrograde(&x), y);
            }
        }
    }

    #[test]
    fn transd_pairs_invert() {
        let ngrams: Vec<NGram> =
            (0..20).map(|i| chord(&[60 + (i % 3) * 2, 64 + (i % 2) * 3])).collect();
        let mut rng = Rng::new(7);
        let (ds, _) = make_pairs(&ngrams, TransformType::TransD, 56, &mut rng, true).unwrap();
        for s in &ds.samples {
            let x = decode(&s.x).unwrap();
            let y = decode(&s.y).unwrap();
            let key = estimate_key(&x).unwrap();
            let k = s.label as i32 - 7;
            let back = transpose_diatonic(&y, key, -k).unwrap().unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn make_pairs_insufficient_data_errors() {
        // Chromatic cluster fits no key, so TransD can never succeed.
        let ngrams = vec![chord(&[60, 61, 62])];
        let mut rng = Rng::new(1);
        let err = make_pairs(&ngrams, TransformType::TransD, 10, &mut rng, true);
        assert!(err.is_err());
        let msg = format!("{}", err.unwrap_err());
        assert!(msg.contains("key-fit"), "{msg}");
    }
}
