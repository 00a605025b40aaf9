//! Deterministic synthetic corpus generator: diatonic random-walk
//! polyphony in a major key per piece, so the repository is runnable
//! without a score corpus. Harmony voices double the lead at thirds,
//! fifths, and octaves, which mirrors the interval covariances of real
//! keyboard textures.

use crate::pianoroll::{NoteEvent, PITCH_MAX, PITCH_MIN};
use crate::rng::Rng;
use crate::transforms::KeyId;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub n_pieces: usize,
    /// Piece length in 1/16-note ticks, at least 8.
    pub length: u32,
    pub polyphony_min: usize,
    pub polyphony_max: usize,
    /// Fixed tonic pitch class for all pieces; `None` draws one per piece.
    pub key: Option<u8>,
    /// Weights for diatonic walk steps of -2, -1, 0, +1, +2 scale degrees.
    pub step_weights: [f64; 5],
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_pieces: 48,
            length: 64,
            polyphony_min: 2,
            polyphony_max: 4,
            key: None,
            step_weights: [0.15, 0.30, 0.10, 0.30, 0.15],
            seed: 0,
        }
    }
}

fn weighted_step(rng: &mut Rng, weights: &[f64; 5]) -> i32 {
    let total: f64 = weights.iter().sum();
    let mut u = rng.next_f64() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i as i32 - 2;
        }
    }
    2
}

/// Generates `n_pieces` note-event lists, each a diatonic polyphonic
/// texture in one key. Deterministic per seed.
pub fn gen_synthetic(cfg: &SynthConfig) -> Vec<Vec<NoteEvent>> {
    assert!(cfg.polyphony_min >= 1 && cfg.polyphony_min <= cfg.polyphony_max);
    assert!(cfg.length >= 8);
    let root = Rng::new(cfg.seed);
    (0..cfg.n_pieces).map(|i| gen_piece(cfg, &mut root.split(i as u64))).collect()
}

fn gen_piece(cfg: &SynthConfig, rng: &mut Rng) -> Vec<NoteEvent> {
    let tonic = cfg.key.unwrap_or_else(|| rng.next_below(12) as u8);
    let key = KeyId::new(tonic);
    let scale: Vec<u8> = key
        .scale_pitches()
        .into_iter()
        .filter(|&p| (PITCH_MIN..=PITCH_MAX).contains(&p))
        .collect();
    let n_voices = cfg.polyphony_min
        + rng.next_below((cfg.polyphony_max - cfg.polyphony_min + 1) as u64) as usize;

    let mut notes = Vec::new();
    // Lead voice: random walk over scale degrees, reflected at the range
    // edges (keeping headroom so harmony offsets stay in range too).
    let lo = 7usize;
    let hi = scale.len() - 8;
    let mut degree = lo + rng.next_below((hi - lo + 1) as u64) as usize;
    let mut lead_degrees: Vec<(u32, u32, usize)> = Vec::new(); // (onset, dur, degree)
    let mut t = 0u32;
    while t < cfg.length {
        let dur = match rng.next_f64() {
            u if u < 0.5 => 1,
            u if u < 0.8 => 2,
            _ => 4,
        };
        let dur = dur.min(cfg.length - t);
        lead_degrees.push((t, dur, degree));
        notes.push(NoteEvent { pitch: scale[degree], onset: t, duration: dur });
        let step = weighted_step(rng, &cfg.step_weights);
        let next = degree as i32 + step;
        degree = next.clamp(lo as i32, hi as i32) as usize;
        t += dur;
    }

    // Harmony voices shadow the lead at a third, fifth, or octave below,
    // occasionally resting.
    for _ in 1..n_voices {
        let offset = [2usize, 4, 7][rng.next_below(3) as usize];
        for &(onset, dur, deg) in &lead_degrees {
            if rng.next_f64() < 0.25 {
                continue; // rest
            }
            if deg >= offset {
                notes.push(NoteEvent { pitch: scale[deg - offset], onset, duration: dur });
            }
        }
    }
    notes
}
