//! C ABI over the gated-autoencoder inference path: load a GAE1
//! checkpoint, infer mapping codes, and apply transferred codes to new
//! inputs. Handles are opaque; every function returns an `MtpStatus`.
//!
//! Bit vectors cross the boundary in the on-disk packing: bits LSB-first
//! within each byte, `ceil(p/8)` bytes per vector.

use std::slice;

use mtp_core::gae::{self, GaeModel};
use mtp_core::pianoroll::BitVec;

/// Result codes for every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtpStatus {
    MtpOk = 0,
    MtpNullPointer = 1,
    MtpMalformedData = 2,
    MtpShapeMismatch = 3,
}

/// Opaque handle to a loaded gated autoencoder.
pub struct MtpGae {
    model: GaeModel,
}

fn packed_len(bits: usize) -> usize {
    bits.div_ceil(8)
}

/// Loads a GAE1 checkpoint from a byte buffer. On success writes a new
/// handle to `out`; free it with `mtp_gae_free`.
#[no_mangle]
pub unsafe extern "C" fn mtp_gae_load(
    data: *const u8,
    len: usize,
    out: *mut *mut MtpGae,
) -> MtpStatus {
    if data.is_null() || out.is_null() {
        return MtpStatus::MtpNullPointer;
    }
    let bytes = slice::from_raw_parts(data, len);
    match gae::read_checkpoint(bytes) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(MtpGae { model }));
            MtpStatus::MtpOk
        }
        Err(_) => MtpStatus::MtpMalformedData,
    }
}

/// Frees a handle returned by `mtp_gae_load`. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn mtp_gae_free(handle: *mut MtpGae) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Input width (bits per n-gram vector) of the loaded model.
#[no_mangle]
pub unsafe extern "C" fn mtp_gae_input_bits(handle: *const MtpGae) -> usize {
    if handle.is_null() {
        return 0;
    }
    (*handle).model.p()
}

/// Mapping-code length of the loaded model.
#[no_mangle]
pub unsafe extern "C" fn mtp_gae_code_len(handle: *const MtpGae) -> usize {
    if handle.is_null() {
        return 0;
    }
    (*handle).model.n_mappings()
}

/// Infers the mapping code of a pair. `x_bits` and `y_bits` are packed
/// bit vectors of `ceil(input_bits/8)` bytes; `code_out` must hold
/// `mtp_gae_code_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mtp_gae_map(
    handle: *const MtpGae,
    x_bits: *const u8,
    y_bits: *const u8,
    code_out: *mut f64,
) -> MtpStatus {
    if handle.is_null() || x_bits.is_null() || y_bits.is_null() || code_out.is_null() {
        return MtpStatus::MtpNullPointer;
    }
    let model = &(*handle).model;
    let n = packed_len(model.p());
    let unpack = |ptr: *const u8| {
        BitVec::from_bytes(model.p(), slice::from_raw_parts(ptr, n).to_vec())
    };
    let (x, y) = match (unpack(x_bits), unpack(y_bits)) {
        (Ok(x), Ok(y)) => (x, y),
        _ => return MtpStatus::MtpMalformedData,
    };
    match model.map(&x, &y) {
        Ok(code) => {
            slice::from_raw_parts_mut(code_out, code.len()).copy_from_slice(&code);
            MtpStatus::MtpOk
        }
        Err(_) => MtpStatus::MtpShapeMismatch,
    }
}

/// Applies a transferred mapping code to a new input, writing
/// `input_bits` output probabilities to `probs_out`.
#[no_mangle]
pub unsafe extern "C" fn mtp_gae_apply(
    handle: *const MtpGae,
    code: *const f64,
    code_len: usize,
    x_bits: *const u8,
    probs_out: *mut f64,
) -> MtpStatus {
    if handle.is_null() || code.is_null() || x_bits.is_null() || probs_out.is_null() {
        return MtpStatus::MtpNullPointer;
    }
    let model = &(*handle).model;
    if code_len != model.n_mappings() {
        return MtpStatus::MtpShapeMismatch;
    }
    let m = slice::from_raw_parts(code, code_len);
    let n = packed_len(model.p());
    let x = match BitVec::from_bytes(model.p(), slice::from_raw_parts(x_bits, n).to_vec()) {
        Ok(x) => x,
        Err(_) => return MtpStatus::MtpMalformedData,
    };
    match model.reconstruct_y(m, &x) {
        Ok(probs) => {
            slice::from_raw_parts_mut(probs_out, probs.len()).copy_from_slice(&probs);
            MtpStatus::MtpOk
        }
        Err(_) => MtpStatus::MtpShapeMismatch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mtp_core::pianoroll::NGRAM_BITS;
    use std::ptr;

    fn checkpoint_bytes() -> Vec<u8> {
        gae::write_checkpoint(&GaeModel::init(NGRAM_BITS, 8, 4, 11))
    }

    #[test]
    fn load_map_apply_round_trip() {
        let bytes = checkpoint_bytes();
        let mut handle: *mut MtpGae = ptr::null_mut();
        unsafe {
            assert_eq!(mtp_gae_load(bytes.as_ptr(), bytes.len(), &mut handle), MtpStatus::MtpOk);
            assert_eq!(mtp_gae_input_bits(handle), NGRAM_BITS);
            assert_eq!(mtp_gae_code_len(handle), 4);

            let x = vec![0u8; NGRAM_BITS / 8];
            let mut y = vec![0u8; NGRAM_BITS / 8];
            y[3] = 0b0000_0100;
            let mut code = vec![0.0f64; 4];
            assert_eq!(
                mtp_gae_map(handle, x.as_ptr(), y.as_ptr(), code.as_mut_ptr()),
                MtpStatus::MtpOk
            );
            assert!(code.iter().all(|c| (0.0..=1.0).contains(c)));

            let mut probs = vec![0.0f64; NGRAM_BITS];
            assert_eq!(
                mtp_gae_apply(handle, code.as_ptr(), 4, x.as_ptr(), probs.as_mut_ptr()),
                MtpStatus::MtpOk
            );
            // Zero input gates every output to 0.5.
            assert!(probs.iter().all(|p| (p - 0.5).abs() < 1e-12));

            mtp_gae_free(handle);
        }
    }

    #[test]
    fn load_rejects_garbage() {
        let mut handle: *mut MtpGae = ptr::null_mut();
        let junk = b"not a checkpoint";
        unsafe {
            assert_eq!(
                mtp_gae_load(junk.as_ptr(), junk.len(), &mut handle),
                MtpStatus::MtpMalformedData
            );
        }
        assert!(handle.is_null());
    }

    #[test]
    fn null_pointers_are_rejected() {
        unsafe {
            assert_eq!(mtp_gae_load(ptr::null(), 0, ptr::null_mut()), MtpStatus::MtpNullPointer);
            assert_eq!(mtp_gae_input_bits(ptr::null()), 0);
            mtp_gae_free(ptr::null_mut()); // must not crash
        }
    }

    #[test]
    fn wrong_code_length_is_shape_mismatch() {
        let bytes = checkpoint_bytes();
        let mut handle: *mut MtpGae = ptr::null_mut();
        unsafe {
            assert_eq!(mtp_gae_load(bytes.as_ptr(), bytes.len(), &mut handle), MtpStatus::MtpOk);
            let x = vec![0u8; NGRAM_BITS / 8];
            let code = vec![0.5f64; 7];
            let mut probs = vec![0.0f64; NGRAM_BITS];
            assert_eq!(
                mtp_gae_apply(handle, code.as_ptr(), 7, x.as_ptr(), probs.as_mut_ptr()),
                MtpStatus::MtpShapeMismatch
            );
            mtp_gae_free(handle);
        }
    }
}
