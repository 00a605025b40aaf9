#ifndef MTP_H
#define MTP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for every FFI entry point.
 */
typedef enum MtpStatus {
  MtpOk = 0,
  MtpNullPointer = 1,
  MtpMalformedData = 2,
  MtpShapeMismatch = 3,
} MtpStatus;

/**
 * Opaque handle to a loaded gated autoencoder.
 */
typedef struct MtpGae MtpGae;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a GAE1 checkpoint from a byte buffer. On success writes a new
 * handle to `out`; free it with `mtp_gae_free`.
 */
enum MtpStatus mtp_gae_load(const uint8_t *data, uintptr_t len, struct MtpGae **out);

/**
 * Frees a handle returned by `mtp_gae_load`. Null is a no-op.
 */
void mtp_gae_free(struct MtpGae *handle);

/**
 * Input width (bits per n-gram vector) of the loaded model.
 */
uintptr_t mtp_gae_input_bits(const struct MtpGae *handle);

/**
 * Mapping-code length of the loaded model.
 */
uintptr_t mtp_gae_code_len(const struct MtpGae *handle);

/**
 * Infers the mapping code of a pair. `x_bits` and `y_bits` are packed
 * bit vectors of `ceil(input_bits/8)` bytes; `code_out` must hold
 * `mtp_gae_code_len` doubles.
 */
enum MtpStatus mtp_gae_map(const struct MtpGae *handle,
                           const uint8_t *x_bits,
                           const uint8_t *y_bits,
                           double *code_out);

/**
 * Applies a transferred mapping code to a new input, writing
 * `input_bits` output probabilities to `probs_out`.
 */
enum MtpStatus mtp_gae_apply(const struct MtpGae *handle,
                             const double *code,
                             uintptr_t code_len,
                             const uint8_t *x_bits,
                             double *probs_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTP_H */
