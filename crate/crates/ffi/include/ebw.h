/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef EBW_H
#define EBW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum EbwStatus {
  EBW_STATUS_OK = 0,
  EBW_STATUS_INVALID_PARAMETER = 1,
  EBW_STATUS_NUMERICAL = 2,
  EBW_STATUS_IO = 3,
  EBW_STATUS_NULL_POINTER = 4,
  EBW_STATUS_INVALID_UTF8 = 5,
  EBW_STATUS_PANIC = 6,
} EbwStatus;

// Opaque antenna pattern.
typedef struct EbwPattern EbwPattern;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ebw_version(void);

// Copy the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ebw_last_error_message(char *buf, size_t len);

// Build a pattern from an id such as `omni`, `sector(0.25)`, `esnla(4)` or
// `chebyshev(N=6;d=0.5;rms=30)`.
//
// # Safety
// `id` must be a valid NUL-terminated string and `out_pattern` a valid pointer.
enum EbwStatus ebw_pattern_new(const char *id, struct EbwPattern **out_pattern);

// Release a pattern. Null is accepted.
//
// # Safety
// `p` must come from `ebw_pattern_new` and not be used afterwards.
void ebw_pattern_free(struct EbwPattern *p);

// Write the pattern id (as produced by the core library) into `buf`.
// Returns the full id length excluding the NUL, or 0 for a null pattern.
//
// # Safety
// `p` must be a live handle or null; `buf` null or `len` writable bytes.
size_t ebw_pattern_id(const struct EbwPattern *p, char *buf, size_t len);

// Gain `G(θ)`, or `G(θ)^{1/α}` when `starred` is nonzero.
//
// # Safety
// `p` must be a live handle and `value` a valid pointer.
enum EbwStatus ebw_pattern_gain(const struct EbwPattern *p,
                                double theta,
                                double alpha,
                                int starred,
                                double *value);

// Monte Carlo effective beam width for the basis distance law of order `h`.
//
// # Safety
// `p` must be a live handle; `value` and `std_error` valid pointers.
enum EbwStatus ebw_effective_beam_width(const struct EbwPattern *p,
                                        double h,
                                        double alpha,
                                        uint64_t samples,
                                        uint64_t seed,
                                        double *value,
                                        double *std_error);

// Monte Carlo `Pr(YZ > X)` for a receive and a transmit pattern.
//
// # Safety
// `rx` and `tx` must be live handles; `value` and `std_error` valid pointers.
enum EbwStatus ebw_interference_probability(const struct EbwPattern *rx,
                                            const struct EbwPattern *tx,
                                            double h,
                                            double alpha,
                                            uint64_t samples,
                                            uint64_t seed,
                                            double *value,
                                            double *std_error);

// Guard zone `Δ = SIR₀^{1/α} − 1` and `c₁ = π(1+Δ)²`.
//
// # Safety
// `delta` and `c1` must be valid pointers.
enum EbwStatus ebw_guard_zone(double sir0, double alpha, double *delta, double *c1);

// Rayleigh interference factor `F(α)`. For `α ≤ 2` the factor diverges:
// `*divergent` is set to 1 and `*value` to +infinity.
//
// # Safety
// `value` and `divergent` must be valid pointers.
enum EbwStatus ebw_f_alpha(double alpha, double *value, int *divergent);

// Least-squares fit of `w = b1 / n^γ` in log-log space.
//
// # Safety
// `n` and `w` must point to `len` doubles; outputs must be valid pointers.
enum EbwStatus ebw_fit_power_law(const double *n,
                                 const double *w,
                                 size_t len,
                                 double *b1,
                                 double *gamma,
                                 double *r2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EBW_H */
