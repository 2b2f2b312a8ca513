#ifndef IMPLAUTH_H
#define IMPLAUTH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define IMPLAUTH_MODE_CASE_A 1

#define IMPLAUTH_MODE_CASE_B 2

#define IMPLAUTH_MODE_CASE_C 3

#define IMPLAUTH_SOLVER_CLOSED_FORM 0

#define IMPLAUTH_SOLVER_GAUSSIAN 1

typedef enum {
  IMPLAUTH_STATUS_OK = 0,
  IMPLAUTH_STATUS_NULL_POINTER = 1,
  IMPLAUTH_STATUS_INVALID_ARGUMENT = 2,
  IMPLAUTH_STATUS_DECODE = 3,
  IMPLAUTH_STATUS_CRYPTO = 4,
  IMPLAUTH_STATUS_PROTOCOL = 5,
  IMPLAUTH_STATUS_SESSION = 6,
  IMPLAUTH_STATUS_IO = 7,
  IMPLAUTH_STATUS_PANIC = 8,
} ImplauthStatus;

typedef struct ImplauthChallenge ImplauthChallenge;

typedef struct ImplauthFeatureSet ImplauthFeatureSet;

typedef struct ImplauthProfile ImplauthProfile;

typedef struct ImplauthResponse ImplauthResponse;

typedef struct ImplauthRng ImplauthRng;

typedef struct ImplauthSecret ImplauthSecret;

typedef struct ImplauthSession ImplauthSession;

typedef struct ImplauthSimilarity ImplauthSimilarity;

/**
 * Library-owned bytes.
 */
typedef struct {
  uint8_t *data;
  size_t len;
} ImplauthBuffer;

/**
 * Scoring mode. `max_weight` is used by case B, `features` and `cap` by case C.
 */
typedef struct {
  uint8_t kind;
  uint64_t max_weight;
  uint64_t features;
  uint64_t cap;
} ImplauthMode;

/**
 * Outcome of an authentication. For cases A and B the dissimilarity is
 * `numerator / denominator` (`infinite` when nothing matched); for case C it
 * is the L1 distance in `numerator`.
 */
typedef struct {
  uint64_t match_count;
  bool accepted;
  bool infinite;
  uint64_t numerator;
  uint64_t denominator;
} ImplauthDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *implauth_last_error(void);

void implauth_buffer_free(ImplauthBuffer buf);

/**
 * A random generator; deterministic from `seed` when `seeded` is true
 * (tests only), otherwise seeded from the operating system.
 */
ImplauthStatus implauth_rng_new(bool seeded, uint64_t seed, ImplauthRng **out);

void implauth_rng_free(ImplauthRng *rng);

/**
 * Feature set from integer values in `[1, 2^64)`.
 */
ImplauthStatus implauth_feature_set_from_u64(ImplauthMode mode,
                                             const uint64_t *values,
                                             size_t len,
                                             ImplauthFeatureSet **out);

/**
 * Feature set from NUL-terminated tokens, each hashed to a feature value.
 */
ImplauthStatus implauth_feature_set_from_tokens(ImplauthMode mode,
                                                const char *const *tokens,
                                                size_t len,
                                                ImplauthFeatureSet **out);

/**
 * Pair-encoded numeric vector with per-feature cap `cap` (case C).
 */
ImplauthStatus implauth_feature_set_from_numeric(const uint64_t *values,
                                                 size_t len,
                                                 uint64_t cap,
                                                 ImplauthFeatureSet **out);

size_t implauth_feature_set_len(const ImplauthFeatureSet *set);

void implauth_feature_set_free(ImplauthFeatureSet *set);

ImplauthStatus implauth_similarity_new(ImplauthSimilarity **out);

/**
 * Sets `l(z, y) = weight` for integer features.
 */
ImplauthStatus implauth_similarity_insert_u64(ImplauthSimilarity *table,
                                              uint64_t y,
                                              uint64_t z,
                                              uint64_t weight);

void implauth_similarity_free(ImplauthSimilarity *table);

/**
 * Device set-up. `threshold` 0 selects the mode's default.
 */
ImplauthStatus implauth_setup(const char *user_id,
                              const ImplauthFeatureSet *features,
                              uint64_t key_bits,
                              uint8_t solver,
                              uint64_t threshold,
                              ImplauthRng *rng,
                              ImplauthProfile **out_profile,
                              ImplauthSecret **out_secret);

/**
 * Canonical encoding of the carrier record.
 */
ImplauthStatus implauth_profile_serialize(const ImplauthProfile *profile, ImplauthBuffer *out);

ImplauthStatus implauth_profile_deserialize(const uint8_t *data, size_t len, ImplauthProfile **out);

void implauth_profile_free(ImplauthProfile *profile);

/**
 * Canonical encoding of the device secret: user id, `d`, `R'` and mode.
 */
ImplauthStatus implauth_secret_serialize(const ImplauthSecret *secret, ImplauthBuffer *out);

ImplauthStatus implauth_secret_deserialize(const uint8_t *data, size_t len, ImplauthSecret **out);

void implauth_secret_free(ImplauthSecret *secret);

ImplauthStatus implauth_challenge_serialize(const ImplauthChallenge *challenge,
                                            ImplauthBuffer *out);

ImplauthStatus implauth_challenge_deserialize(const uint8_t *data,
                                              size_t len,
                                              ImplauthChallenge **out);

void implauth_challenge_free(ImplauthChallenge *challenge);

/**
 * Carrier step: a fresh challenge for `profile` and the private session
 * state needed to score the answer.
 */
ImplauthStatus implauth_challenge_new(const ImplauthProfile *profile,
                                      ImplauthRng *rng,
                                      ImplauthChallenge **out_challenge,
                                      ImplauthSession **out_session);

void implauth_session_free(ImplauthSession *session);

/**
 * Device step. With a non-null `similarity` the weighted (case B) response
 * is built.
 */
ImplauthStatus implauth_respond(const ImplauthSecret *secret,
                                const ImplauthChallenge *challenge,
                                const ImplauthFeatureSet *sample,
                                const ImplauthSimilarity *similarity,
                                ImplauthRng *rng,
                                ImplauthResponse **out);

size_t implauth_response_len(const ImplauthResponse *response);

void implauth_response_free(ImplauthResponse *response);

/**
 * Carrier step: number of recognized response entries. Consumes the session.
 */
ImplauthStatus implauth_score(const ImplauthSession *session,
                              const ImplauthResponse *response,
                              uint64_t *out_count);

/**
 * Carrier step: scores the response and applies the stored decision rule.
 * Consumes the session.
 */
ImplauthStatus implauth_finish(const ImplauthSession *session,
                               const ImplauthResponse *response,
                               ImplauthDecision *out);

/**
 * The decision rule alone.
 */
ImplauthStatus implauth_decide(uint64_t match_count,
                               ImplauthMode mode,
                               uint64_t profile_size,
                               uint64_t sample_size,
                               uint64_t threshold,
                               ImplauthDecision *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMPLAUTH_H */
