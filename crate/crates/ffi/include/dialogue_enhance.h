#ifndef DIALOGUE_ENHANCE_H
#define DIALOGUE_ENHANCE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum DeStatus {
  DE_STATUS_OK = 0,
  DE_STATUS_NULL_POINTER = 1,
  DE_STATUS_INVALID_ARGUMENT = 2,
  DE_STATUS_IO = 3,
  DE_STATUS_UNSUPPORTED_FORMAT = 4,
  DE_STATUS_SEPARATION = 5,
  DE_STATUS_LOUDNESS_UNDEFINED = 6,
  DE_STATUS_UNKNOWN_PRESET = 7,
  DE_STATUS_INTERNAL = 8,
} DeStatus;

typedef enum DeBitDepth {
  DE_BIT_DEPTH_INT16 = 16,
  DE_BIT_DEPTH_INT24 = 24,
  DE_BIT_DEPTH_FLOAT32 = 32,
} DeBitDepth;

// Multichannel audio buffer.
typedef struct DeBuffer DeBuffer;

// Dialogue and background stems of one mix.
typedef struct DeStems DeStems;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *de_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *de_version(void);

// Creates a buffer from `frames * channels` interleaved samples.
//
// # Safety
// `samples` must point to `frames * channels` readable doubles; `out` must
// be writable.
enum DeStatus de_buffer_from_interleaved(const double *samples,
                                         size_t frames,
                                         uint32_t channels,
                                         uint32_t sample_rate,
                                         struct DeBuffer **out);

// Reads a WAV file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DeStatus de_buffer_read_wav(const char *path, struct DeBuffer **out);

// Writes a WAV file.
//
// # Safety
// `buffer` must be a live handle and `path` a NUL-terminated string.
enum DeStatus de_buffer_write_wav(const struct DeBuffer *buffer,
                                  const char *path,
                                  enum DeBitDepth depth);

// # Safety
// `buffer` must be a live handle or NULL.
uint32_t de_buffer_num_channels(const struct DeBuffer *buffer);

// Samples per channel.
//
// # Safety
// `buffer` must be a live handle or NULL.
size_t de_buffer_len(const struct DeBuffer *buffer);

// # Safety
// `buffer` must be a live handle or NULL.
uint32_t de_buffer_sample_rate(const struct DeBuffer *buffer);

// Copies interleaved samples into `dst`, which holds `capacity` doubles.
//
// # Safety
// `buffer` must be a live handle and `dst` writable for `capacity` doubles.
enum DeStatus de_buffer_copy_interleaved(const struct DeBuffer *buffer,
                                         double *dst,
                                         size_t capacity);

// # Safety
// `buffer` must be a handle from this library or NULL, and not used after.
void de_buffer_free(struct DeBuffer *buffer);

// Integrated loudness in LUFS. Returns `LoudnessUndefined` for silent or
// too-short input.
//
// # Safety
// `buffer` must be a live handle; `out_lufs` must be writable.
enum DeStatus de_integrated_loudness(const struct DeBuffer *buffer, double *out_lufs);

// Center-extraction separation followed by the speech-band boost.
//
// # Safety
// `mix` must be a live handle; `out` must be writable.
enum DeStatus de_separate_center(const struct DeBuffer *mix, double boost_db, struct DeStems **out);

// Copy of the dialogue stem.
//
// # Safety
// `stems` must be a live handle; `out` must be writable.
enum DeStatus de_stems_dialogue(const struct DeStems *stems, struct DeBuffer **out);

// Copy of the background stem.
//
// # Safety
// `stems` must be a live handle; `out` must be writable.
enum DeStatus de_stems_background(const struct DeStems *stems, struct DeBuffer **out);

// # Safety
// `stems` must be a handle from this library or NULL, and not used after.
void de_stems_free(struct DeStems *stems);

// Remixes with a built-in preset. `out_makeup_db` may be NULL.
//
// # Safety
// `stems` must be a live handle, `preset` a NUL-terminated string and `out`
// writable.
enum DeStatus de_remix_preset(const struct DeStems *stems,
                              const char *preset,
                              struct DeBuffer **out,
                              double *out_makeup_db);

// Processes a WAV file with the center backend and writes the enhanced
// track, object package and manifest into `out_dir`, named after `program`.
//
// # Safety
// All pointers must be NUL-terminated strings.
enum DeStatus de_process_file(const char *input,
                              const char *out_dir,
                              const char *program,
                              const char *preset);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIALOGUE_ENHANCE_H */
