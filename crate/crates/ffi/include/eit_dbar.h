#ifndef EIT_DBAR_H
#define EIT_DBAR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EitStatus {
  EIT_STATUS_OK = 0,
  // Bad arguments, malformed files or unsupported input.
  EIT_STATUS_INVALID = 1,
  // Solver failure or ill-conditioned data.
  EIT_STATUS_NUMERICAL = 2,
  EIT_STATUS_NULL_POINTER = 3,
  EIT_STATUS_IO = 4,
  EIT_STATUS_PANIC = 5,
  // Destination buffer too small.
  EIT_STATUS_BUFFER_TOO_SMALL = 6,
} EitStatus;

// Which image of a pair to copy.
typedef enum EitField {
  EIT_FIELD_TRUTH = 0,
  EIT_FIELD_RECON = 1,
  EIT_FIELD_M0_IMAG = 2,
} EitField;

// A D-bar reconstruction on the image grid.
typedef struct EitImage EitImage;

// Truth/reconstruction pair as stored in EITP files.
typedef struct EitPair EitPair;

// Scattering data `t(k)` on a square k-grid.
typedef struct EitScattering EitScattering;

typedef struct EitMetrics {
  double ssim;
  // Percent.
  double rel_l1;
  // Percent.
  double rel_l2;
} EitMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *eit_version(void);

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call or `eit_clear_error` on this thread.
const char *eit_last_error_message(void);

void eit_clear_error(void);

// Scattering data from `n × n` row-major samples on `[-half_width, half_width)²`
// (row index along Im k). Nodes with `|k| > radius` are ignored by the solver.
enum EitStatus eit_scattering_new(size_t n,
                                  double half_width,
                                  double radius,
                                  const double *re,
                                  const double *im,
                                  struct EitScattering **out);

void eit_scattering_free(struct EitScattering *s);

// D-bar reconstruction on a `z_nodes × z_nodes` grid over `[-1, 1)²`.
// `tol <= 0` selects the default solver tolerance.
enum EitStatus eit_reconstruct(const struct EitScattering *scattering,
                               double sigma_b,
                               size_t z_nodes,
                               double tol,
                               struct EitImage **out);

// Reconstruction from a measurement JSON file and a layout JSON file.
// `sigma0 <= 0` fits the background conductivity.
enum EitStatus eit_reconstruct_measurement(const char *measurement_path,
                                           const char *layout_path,
                                           double radius,
                                           double sigma0,
                                           size_t z_nodes,
                                           struct EitImage **out);

// Nodes per side of the image.
size_t eit_image_size(const struct EitImage *image);

// Copies `σ_DB` (row-major, `n²` values) into `buf`.
enum EitStatus eit_image_copy_sigma(const struct EitImage *image, double *buf, size_t len);

// Copies `m(z, 0)` into separate real and imaginary buffers.
enum EitStatus eit_image_copy_m0(const struct EitImage *image, double *re, double *im, size_t len);

void eit_image_free(struct EitImage *image);

enum EitStatus eit_pair_read(const char *path, struct EitPair **out);

enum EitStatus eit_pair_write(const struct EitPair *pair, const char *path);

// Simulates training pair `index` of a dataset. `style` is the EITP style
// code (0 ACT4, 1 KIT4). `config_json` may be NULL for the style defaults;
// otherwise it is a full dataset configuration whose seed is replaced by
// `master_seed`.
enum EitStatus eit_pair_generate(uint8_t style,
                                 uint64_t master_seed,
                                 uint64_t index,
                                 const char *config_json,
                                 struct EitPair **out);

size_t eit_pair_size(const struct EitPair *pair);

// EITP style code of the pair, or 255 for NULL.
uint8_t eit_pair_style(const struct EitPair *pair);

uint64_t eit_pair_seed(const struct EitPair *pair);

enum EitStatus eit_pair_copy(const struct EitPair *pair,
                             enum EitField field,
                             double *buf,
                             size_t len);

void eit_pair_free(struct EitPair *pair);

// SSIM and relative errors of `recon` against `truth` (`n × n` each).
// `disc_mask` restricts the comparison to `|z| ≤ 1`.
enum EitStatus eit_evaluate(const double *recon,
                            const double *truth,
                            size_t n,
                            bool disc_mask,
                            struct EitMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EIT_DBAR_H */
