#ifndef SNSPDKIT_H
#define SNSPDKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum {
  SNSPD_STATUS_OK = 0,
  SNSPD_STATUS_NULL_POINTER = 1,
  SNSPD_STATUS_INVALID_ARGUMENT = 2,
  SNSPD_STATUS_NUMERICAL = 3,
  SNSPD_STATUS_IO = 4,
  SNSPD_STATUS_BUFFER_TOO_SMALL = 5,
  SNSPD_STATUS_NO_GUIDED_MODE = 6,
  SNSPD_STATUS_PANIC = 7,
} SnspdStatus;

typedef enum {
  SNSPD_POLARIZATION_TE = 0,
  SNSPD_POLARIZATION_TM = 1,
} SnspdPolarization;

/**
 * Run configuration (chip, grid, materials, simulation settings).
 */
typedef struct SnspdConfig SnspdConfig;

/**
 * Fundamental guided mode together with the index profile it was solved on.
 */
typedef struct SnspdMode SnspdMode;

typedef struct {
  double overlap;
  double center_x_um;
  double center_y_um;
  double mfd_um;
} SnspdFiberOverlap;

typedef struct {
  double delta_n_eff_re;
  double delta_n_eff_im;
  double alpha_db_per_cm;
  double absorption_per_device;
} SnspdAbsorption;

typedef struct {
  double contrast_k;
  double r_eta;
  double single_pass_transmission;
  double alpha_db_per_cm;
} SnspdLossEstimate;

/**
 * Sigmoid fit of a bias sweep. Dark-count fields are NaN when no dark
 * model was fitted.
 */
typedef struct {
  double inflection_ua;
  double width_ua;
  double plateau_rate;
  double plateau_start_ua;
  double plateau_flatness;
  bool has_plateau;
  double dark_scale;
  double dark_current_ua;
} SnspdBiasFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *snspd_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library on this thread.
 */
const char *snspd_last_error_message(void);

/**
 * Built-in default configuration.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
SnspdStatus snspd_config_default(SnspdConfig **out);

/**
 * Parse and validate a TOML configuration. Relative input paths resolve
 * against the current directory.
 *
 * # Safety
 * `toml` must be a NUL-terminated UTF-8 string; `out` as for
 * [`snspd_config_default`].
 */
SnspdStatus snspd_config_from_toml(const char *toml, SnspdConfig **out);

/**
 * # Safety
 * `config` must be a live handle.
 */
SnspdStatus snspd_config_set_seed(SnspdConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be NULL or a handle not yet freed.
 */
void snspd_config_free(SnspdConfig *config);

/**
 * Solve the fundamental mode of the configured waveguide.
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
SnspdStatus snspd_mode_solve(const SnspdConfig *config,
                             SnspdPolarization polarization,
                             SnspdMode **out);

/**
 * # Safety
 * `mode` must be a live handle; `re` and `im` writable.
 */
SnspdStatus snspd_mode_n_eff(const SnspdMode *mode, double *re, double *im);

/**
 * Field array shape. Samples are stored row-major with `rows` along x.
 *
 * # Safety
 * `mode` must be a live handle; `rows` and `cols` writable.
 */
SnspdStatus snspd_mode_shape(const SnspdMode *mode, size_t *rows, size_t *cols);

/**
 * Copy the unit-power field into `buf` (row-major, `rows * cols` values).
 *
 * # Safety
 * `mode` must be a live handle; `buf` must hold `len` doubles.
 */
SnspdStatus snspd_mode_copy_field(const SnspdMode *mode, double *buf, size_t len);

/**
 * Best overlap with a Gaussian fiber mode of diameter `mfd_um`.
 *
 * # Safety
 * `mode` must be a live handle; `out` writable.
 */
SnspdStatus snspd_mode_fiber_overlap(const SnspdMode *mode, double mfd_um, SnspdFiberOverlap *out);

/**
 * Per-device absorption of the configured nanowire meander. A finite
 * `wire_kappa` overrides the wire extinction coefficient; pass NaN to keep
 * the configured material.
 *
 * # Safety
 * `config` and `mode` must be live handles; `out` writable.
 */
SnspdStatus snspd_mode_absorption(const SnspdConfig *config,
                                  const SnspdMode *mode,
                                  double wire_kappa,
                                  SnspdAbsorption *out);

/**
 * # Safety
 * `mode` must be NULL or a handle not yet freed.
 */
void snspd_mode_free(SnspdMode *mode);

/**
 * Click probability `1 - exp(-eta mu)` for Poissonian light.
 *
 * # Safety
 * `out` must be writable.
 */
SnspdStatus snspd_click_probability(double mu, double eta, double *out);

/**
 * Propagation loss from a measured fringe contrast.
 *
 * # Safety
 * `out` must be writable.
 */
SnspdStatus snspd_fp_loss_from_contrast(double contrast,
                                        double reflectance,
                                        double length_cm,
                                        SnspdLossEstimate *out);

/**
 * Fit a fringe scan and extract the propagation loss.
 *
 * # Safety
 * `phase_rad` and `power` must each hold `n` doubles; `out` writable.
 */
SnspdStatus snspd_fp_loss_from_scan(const double *phase_rad,
                                    const double *power,
                                    size_t n,
                                    double reflectance,
                                    double length_cm,
                                    SnspdLossEstimate *out);

/**
 * Sigmoid plateau fit of a bias sweep (counts per second).
 *
 * # Safety
 * The three arrays must each hold `n` doubles; `out` writable.
 */
SnspdStatus snspd_bias_fit(const double *bias_ua,
                           const double *photon_counts,
                           const double *dark_counts,
                           size_t n,
                           double integration_s,
                           SnspdBiasFit *out);

/**
 * Detector jitter after removing known components in quadrature.
 *
 * # Safety
 * `components_ps` must hold `n` doubles; `out` writable.
 */
SnspdStatus snspd_jitter_decompose(double system_fwhm_ps,
                                   const double *components_ps,
                                   size_t n,
                                   double *out);

/**
 * Synthetic fringe scan of `n` points; identical seeds give identical
 * output.
 *
 * # Safety
 * `phase_out` and `power_out` must each hold `n` doubles.
 */
SnspdStatus snspd_simulate_fringe(double alpha_db_per_cm,
                                  double reflectance,
                                  double length_cm,
                                  size_t n,
                                  double noise_rel,
                                  uint64_t seed,
                                  double *phase_out,
                                  double *power_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNSPDKIT_H */
