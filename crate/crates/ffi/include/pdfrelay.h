#ifndef PDFRELAY_H
#define PDFRELAY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdint.h>

typedef enum PdfrelayStatus {
  PDFRELAY_STATUS_OK = 0,
  PDFRELAY_STATUS_NULL_POINTER = 1,
  PDFRELAY_STATUS_INVALID_PARAMETER = 2,
  PDFRELAY_STATUS_NOT_CONVERGED = 3,
  PDFRELAY_STATUS_RELAY_OUTSIDE_CELL = 4,
  PDFRELAY_STATUS_DIVERGENT_MEAN = 5,
  PDFRELAY_STATUS_OTHER_ERROR = 6,
  PDFRELAY_STATUS_PANIC = 7,
} PdfrelayStatus;

/**
 * Opaque network configuration.
 */
typedef struct PdfrelayConfig PdfrelayConfig;

/**
 * Plain-data view of a configuration.
 */
typedef struct PdfrelayNetworkParams {
  double lambda1;
  double lambda2;
  double alpha;
  double cell_radius;
  double noise_power;
  double p_s;
  double p_r;
  double alpha1;
  double rho1;
} PdfrelayNetworkParams;

typedef struct PdfrelayMoments {
  double mean;
  double variance;
} PdfrelayMoments;

typedef struct PdfrelayGamma {
  double shape;
  double scale;
} PdfrelayGamma;

/**
 * Equivalent (interference-and-noise normalized) channel gains.
 */
typedef struct PdfrelayChannels {
  double h_sr;
  double h_sd_b;
  double h_sd_m;
  double h_rd;
} PdfrelayChannels;

/**
 * `c1`..`c3` are the relayed bounds; a direct rate fills `c1` and `c2`
 * with the two phase terms and sets `c3` to NaN.
 */
typedef struct PdfrelayRate {
  double rate;
  double c1;
  double c2;
  double c3;
  /**
   * Common-message fraction; NaN unless the split was optimized.
   */
  double common_fraction;
} PdfrelayRate;

/**
 * Reference configuration. Free with [`pdfrelay_config_free`].
 */
struct PdfrelayConfig *pdfrelay_config_reference(void);

/**
 * # Safety
 * `cfg` must be null or a pointer from [`pdfrelay_config_reference`] not yet freed.
 */
void pdfrelay_config_free(struct PdfrelayConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live config handle and `out` writable.
 */
enum PdfrelayStatus pdfrelay_config_get(const struct PdfrelayConfig *cfg,
                                        struct PdfrelayNetworkParams *out);

/**
 * Replaces every field. Rejected values leave the handle unchanged.
 *
 * # Safety
 * `cfg` must be a live config handle and `params` readable.
 */
enum PdfrelayStatus pdfrelay_config_set(struct PdfrelayConfig *cfg,
                                        const struct PdfrelayNetworkParams *params);

/**
 * Sets both power budgets; the noise power is left alone.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum PdfrelayStatus pdfrelay_config_set_power_dbm(struct PdfrelayConfig *cfg, double dbm);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum PdfrelayStatus pdfrelay_config_set_densities(struct PdfrelayConfig *cfg,
                                                  double lambda1,
                                                  double lambda2);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum PdfrelayStatus pdfrelay_config_set_cell_radius(struct PdfrelayConfig *cfg, double meters);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum PdfrelayStatus pdfrelay_config_set_rho1(struct PdfrelayConfig *cfg, double rho1);

/**
 * Message for the last failed call on this thread, or null. Free with
 * [`pdfrelay_string_free`].
 */
char *pdfrelay_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void pdfrelay_string_free(char *s);

/**
 * Cooperation probability of the distance-only policy.
 *
 * # Safety
 * `out` must be writable.
 */
enum PdfrelayStatus pdfrelay_coop_prob_geometric(double lambda1, double lambda2, double *out);

/**
 * Cooperation probability of the policy that also sees source fading.
 *
 * # Safety
 * `out` must be writable.
 */
enum PdfrelayStatus pdfrelay_coop_prob_hybrid(double lambda1,
                                              double lambda2,
                                              double alpha,
                                              double *out);

/**
 * Interference moments at the base station. `phase` is 1 or 2;
 * `common_fraction` is the interferers' common-message share.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` writable.
 */
enum PdfrelayStatus pdfrelay_moments_destination(const struct PdfrelayConfig *cfg,
                                                 uint32_t phase,
                                                 double common_fraction,
                                                 struct PdfrelayMoments *out);

/**
 * First-phase interference moments at a relay `d_relay_bs` meters from the
 * base station.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` writable.
 */
enum PdfrelayStatus pdfrelay_moments_relay(const struct PdfrelayConfig *cfg,
                                           double common_fraction,
                                           double d_relay_bs,
                                           struct PdfrelayMoments *out);

/**
 * Gamma law with the given mean and variance.
 *
 * # Safety
 * `out` must be writable.
 */
enum PdfrelayStatus pdfrelay_gamma_fit(double mean, double variance, struct PdfrelayGamma *out);

/**
 * Relayed rate for a fixed common-message fraction.
 *
 * # Safety
 * `ch` must be readable and `out` writable.
 */
enum PdfrelayStatus pdfrelay_pdf_rate(const struct PdfrelayChannels *ch,
                                      double p_s,
                                      double p_r,
                                      double alpha1,
                                      double common_fraction,
                                      struct PdfrelayRate *out);

/**
 * Rate without cooperation.
 *
 * # Safety
 * `ch` must be readable and `out` writable.
 */
enum PdfrelayStatus pdfrelay_direct_rate(const struct PdfrelayChannels *ch,
                                         double p_s,
                                         double alpha1,
                                         struct PdfrelayRate *out);

/**
 * Relayed rate at the best common-message fraction.
 *
 * # Safety
 * `ch` must be readable and `out` writable.
 */
enum PdfrelayStatus pdfrelay_optimize_split(const struct PdfrelayChannels *ch,
                                            double p_s,
                                            double p_r,
                                            double alpha1,
                                            struct PdfrelayRate *out);

#endif  /* PDFRELAY_H */
