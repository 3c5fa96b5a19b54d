#ifndef JUNCTION_FLOW_H
#define JUNCTION_FLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result codes.
 */
typedef enum JfStatus {
  JF_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  JF_STATUS_NULL_POINTER = 1,
  /*
   An argument lies outside the domain of the operation.
   */
  JF_STATUS_DOMAIN = 2,
  JF_STATUS_CONTRACT = 3,
  JF_STATUS_CONFIG = 4,
  JF_STATUS_NUMERICAL = 5,
  JF_STATUS_INVARIANT = 6,
  JF_STATUS_PARSE = 7,
  JF_STATUS_IO = 8,
  /*
   An index or enumeration value is out of range.
   */
  JF_STATUS_INVALID_ARGUMENT = 9,
  /*
   A Rust panic was caught at the boundary.
   */
  JF_STATUS_PANIC = 10,
} JfStatus;

/*
 Classical coupling models.
 */
typedef enum JfClassical {
  JF_CLASSICAL_C1 = 1,
  JF_CLASSICAL_C2 = 2,
  JF_CLASSICAL_C3 = 3,
  JF_CLASSICAL_C4 = 4,
} JfClassical;

/*
 A coupling model.
 */
typedef struct JfModel JfModel;

/*
 Density profiles of a Riemann prediction.
 */
typedef struct JfProfiles JfProfiles;

/*
 Greenshields parameters of roads 1, 2 and 3.
 */
typedef struct JfDiagrams {
  double v_max[3];
  double rho_max[3];
} JfDiagrams;

/*
 Network solver settings. `density_scale` and `flux_scale` convert the
 model units to vehicles/m and vehicles/s (1000 and 3600 for the
 reference units).
 */
typedef struct JfSolverConfig {
  size_t cells;
  double cfl;
  double lambda_min;
  double half_length;
  /*
   Nonzero selects the smallest junction discrepancy for the
   relaxation speed instead of the largest.
   */
  int32_t lambda_min_mode;
  double density_scale;
  double flux_scale;
} JfSolverConfig;

typedef struct JfFluxes {
  double f1;
  double f2;
  double f3;
} JfFluxes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL
 terminated, truncated to `len - 1` bytes) and returns the full message
 length in bytes. Pass a null `buf` to query the length.
 */
size_t jf_last_error_message(char *buf, size_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *jf_version(void);

/*
 The fitted diagrams of the on-ramp recordings (km/h, vehicles/km).
 */
enum JfStatus jf_reference_diagrams(struct JfDiagrams *out);

/*
 Default solver settings in the reference units.
 */
enum JfStatus jf_solver_config_default(struct JfSolverConfig *out);

/*
 Creates a classical model. `markers` may be null, which selects the
 maximal velocities; C1 requires that. `kind` takes a `JfClassical`
 value.
 */
enum JfStatus jf_model_classical(int32_t kind,
                                 const struct JfDiagrams *diagrams,
                                 double beta,
                                 const double *markers,
                                 struct JfModel **out);

/*
 Loads a classical model file written by `fit-classical`.
 */
enum JfStatus jf_model_load_classical(const char *path, struct JfModel **out);

/*
 Loads a network model file written by `train-ml`.
 */
enum JfStatus jf_model_load_ml(const char *path, struct JfModel **out);

/*
 Coupling fluxes for the junction traces `(rho1, rho2, rho3)`.
 */
enum JfStatus jf_model_fluxes(const struct JfModel *model,
                              double rho1,
                              double rho2,
                              double rho3,
                              struct JfFluxes *out);

void jf_model_free(struct JfModel *model);

/*
 Riemann problem with road-wise constant data `(0.7, 0.5, 0.8) rho_max`
 and Neumann ends, advanced to `horizon` seconds.
 */
enum JfStatus jf_riemann_prediction(const struct JfModel *model,
                                    const struct JfSolverConfig *config,
                                    double horizon,
                                    struct JfProfiles **out);

/*
 Cells per road.
 */
size_t jf_profiles_cells(const struct JfProfiles *profiles);

/*
 Copies the cell centers (meters) and final densities (model units) of
 `road` (1, 2 or 3) into buffers of `len` entries. Either buffer may be
 null.
 */
enum JfStatus jf_profiles_road(const struct JfProfiles *profiles,
                               int32_t road,
                               double *x,
                               double *density,
                               size_t len);

/*
 Vehicles gained minus vehicles exchanged through the boundaries,
 relative to the initial mass.
 */
double jf_profiles_balance_defect(const struct JfProfiles *profiles);

void jf_profiles_free(struct JfProfiles *profiles);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JUNCTION_FLOW_H */
