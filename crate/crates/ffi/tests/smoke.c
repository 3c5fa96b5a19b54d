#include "junction_flow.h"
#include <stdio.h>

int run(void) {
    JfDiagrams d;
    JfSolverConfig cfg;
    JfModel *m = NULL;
    JfProfiles *p = NULL;
    JfFluxes f;
    char msg[256];
    if (jf_reference_diagrams(&d) != JF_STATUS_OK) return 1;
    if (jf_solver_config_default(&cfg) != JF_STATUS_OK) return 1;
    if (jf_model_classical(JF_CLASSICAL_C1, &d, 0.05, NULL, &m) != JF_STATUS_OK) {
        jf_last_error_message(msg, sizeof msg);
        fprintf(stderr, "%s\n", msg);
        return 1;
    }
    if (jf_model_fluxes(m, 30.0, 60.0, 100.0, &f) != JF_STATUS_OK) return 1;
    if (jf_riemann_prediction(m, &cfg, 10.0, &p) == JF_STATUS_OK) {
        double rho[1024];
        size_t n = jf_profiles_cells(p);
        if (n <= 1024) jf_profiles_road(p, 1, NULL, rho, n);
        jf_profiles_free(p);
    }
    jf_model_free(m);
    return 0;
}
