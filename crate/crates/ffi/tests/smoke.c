/* Exercises the C header against the static library. */
#include <math.h>
#include <stdio.h>
#include "microlocal.h"

int main(void) {
    MlCometric *g = NULL;
    if (ml_cometric_minkowski(2, &g) != ML_STATUS_OK) return 10;
    double x[2] = {-4.0, 0.5}, xi[2] = {1.0, 0.0}, p2 = 0.0, tau = 0.0;
    if (ml_principal_symbol(g, x, xi, 2, &p2) != ML_STATUS_OK || fabs(p2 - 1.0) > 1e-15) return 11;
    if (ml_tau(g, x, xi, 2, ML_ORIENTATION_INCOMING, 0.7, &tau) != ML_STATUS_OK || !(tau > 0.0)) return 12;
    if (ml_principal_symbol(g, x, xi, 3, &p2) != ML_STATUS_INVALID_ARGUMENT) return 13;
    char msg[256];
    if (ml_last_error_message(msg, sizeof msg) == 0) return 14;
    MlTrajectory *tr = NULL;
    if (ml_flow_integrate(g, x, xi, 2, -1.0, 1.0, &tr) != ML_STATUS_OK) return 15;
    size_t n = 0;
    ml_trajectory_len(tr, &n);
    double t, y[2], eta[2];
    if (n < 2 || ml_trajectory_sample(tr, n - 1, &t, y, eta) != ML_STATUS_OK) return 16;
    if (fabs(y[0] - (x[0] + 2.0 * t)) > 1e-10) return 17;
    ml_trajectory_free(tr);
    ml_cometric_free(g);
    printf("ok %s\n", ml_version());
    return 0;
}
