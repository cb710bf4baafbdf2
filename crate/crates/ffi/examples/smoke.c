#include <stdio.h>
#include "codes.h"

int main(void) {
    CodesDataset *ds = NULL;
    if (codes_dataset_generate("simple_ode", 42, 8, 2, 2, 10, &ds) != CODES_STATUS_OK) {
        fprintf(stderr, "generate: %s\n", codes_last_error_message());
        return 1;
    }
    CodesCounts c;
    codes_dataset_counts(ds, &c);

    CodesModel *m = NULL;
    codes_model_build_default(CODES_SURROGATE_LP, c.n_quantities, 1, &m);
    size_t params = 0;
    codes_model_param_count(m, &params);

    double x[4] = {1, 2, 3, 4}, y[4] = {1, 3, 2, 5}, r = 0;
    bool defined = false;
    codes_pearson(x, y, 4, &r, &defined);

    if (codes_dataset_generate("bogus", 0, 1, 1, 1, 2, &ds) != CODES_STATUS_UNKNOWN_DATASET) return 1;
    printf("%zu quantities, %zu params, r=%.6f, err=%s\n", c.n_quantities, params, r, codes_last_error_message());
    codes_model_free(m);
    codes_dataset_free(ds);
    return 0;
}
