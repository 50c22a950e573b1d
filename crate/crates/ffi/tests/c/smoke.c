#include <stdio.h>
#include <string.h>

#include "rrimpute.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        RrStatus s_ = (call);                                              \
        if (s_ != RR_STATUS_OK) {                                          \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,              \
                    rr_last_error_message());                              \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    const double values[] = {1.0, 2.0, 2.0, 0.0, 3.0, 6.0, 4.0, 8.0, 5.0, 10.0};
    const uint8_t missing[] = {0, 0, 0, 1, 0, 0, 0, 0, 0, 0};
    RrTable *table = NULL, *filled = NULL;
    RrRegressor *model = NULL;
    size_t rounds = 0;
    double v = 0.0;
    uint8_t gap = 1;

    CHECK(rr_table_new(5, 2, values, missing, &table));
    CHECK(rr_regressor_new("br", 0, &model));
    if (rr_regressor_set_param(model, "no_such", "1") != RR_STATUS_CONFIG) return 2;
    CHECK(rr_impute(table, model, 0, -1.0, &filled, &rounds));
    CHECK(rr_table_get(filled, 1, 1, &v, &gap));
    if (gap != 0 || v < 3.0 || v > 5.0) return 3;

    char *csv = NULL;
    CHECK(rr_table_to_csv(filled, &csv));
    printf("%s rounds=%zu\n%s", rr_version(), rounds, csv);
    rr_string_free(csv);
    rr_regressor_free(model);
    rr_table_free(filled);
    rr_table_free(table);
    return 0;
}
