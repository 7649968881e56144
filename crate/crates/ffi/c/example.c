/* Sum of a distributed array, built against the generated header.
 *
 *   cc -Iinclude c/example.c -L../../target/release -lpgas_ffi -o example
 *   launch --units 4 -- ./example
 */
#include <inttypes.h>
#include <stdio.h>

#include "pgas.h"

static int check(pgas_status status, const char *what) {
    if (status != PGAS_OK) {
        char msg[256];
        pgas_last_error(msg, sizeof msg);
        fprintf(stderr, "%s: %s (%s)\n", what, pgas_status_name(status), msg);
        return 1;
    }
    return 0;
}

int main(void) {
    pgas_context *ctx = NULL;
    if (check(pgas_init(&ctx), "init")) return 1;

    uint32_t me = 0;
    size_t units = 0;
    pgas_my_id(ctx, &me);
    pgas_n_units(ctx, &units);

    pgas_array_i64 *arr = NULL;
    if (check(pgas_array_i64_new(ctx, 1000, &arr), "alloc")) return 1;

    int64_t *local = NULL;
    size_t len = 0;
    pgas_array_i64_local(arr, &local, &len);
    for (size_t i = 0; i < len; i++) local[i] = 1;
    pgas_barrier(ctx);

    int64_t sum = 0;
    if (check(pgas_array_i64_sum(arr, &sum), "sum")) return 1;
    if (me == 0) printf("%zu units, sum %" PRId64 "\n", units, sum);

    pgas_array_i64_free(arr);
    if (check(pgas_finalize(ctx), "finalize")) return 1;
    pgas_context_free(ctx);
    return 0;
}
