/* Build the inventory from a MEDIC-style line and query it.
 *
 *   cargo build -p spanlink-ffi --release
 *   cc crates/ffi/examples/top_k.c -Icrates/ffi/include \
 *      -Ltarget/release -lspanlink_ffi -o top_k
 *   LD_LIBRARY_PATH=target/release ./top_k "breast cancer"
 */
#include <stdio.h>

#include "spanlink.h"

static const char *MEDIC =
    "Breast Neoplasms\tMESH:D001943\t\t\t\t\t\tbreast cancer|breast tumor\n"
    "Hepatitis\tMESH:D006505\t\t\t\t\t\tliver inflammation\n";

int main(int argc, char **argv) {
    const char *query = argc > 1 ? argv[1] : "breast cancer";
    SlMatcher *m = NULL;
    if (sl_matcher_from_medic_text(MEDIC, &m) != SL_STATUS_OK) {
        fprintf(stderr, "error: %s\n", sl_last_error_message());
        return 1;
    }
    char *json = NULL;
    if (sl_matcher_top_k(m, query, 5, &json) != SL_STATUS_OK) {
        fprintf(stderr, "error: %s\n", sl_last_error_message());
        sl_matcher_free(m);
        return 1;
    }
    printf("spanlink %s, %zu concepts\n%s\n", sl_version(), sl_matcher_concept_count(m), json);
    sl_string_free(json);
    sl_matcher_free(m);
    return 0;
}
