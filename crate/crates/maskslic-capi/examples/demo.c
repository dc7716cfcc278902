/* Minimal C consumer: build a 6x6 image, segment it inside a full-frame
 * mask and print the region count.
 *
 *   cc demo.c -I ../include -L ../../../target/debug -lmaskslic_capi \
 *      -lpthread -ldl -lm -o demo
 */
#include <stdio.h>
#include <stdlib.h>

#include "maskslic.h"

int main(void) {
    size_t dims[2] = {6, 6};
    double spacing[2] = {1.0, 1.0};
    double data[36] = {0};
    uint8_t bits[36];
    for (int i = 0; i < 36; i++) bits[i] = 1;

    MslVolume *volume = NULL;
    MslMask *mask = NULL;
    MslLabeling *labeling = NULL;

    if (msl_volume_create(dims, 2, 1, spacing, data, 36, &volume) != MSL_STATUS_OK ||
        msl_mask_create(dims, 2, bits, 36, &mask) != MSL_STATUS_OK) {
        fprintf(stderr, "setup failed: %s\n", msl_last_error_message());
        return 1;
    }

    MslParams params = {
        .n_regions = 4,
        .compactness = 1.0,
        .max_iters = 10,
        .residual_tol = 0.0,
        .enforce_connectivity = true,
        .backend = MSL_BACKEND_MASK_SLIC,
    };
    if (msl_segment(volume, mask, params, &labeling) != MSL_STATUS_OK) {
        fprintf(stderr, "segment failed: %s\n", msl_last_error_message());
        return 1;
    }
    printf("regions: %zu\n", msl_labeling_num_regions(labeling));

    msl_labeling_free(labeling);
    msl_mask_free(mask);
    msl_volume_free(volume);
    return 0;
}
