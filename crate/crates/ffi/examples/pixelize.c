/* cc pixelize.c -I../include -L../../../target/debug -ldeobfusc_ffi -lm -lpthread -ldl */
#include <stdio.h>
#include "deobfusc.h"

int main(int argc, char **argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: %s in.pgm out.pgm\n", argv[0]);
        return 2;
    }
    DfImage *img = NULL, *out = NULL;
    DfSpec *spec = NULL;
    if (df_image_load_pnm(argv[1], &img) != DF_STATUS_OK)
        goto fail;
    if (df_spec_from_json("{\"method\":\"pixelize\",\"blocks\":[4,4]}", &spec) != DF_STATUS_OK)
        goto fail;
    if (df_obfuscate(img, spec, &out) != DF_STATUS_OK || df_image_save_pnm(out, argv[2]) != DF_STATUS_OK)
        goto fail;
    double db = 0;
    df_psnr(img, out, &db);
    printf("deobfusc %s: psnr %.2f dB\n", df_version(), db);
    df_image_free(out);
    df_spec_free(spec);
    df_image_free(img);
    return 0;
fail:
    fprintf(stderr, "error: %s\n", df_last_error());
    df_image_free(out);
    df_spec_free(spec);
    df_image_free(img);
    return 1;
}
