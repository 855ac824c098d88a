/* Compiles the public header as C and exercises a few calls. */
#include <stdio.h>
#include <string.h>

#include "redactscope/redactscope.h"

int main(void) {
  rs_homoglyph_map* map = NULL;
  char* out = NULL;
  int ok;

  if (rs_homoglyph_map_default(&map) != RS_OK) return 1;
  if (rs_harden(map, "nation", 6, &out) != RS_OK) return 1;
  ok = strcmp(out, "\xd5\xb8\xd0\xb0t\xd1\x96\xd0\xbe\xd5\xb8") == 0;
  rs_string_free(out);
  rs_homoglyph_map_free(map);
  if (!ok) {
    fprintf(stderr, "unexpected harden output\n");
    return 1;
  }
  if (strcmp(rs_label_name(0), "DATETIME") != 0) return 1;
  return rs_ingest("[", 1, NULL, NULL) == RS_E_PARSE ? 0 : 1;
}
