/* Compiled as C: the header must stand on its own. */
#include <math.h>
#include <stdio.h>

#include "aoilab/aoilab.h"

int main(void) {
  aoilab_model* m = NULL;
  double mean = 0.0;
  if (aoilab_model_create("b2", "exp:1", 1.0, &m) != AOILAB_OK) {
    fprintf(stderr, "create: %s\n", aoilab_last_error());
    return 1;
  }
  if (aoilab_mean(m, &mean) != AOILAB_OK || fabs(mean - 8.0 / 3.0) > 1e-12) {
    fprintf(stderr, "mean: %s\n", aoilab_last_error());
    aoilab_model_destroy(m);
    return 1;
  }
  aoilab_model_destroy(m);
  printf("b2 mean %.9g\n", mean);
  return 0;
}
