#include <math.h>
#include <stdio.h>
#include <string.h>

#include "chimps.h"

#define CHECK(call)                                                        \
  do {                                                                     \
    ChimpsStatus s_ = (call);                                              \
    if (s_ != CHIMPS_STATUS_OK) {                                          \
      fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_,              \
              chimps_last_error());                                        \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  ChimpsCircuit *c = NULL;
  CHECK(chimps_circuit_brick_1d(10, 12, 7, "CZ", &c));
  size_t n = 0, gates = 0;
  CHECK(chimps_circuit_info(c, &n, &gates));

  ChimpsMps *m = NULL;
  CHECK(chimps_mps_new(n, 4, &m));
  CHECK(chimps_mps_run_circuit(m, c));
  double f = 0.0;
  CHECK(chimps_mps_estimated_fidelity(m, &f));
  size_t entries = 0;
  CHECK(chimps_mps_log_len(m, &entries));
  ChimpsLogEntry last;
  CHECK(chimps_mps_log_entry(m, entries - 1, &last));

  unsigned char bits[10] = {0};
  double re = 0.0, im = 0.0;
  CHECK(chimps_mps_amplitude(m, bits, 10, &re, &im));

  /* errors come back as codes with a message */
  ChimpsStatus bad = chimps_mps_entropy(m, 99, &f);
  if (bad != CHIMPS_STATUS_OUT_OF_RANGE || chimps_last_error() == NULL) {
    fprintf(stderr, "expected an out-of-range error, got %d\n", (int)bad);
    return 1;
  }

  char *text = NULL;
  CHECK(chimps_circuit_to_text(c, &text));
  ChimpsCircuit *back = NULL;
  CHECK(chimps_circuit_parse(text, &back));
  chimps_string_free(text);

  printf("n=%zu gates=%zu entries=%zu F=%.6f last_f=%.6f amp=%.6f\n", n, gates,
         entries, f, last.f, sqrt(re * re + im * im));
  chimps_circuit_free(back);
  chimps_circuit_free(c);
  chimps_mps_free(m);
  return 0;
}
