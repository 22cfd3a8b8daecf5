#include <stdio.h>
#include <string.h>
#include "meroval.h"

static int fail(const char *what, MerovalStatus s) {
    const char *e = meroval_last_error();
    fprintf(stderr, "%s: status %d: %s\n", what, (int)s, e ? e : "(none)");
    return 1;
}

int main(int argc, char **argv) {
    if (argc != 2) return 2;
    MerovalWorkspace *ws = NULL;
    MerovalStatus s = meroval_workspace_open(argv[1], &ws);
    if (s != MEROVAL_STATUS_NOT_FOUND) return fail("open missing", s);
    if ((s = meroval_workspace_init(argv[1], &ws)) != MEROVAL_STATUS_OK) return fail("init", s);
    char *out = NULL;
    if ((s = meroval_workspace_verify(ws, &out)) != MEROVAL_STATUS_OK) return fail("verify", s);
    printf("state %s\n", out);
    meroval_string_free(out);
    if ((s = meroval_prove_tptp("fof(g, conjecture, (p | ~p)).", 5.0, &out)) != MEROVAL_STATUS_OK) return fail("prove", s);
    printf("%s", out);
    meroval_string_free(out);
    meroval_workspace_free(ws);
    return 0;
}
