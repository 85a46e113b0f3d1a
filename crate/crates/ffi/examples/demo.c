/* Build: cc demo.c -I../include -L../../../target/release -lnlburgers_ffi -lm */
#include <stdio.h>
#include "nlburgers.h"

int main(void) {
    NlbForm *form = NULL;
    NlbBasis *basis = NULL;
    double lam[4];

    if (nlb_form_assemble(64, 1.5, &form) != NLB_STATUS_OK) {
        fprintf(stderr, "assemble: %s\n", nlb_last_error());
        return 1;
    }
    if (nlb_basis_solve(form, 4, &basis) != NLB_STATUS_OK ||
        nlb_basis_eigenvalues(basis, lam, 4) != NLB_STATUS_OK) {
        fprintf(stderr, "eigen: %s\n", nlb_last_error());
        nlb_form_free(form);
        return 1;
    }
    for (int k = 0; k < 4; k++)
        printf("lambda_%d = %.10f\n", k + 1, lam[k]);
    nlb_basis_free(basis);
    nlb_form_free(form);
    return 0;
}
