# Relative tolerance under which two scores count as a tie in AUC comparisons.
TIE_RTOL = 1e-12
