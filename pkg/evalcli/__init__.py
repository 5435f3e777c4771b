"""Rate-distortion evaluation, complexity ledger, reports and the command line."""
