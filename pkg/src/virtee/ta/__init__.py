"""TA-side runtime: module ABI, entry-point dispatch, core services."""
