"""Remaining-useful-life prediction for hard disk drives from S.M.A.R.T. logs."""

__version__ = "0.1.0"
