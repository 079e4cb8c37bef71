"""Jet spaces as Carnot groups: metrics, calibrations and non-extension witnesses."""
