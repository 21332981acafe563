"""Bandwidth tomography from simulated BitTorrent broadcasts."""
