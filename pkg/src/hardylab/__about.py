# src/hardylab/__about.py
from ._version import __version__

__authors__ = [
    {"name": "hardylab developers", "email": "hardylab@users.noreply.github.com"},
]
__author__ = ", ".join(a["name"] for a in __authors__)
__email__ = "hardylab@users.noreply.github.com"
__description__ = (
    "Finite-element laboratory for Rayleigh quotients of Hardy-type potentials on cone-like domains"
)
