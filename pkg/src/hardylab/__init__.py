"""hardylab: Rayleigh quotients of Hardy-type potentials on cone-like domains."""

from .__about import __author__, __authors__, __description__, __email__, __version__
from .analytic import CrossSection, cone_spectrum, exponents, hardy_constant, truncated_cone_mu
from .config.loader import ConfigLoader
from .config.schema import LabConfig
from .eig import EigResult, smallest_pair
from .fem import AssembledSystem, assemble_system
from .geometry import Bulge, DomainSpec, PotentialSpec, TruncationWindow, WBump, build_domain, generate_mesh

__all__ = [
    "AssembledSystem",
    "Bulge",
    "ConfigLoader",
    "CrossSection",
    "DomainSpec",
    "EigResult",
    "LabConfig",
    "PotentialSpec",
    "TruncationWindow",
    "WBump",
    "assemble_system",
    "build_domain",
    "cone_spectrum",
    "exponents",
    "generate_mesh",
    "hardy_constant",
    "smallest_pair",
    "truncated_cone_mu",
]
