"""Set-theoretic receding-horizon control of a networked plant under channel attacks."""
from .model import SystemModel, example_model, load_model
from .reach import ControllableFamily, synthesize

__version__ = "0.1.0"
__all__ = ["ControllableFamily", "SystemModel", "example_model", "load_model", "synthesize", "__version__"]
