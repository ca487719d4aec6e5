"""trigger-forge: synthesize the triggering terms an SMT solver needs to
finish an unsatisfiability proof under E-matching."""

from .config import Config, preset
from .pipeline import Report, run, run_file

__version__ = "0.1.0"
__all__ = ["Config", "preset", "Report", "run", "run_file", "__version__"]
