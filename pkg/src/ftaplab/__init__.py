"""Exact no-arbitrage theory on finite scenario trees."""

from .calculus import *  # noqa: F401,F403
from .duality import *  # noqa: F401,F403
from .generate import *  # noqa: F401,F403
from .lp import *  # noqa: F401,F403
from .market import *  # noqa: F401,F403
from .metrics import *  # noqa: F401,F403
from .polyhedra import *  # noqa: F401,F403
from .tree import (
    AdaptedProcess,
    Node,
    PredictableControl,
    ScenarioTree,
    StoppingTimeSpec,
    TerminalVariable,
    TreeError,
    conditional_expectation,
    martingale_closure,
    stopped_process,
)
from .treefile import (
    ParseError,
    TreeFile,
    format_rational,
    parse_rational,
    parse_tree_file,
    read_tree_file,
    render_tree_file,
    write_tree_file,
)

__version__ = "0.1.0"
