"""Exact simulation of budgeted epidemic curing on graphs, the CURE policy,
exact impedance / CutWidth, and Monte Carlo checks of its bounds."""
from .crusade import (Crusade, ExactCrusades, ImpedanceTable, RestrictedCrusades,
                      brute_force_impedance, cutwidth, impedance, optimal_crusade,
                      restrict_crusade, width)
from .graph import (Bag, Graph, boundary_edges, cut, load_graph, make_complete, make_cycle,
                    make_grid, make_line, make_star, parse_graph_spec)
from .policy import CureConfig, CurePolicy, CureState
from .sim import Event, Outcome, RngStream, SimState, Trace, run, step

__version__ = "0.1.0"
