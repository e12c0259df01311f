"""Privacy-preserving inter-AS forwarding verification over additive shares."""
from .field import P, ObliviousTrace, ShareSet, reconstruct, share
from .engine import LocalEngine
from .fib import ForwardingGraph, SharedFib, build_fib, encode_for_sharing, inject_loop, parse_topology
from .oracle import loop_free_oracle, walk_oracle
from .verifier import (Verdict, apply_update, check_origin_uniqueness, check_reachability,
                       check_waypoint, expected_trace, incremental_check, is_loop_free)

__version__ = "0.1.0"
