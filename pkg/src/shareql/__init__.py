"""shareql: secret-shared SQL over simulated non-communicating servers.

A data owner splits relations into Shamir secret-shares across c servers;
a user coordinator runs oblivious count, selection, join, and range
queries by orchestrating MapReduce-style evaluation over the shares and
interpolating the per-server results.
"""

from .field import DEFAULT_PRIME, PrimeField
from .sss import (
    Share,
    SharingParams,
    degree_after,
    make_shares,
    reconstruct,
    required_share_count,
)
from .owner import Relation, append_rid, share_relation, share_relations
from .storage import (
    SharedRelation,
    load_share_dir,
    read_share_file,
    write_share_files,
)
from .engine import ServerEngine
from .coordinator import Coordinator

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PRIME",
    "PrimeField",
    "Share",
    "SharingParams",
    "make_shares",
    "reconstruct",
    "required_share_count",
    "degree_after",
    "Relation",
    "append_rid",
    "share_relation",
    "share_relations",
    "SharedRelation",
    "write_share_files",
    "read_share_file",
    "load_share_dir",
    "ServerEngine",
    "Coordinator",
    "__version__",
]
