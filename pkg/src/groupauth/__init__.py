"""Group-based RFID mutual authentication toolkit.

Cyclic-group deployment structure, the four-message XOR/mod
authentication exchange, an adversary harness with a distinguishing
experiment, and anonymity-set privacy simulation.
"""

from .groups import (
    GroupSpec,
    GroupElement,
    SubgroupHandle,
    element,
    encode,
    inverse,
    is_group_generator,
    make_group,
    subgroup_for_divisor,
)
from .registry import ServerRow, ServerTable, System, Tag, lookup, provision
from .protocol import (
    Channel,
    DropChannel,
    FlipChannel,
    Msg1,
    Msg2,
    Msg3,
    Msg4,
    Outcome,
    PAPER,
    RESILIENT,
    ReaderSession,
    SessionTranscript,
    ZeroModulusError,
    reader_on_msg1,
    reader_on_msg3,
    run_session,
    tag_begin,
    tag_on_msg2,
    tag_on_msg4,
)

__all__ = [
    "GroupSpec",
    "GroupElement",
    "SubgroupHandle",
    "element",
    "encode",
    "inverse",
    "is_group_generator",
    "make_group",
    "subgroup_for_divisor",
    "ServerRow",
    "ServerTable",
    "System",
    "Tag",
    "lookup",
    "provision",
    "Channel",
    "DropChannel",
    "FlipChannel",
    "Msg1",
    "Msg2",
    "Msg3",
    "Msg4",
    "Outcome",
    "PAPER",
    "RESILIENT",
    "ReaderSession",
    "SessionTranscript",
    "ZeroModulusError",
    "reader_on_msg1",
    "reader_on_msg3",
    "run_session",
    "tag_begin",
    "tag_on_msg2",
    "tag_on_msg4",
]

__version__ = "0.1.0"
