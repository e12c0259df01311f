"""Multi-party deployment: wire frames, transports, parties and sessions."""
from .cluster import CHECKS, AuditError, Cluster, SessionAborted, SessionConfig, public_meta, session_id
from .party import IngestError, Party, PartyEngine, PartyStore
from .transport import InProcessHub, SocketMesh, make_transport
from .wire import Frame, Kind

__all__ = ["CHECKS", "AuditError", "Cluster", "SessionAborted", "SessionConfig", "public_meta",
           "session_id", "IngestError", "Party", "PartyEngine", "PartyStore", "InProcessHub",
           "SocketMesh", "make_transport", "Frame", "Kind"]
