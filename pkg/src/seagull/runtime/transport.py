"""Point-to-point FIFO links between numbered endpoints.

Endpoints ``0..t-1`` are verifier parties; the cluster adds the dealer and the
submitting client as further endpoints. Both transports move encoded frames,
so the bytes that cross an in-process queue are the bytes a socket carries.
"""
from __future__ import annotations

import queue
import socket
import threading

from ..field import ProtocolAbort
from .wire import Frame, decode, read_frame

DEFAULT_TIMEOUT = 60.0


class Disconnected(ProtocolAbort):
    pass


class Transport:
    timeout: float = DEFAULT_TIMEOUT

    def send(self, src: int, dst: int, frame: Frame) -> None:
        raise NotImplementedError

    def recv(self, dst: int, src: int, timeout: float | None = None) -> Frame:
        raise NotImplementedError

    def disconnect(self, endpoint: int) -> None:
        """Simulate an endpoint dropping off the network."""
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


_EOF = object()


class _Inbox:
    def __init__(self, endpoints):
        self.q = {(a, b): queue.Queue() for a in range(endpoints) for b in range(endpoints) if a != b}

    def get(self, dst, src, timeout):
        try:
            item = self.q[(src, dst)].get(timeout=timeout)
        except queue.Empty:
            raise Disconnected(f"timed out waiting for endpoint {src}") from None
        if item is _EOF:
            self.q[(src, dst)].put(_EOF)
            raise Disconnected(f"endpoint {src} disconnected")
        return item


class InProcessHub(Transport):
    def __init__(self, endpoints: int):
        self.endpoints = endpoints
        self._inbox = _Inbox(endpoints)
        self._down: set[int] = set()

    def send(self, src, dst, frame):
        if src in self._down:
            raise Disconnected(f"endpoint {src} is disconnected")
        if dst not in self._down:
            self._inbox.q[(src, dst)].put(frame.encode())

    def recv(self, dst, src, timeout=None):
        return decode(self._inbox.get(dst, src, timeout or self.timeout))

    def disconnect(self, endpoint):
        self._down.add(endpoint)
        for other in range(self.endpoints):
            if other != endpoint:
                self._inbox.q[(endpoint, other)].put(_EOF)


class SocketMesh(Transport):
    """Full TCP mesh on the loopback interface, one connection per pair.

    A reader thread per connection drains frames into a queue, so large
    simultaneous sends cannot deadlock.
    """

    def __init__(self, endpoints: int, host: str = "127.0.0.1"):
        self.endpoints = endpoints
        self._inbox = _Inbox(endpoints)
        self._socks: dict[tuple[int, int], socket.socket] = {}
        self._locks: dict[tuple[int, int], threading.Lock] = {}
        self._threads: list[threading.Thread] = []
        listeners = []
        for i in range(endpoints):
            ls = socket.create_server((host, 0))
            listeners.append(ls)
        addrs = [ls.getsockname() for ls in listeners]
        # endpoint i dials every j > i; j accepts and learns i from a 4-byte hello
        for i in range(endpoints):
            for j in range(i + 1, endpoints):
                c = socket.create_connection(addrs[j])
                c.sendall(i.to_bytes(4, "big"))
                a, _ = listeners[j].accept()
                peer = int.from_bytes(_recv_exact(a, 4), "big")
                assert peer == i
                self._wire(i, j, c)
                self._wire(j, i, a)
        for ls in listeners:
            ls.close()

    def _wire(self, me, peer, sock):
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._socks[(me, peer)] = sock
        self._locks[(me, peer)] = threading.Lock()
        th = threading.Thread(target=self._pump, args=(me, peer, sock), daemon=True)
        th.start()
        self._threads.append(th)

    def _pump(self, me, peer, sock):
        q = self._inbox.q[(peer, me)]
        try:
            while True:
                q.put(read_frame(lambda k: _recv_exact(sock, k)))
        except (OSError, EOFError, ProtocolAbort):
            q.put(_EOF)

    def send(self, src, dst, frame):
        sock = self._socks.get((src, dst))
        if sock is None:
            raise Disconnected(f"no link {src}->{dst}")
        try:
            with self._locks[(src, dst)]:
                sock.sendall(frame.encode())
        except OSError as exc:
            raise Disconnected(f"link {src}->{dst} failed: {exc}") from None

    def recv(self, dst, src, timeout=None):
        return self._inbox.get(dst, src, timeout or self.timeout)

    def disconnect(self, endpoint):
        for (a, b), s in list(self._socks.items()):
            if endpoint in (a, b):
                try:
                    s.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
                s.close()
                self._socks.pop((a, b))

    def close(self):
        for s in self._socks.values():
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()
        self._socks.clear()


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise EOFError("connection closed")
        buf += chunk
    return bytes(buf)


def make_transport(kind: str, endpoints: int, timeout: float = DEFAULT_TIMEOUT) -> Transport:
    if kind in ("inproc", "in-process"):
        tr = InProcessHub(endpoints)
    elif kind in ("socket", "tcp"):
        tr = SocketMesh(endpoints)
    else:
        raise ValueError(f"unknown transport {kind!r}")
    tr.timeout = timeout
    return tr
