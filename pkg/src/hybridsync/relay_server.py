"""Socket front-end for the relay core: framed TCP plus RFC 6455 binary
WebSocket messages carrying the identical frame bytes.

All session mutations run on one asyncio loop, so each session's stamped
stream is totally ordered by construction.  TCP connections carry
length-delimited frames (the 24-byte header is self-delimiting through
payload_len); WebSocket connections carry exactly one frame per binary
message.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import os
import threading
import time

from hybridsync.framing import FrameError, StreamParser
from hybridsync.relay import RelayCore, RelayActions

logger = logging.getLogger(__name__)

SWEEP_PERIOD = 1.0


class _TcpConn:
    def __init__(self, writer: asyncio.StreamWriter):
        self.writer = writer

    def send(self, data: bytes) -> None:
        self.writer.write(data)

    def close(self) -> None:
        try:
            self.writer.close()
        except RuntimeError:
            pass


class _WsConn:
    """Per-connection ordered send queue; one task drains it."""

    def __init__(self, ws, loop: asyncio.AbstractEventLoop):
        self.ws = ws
        self.queue: asyncio.Queue[bytes | None] = asyncio.Queue()
        self.task = loop.create_task(self._drain())

    async def _drain(self):
        try:
            while True:
                data = await self.queue.get()
                if data is None:
                    break
                await self.ws.send(data)
        except Exception:
            pass

    def send(self, data: bytes) -> None:
        self.queue.put_nowait(data)

    def close(self) -> None:
        self.queue.put_nowait(None)


class RelayServer:
    """Embeddable relay: serves TCP (and optionally WS) until stopped."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        ws_port: int | None = None,
        max_peers: int = 16,
        stats_path: str | None = None,
        announce: bool = False,
    ):
        self.host = host
        self.port = port
        self.ws_port = ws_port
        self.core = RelayCore(max_peers=max_peers)
        self.stats_path = stats_path
        self.announce = announce
        self.added_latencies: list[float] = []  # seconds, arrival -> fan-out issued
        self._conns: dict[int, _TcpConn | _WsConn] = {}
        self._next_conn_id = 0
        self._loop: asyncio.AbstractEventLoop | None = None
        self._started = threading.Event()
        self._stop: asyncio.Event | None = None
        self._thread: threading.Thread | None = None

    # -- core dispatch (always on the loop) ---------------------------------

    def _dispatch(self, actions: RelayActions) -> None:
        for out in actions.sends:
            conn = self._conns.get(out.conn_id)
            if conn is not None:
                conn.send(out.data)
        for conn_id in actions.closes:
            conn = self._conns.get(conn_id)
            if conn is not None:
                conn.close()

    def _register(self, conn) -> int:
        conn_id = self._next_conn_id
        self._next_conn_id += 1
        self._conns[conn_id] = conn
        return conn_id

    def _unregister(self, conn_id: int) -> None:
        if conn_id in self._conns:
            del self._conns[conn_id]
            self._dispatch(self.core.on_disconnect(conn_id, time.monotonic()))

    # -- TCP ------------------------------------------------------------------

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        conn_id = self._register(_TcpConn(writer))
        parser = StreamParser()
        try:
            while True:
                chunk = await reader.read(65536)
                if not chunk:
                    break
                arrival = time.monotonic()
                try:
                    frames = parser.feed(chunk)
                except FrameError as exc:
                    logger.warning("tcp conn %d: corrupt stream: %s", conn_id, exc)
                    break
                for raw in frames:
                    self._dispatch(self.core.on_frame(conn_id, raw, arrival))
                    self.added_latencies.append(time.monotonic() - arrival)
        except (ConnectionResetError, asyncio.IncompleteReadError):
            pass
        finally:
            self._unregister(conn_id)
            try:
                writer.close()
            except RuntimeError:
                pass

    # -- WebSocket ---------------------------------------------------------------

    async def _handle_ws(self, ws):
        conn_id = self._register(_WsConn(ws, asyncio.get_running_loop()))
        try:
            async for message in ws:
                if isinstance(message, str):
                    continue  # text frames are not part of the protocol
                self._dispatch(self.core.on_frame(conn_id, message, time.monotonic()))
        except Exception:
            pass
        finally:
            self._unregister(conn_id)

    # -- lifecycle -------------------------------------------------------------------

    async def _sweeper(self):
        while True:
            await asyncio.sleep(SWEEP_PERIOD)
            self._dispatch(self.core.sweep(time.monotonic()))

    async def serve(self) -> None:
        self._stop = asyncio.Event()
        try:
            import signal

            asyncio.get_running_loop().add_signal_handler(signal.SIGTERM, self._stop.set)
        except (NotImplementedError, RuntimeError):
            pass  # background-thread loops cannot take signal handlers
        server = await asyncio.start_server(self._handle_tcp, self.host, self.port)
        self.port = server.sockets[0].getsockname()[1]
        ws_server = None
        if self.ws_port is not None:
            import websockets

            ws_server = await websockets.serve(self._handle_ws, self.host, self.ws_port)
            self.ws_port = next(iter(ws_server.sockets)).getsockname()[1]
            logger.info("websocket listener on %s:%d", self.host, self.ws_port)
        sweeper = asyncio.ensure_future(self._sweeper())
        logger.info("relay listening on %s:%d", self.host, self.port)
        if self.announce:
            print(f"LISTENING {self.host} {self.port} ws={self.ws_port or 0}", flush=True)
        self._started.set()
        try:
            await self._stop.wait()
        finally:
            if self.stats_path:
                self._write_stats()  # before teardown adds disconnect traffic
            sweeper.cancel()
            server.close()
            await server.wait_closed()
            if ws_server is not None:
                ws_server.close()
                await ws_server.wait_closed()
            current = asyncio.current_task()
            pending = [t for t in asyncio.all_tasks() if t is not current]
            for task in pending:
                task.cancel()
            await asyncio.gather(*pending, return_exceptions=True)

    def _write_stats(self) -> None:
        from hybridsync.sim.metrics import nearest_rank_percentile

        ms = [lat * 1000.0 for lat in self.added_latencies]
        with open(self.stats_path, "w") as fh:
            fh.write(
                f"# relay added latency over {len(ms)} frames: "
                f"p50={nearest_rank_percentile(ms, 50):.4f} "
                f"p95={nearest_rank_percentile(ms, 95):.4f} "
                f"p99={nearest_rank_percentile(ms, 99):.4f} ms\n"
            )
            for sid, record in self.core.sessions.items():
                fh.write(
                    f"# session {sid} digest={self.core.session_digest(sid):016x} "
                    f"seq={record.state.last_applied_relay_seq}\n"
                )
            for value in ms:
                fh.write(f"{value:.6f}\n")
        logger.info("wrote %d latency samples to %s", len(ms), self.stats_path)

    # Threaded embedding for tests and the simulator's realtime mode.

    def start_background(self, timeout: float = 5.0) -> "RelayServer":
        def runner():
            self._loop = asyncio.new_event_loop()
            asyncio.set_event_loop(self._loop)
            try:
                self._loop.run_until_complete(self.serve())
            finally:
                self._loop.close()

        self._thread = threading.Thread(target=runner, daemon=True)
        self._thread.start()
        if not self._started.wait(timeout):
            raise RuntimeError("relay server failed to start")
        return self

    def stop(self) -> None:
        if self._loop is not None and self._stop is not None:
            self._loop.call_soon_threadsafe(self._stop.set)
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def digest_of_only_session(self) -> int:
        """Digest of the single active session (asserts exactly one exists)."""
        sessions = [s for s in self.core.sessions.values() if s.peers]
        if len(sessions) != 1:
            raise RuntimeError(f"expected exactly one active session, found {len(sessions)}")
        return self.core.session_digest(sessions[0].session_id)

    def __enter__(self) -> "RelayServer":
        return self.start_background()

    def __exit__(self, *exc) -> None:
        self.stop()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="relay", description="Session relay service")
    parser.add_argument("--listen", default="0.0.0.0:7777", help="TCP address host:port")
    parser.add_argument("--ws-port", type=int, help="also accept WebSocket connections here")
    parser.add_argument("--max-peers", type=int, default=16)
    parser.add_argument("--stats", help="write per-frame added-latency samples here on exit")
    parser.add_argument(
        "--announce", action="store_true",
        help="print the bound address to stdout once listening (for harnesses)",
    )
    parser.add_argument("--log", default=os.environ.get("HYBRIDSYNC_LOG", "info"))
    args = parser.parse_args(argv)

    logging.basicConfig(level=args.log.upper(), format="%(asctime)s %(name)s %(levelname)s %(message)s")
    host, _, port = args.listen.rpartition(":")
    server = RelayServer(
        host=host or "0.0.0.0",
        port=int(port),
        ws_port=args.ws_port,
        max_peers=args.max_peers,
        stats_path=args.stats,
        announce=args.announce,
    )
    try:
        asyncio.run(server.serve())
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
