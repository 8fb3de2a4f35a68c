"""WebSocket front door for the session service.

One connection can open many sessions; messages are handled strictly in
arrival order per connection, and the service itself is synchronous, so
session state never sees concurrent writers.
"""
from __future__ import annotations

import asyncio
import json

try:
    from websockets.asyncio.server import serve as _ws_serve
except ImportError:  # websockets < 13
    from websockets.server import serve as _ws_serve

from .session import SessionService


async def _client_loop(websocket, service: SessionService) -> None:
    async for raw in websocket:
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError:
            await websocket.send(json.dumps(
                {"type": "error", "code": "bad_type",
                 "message": "message is not valid JSON"}))
            continue
        reply = service.handle(msg)
        if reply is not None:
            await websocket.send(json.dumps(reply))


async def start_server(service: SessionService, host: str = "127.0.0.1",
                       port: int = 8765):
    """Bind and return the server object; callers own its lifetime."""
    return await _ws_serve(lambda ws: _client_loop(ws, service), host, port)


def run_server(service: SessionService, host: str = "127.0.0.1",
               port: int = 8765) -> None:
    """Serve until interrupted."""
    async def _main():
        server = await start_server(service, host, port)
        try:
            await asyncio.Future()
        finally:
            server.close()

    asyncio.run(_main())
