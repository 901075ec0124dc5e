"""Client for an external seed/rule suggestion provider.

Newline-delimited JSON, either over a child process's stdin/stdout or
POSTed to one HTTP endpoint. Request::

    {"op": "seed" | "rules", "template": ..., "constraints": ..., "seed": N}

Response: ``{"text": ...}``. Anything else, or no answer within the
timeout, yields ``None`` and the caller falls back to builtin generation.
"""

from __future__ import annotations

import json
import logging
import select
import shlex
import subprocess
import threading
import urllib.error
import urllib.request

log = logging.getLogger(__name__)

TIMEOUT = 10.0


class Provider:
    """One serialized connection. ``spec`` is a URL or a shell-style command."""

    def __init__(self, spec: str, timeout: float = TIMEOUT):
        self.spec = spec
        self.timeout = timeout
        self.http = spec.startswith(("http://", "https://"))
        self.lock = threading.Lock()
        self.proc: subprocess.Popen | None = None
        self.dead = False
        self.incidents: list[str] = []

    def _incident(self, msg: str) -> None:
        log.warning("provider %s: %s", self.spec, msg)
        self.incidents.append(msg)

    def _start(self):
        if self.proc is None or self.proc.poll() is not None:
            self.proc = subprocess.Popen(shlex.split(self.spec), stdin=subprocess.PIPE,
                                         stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
                                         text=True, bufsize=1)
        return self.proc

    def _exchange_proc(self, line: str) -> str | None:
        proc = self._start()
        proc.stdin.write(line + "\n")
        proc.stdin.flush()
        ready, _, _ = select.select([proc.stdout], [], [], self.timeout)
        if not ready:
            self._incident("timed out")
            self.close()
            return None
        return proc.stdout.readline()

    def _exchange_http(self, line: str) -> str | None:
        req = urllib.request.Request(self.spec, data=(line + "\n").encode(),
                                     headers={"Content-Type": "application/x-ndjson"})
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return resp.read().decode()

    def request(self, op: str, template: str | None, constraints, seed: int) -> str | None:
        """The provider's ``text`` field, or None on any failure."""
        if self.dead:
            return None
        line = json.dumps({"op": op, "template": template, "constraints": constraints,
                           "seed": int(seed)}, sort_keys=True)
        with self.lock:
            try:
                raw = (self._exchange_http if self.http else self._exchange_proc)(line)
            except (OSError, urllib.error.URLError, ValueError) as exc:
                self._incident(f"unreachable: {exc}")
                self.dead = True
                return None
        if not raw:
            self._incident("no response")
            return None
        try:
            text = json.loads(raw.strip().splitlines()[0])["text"]
        except (ValueError, KeyError, TypeError, IndexError):
            self._incident("malformed response")
            return None
        if not isinstance(text, str):
            self._incident("response text is not a string")
            return None
        return text

    def close(self) -> None:
        if self.proc is not None:
            try:
                self.proc.kill()
                self.proc.wait(timeout=1)
            except OSError:
                pass
            self.proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
