"""Reference external agent: wraps a builtin agent behind the wire protocol.

Run as:  python -m scenosearch.agents.stub [--ref builtin:safe_follower?...]
Used by tests to prove the external bridge reproduces in-process behavior.
"""

from __future__ import annotations

import argparse
import json
import sys

from .base import setup_env
from .wire import action_doc, context_from, dumps, observation_from


def serve(ref: str, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    agent = None
    for line in stdin:
        if not line.strip():
            continue
        msg = json.loads(line)
        kind = msg.get("type")
        if kind == "hello":
            agent = setup_env(ref, context_from(msg["context"]))
            stdout.write(dumps({"type": "ready"}))
        elif kind == "observation":
            if agent is None:
                raise SystemExit("observation before hello")
            action, log = agent.act(observation_from(msg["observation"]))
            stdout.write(dumps(action_doc(action, log)))
        elif kind == "shutdown":
            stdout.write(dumps({"type": "bye"}))
            stdout.flush()
            return
        else:
            raise SystemExit(f"unexpected message type: {kind}")
        stdout.flush()


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ref", default="builtin:safe_follower",
                        help="builtin agent reference to serve")
    args = parser.parse_args(argv)
    serve(args.ref)


if __name__ == "__main__":
    main()
