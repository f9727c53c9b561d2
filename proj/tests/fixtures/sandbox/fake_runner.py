#!/usr/bin/env python3
# Test double for the sandbox runner: enough of the request contract to run
# real programs from the unit tests. Not the production runner.
import io
import json
import os
import signal
import sys
import contextlib


def main():
    with open(sys.argv[1]) as f:
        req = json.load(f)
    try:
        with open(req["data_file"]) as f:
            data = json.load(f)
        scope = {data["variable"]: data["records"], "ASSET_DIR": req["asset_dir"], "os": os}
    except Exception as exc:  # injection failure happens before user code
        print(f"injection failed: {exc}", file=sys.stderr)
        return 3

    def on_alarm(*_):
        raise TimeoutError

    signal.signal(signal.SIGALRM, on_alarm)
    signal.alarm(int(req["timeout_s"]))
    try:
        exec(compile(req["code"], "<analysis>", "exec"), scope)
    except TimeoutError:
        print(f"TIMEOUT after {req['timeout_s']}s", file=sys.stderr)
        return 124
    except Exception as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    finally:
        signal.alarm(0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
