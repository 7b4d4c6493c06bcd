"""Minimal stand-in for the execution worker, used by the protocol tests.

Speaks the v1 line protocol: a hello line, then one JSON reply per request.
Flags change its behavior: --bad-hello, --wrong-id, --die-after N, --hang.
"""
import json
import subprocess
import sys
import time


def reply(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def run(req):
    start = time.monotonic()
    out = {"id": req["id"], "stdout": "", "stderr": "", "traceback": None, "exit_status": 0,
           "timed_out": False, "syntax_ok": None}
    if req["kind"] == "SyntaxCheck":
        try:
            compile(req["code"], "<action>", "exec")
            out["syntax_ok"] = True
        except SyntaxError as e:
            out["syntax_ok"] = False
            out["stderr"] = "SyntaxError: %s (line %s, column %s)" % (e.msg, e.lineno, e.offset)
    else:
        try:
            p = subprocess.run([sys.executable, "-c", req["code"]], input=req.get("stdin", ""),
                               capture_output=True, text=True, timeout=req.get("timeout_ms", 10000) / 1000.0)
            out["stdout"], out["stderr"], out["exit_status"] = p.stdout, p.stderr, p.returncode
            if "Traceback" in p.stderr:
                out["traceback"] = p.stderr
        except subprocess.TimeoutExpired:
            out["timed_out"] = True
            out["exit_status"] = -9
    out["duration_ms"] = (time.monotonic() - start) * 1000.0
    return out


def main():
    args = sys.argv[1:]
    if "--bad-hello" in args:
        reply({"version": "v0"})
    else:
        reply({"version": "v1"})
    die_after = int(args[args.index("--die-after") + 1]) if "--die-after" in args else -1
    served = 0
    for line in sys.stdin:
        if "--hang" in args:
            time.sleep(3600)
        if served == die_after:
            sys.exit(3)
        served += 1
        try:
            req = json.loads(line)
            if not isinstance(req, dict) or "id" not in req or "kind" not in req or "code" not in req:
                raise ValueError("request lacks id, kind or code")
        except ValueError as e:
            reply({"id": None, "error": "malformed request: %s" % e})
            continue
        out = run(req)
        if "--wrong-id" in args:
            out["id"] = "x" + out["id"]
        reply(out)


if __name__ == "__main__":
    main()
