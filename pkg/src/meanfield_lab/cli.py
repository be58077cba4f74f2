"""Command-line client for the lab service.

The CLI is a thin HTTP client: by default it mounts the FastAPI app
in-process (no server needed); pass --server URL to target a running
instance instead. Reports are printed one line per check and written to
--out as CSV/JSON; the exit code is nonzero iff any check in the invoked
suite fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .metrics import ConvergenceRecord, emit_report


def _client(server):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=3600.0)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _print_report(report):
    for c in report["checks"]:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"[{status}] {c['check']}: value={c['value']} tolerance={c['tolerance']}")
    status = "PASS" if report["pass"] else "FAIL"
    rt = report.get("runtime_s")
    extra = f" ({rt:.1f}s)" if rt is not None else ""
    print(f"suite {report['suite']}: {status}{extra}")


def _write_suite_report(report, out_dir, name):
    if not out_dir:
        return
    os.makedirs(out_dir, exist_ok=True)
    doc = dict(report)
    doc["checks"] = [
        {**c, "check_name": c["check"], "max_residual": c["value"]}
        for c in report["checks"]
    ]
    path = os.path.join(out_dir, f"{name}_report.json")
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
    print(f"wrote {path}")
    if report.get("table"):
        import csv

        columns = ["hbar", "omega", "t", "s", "defect", "ratio", "bound_denominator"]
        tpath = os.path.join(out_dir, f"{name}_table.csv")
        with open(tpath, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(columns)
            for row in report["table"]:
                w.writerow([row.get(c, "") for c in columns])
        print(f"wrote {tpath}")


def _post(client, path, payload):
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        sys.stderr.write(f"service error {resp.status_code}: {resp.text}\n")
        sys.exit(2)
    return resp.json()


def cmd_converge(args, client):
    if args.config:
        with open(args.config) as f:
            payload = json.load(f)
    else:
        payload = {}
    payload["workers"] = args.workers
    report = _post(client, "/experiments/converge", payload)
    _print_report(report)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        records = [
            ConvergenceRecord(
                N=r["N"],
                hbar=r["hbar"],
                t=r["t"],
                M=r["M"],
                dt=r["dt"],
                error=r["error"],
                argmax_alpha=r["argmax_alpha"],
                argmax_beta=r["argmax_beta"],
                wall_ms=r["wall_ms"],
            )
            for r in report["records"]
        ]
        for fmt in args.format:
            path = os.path.join(args.out, f"converge_records.{fmt}")
            emit_report(records, path, fmt, config_echo=report.get("config"))
            print(f"wrote {path}")
        _write_suite_report(
            {k: v for k, v in report.items() if k != "records"},
            args.out,
            "converge",
        )
    print(f"content hash: {report['content_hash']}")
    return report["pass"]


def cmd_suite(name, payload, args, client):
    report = _post(client, f"/suites/{name}", payload)
    _print_report(report)
    _write_suite_report(report, args.out, name)
    return report["pass"]


def cmd_serve(args):
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return True


def build_parser():
    p = argparse.ArgumentParser(
        prog="meanfield-lab",
        description="Desk-scale verification lab for mean-field quantum dynamics",
    )
    p.add_argument(
        "--server",
        default=None,
        help="URL of a running service; default runs the app in-process",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("converge", help="run the N-scaling convergence scan")
    pc.add_argument("--config", help="JSON config file (schema in the README)")
    pc.add_argument("--out", help="output directory for reports")
    pc.add_argument(
        "--format",
        nargs="+",
        default=["csv", "json"],
        choices=["csv", "json"],
        help="record report formats to write",
    )
    pc.add_argument("--workers", type=int, default=1)

    pa = sub.add_parser("algebra", help="empirical-measure identity suite")
    pa.add_argument("--seed", type=int, default=7)
    pa.add_argument("--out")

    pp = sub.add_parser("phasespace", help="Weyl/Wigner/Moyal calculus suite")
    pp.add_argument("--seed", type=int, default=7)
    pp.add_argument("--grid-size", type=int, default=64)
    pp.add_argument("--out")

    pe = sub.add_parser("egorov", help="observable-transport scaling suite")
    pe.add_argument("--config", help="JSON file with seed/M/dt/hbars")
    pe.add_argument("--seed", type=int, default=7)
    pe.add_argument("--out")

    pl = sub.add_parser("classical", help="particle/Vlasov suite")
    pl.add_argument("--config", help="JSON file with seed/mc_samples/mc_N")
    pl.add_argument("--seed", type=int, default=7)
    pl.add_argument("--out")

    ps = sub.add_parser("serve", help="run the HTTP service")
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--port", type=int, default=8000)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        cmd_serve(args)
        return 0

    client = _client(args.server)
    try:
        if args.command == "converge":
            ok = cmd_converge(args, client)
        elif args.command == "algebra":
            ok = cmd_suite("algebra", {"seed": args.seed}, args, client)
        elif args.command == "phasespace":
            ok = cmd_suite(
                "phasespace", {"seed": args.seed, "M": args.grid_size}, args, client
            )
        elif args.command == "egorov":
            payload = {"seed": args.seed}
            if args.config:
                with open(args.config) as f:
                    payload.update(json.load(f))
            ok = cmd_suite("egorov", payload, args, client)
        elif args.command == "classical":
            payload = {"seed": args.seed}
            if args.config:
                with open(args.config) as f:
                    payload.update(json.load(f))
            ok = cmd_suite("classical", payload, args, client)
        else:  # pragma: no cover
            raise SystemExit(f"unknown command {args.command}")
    finally:
        client.close()
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
