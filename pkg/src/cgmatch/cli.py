"""Command-line thin client for the cgmatch service.

Every subcommand builds a request, sends it to the FastAPI app (in
process by default, or to a remote instance via --server), and prints
the JSON report on standard output. Exit codes: 0 success, 1 data
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import json
import sys

import httpx

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2

_METHODS = ["cgsm", "cgsm-guided", "bipartite", "greedy", "kmeans", "random", "oracle"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgmatch",
        description="Token matching, reduction analysis, and FLOPs modeling.",
    )
    parser.add_argument(
        "--server",
        default=None,
        help="base URL of a running service; defaults to in-process execution",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_match = sub.add_parser("match", help="run a matcher over an embedding file")
    p_match.add_argument("--input", required=True, help="embedding file (binary or CSV)")
    p_match.add_argument("--method", required=True, choices=_METHODS)
    p_match.add_argument("--r", required=True, type=int, help="tokens to reduce")
    p_match.add_argument("--importance", default=None, help="per-token importance file")
    p_match.add_argument(
        "--protect", default=None, help="comma-separated indices kept out of matching"
    )
    p_match.add_argument("--seed", type=int, default=0)
    p_match.add_argument(
        "--timings", action="store_true", help="include wall time in the report"
    )
    p_match.add_argument(
        "--iterations", type=int, default=10, help="Lloyd iterations for kmeans"
    )

    p_expect = sub.add_parser("expect", help="closed-form match-rate expectations")
    p_expect.add_argument("--n", required=True, type=int)
    p_expect.add_argument("--layers", required=True, type=int)
    p_expect.add_argument("--r", required=True, type=int)

    p_sim = sub.add_parser("simulate", help="Monte Carlo check of the closed forms")
    p_sim.add_argument("--n", required=True, type=int)
    p_sim.add_argument("--layers", required=True, type=int)
    p_sim.add_argument("--r", required=True, type=int)
    p_sim.add_argument("--trials", required=True, type=int)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--method", required=True, choices=["cgsm", "bipartite"])

    p_sched = sub.add_parser("schedule", help="per-layer r for an overall halving")
    p_sched.add_argument("--n0", required=True, type=int)
    p_sched.add_argument("--layers", required=True, type=int)

    p_flops = sub.add_parser("flops", help="analytic FLOPs for a model config")
    p_flops.add_argument("--config", required=True, help="JSON model description")

    p_bench = sub.add_parser("bench", help="matching wall-time across sizes")
    p_bench.add_argument(
        "--sizes", default="64,128,256,512,1024", help="comma-separated token counts"
    )
    p_bench.add_argument("--dim", type=int, default=64)
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.add_argument("--seed", type=int, default=0)

    return parser


def _read_file_b64(path: str) -> str:
    with open(path, "rb") as fh:
        return base64.b64encode(fh.read()).decode("ascii")


def _parse_index_list(text: str, parser: argparse.ArgumentParser, flag: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        parser.error(f"{flag} expects comma-separated integers, got {text!r}")


def _post(server: str | None, path: str, body: dict) -> httpx.Response:
    if server is not None:
        with httpx.Client(base_url=server, timeout=600.0) as client:
            return client.post(path, json=body)

    async def _go() -> httpx.Response:
        from .service import app  # deferred: keeps --help fast

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://cgmatch.internal", timeout=600.0
        ) as client:
            return await client.post(path, json=body)

    return asyncio.run(_go())


def _request_body(args: argparse.Namespace, parser: argparse.ArgumentParser) -> tuple[str, dict]:
    if args.command == "match":
        protect = _parse_index_list(args.protect, parser, "--protect") if args.protect else []
        if protect and args.method not in ("cgsm", "cgsm-guided"):
            parser.error(f"--protect is not supported with --method {args.method}")
        if args.method == "cgsm-guided" and args.importance is None:
            parser.error("--method cgsm-guided requires --importance")
        body = {
            "payload_b64": _read_file_b64(args.input),
            "method": args.method,
            "r": args.r,
            "protect": protect,
            "seed": args.seed,
            "include_timing": args.timings,
            "kmeans_iterations": args.iterations,
        }
        if args.importance is not None:
            body["importance_b64"] = _read_file_b64(args.importance)
        return "/match", body
    if args.command == "expect":
        return "/expect", {"n": args.n, "layers": args.layers, "r": args.r}
    if args.command == "simulate":
        return "/simulate", {
            "n": args.n,
            "layers": args.layers,
            "r": args.r,
            "trials": args.trials,
            "seed": args.seed,
            "method": args.method,
        }
    if args.command == "schedule":
        return "/schedule", {"n0": args.n0, "layers": args.layers}
    if args.command == "flops":
        with open(args.config, "r", encoding="utf-8") as fh:
            return "/flops", json.load(fh)
    # bench
    sizes = _parse_index_list(args.sizes, parser, "--sizes")
    return "/bench", {
        "sizes": sizes,
        "dim": args.dim,
        "repeats": args.repeats,
        "seed": args.seed,
    }


def run_cli(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        path, body = _request_body(args, parser)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON config: {exc}", file=sys.stderr)
        return EXIT_DATA

    try:
        response = _post(args.server, path, body)
    except httpx.HTTPError as exc:
        print(f"error: request failed: {exc}", file=sys.stderr)
        return EXIT_DATA

    if response.status_code == 200:
        print(json.dumps(response.json(), indent=2))
        return EXIT_OK

    detail = response.text
    try:
        parsed = response.json()
        if isinstance(parsed, dict):
            err = parsed.get("error")
            if isinstance(err, dict):
                detail = f"{err.get('code')}: {err.get('message')}"
            else:
                detail = json.dumps(parsed)
    except ValueError:
        pass
    print(f"error ({response.status_code}): {detail}", file=sys.stderr)
    if response.status_code == 422:
        # request shape rejected: config files are data, everything else is usage
        return EXIT_DATA if args.command == "flops" else EXIT_USAGE
    return EXIT_DATA


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
