"""Command-line client for the allocation service.

Every subcommand posts to the HTTP API: against an in-process app by
default, or a remote server with ``--server URL``.  Exit codes follow one
contract everywhere: 0 when the requested property verified, 2 when a
result was produced but the property did not hold, 1 on any error.
"""

from __future__ import annotations

import json
import sys
import warnings
from typing import Any, Optional

import click
import httpx

from .service import create_app

_FORMATS = ("human", "json")


def _client(server: Optional[str]):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    with warnings.catch_warnings():
        # The in-process client is an implementation detail; keep its
        # pending-rename notice out of user-facing output.
        warnings.simplefilter("ignore", UserWarning)
        from fastapi.testclient import TestClient

    return TestClient(create_app())


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _post(server: Optional[str], path: str, payload: dict) -> dict:
    client = _client(server)
    try:
        response = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        _fail(f"request failed: {exc}")
    if response.status_code >= 400:
        try:
            body = response.json()
        except ValueError:
            _fail(f"HTTP {response.status_code}: {response.text.strip()}")
        if "message" in body:
            location = f" at {body['location']}" if body.get("location") else ""
            report = f"\n{json.dumps(body['report'], indent=2)}" if body.get("report") else ""
            _fail(f"{body['message']}{location}{report}")
        _fail(f"HTTP {response.status_code}: {json.dumps(body)}")
    return response.json()


def _read_json_file(path: str, what: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        _fail(f"cannot read {what} file: {exc}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        _fail(f"invalid JSON in {what} file (line {exc.lineno}): {exc.msg}")


def _emit_json(body: dict) -> None:
    click.echo(json.dumps(body, indent=2, sort_keys=True))


def _condition_lines(report: dict, label: str = "condition") -> list[str]:
    lhs = report.get("lhs")
    threshold = report.get("threshold")
    verdict = "satisfied" if report["satisfied"] else "not satisfied"
    lines = [f"{label} {report['condition']}: {verdict}"]
    if lhs is not None and threshold is not None:
        lines.append(
            f"  tested {lhs:.6g} {report['direction']} {threshold:.6g}"
            f" (margin {report['margin']:.6g})"
            if report.get("margin") is not None
            else f"  tested {lhs:.6g} {report['direction']} {threshold:.6g}"
        )
    if report.get("mu_bound") is not None:
        lines.append(f"  copy threshold {report['mu_bound']}")
    return lines


def _allocation_lines(counts: list[list[int]]) -> list[str]:
    lines = ["allocation (copies per agent, by type):"]
    for i, row in enumerate(counts):
        lines.append(f"  group {i}: {row}")
    return lines


def _exit(body: dict) -> None:
    sys.exit(int(body.get("exit_code", 0)))


def _server_option(f):
    return click.option(
        "--server",
        default=None,
        metavar="URL",
        help="Remote service URL; defaults to an in-process app.",
    )(f)


def _format_option(f):
    return click.option(
        "--format",
        "fmt",
        type=click.Choice(_FORMATS),
        default="human",
        show_default=True,
        help="Output format.",
    )(f)


@click.group()
@click.version_option(package_name="fairdiv")
def main() -> None:
    """Fair division of item copies among groups of agents."""


@main.command()
@click.option("--input", "input_path", required=True, metavar="PATH", help="Instance JSON file.")
@click.option("--force", is_flag=True, help="Run even when copy-count preconditions fail.")
@_format_option
@_server_option
def allocate(input_path: str, force: bool, fmt: str, server: Optional[str]) -> None:
    """Run the full pipeline: condition, mechanism, LP, rounding, verification."""
    instance = _read_json_file(input_path, "instance")
    body = _post(server, "/allocate", {"instance": instance, "force": force})
    if fmt == "json":
        _emit_json(body)
        _exit(body)
    lines = [f"mechanism {body['mechanism']}"]
    lines += _condition_lines(body["condition"])
    if body["lp_objective"] is not None:
        lines.append(f"lp objective {body['lp_objective']:.6g}")
    lines += _allocation_lines(body["allocation"]["counts"])
    if body["gaps"]["min_gap"] is not None:
        lines.append(f"min gap {body['gaps']['min_gap']} (exact)")
    verified = body["verified"]
    lines.append(f"verified {verified['notion']}: {'yes' if verified['holds'] else 'NO'}")
    if verified.get("witness"):
        w = verified["witness"]
        lines.append(f"  witness: group {w['group']} against group {w['other']}")
    for note in body["notes"]:
        lines.append(f"note: {note}")
    click.echo("\n".join(lines))
    _exit(body)


@main.command()
@click.option("--input", "input_path", required=True, metavar="PATH", help="Instance JSON file.")
@click.option(
    "--condition",
    type=click.Choice(("ef", "prop", "tefx")),
    default="ef",
    show_default=True,
    help="Which sufficient condition to evaluate.",
)
@_format_option
@_server_option
def check(input_path: str, condition: str, fmt: str, server: Optional[str]) -> None:
    """Evaluate a sufficient fairness condition on an instance."""
    instance = _read_json_file(input_path, "instance")
    body = _post(server, "/check", {"instance": instance, "condition": condition})
    if fmt == "json":
        _emit_json(body)
    else:
        click.echo("\n".join(_condition_lines(body["condition"])))
    _exit(body)


@main.command(name="mu-bound")
@click.option("--input", "input_path", required=True, metavar="PATH", help="Instance JSON file.")
@_format_option
@_server_option
def mu_bound(input_path: str, fmt: str, server: Optional[str]) -> None:
    """Copy-count threshold sufficient for an envy-free allocation."""
    instance = _read_json_file(input_path, "instance")
    body = _post(server, "/mu-bound", {"instance": instance})
    if fmt == "json":
        _emit_json(body)
        _exit(body)
    report = body["report"]
    lines = _condition_lines(report, label="report")
    details = report.get("details", {})
    if details.get("unbounded"):
        lines.append("  no finite threshold for this instance")
    if details.get("log_term_negative"):
        lines.append("  note: logarithmic term negative, linear terms dominate")
    click.echo("\n".join(lines))
    _exit(body)


@main.command()
@click.option("--input", "input_path", required=True, metavar="PATH", help="Instance JSON file.")
@click.option("--allocation", "alloc_path", required=True, metavar="PATH", help="Allocation JSON file.")
@click.option(
    "--notion",
    type=click.Choice(("EF", "STRONG_EF", "PROP", "STRONG_PROP", "TEFX")),
    default="EF",
    show_default=True,
)
@_format_option
@_server_option
def verify(input_path: str, alloc_path: str, notion: str, fmt: str, server: Optional[str]) -> None:
    """Exactly verify a fairness notion for a given allocation."""
    instance = _read_json_file(input_path, "instance")
    allocation = _read_json_file(alloc_path, "allocation")
    body = _post(
        server,
        "/verify",
        {"instance": instance, "allocation": allocation, "notion": notion},
    )
    if fmt == "json":
        _emit_json(body)
        _exit(body)
    result = body["result"]
    line = f"{result['notion']}: {'holds' if result['holds'] else 'fails'}"
    if result.get("witness"):
        w = result["witness"]
        extra = f" on type {w['item_type']}" if w.get("item_type") is not None else ""
        line += f" (group {w['group']} against group {w['other']}{extra})"
    click.echo(line)
    _exit(body)


@main.command()
@click.option("--sizes", required=True, metavar="A,B,...", help="Comma-separated group sizes.")
@click.option("--k", required=True, type=int, help="Copy count to decompose.")
@_format_option
@_server_option
def frobenius(sizes: str, k: int, fmt: str, server: Optional[str]) -> None:
    """Decompose a copy count as a nonnegative combination of group sizes."""
    try:
        size_list = [int(part) for part in sizes.split(",") if part.strip()]
    except ValueError:
        _fail(f"--sizes must be comma-separated integers, got {sizes!r}")
    body = _post(server, "/frobenius", {"sizes": size_list, "k": k})
    if fmt == "json":
        _emit_json(body)
        _exit(body)
    lines = [f"g {body['g']}", f"theta {body['theta']}"]
    if body["representable"]:
        # coefficients align with the sizes exactly as given
        terms = " + ".join(
            f"{c}*{s}" for c, s in zip(body["coefficients"], size_list)
        )
        lines.append(f"{k} = {terms}")
    else:
        lines.append(f"{k} is not representable")
    click.echo("\n".join(lines))
    _exit(body)


@main.command()
@click.option("--input", "input_path", required=True, metavar="PATH", help="Density spec JSON file.")
@click.option("--delta", default=None, metavar="P/Q", help="Declared pairwise separation (exact rational).")
@click.option("--lipschitz", default=None, metavar="P/Q", help="Declared smoothness constant (exact rational).")
@_format_option
@_server_option
def cake(
    input_path: str,
    delta: Optional[str],
    lipschitz: Optional[str],
    fmt: str,
    server: Optional[str],
) -> None:
    """Divide a cake among agents with piecewise-linear densities."""
    densities = _read_json_file(input_path, "density spec")
    payload: dict[str, Any] = {"densities": densities}
    if delta is not None:
        payload["delta"] = delta
    if lipschitz is not None:
        payload["lipschitz"] = lipschitz
    body = _post(server, "/cake", payload)
    if fmt == "json":
        _emit_json(body)
        _exit(body)
    lines = [
        f"pieces {body['pieces']} (width {body['epsilon']})",
        f"value queries {body['eval_count']} (budget {body['query_budget']}), "
        f"cut queries {body['cut_count']}",
    ]
    for i, intervals in enumerate(body["intervals"]):
        pretty = ", ".join(f"[{a}, {b}]" for a, b in intervals)
        lines.append(f"  agent {i}: {pretty}")
    strong = body["verified_strong"]
    lines.append(f"strongly envy-free: {'yes' if strong['holds'] else 'NO'}")
    lines.append(f"envy-free: {'yes' if body['verified_ef']['holds'] else 'NO'}")
    for note in body["notes"]:
        lines.append(f"note: {note}")
    click.echo("\n".join(lines))
    _exit(body)


@main.command()
@click.option("--input", "input_path", required=True, metavar="PATH", help="Instance JSON file.")
@_format_option
@_server_option
def greedy(input_path: str, fmt: str, server: Optional[str]) -> None:
    """Round-robin by descending lead-agent value; transfer-stable for goods."""
    instance = _read_json_file(input_path, "instance")
    body = _post(server, "/greedy", {"instance": instance})
    if fmt == "json":
        _emit_json(body)
        _exit(body)
    lines = _allocation_lines(body["allocation"]["counts"])
    lines.append(f"item order {body['item_order']}")
    lines.append(f"recipients {body['recipients']}")
    lines.append(
        f"transfer-stable envy-free: {'yes' if body['tefx']['holds'] else 'NO'}"
    )
    click.echo("\n".join(lines))
    _exit(body)


@main.command()
@click.option("--n", required=True, type=int, help="Number of agents.")
@click.option("--m", required=True, type=int, help="Number of items.")
@click.option("--trials", required=True, type=int, help="Number of trials.")
@click.option("--seed", required=True, type=int, help="Base seed; trial j uses (seed, j).")
@click.option("--kind", type=click.Choice(("goods", "chores")), required=True)
@click.option(
    "--target",
    type=click.Choice(
        ("PROP_CONDITION", "PROP_ALLOCATION", "CHI2_BOUND", "CHORES_PENALTY_BOUND")
    ),
    required=True,
)
@click.option("--workers", type=int, default=None, help="Process pool size for trials.")
@click.option(
    "--format",
    "fmt",
    type=click.Choice(("human", "json", "csv")),
    default="human",
    show_default=True,
)
@_server_option
def experiment(
    n: int,
    m: int,
    trials: int,
    seed: int,
    kind: str,
    target: str,
    workers: Optional[int],
    fmt: str,
    server: Optional[str],
) -> None:
    """Sample i.i.d. uniform instances and measure a success fraction."""
    payload = {
        "n": n,
        "m": m,
        "trials": trials,
        "seed": seed,
        "kind": kind,
        "target": target,
        "workers": workers,
    }
    body = _post(server, "/experiment", payload)
    from .experiments import emit_report, parse_report

    report = parse_report(json.dumps(body))
    click.echo(emit_report(report, fmt), nl=False)
    sys.exit(0)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
