"""Text serialization of traces.

Layout (one record per line, single spaces)::

    abm-trace 1
    model <name> <sha256 of canonical model text>
    params <name>=<value> ...
    seed <int|none>
    schedule <kind> [order ...]
    mode <first-match|all-matching>
    horizon <steps>
    initial
    global <name>=<value> ...
    agent <id> <type> <var>=<value> ...
    events <count>
    <step> <ordinal> <agent> <type> <rule> {<k>=<v>,...} {<k>=<v>,...}
    end

Decimal values are printed with exactly their domain's precision so output is
bit-identical across platforms.
"""

from __future__ import annotations

from .engine import Event, SystemState, Trace, _canon
from .model import ModelSpec
from .values import format_value, parse_value

MAGIC = "abm-trace 1"


def _formatter(spec: ModelSpec, types: tuple):
    def fmt(agent: int, key: str, value) -> str:
        if key.startswith("global."):
            dom = spec.global_var(key[7:]).domain
        elif key.startswith("@"):
            other, name = key[1:].split(".", 1)
            dom = spec.agent_type(types[int(other)]).var(name).domain
        else:
            dom = spec.agent_type(types[agent]).var(key).domain
        return dom.format(value)
    return fmt


def _fmt_map(items, fmt, agent) -> str:
    return "{" + ",".join(f"{k}={fmt(agent, k, v)}" for k, v in items) + "}"


def dumps_trace(trace: Trace, spec: ModelSpec | None = None) -> str:
    spec = spec or trace.spec
    if spec is None:
        raise ValueError("trace is not linked to a model specification")
    types = trace.initial.agent_types
    fmt = _formatter(spec, types)
    params = " ".join(f"{k}={spec.param(k).domain.format(v)}" for k, v in trace.params)
    lines = [
        MAGIC,
        f"model {trace.model_name} {trace.model_hash}",
        ("params " + params).rstrip(),
        f"seed {'none' if trace.seed is None else trace.seed}",
        f"schedule {trace.schedule}",
        f"mode {trace.mode}",
        f"horizon {trace.horizon}",
        "initial",
    ]
    glob = " ".join(f"{k}={spec.global_var(k).domain.format(v)}" for k, v in trace.initial.globals.items())
    lines.append(("global " + glob).rstrip())
    for i, row in enumerate(trace.initial.agents):
        vals = " ".join(f"{k}={fmt(i, k, v)}" for k, v in row.items())
        lines.append(f"agent {i} {types[i]} {vals}".rstrip())
    lines.append(f"events {len(trace.events)}")
    for e in trace.events:
        lines.append(
            f"{e.step} {e.ordinal} {e.agent} {e.agent_type} {e.rule} "
            f"{_fmt_map(e.source, fmt, e.agent)} {_fmt_map(e.target, fmt, e.agent)}"
        )
    lines.append("end")
    return "\n".join(lines) + "\n"


def _pairs(tokens) -> dict:
    out = {}
    for tok in tokens:
        key, _, value = tok.partition("=")
        out[key] = parse_value(value)
    return out


def _parse_map(text: str) -> dict:
    if not (text.startswith("{") and text.endswith("}")):
        raise ValueError(f"malformed substate {text!r}")
    body = text[1:-1]
    return _pairs(body.split(",")) if body else {}


class TraceFormatError(ValueError):
    pass


def loads_trace(text: str, spec: ModelSpec) -> Trace:
    """Parse trace text and link it to *spec* (whose hash must match)."""
    lines = text.splitlines()
    try:
        if lines[0] != MAGIC:
            raise TraceFormatError("not a trace file")
        _, name, digest = lines[1].split(" ")
        if digest != spec.content_hash:
            raise TraceFormatError(f"trace was produced by a different model (hash {digest[:12]}...)")
        params = _pairs(lines[2].split(" ")[1:])
        seed_text = lines[3].split(" ", 1)[1]
        seed = None if seed_text == "none" else int(seed_text)
        schedule = lines[4].split(" ", 1)[1]
        mode = lines[5].split(" ", 1)[1]
        horizon = int(lines[6].split(" ", 1)[1])
        if lines[7] != "initial":
            raise TraceFormatError("missing initial block")
        globs = _pairs(lines[8].split(" ")[1:])
        pos = 9
        agents, types = [], []
        while lines[pos].startswith("agent "):
            parts = lines[pos].split(" ")
            types.append(parts[2])
            agents.append(_pairs(parts[3:]))
            pos += 1
        count = int(lines[pos].split(" ")[1])
        pos += 1
        events = []
        for line in lines[pos:pos + count]:
            step, ordinal, agent, agent_type, rule, src, tgt = line.split(" ")
            events.append(Event(int(step), int(ordinal), int(agent), agent_type, rule,
                                _canon(_parse_map(src)), _canon(_parse_map(tgt))))
        if lines[pos + count] != "end":
            raise TraceFormatError("missing end marker")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, TraceFormatError):
            raise
        raise TraceFormatError(f"malformed trace: {exc}") from exc
    return Trace(
        model_name=name,
        model_hash=digest,
        params=tuple(params.items()),
        seed=seed,
        schedule=schedule,
        mode=mode,
        horizon=horizon,
        initial=SystemState(0, tuple(types), tuple(agents), globs),
        events=tuple(events),
        spec=spec,
    )


def write_trace(path, trace: Trace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_trace(trace))


def read_trace(path, spec: ModelSpec) -> Trace:
    with open(path, encoding="utf-8") as fh:
        return loads_trace(fh.read(), spec)


__all__ = ["dumps_trace", "loads_trace", "read_trace", "write_trace", "TraceFormatError", "format_value"]
